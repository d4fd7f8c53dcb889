#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "abtrace/core.hpp"
#include "abtrace/elo.hpp"

namespace abtrace {

/// Continuity-corrected rank proportion, strictly inside (0,1).
struct RankProportion {
    double value = 0.5;
};

/// (L + 0.5 T + 0.5) / (n + 1) where L counts cohort entries strictly below
/// value and T counts ties. The cohort must be sorted ascending.
RankProportion rank_proportion(std::span<const double> sorted_cohort, double value);

/// Standard normal CDF.
double normal_cdf(double x);

/// Standard normal quantile. Rational approximation refined by one
/// Halley step on normal_cdf; |Phi(result) - p| stays below 1e-9.
double inverse_normal_cdf(double p);

/// Gaussian iteration weights w_tau = exp(-(tau-t)^2 / (2 sd^2)), tau = 1..n.
std::vector<double> weight_vector(int t, int n_iterations, double weight_sd);

constexpr double kSigmaMin = 1e-3;
constexpr double kSigmaMax = 100.0;

struct GrowthIterationFit {
    double mu = 0.0;
    double sigma = kSigmaMin;
};

/// Weighted ML fit of one iteration's normal ability distribution.
/// proportions[j][tau-1] holds P_{j,tau} for every respondent and iteration.
GrowthIterationFit fit_iteration(const ResponsePanel& panel,
                                 const std::vector<std::vector<double>>& proportions, int t,
                                 double weight_sd);

/// Same fit with caller-supplied weights (one per iteration); exposed so the
/// weight-scaling invariance is testable directly.
GrowthIterationFit fit_iteration_weighted(
    const ResponsePanel& panel, const std::vector<std::vector<double>>& proportions,
    const std::vector<double>& weights,
    std::optional<GrowthIterationFit> init = std::nullopt);

/// Per-iteration normal ability distributions plus the frozen ranking state.
struct GrowthModel {
    std::vector<double> mu;
    std::vector<double> sigma;
    EloConfig rank_config;      // step-size policy used for ranking traces
    double weight_sd = 2.0;
    double start_theta = 0.0;
    std::vector<std::vector<double>> training_cohorts;  // sorted Elo estimates per iteration

    int n_iterations() const { return static_cast<int>(mu.size()); }
    double k_rank() const { return rank_config.k; }

    std::string to_json() const;
    static GrowthModel from_json(const std::string& text);
    void save(const std::string& path) const;
    static GrowthModel load(const std::string& path);
};

GrowthModel fit_growth_model(const ResponsePanel& panel, double k_rank, double weight_sd = 2.0);

/// Variant with an explicit ranking policy (start_theta is overwritten by
/// the fitted value).
GrowthModel fit_growth_model(const ResponsePanel& panel, const EloConfig& rank_policy,
                             double weight_sd = 2.0);

/// Estimates for a new respondent with responses at iterations 1..t.
std::vector<AbilityEstimate> estimate_new_respondent(const GrowthModel& model,
                                                     const RespondentSequence& prefix);

}  // namespace abtrace
