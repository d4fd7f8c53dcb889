#pragma once

#include <map>
#include <string>
#include <vector>

#include "abtrace/core.hpp"

namespace abtrace {

/// Learning Factor Analysis: per-respondent intercepts, per-component
/// practice slopes and difficulties.
struct LfaModel {
    std::map<std::string, double> alpha;   // respondent -> intercept
    std::map<std::string, double> gamma;   // component -> slope per attempt
    std::map<std::string, double> beta;    // component -> difficulty
};

/// alpha_j + sum over components of (gamma_c * m_c - beta_c).
double lfa_logit(const LfaModel& model, const std::string& respondent_id,
                 const std::map<std::string, double>& practice_counts,
                 const std::vector<std::string>& components);

/// Performance Factor Analysis: success/failure slopes per component.
struct PfaModel {
    std::map<std::string, double> gamma;   // slope per prior success
    std::map<std::string, double> rho;     // slope per prior failure
    std::map<std::string, double> beta;    // component difficulty
};

/// sum over components of (gamma_c * s_c + rho_c * f_c - beta_c).
double pfa_logit(const PfaModel& model, const std::map<std::string, double>& success_counts,
                 const std::map<std::string, double>& failure_counts,
                 const std::vector<std::string>& components);

struct RegressionFit {
    std::size_t iterations = 0;
    double deviance = 0.0;
    double grad_inf_norm = 0.0;
};

struct PfaFit {
    PfaModel model;
    RegressionFit stats;
};

struct LfaFit {
    LfaModel model;
    RegressionFit stats;
};

/// Maximum-likelihood PFA fit. Item difficulties from the panel enter as
/// fixed offsets when use_known_difficulties is set; otherwise one beta per
/// component is estimated. Responses without annotations fall in a single
/// implicit component.
PfaFit fit_pfa(const ResponsePanel& panel, bool use_known_difficulties = true);

/// Same procedure with per-respondent intercepts and practice counts.
LfaFit fit_lfa(const ResponsePanel& panel, bool use_known_difficulties = true);

/// Bayesian Knowledge Tracing parameters.
struct BktParams {
    double p_l0 = 0.3;
    double p_slip = 0.1;
    double p_guess = 0.2;
    double p_transit = 0.1;

    void validate() const;   // each in (0,1), slip and guess below 0.5
};

/// Posterior mastery update followed by the learning step. Degenerate
/// zero-probability evidence leaves the prior unchanged.
double bkt_update(const BktParams& params, double p_prev, int outcome);

/// Marginal log-likelihood of one outcome sequence.
double bkt_sequence_loglik(const BktParams& params, const std::vector<int>& outcomes);

struct BktFit {
    BktParams params;
    double loglik = 0.0;
    bool boundary_warning = false;
};

/// Coarse grid over the constrained box followed by simplex refinement.
BktFit fit_bkt(const ResponsePanel& panel);

}  // namespace abtrace
