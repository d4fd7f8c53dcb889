#pragma once

#include <string>
#include <vector>

#include "abtrace/core.hpp"

namespace abtrace {

enum class EloPolicy { constant, per_outcome, decaying };

/// Step-size policy plus the shared starting ability.
struct EloConfig {
    EloPolicy policy = EloPolicy::constant;
    double k = 0.4;            // constant K, or K_0 for the decaying policy
    double k_correct = 0.4;    // per-outcome policy
    double k_incorrect = 0.4;
    double decay = 0.0;        // K_t = K_0 / (1 + decay * (t - 1))
    double start_theta = 0.0;

    static EloConfig constant(double k, double start_theta = 0.0);
    static EloConfig per_outcome(double k_correct, double k_incorrect, double start_theta = 0.0);
    static EloConfig decaying(double k0, double decay, double start_theta = 0.0);

    /// Step size applied at the given 1-based iteration for the given outcome.
    double step_size(int iteration, int outcome) const;
    void validate() const;
};

/// Post-update ability estimates, one per observed iteration.
struct EloTrace {
    std::string respondent_id;
    std::vector<double> estimates;
};

/// theta + K (y - p) with p the Rasch success probability at (theta, d).
double elo_update(double theta, double d, int y, double k);

EloTrace elo_trace(const RespondentSequence& seq, const EloConfig& config);

struct StartThetaFit {
    double theta = 0.0;
    bool separable = false;   // all iteration-1 outcomes identical; theta is a bracket end
};

/// Maximum-likelihood common starting ability from iteration-1 responses,
/// bracketed to [-10, 10].
StartThetaFit fit_start_theta(const ResponsePanel& panel);

}  // namespace abtrace
