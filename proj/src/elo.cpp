#include "abtrace/elo.hpp"

#include <cmath>
#include <stdexcept>

#include "abtrace/optim.hpp"

namespace abtrace {

EloConfig EloConfig::constant(double k, double start_theta) {
    EloConfig c;
    c.policy = EloPolicy::constant;
    c.k = c.k_correct = c.k_incorrect = k;
    c.start_theta = start_theta;
    c.validate();
    return c;
}

EloConfig EloConfig::per_outcome(double k_correct, double k_incorrect, double start_theta) {
    EloConfig c;
    c.policy = EloPolicy::per_outcome;
    c.k = k_correct;
    c.k_correct = k_correct;
    c.k_incorrect = k_incorrect;
    c.start_theta = start_theta;
    c.validate();
    return c;
}

EloConfig EloConfig::decaying(double k0, double decay, double start_theta) {
    EloConfig c;
    c.policy = EloPolicy::decaying;
    c.k = c.k_correct = c.k_incorrect = k0;
    c.decay = decay;
    c.start_theta = start_theta;
    c.validate();
    return c;
}

double EloConfig::step_size(int iteration, int outcome) const {
    switch (policy) {
        case EloPolicy::constant:
            return k;
        case EloPolicy::per_outcome:
            return outcome == 1 ? k_correct : k_incorrect;
        case EloPolicy::decaying:
            return k / (1.0 + decay * (iteration - 1));
    }
    return k;
}

void EloConfig::validate() const {
    if (!(k > 0.0) || !(k_correct > 0.0) || !(k_incorrect > 0.0)) {
        throw std::invalid_argument("Elo step sizes must be positive");
    }
    if (decay < 0.0) {
        throw std::invalid_argument("Elo decay rate must be non-negative");
    }
    if (!std::isfinite(start_theta)) {
        throw std::invalid_argument("start_theta must be finite");
    }
}

double elo_update(double theta, double d, int y, double k) {
    if (!(k > 0.0)) throw std::invalid_argument("k must be positive");
    if (y != 0 && y != 1) throw std::invalid_argument("outcome must be 0 or 1");
    return theta + k * (y - rasch_probability(theta, d));
}

EloTrace elo_trace(const RespondentSequence& seq, const EloConfig& config) {
    config.validate();
    EloTrace trace;
    trace.respondent_id = seq.respondent_id;
    trace.estimates.reserve(seq.responses.size());
    double cur = config.start_theta;
    for (const Response& r : seq.responses) {
        cur = elo_update(cur, r.difficulty, r.outcome, config.step_size(r.iteration, r.outcome));
        trace.estimates.push_back(cur);
    }
    return trace;
}

StartThetaFit fit_start_theta(const ResponsePanel& panel) {
    std::vector<const Response*> first;
    for (const auto& r : panel.respondents()) {
        if (!r.responses.empty()) first.push_back(&r.responses.front());
    }
    if (first.empty()) {
        throw std::invalid_argument("fit_start_theta: no responses at iteration 1");
    }

    bool any_correct = false, any_incorrect = false;
    for (const Response* r : first) (r->outcome == 1 ? any_correct : any_incorrect) = true;
    if (!any_correct || !any_incorrect) {
        // separable: the likelihood is monotone, the maximum sits at a bracket end
        return {any_correct ? 10.0 : -10.0, true};
    }

    auto loglik = [&](double theta) {
        double ll = 0.0;
        for (const Response* r : first) {
            const double x = theta - r->difficulty;
            ll += r->outcome * x - softplus(x);
        }
        return ll;
    };
    return {golden_section_max(loglik, -10.0, 10.0, 1e-8), false};
}

}  // namespace abtrace
