#pragma once

#include <string>
#include <vector>

#include "abtrace/core.hpp"

namespace abtrace {

/// Random-intercept logistic model with iteration as a factor:
/// logit p = beta_t + u_j - d_{j,t}, u_j ~ Normal(0, sigma2).
struct GlmmModel {
    std::vector<double> beta;   // one fixed effect per iteration
    double sigma2 = 1.0;
    int quadrature_nodes = 9;

    std::string to_json() const;
    static GlmmModel from_json(const std::string& text);
    void save(const std::string& path) const;
    static GlmmModel load(const std::string& path);
};

/// Marginal log-likelihood; the per-respondent integral uses adaptive
/// Gauss-Hermite centered at the posterior mode (nodes=1 is Laplace).
double glmm_marginal_loglik(const std::vector<double>& beta, double sigma2,
                            const ResponsePanel& panel, int nodes);

struct GlmmFit {
    GlmmModel model;
    double loglik = 0.0;
    double grad_inf_norm = 0.0;   // of the per-observation mean log-likelihood
    std::size_t iterations = 0;
};

/// Maximizes the marginal likelihood over (beta, log sigma2) by quasi-Newton
/// with finite-difference gradients. warm_start seeds the search (used by
/// refits); otherwise beta starts from per-iteration logistic fits at u=0.
GlmmFit fit_glmm(const ResponsePanel& panel, int nodes = 9,
                 const GlmmModel* warm_start = nullptr);

/// beta_t: the cohort-mean ability at iteration t, common to all respondents.
double glmm_predict_fixed(const GlmmModel& model, int t);

struct RandomEffect {
    std::string respondent_id;
    double u = 0.0;
};

/// Individual ML random effect given fixed model parameters; the respondent's
/// ability at iteration t is then beta_t + u.
RandomEffect estimate_random_effect(const GlmmModel& model, const RespondentSequence& prefix);

}  // namespace abtrace
