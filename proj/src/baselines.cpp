#include "abtrace/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <stdexcept>

#include "abtrace/optim.hpp"

namespace abtrace {

namespace {

double logistic(double x) { return rasch_probability(x, 0.0); }

double lookup(const std::map<std::string, double>& m, const std::string& key,
              const char* what) {
    const auto it = m.find(key);
    if (it == m.end()) {
        throw std::invalid_argument(std::string("unknown ") + what + ": '" + key + "'");
    }
    return it->second;
}

constexpr const char* kDefaultComponent = "*";

std::vector<std::string> components_or_default(const Response& r) {
    if (r.components.empty()) return {kDefaultComponent};
    return r.components;
}

// Sparse logistic-regression row: feature indices/values plus a fixed offset.
struct Row {
    std::vector<std::pair<std::size_t, double>> features;
    double offset = 0.0;
    double y = 0.0;
};

struct IrlsProblem {
    std::vector<Row> rows;
    std::vector<std::string> feature_names;
};

// Iteratively reweighted least squares with a small ridge. Separation is
// reported by naming the runaway feature.
std::vector<double> irls(const IrlsProblem& prob, RegressionFit& stats) {
    const std::size_t p = prob.feature_names.size();
    if (prob.rows.empty()) throw std::invalid_argument("logistic fit: no observations");
    std::vector<double> w(p, 0.0);
    constexpr double kRidge = 1e-8;
    constexpr double kCoefBound = 30.0;

    std::vector<double> xtwx(p * p);
    std::vector<double> rhs(p);
    for (std::size_t iter = 1; iter <= 100; ++iter) {
        std::fill(xtwx.begin(), xtwx.end(), 0.0);
        std::fill(rhs.begin(), rhs.end(), 0.0);
        double deviance = 0.0;
        std::vector<double> grad(p, 0.0);
        for (const Row& row : prob.rows) {
            double eta = row.offset;
            for (const auto& [idx, v] : row.features) eta += w[idx] * v;
            const double mu = logistic(eta);
            const double wt = std::max(mu * (1.0 - mu), 1e-10);
            const double resid = row.y - mu;
            deviance += -2.0 * (row.y * (eta)-softplus(eta));
            // working response z = eta + resid/wt; accumulate X'W(z - offset)
            const double target = wt * (eta - row.offset) + resid;
            for (const auto& [i, vi] : row.features) {
                grad[i] += resid * vi;
                rhs[i] += target * vi;
                for (const auto& [j, vj] : row.features) {
                    if (j >= i) xtwx[i * p + j] += wt * vi * vj;
                }
            }
        }
        for (std::size_t i = 0; i < p; ++i) {
            xtwx[i * p + i] += kRidge;
            for (std::size_t j = 0; j < i; ++j) xtwx[i * p + j] = xtwx[j * p + i];
        }

        // Cholesky solve
        std::vector<double> L(p * p, 0.0);
        for (std::size_t i = 0; i < p; ++i) {
            for (std::size_t j = 0; j <= i; ++j) {
                double sum = xtwx[i * p + j];
                for (std::size_t k = 0; k < j; ++k) sum -= L[i * p + k] * L[j * p + k];
                if (i == j) {
                    if (sum <= 0.0) throw std::runtime_error("logistic fit: singular system");
                    L[i * p + i] = std::sqrt(sum);
                } else {
                    L[i * p + j] = sum / L[j * p + j];
                }
            }
        }
        std::vector<double> tmp(p), wnew(p);
        for (std::size_t i = 0; i < p; ++i) {
            double sum = rhs[i];
            for (std::size_t k = 0; k < i; ++k) sum -= L[i * p + k] * tmp[k];
            tmp[i] = sum / L[i * p + i];
        }
        for (std::size_t ii = p; ii-- > 0;) {
            double sum = tmp[ii];
            for (std::size_t k = ii + 1; k < p; ++k) sum -= L[k * p + ii] * wnew[k];
            wnew[ii] = sum / L[ii * p + ii];
        }

        double delta = 0.0, gnorm = 0.0;
        for (std::size_t i = 0; i < p; ++i) {
            delta = std::max(delta, std::abs(wnew[i] - w[i]));
            gnorm = std::max(gnorm, std::abs(grad[i]));
        }
        w = std::move(wnew);
        stats.iterations = iter;
        stats.deviance = deviance;
        stats.grad_inf_norm = gnorm;

        for (std::size_t i = 0; i < p; ++i) {
            if (std::abs(w[i]) > kCoefBound) {
                throw std::runtime_error("logistic fit: separable data, feature '" +
                                         prob.feature_names[i] + "' diverges");
            }
        }
        if (delta < 1e-10 && gnorm < 1e-6) break;
    }
    return w;
}

std::vector<std::string> collect_components(const ResponsePanel& panel) {
    std::set<std::string> comps;
    for (const auto& r : panel.respondents()) {
        for (const auto& resp : r.responses) {
            for (const auto& c : components_or_default(resp)) comps.insert(c);
        }
    }
    return {comps.begin(), comps.end()};
}

}  // namespace

double lfa_logit(const LfaModel& model, const std::string& respondent_id,
                 const std::map<std::string, double>& practice_counts,
                 const std::vector<std::string>& components) {
    double logit = lookup(model.alpha, respondent_id, "respondent");
    for (const auto& c : components) {
        const double m = practice_counts.count(c) ? practice_counts.at(c) : 0.0;
        if (m < 0.0) throw std::invalid_argument("practice counts must be non-negative");
        logit += lookup(model.gamma, c, "component") * m - lookup(model.beta, c, "component");
    }
    return logit;
}

double pfa_logit(const PfaModel& model, const std::map<std::string, double>& success_counts,
                 const std::map<std::string, double>& failure_counts,
                 const std::vector<std::string>& components) {
    double logit = 0.0;
    for (const auto& c : components) {
        const double s = success_counts.count(c) ? success_counts.at(c) : 0.0;
        const double f = failure_counts.count(c) ? failure_counts.at(c) : 0.0;
        if (s < 0.0 || f < 0.0) throw std::invalid_argument("counts must be non-negative");
        logit += lookup(model.gamma, c, "component") * s + lookup(model.rho, c, "component") * f -
                 lookup(model.beta, c, "component");
    }
    return logit;
}

PfaFit fit_pfa(const ResponsePanel& panel, bool use_known_difficulties) {
    const std::vector<std::string> comps = collect_components(panel);
    const std::size_t C = comps.size();
    auto comp_index = [&](const std::string& c) {
        return static_cast<std::size_t>(std::lower_bound(comps.begin(), comps.end(), c) -
                                        comps.begin());
    };

    IrlsProblem prob;
    for (const auto& c : comps) prob.feature_names.push_back("gamma[" + c + "]");
    for (const auto& c : comps) prob.feature_names.push_back("rho[" + c + "]");
    if (!use_known_difficulties) {
        for (const auto& c : comps) prob.feature_names.push_back("beta[" + c + "]");
    }

    for (const auto& r : panel.respondents()) {
        std::map<std::string, double> s, f;
        for (const auto& resp : r.responses) {
            Row row;
            row.y = resp.outcome;
            if (use_known_difficulties) row.offset = -resp.difficulty;
            for (const auto& c : components_or_default(resp)) {
                const std::size_t ci = comp_index(c);
                row.features.push_back({ci, s.count(c) ? s[c] : 0.0});
                row.features.push_back({C + ci, f.count(c) ? f[c] : 0.0});
                if (!use_known_difficulties) row.features.push_back({2 * C + ci, -1.0});
            }
            prob.rows.push_back(std::move(row));
            for (const auto& c : components_or_default(resp)) {
                (resp.outcome == 1 ? s[c] : f[c]) += 1.0;
            }
        }
    }

    PfaFit fit;
    const std::vector<double> w = irls(prob, fit.stats);
    for (std::size_t i = 0; i < C; ++i) {
        fit.model.gamma[comps[i]] = w[i];
        fit.model.rho[comps[i]] = w[C + i];
        fit.model.beta[comps[i]] = use_known_difficulties ? 0.0 : w[2 * C + i];
    }
    return fit;
}

LfaFit fit_lfa(const ResponsePanel& panel, bool use_known_difficulties) {
    const std::vector<std::string> comps = collect_components(panel);
    const std::size_t C = comps.size();
    std::vector<std::string> ids;
    for (const auto& r : panel.respondents()) ids.push_back(r.respondent_id);
    std::sort(ids.begin(), ids.end());
    auto comp_index = [&](const std::string& c) {
        return static_cast<std::size_t>(std::lower_bound(comps.begin(), comps.end(), c) -
                                        comps.begin());
    };
    auto id_index = [&](const std::string& id) {
        return static_cast<std::size_t>(std::lower_bound(ids.begin(), ids.end(), id) -
                                        ids.begin());
    };

    IrlsProblem prob;
    for (const auto& c : comps) prob.feature_names.push_back("gamma[" + c + "]");
    for (const auto& id : ids) prob.feature_names.push_back("alpha[" + id + "]");
    if (!use_known_difficulties) {
        for (const auto& c : comps) prob.feature_names.push_back("beta[" + c + "]");
    }

    for (const auto& r : panel.respondents()) {
        std::map<std::string, double> m;
        const std::size_t ji = id_index(r.respondent_id);
        for (const auto& resp : r.responses) {
            Row row;
            row.y = resp.outcome;
            if (use_known_difficulties) row.offset = -resp.difficulty;
            row.features.push_back({C + ji, 1.0});
            for (const auto& c : components_or_default(resp)) {
                const std::size_t ci = comp_index(c);
                row.features.push_back({ci, m.count(c) ? m[c] : 0.0});
                if (!use_known_difficulties) row.features.push_back({C + ids.size() + ci, -1.0});
            }
            prob.rows.push_back(std::move(row));
            for (const auto& c : components_or_default(resp)) m[c] += 1.0;
        }
    }

    LfaFit fit;
    const std::vector<double> w = irls(prob, fit.stats);
    for (std::size_t i = 0; i < C; ++i) {
        fit.model.gamma[comps[i]] = w[i];
        fit.model.beta[comps[i]] = use_known_difficulties ? 0.0 : w[C + ids.size() + i];
    }
    for (std::size_t i = 0; i < ids.size(); ++i) fit.model.alpha[ids[i]] = w[C + i];
    return fit;
}

void BktParams::validate() const {
    auto in_unit = [](double p) { return p > 0.0 && p < 1.0; };
    if (!in_unit(p_l0) || !in_unit(p_slip) || !in_unit(p_guess) || !in_unit(p_transit)) {
        throw std::invalid_argument("BKT parameters must lie strictly in (0,1)");
    }
    if (p_slip >= 0.5 || p_guess >= 0.5) {
        throw std::invalid_argument("BKT slip and guess must stay below 0.5");
    }
}

double bkt_update(const BktParams& params, double p_prev, int outcome) {
    if (p_prev < 0.0 || p_prev > 1.0) {
        throw std::invalid_argument("bkt_update: p_prev must lie in [0,1]");
    }
    if (outcome != 0 && outcome != 1) {
        throw std::invalid_argument("bkt_update: outcome must be 0 or 1");
    }
    const double L = p_prev, S = params.p_slip, G = params.p_guess;
    double numer, denom;
    if (outcome == 1) {
        numer = L * (1.0 - S);
        denom = L * (1.0 - S) + (1.0 - L) * G;
    } else {
        numer = L * S;
        denom = L * S + (1.0 - L) * (1.0 - G);
    }
    const double posterior = denom > 0.0 ? numer / denom : L;
    return posterior + (1.0 - posterior) * params.p_transit;
}

double bkt_sequence_loglik(const BktParams& params, const std::vector<int>& outcomes) {
    double L = params.p_l0;
    double ll = 0.0;
    for (int y : outcomes) {
        const double p_correct = L * (1.0 - params.p_slip) + (1.0 - L) * params.p_guess;
        ll += std::log(std::max(y == 1 ? p_correct : 1.0 - p_correct, 1e-300));
        L = bkt_update(params, L, y);
    }
    return ll;
}

BktFit fit_bkt(const ResponsePanel& panel) {
    std::vector<std::vector<int>> sequences;
    for (const auto& r : panel.respondents()) {
        if (r.responses.empty()) continue;
        std::vector<int> seq;
        seq.reserve(r.responses.size());
        for (const auto& resp : r.responses) seq.push_back(resp.outcome);
        sequences.push_back(std::move(seq));
    }
    if (sequences.empty()) throw std::invalid_argument("fit_bkt: no response sequences");

    auto total_loglik = [&](const BktParams& p) {
        double ll = 0.0;
        for (const auto& seq : sequences) ll += bkt_sequence_loglik(p, seq);
        return ll;
    };

    // Coarse grid over the constrained box.
    BktParams best;
    double best_ll = -1e300;
    for (double l0 = 0.05; l0 < 0.975; l0 += 0.05) {
        for (double s = 0.05; s < 0.475; s += 0.05) {
            for (double g = 0.05; g < 0.475; g += 0.05) {
                for (double t = 0.05; t < 0.975; t += 0.05) {
                    const BktParams p{l0, s, g, t};
                    const double ll = total_loglik(p);
                    if (ll > best_ll) {
                        best_ll = ll;
                        best = p;
                    }
                }
            }
        }
    }

    // Simplex refinement on logit-transformed parameters keeps the box.
    auto to_params = [](const std::vector<double>& x) {
        return BktParams{logistic(x[0]), 0.5 * logistic(x[1]), 0.5 * logistic(x[2]),
                         logistic(x[3])};
    };
    auto logit = [](double p) { return std::log(p / (1.0 - p)); };
    const std::vector<double> x0{logit(best.p_l0), logit(best.p_slip / 0.5),
                                 logit(best.p_guess / 0.5), logit(best.p_transit)};
    const NelderMeadResult r = nelder_mead_min(
        [&](const std::vector<double>& x) { return -total_loglik(to_params(x)); }, x0,
        {0.2, 0.2, 0.2, 0.2}, 1e-6, 2000);

    BktFit fit;
    fit.params = to_params(r.x);
    fit.loglik = -r.value;
    auto near_edge = [](double p, double lo, double hi) {
        return p < lo + 1e-3 || p > hi - 1e-3;
    };
    fit.boundary_warning = near_edge(fit.params.p_l0, 0.0, 1.0) ||
                           near_edge(fit.params.p_slip, 0.0, 0.5) ||
                           near_edge(fit.params.p_guess, 0.0, 0.5) ||
                           near_edge(fit.params.p_transit, 0.0, 1.0);
    return fit;
}

}  // namespace abtrace
