#include "abtrace/glmm.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "abtrace/optim.hpp"
#include "abtrace/parallel.hpp"

namespace abtrace {

namespace {

// Gauss-Hermite nodes/weights for integral of e^{-x^2} f(x). Newton iteration
// on the orthonormal recurrence, roots symmetrized.
struct GaussHermite {
    std::vector<double> x;
    std::vector<double> w;
};

GaussHermite gauss_hermite(int n) {
    GaussHermite gh;
    gh.x.resize(static_cast<std::size_t>(n));
    gh.w.resize(static_cast<std::size_t>(n));
    const int m = (n + 1) / 2;
    double z = 0.0;
    for (int i = 0; i < m; ++i) {
        if (i == 0) {
            z = std::sqrt(2.0 * n + 1.0) - 1.85575 * std::pow(2.0 * n + 1.0, -1.0 / 6.0);
        } else if (i == 1) {
            z -= 1.14 * std::pow(static_cast<double>(n), 0.426) / z;
        } else if (i == 2) {
            z = 1.86 * z - 0.86 * gh.x[0];
        } else if (i == 3) {
            z = 1.91 * z - 0.91 * gh.x[1];
        } else {
            z = 2.0 * z - gh.x[static_cast<std::size_t>(i - 2)];
        }
        double pp = 0.0;
        for (int iter = 0; iter < 100; ++iter) {
            double p1 = 0.7511255444649425;  // pi^{-1/4}
            double p2 = 0.0;
            for (int j = 1; j <= n; ++j) {
                const double p3 = p2;
                p2 = p1;
                p1 = z * std::sqrt(2.0 / j) * p2 - std::sqrt((j - 1.0) / j) * p3;
            }
            pp = std::sqrt(2.0 * n) * p2;
            const double dz = p1 / pp;
            z -= dz;
            if (std::abs(dz) < 1e-15) break;
        }
        gh.x[static_cast<std::size_t>(i)] = z;
        gh.x[static_cast<std::size_t>(n - 1 - i)] = -z;
        gh.w[static_cast<std::size_t>(i)] = 2.0 / (pp * pp);
        gh.w[static_cast<std::size_t>(n - 1 - i)] = gh.w[static_cast<std::size_t>(i)];
    }
    if (n % 2 == 1) gh.x[static_cast<std::size_t>(n / 2)] = 0.0;
    return gh;
}

struct Obs {
    int t = 0;        // 0-based iteration
    double d = 0.0;
    double y = 0.0;
};

struct GlmmData {
    std::vector<std::vector<Obs>> respondents;
    std::size_t n_obs = 0;
    int T = 0;
};

GlmmData prepare(const ResponsePanel& panel, std::size_t beta_len) {
    GlmmData data;
    data.T = static_cast<int>(beta_len);
    if (panel.n_iterations() > data.T) {
        throw std::invalid_argument("glmm: panel has iterations beyond the beta vector");
    }
    for (const auto& r : panel.respondents()) {
        std::vector<Obs> obs;
        obs.reserve(r.responses.size());
        for (const auto& resp : r.responses) {
            obs.push_back({resp.iteration - 1, resp.difficulty,
                           static_cast<double>(resp.outcome)});
        }
        if (!obs.empty()) data.respondents.push_back(std::move(obs));
        data.n_obs += r.responses.size();
    }
    return data;
}

// Posterior mode of u for one respondent; the objective is strictly concave.
double posterior_mode(const std::vector<Obs>& obs, const std::vector<double>& beta,
                      double sigma2, double u0, double* curvature) {
    double u = u0;
    for (int iter = 0; iter < 100; ++iter) {
        double g = -u / sigma2;
        double h = -1.0 / sigma2;
        for (const Obs& o : obs) {
            const double p = rasch_probability(beta[static_cast<std::size_t>(o.t)] + u, o.d);
            g += o.y - p;
            h -= p * (1.0 - p);
        }
        double step = g / h;
        if (step > 5.0) step = 5.0;
        if (step < -5.0) step = -5.0;
        u -= step;
        if (std::abs(step) < 1e-12) break;
    }
    if (curvature) {
        double h = 1.0 / sigma2;
        for (const Obs& o : obs) {
            const double p = rasch_probability(beta[static_cast<std::size_t>(o.t)] + u, o.d);
            h += p * (1.0 - p);
        }
        *curvature = h;
    }
    return u;
}

double respondent_loglik(const std::vector<Obs>& obs, const std::vector<double>& beta,
                         double sigma2, const GaussHermite& gh, double* mode_cache) {
    double H = 0.0;
    const double u_hat = posterior_mode(obs, beta, sigma2, mode_cache ? *mode_cache : 0.0, &H);
    if (mode_cache) *mode_cache = u_hat;

    const double scale = std::sqrt(2.0 / H);
    const double log_prior_const = -0.5 * std::log(2.0 * M_PI * sigma2);
    double lse_max = -1e300;
    std::vector<double> terms(gh.x.size());
    for (std::size_t k = 0; k < gh.x.size(); ++k) {
        const double u = u_hat + scale * gh.x[k];
        double h = -0.5 * u * u / sigma2 + log_prior_const;
        for (const Obs& o : obs) {
            const double eta = beta[static_cast<std::size_t>(o.t)] + u - o.d;
            h += o.y * eta - softplus(eta);
        }
        terms[k] = std::log(gh.w[k]) + gh.x[k] * gh.x[k] + h;
        lse_max = std::max(lse_max, terms[k]);
    }
    double sum = 0.0;
    for (double t : terms) sum += std::exp(t - lse_max);
    return 0.5 * std::log(2.0) - 0.5 * std::log(H) + lse_max + std::log(sum);
}

double total_loglik(const GlmmData& data, const std::vector<double>& beta, double sigma2,
                    const GaussHermite& gh, std::vector<double>* mode_cache) {
    std::vector<double> parts(data.respondents.size());
    parallel_for(data.respondents.size(), [&](std::size_t j) {
        double* cache = mode_cache ? &(*mode_cache)[j] : nullptr;
        parts[j] = respondent_loglik(data.respondents[j], beta, sigma2, gh, cache);
    });
    double ll = 0.0;
    for (double p : parts) ll += p;
    return ll;
}

}  // namespace

double glmm_marginal_loglik(const std::vector<double>& beta, double sigma2,
                            const ResponsePanel& panel, int nodes) {
    if (nodes < 1) throw std::invalid_argument("glmm: nodes must be >= 1");
    if (!(sigma2 > 0.0)) throw std::invalid_argument("glmm: sigma2 must be positive");
    const GlmmData data = prepare(panel, beta.size());
    const GaussHermite gh = gauss_hermite(nodes);
    return total_loglik(data, beta, sigma2, gh, nullptr);
}

GlmmFit fit_glmm(const ResponsePanel& panel, int nodes, const GlmmModel* warm_start) {
    if (nodes < 1) throw std::invalid_argument("glmm: nodes must be >= 1");
    if (panel.n_respondents() < 2) {
        throw std::invalid_argument("fit_glmm: at least 2 respondents required");
    }
    const int T = panel.n_iterations();
    const GlmmData data = prepare(panel, static_cast<std::size_t>(T));
    const GaussHermite gh = gauss_hermite(nodes);

    std::vector<double> x0(static_cast<std::size_t>(T) + 1, 0.0);
    if (warm_start && static_cast<int>(warm_start->beta.size()) == T) {
        std::copy(warm_start->beta.begin(), warm_start->beta.end(), x0.begin());
        x0.back() = std::log(warm_start->sigma2);
    } else {
        // per-iteration logistic fits at u = 0
        for (int t = 0; t < T; ++t) {
            std::vector<const Obs*> at;
            for (const auto& resp : data.respondents) {
                for (const Obs& o : resp) {
                    if (o.t == t) at.push_back(&o);
                }
            }
            if (at.empty()) continue;
            bool any1 = false, any0 = false;
            for (const Obs* o : at) (o->y > 0.5 ? any1 : any0) = true;
            if (!any1 || !any0) {
                x0[static_cast<std::size_t>(t)] = any1 ? 3.0 : -3.0;
                continue;
            }
            x0[static_cast<std::size_t>(t)] = golden_section_max(
                [&](double b) {
                    double ll = 0.0;
                    for (const Obs* o : at) {
                        const double e = b - o->d;
                        ll += o->y * e - softplus(e);
                    }
                    return ll;
                },
                -10.0, 10.0, 1e-6);
        }
        x0.back() = 0.0;  // log sigma2
    }

    // Objective normalized per observation; mode cache is keyed by respondent
    // and warm-starts the inner Newton across evaluations.
    std::vector<double> mode_cache(data.respondents.size(), 0.0);
    const double n_obs = static_cast<double>(data.n_obs);
    auto objective = [&](const std::vector<double>& p) {
        const std::vector<double> beta(p.begin(), p.end() - 1);
        const double sigma2 = std::exp(std::clamp(p.back(), -20.0, 10.0));
        return -total_loglik(data, beta, sigma2, gh, &mode_cache) / n_obs;
    };

    BfgsOptions opts;
    opts.grad_tol = 1e-5;
    opts.max_iterations = 800;
    const BfgsResult r = bfgs_min(objective, x0, opts);
    if (!r.converged) {
        throw OptimError("fit_glmm: gradient norm " + std::to_string(r.grad_inf_norm) +
                             " after " + std::to_string(r.iterations) + " iterations",
                         r.x, r.value, r.evaluations);
    }

    GlmmFit fit;
    fit.model.beta.assign(r.x.begin(), r.x.end() - 1);
    fit.model.sigma2 = std::exp(r.x.back());
    fit.model.quadrature_nodes = nodes;
    fit.loglik = -r.value * n_obs;
    fit.grad_inf_norm = r.grad_inf_norm;
    fit.iterations = r.iterations;
    return fit;
}

double glmm_predict_fixed(const GlmmModel& model, int t) {
    if (t < 1 || t > static_cast<int>(model.beta.size())) {
        throw std::out_of_range("glmm_predict_fixed: iteration outside the fitted range");
    }
    return model.beta[static_cast<std::size_t>(t - 1)];
}

RandomEffect estimate_random_effect(const GlmmModel& model, const RespondentSequence& prefix) {
    if (prefix.responses.empty()) {
        throw std::invalid_argument("estimate_random_effect: empty response sequence");
    }
    std::vector<Obs> obs;
    obs.reserve(prefix.responses.size());
    for (const auto& r : prefix.responses) {
        if (r.iteration < 1 || r.iteration > static_cast<int>(model.beta.size())) {
            throw std::out_of_range("estimate_random_effect: iteration outside the model range");
        }
        obs.push_back({r.iteration - 1, r.difficulty, static_cast<double>(r.outcome)});
    }
    // Newton on the concave posterior; stop on |gradient| < 1e-8.
    double u = 0.0;
    for (int iter = 0; iter < 200; ++iter) {
        double g = -u / model.sigma2;
        double h = -1.0 / model.sigma2;
        for (const Obs& o : obs) {
            const double p =
                rasch_probability(model.beta[static_cast<std::size_t>(o.t)] + u, o.d);
            g += o.y - p;
            h -= p * (1.0 - p);
        }
        if (std::abs(g) < 1e-8) break;
        double step = g / h;
        if (step > 5.0) step = 5.0;
        if (step < -5.0) step = -5.0;
        u -= step;
    }
    return {prefix.respondent_id, u};
}

std::string GlmmModel::to_json() const {
    nlohmann::json j;
    j["version"] = 1;
    j["beta"] = beta;
    j["sigma2"] = sigma2;
    j["nodes"] = quadrature_nodes;
    return j.dump(2);
}

GlmmModel GlmmModel::from_json(const std::string& text) {
    const nlohmann::json j = nlohmann::json::parse(text);
    if (j.at("version").get<int>() != 1) {
        throw std::runtime_error("glmm model: unsupported version");
    }
    GlmmModel m;
    m.beta = j.at("beta").get<std::vector<double>>();
    m.sigma2 = j.at("sigma2").get<double>();
    m.quadrature_nodes = j.at("nodes").get<int>();
    if (m.beta.empty() || !(m.sigma2 > 0.0) || m.quadrature_nodes < 1) {
        throw std::runtime_error("glmm model: invalid parameters");
    }
    return m;
}

void GlmmModel::save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    out << to_json() << '\n';
}

GlmmModel GlmmModel::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open: " + path);
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return from_json(text);
}

}  // namespace abtrace
