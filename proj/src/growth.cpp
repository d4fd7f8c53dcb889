#include "abtrace/growth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include <json.hpp>

#include "abtrace/optim.hpp"
#include "abtrace/parallel.hpp"

namespace abtrace {

RankProportion rank_proportion(std::span<const double> sorted_cohort, double value) {
    if (sorted_cohort.empty()) {
        throw std::invalid_argument("rank_proportion: empty cohort");
    }
    if (!std::isfinite(value)) {
        throw std::invalid_argument("rank_proportion: value must be finite");
    }
    const auto lo = std::lower_bound(sorted_cohort.begin(), sorted_cohort.end(), value);
    const auto hi = std::upper_bound(lo, sorted_cohort.end(), value);
    const double L = static_cast<double>(lo - sorted_cohort.begin());
    const double T = static_cast<double>(hi - lo);
    const double n = static_cast<double>(sorted_cohort.size());
    return {(L + 0.5 * T + 0.5) / (n + 1.0)};
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x * M_SQRT1_2); }

double inverse_normal_cdf(double p) {
    if (!(p > 0.0) || !(p < 1.0)) {
        throw std::invalid_argument("inverse_normal_cdf: p must lie strictly in (0,1)");
    }
    // Acklam's rational approximation, relative error < 1.15e-9.
    static constexpr double a[6] = {-3.969683028665376e+01, 2.209460984245205e+02,
                                    -2.759285104469687e+02, 1.383577518672690e+02,
                                    -3.066479806614716e+01, 2.506628277459239e+00};
    static constexpr double b[5] = {-5.447609879822406e+01, 1.615858368580409e+02,
                                    -1.556989798598866e+02, 6.680131188771972e+01,
                                    -1.328068155288572e+01};
    static constexpr double c[6] = {-7.784894002430293e-03, -3.223964580411365e-01,
                                    -2.400758277161838e+00, -2.549732539343734e+00,
                                    4.374664141464968e+00,  2.938163982698783e+00};
    static constexpr double d[4] = {7.784695709041462e-03, 3.224671290700398e-01,
                                    2.445134137142996e+00, 3.754408661907416e+00};
    constexpr double p_low = 0.02425;

    double x;
    if (p < p_low) {
        const double q = std::sqrt(-2.0 * std::log(p));
        x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    } else if (p <= 1.0 - p_low) {
        const double q = p - 0.5;
        const double r = q * q;
        x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
            (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
    } else {
        const double q = std::sqrt(-2.0 * std::log(1.0 - p));
        x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    }

    // One Halley refinement against the exact CDF.
    const double e = normal_cdf(x) - p;
    const double u = e * std::sqrt(2.0 * M_PI) * std::exp(0.5 * x * x);
    return x - u / (1.0 + 0.5 * x * u);
}

std::vector<double> weight_vector(int t, int n_iterations, double weight_sd) {
    if (t < 1 || t > n_iterations) {
        throw std::invalid_argument("weight_vector: t must lie in 1..n_iterations");
    }
    if (!(weight_sd > 0.0)) {
        throw std::invalid_argument("weight_vector: weight_sd must be positive");
    }
    std::vector<double> w(static_cast<std::size_t>(n_iterations));
    const double denom = 2.0 * weight_sd * weight_sd;
    for (int tau = 1; tau <= n_iterations; ++tau) {
        const double off = static_cast<double>(tau - t);
        w[static_cast<std::size_t>(tau - 1)] = std::exp(-off * off / denom);
    }
    return w;
}

namespace {

struct FlatPanel {
    // row-major [respondent * T + (tau-1)]
    std::vector<double> d;
    std::vector<double> y;
    int T = 0;
    std::size_t J = 0;
};

FlatPanel flatten(const ResponsePanel& panel) {
    FlatPanel f;
    f.T = panel.n_iterations();
    f.J = panel.n_respondents();
    f.d.resize(f.J * static_cast<std::size_t>(f.T));
    f.y.resize(f.d.size());
    std::size_t j = 0;
    for (const auto& r : panel.respondents()) {
        for (int tau = 0; tau < f.T; ++tau) {
            f.d[j * f.T + tau] = r.responses[static_cast<std::size_t>(tau)].difficulty;
            f.y[j * f.T + tau] = r.responses[static_cast<std::size_t>(tau)].outcome;
        }
        ++j;
    }
    return f;
}

double clamp_sigma(double s) { return std::clamp(s, kSigmaMin, kSigmaMax); }

// Weighted log-likelihood maximization over (mu, log sigma). z holds
// Phi^-1(P_{j,tau}) in the same layout as the panel arrays.
GrowthIterationFit fit_iteration_impl(const FlatPanel& f, const std::vector<double>& z,
                                      const std::vector<double>& weights,
                                      std::optional<GrowthIterationFit> init) {
    const double wmax = *std::max_element(weights.begin(), weights.end());
    if (!(wmax > 0.0)) {
        throw std::invalid_argument("fit_iteration: all weights are zero");
    }
    // Window of iterations that can matter numerically, relative to the peak.
    std::vector<int> live;
    for (int tau = 0; tau < f.T; ++tau) {
        if (weights[static_cast<std::size_t>(tau)] >= 1e-12 * wmax) live.push_back(tau);
    }

    double zmax = 0.0;
    for (std::size_t j = 0; j < f.J; ++j) {
        for (int tau : live) zmax = std::max(zmax, std::abs(z[j * f.T + tau]));
    }

    auto loglik = [&](double mu, double sigma) {
        double ll = 0.0;
        for (std::size_t j = 0; j < f.J; ++j) {
            const std::size_t base = j * f.T;
            for (int tau : live) {
                const double x = mu + sigma * z[base + tau] - f.d[base + tau];
                ll += weights[static_cast<std::size_t>(tau)] * (f.y[base + tau] * x - softplus(x));
            }
        }
        return ll;
    };

    if (zmax < 1e-9) {
        // Ranks carry no spread; sigma is unidentified, fit mu alone.
        const double mu = golden_section_max([&](double m) { return loglik(m, kSigmaMin); },
                                             -10.0, 10.0, 1e-8);
        return {mu, kSigmaMin};
    }

    GrowthIterationFit start = init.value_or(GrowthIterationFit{0.0, 1.0});
    auto objective = [&](const std::vector<double>& p) {
        return -loglik(p[0], clamp_sigma(std::exp(p[1])));
    };
    const std::vector<double> x0{start.mu, std::log(clamp_sigma(start.sigma))};
    NelderMeadResult r = nelder_mead_min(objective, x0, {0.1, 0.2}, 1e-6, 2000);
    if (!r.converged) {
        throw OptimError("fit_iteration: simplex did not converge within 2000 evaluations",
                         {r.x[0], clamp_sigma(std::exp(r.x[1]))}, -r.value, r.evaluations);
    }
    return {r.x[0], clamp_sigma(std::exp(r.x[1]))};
}

std::vector<double> z_from_proportions(const FlatPanel& f,
                                       const std::vector<std::vector<double>>& proportions) {
    if (proportions.size() != f.J) {
        throw std::invalid_argument("proportions: one row per respondent required");
    }
    std::vector<double> z(f.J * static_cast<std::size_t>(f.T));
    for (std::size_t j = 0; j < f.J; ++j) {
        if (static_cast<int>(proportions[j].size()) != f.T) {
            throw std::invalid_argument("proportions: one column per iteration required");
        }
        for (int tau = 0; tau < f.T; ++tau) {
            z[j * f.T + tau] = inverse_normal_cdf(proportions[j][static_cast<std::size_t>(tau)]);
        }
    }
    return z;
}

}  // namespace

GrowthIterationFit fit_iteration(const ResponsePanel& panel,
                                 const std::vector<std::vector<double>>& proportions, int t,
                                 double weight_sd) {
    panel.require_balanced("fit_iteration");
    const FlatPanel f = flatten(panel);
    const std::vector<double> w = weight_vector(t, f.T, weight_sd);
    return fit_iteration_impl(f, z_from_proportions(f, proportions), w, std::nullopt);
}

GrowthIterationFit fit_iteration_weighted(const ResponsePanel& panel,
                                          const std::vector<std::vector<double>>& proportions,
                                          const std::vector<double>& weights,
                                          std::optional<GrowthIterationFit> init) {
    panel.require_balanced("fit_iteration");
    const FlatPanel f = flatten(panel);
    if (static_cast<int>(weights.size()) != f.T) {
        throw std::invalid_argument("fit_iteration: one weight per iteration required");
    }
    return fit_iteration_impl(f, z_from_proportions(f, proportions), weights, init);
}

GrowthModel fit_growth_model(const ResponsePanel& panel, double k_rank, double weight_sd) {
    return fit_growth_model(panel, EloConfig::constant(k_rank), weight_sd);
}

GrowthModel fit_growth_model(const ResponsePanel& panel, const EloConfig& rank_policy,
                             double weight_sd) {
    panel.require_balanced("fit_growth_model");
    const std::size_t J = panel.n_respondents();
    if (J < 2) {
        throw std::invalid_argument("fit_growth_model: at least 2 respondents required");
    }
    if (!(weight_sd > 0.0)) {
        throw std::invalid_argument("fit_growth_model: weight_sd must be positive");
    }

    GrowthModel model;
    model.weight_sd = weight_sd;
    model.start_theta = fit_start_theta(panel).theta;
    model.rank_config = rank_policy;
    model.rank_config.start_theta = model.start_theta;

    const FlatPanel f = flatten(panel);
    const int T = f.T;

    // Elo traces for every training respondent.
    std::vector<double> est(J * static_cast<std::size_t>(T));
    {
        const auto& resp = panel.respondents();
        parallel_for(J, [&](std::size_t j) {
            const EloTrace tr = elo_trace(resp[j], model.rank_config);
            std::copy(tr.estimates.begin(), tr.estimates.end(), est.begin() + j * T);
        });
    }

    // Sorted cohorts per iteration, kept for ranking new respondents.
    model.training_cohorts.assign(static_cast<std::size_t>(T), {});
    for (int tau = 0; tau < T; ++tau) {
        auto& cohort = model.training_cohorts[static_cast<std::size_t>(tau)];
        cohort.resize(J);
        for (std::size_t j = 0; j < J; ++j) cohort[j] = est[j * T + tau];
        std::sort(cohort.begin(), cohort.end());
    }

    // Rank z-values; respondent j is excluded from its own cohort, which
    // reduces (L + 0.5 T + 0.5)/(n+1) to (L + 0.5 T_all)/J on the full cohort.
    std::vector<double> z(est.size());
    for (int tau = 0; tau < T; ++tau) {
        const auto& cohort = model.training_cohorts[static_cast<std::size_t>(tau)];
        for (std::size_t j = 0; j < J; ++j) {
            const double v = est[j * T + tau];
            const auto lo = std::lower_bound(cohort.begin(), cohort.end(), v);
            const auto hi = std::upper_bound(lo, cohort.end(), v);
            const double P = (static_cast<double>(lo - cohort.begin()) +
                              0.5 * static_cast<double>(hi - lo)) /
                             static_cast<double>(J);
            z[j * T + tau] = inverse_normal_cdf(P);
        }
    }

    model.mu.assign(static_cast<std::size_t>(T), 0.0);
    model.sigma.assign(static_cast<std::size_t>(T), kSigmaMin);
    std::vector<std::string> errors(static_cast<std::size_t>(T));
    parallel_for(static_cast<std::size_t>(T), [&](std::size_t ti) {
        const int t = static_cast<int>(ti) + 1;
        const auto& cohort = model.training_cohorts[ti];
        const double mu0 = std::accumulate(cohort.begin(), cohort.end(), 0.0) /
                           static_cast<double>(J);
        double var0 = 0.0;
        for (double v : cohort) var0 += (v - mu0) * (v - mu0);
        var0 /= static_cast<double>(J - 1);
        const GrowthIterationFit init{mu0, std::max(std::sqrt(var0), 1e-2)};
        try {
            const GrowthIterationFit fit =
                fit_iteration_impl(f, z, weight_vector(t, T, weight_sd), init);
            model.mu[ti] = fit.mu;
            model.sigma[ti] = fit.sigma;
        } catch (const std::exception& e) {
            errors[ti] = e.what();
        }
    });
    for (int tau = 0; tau < T; ++tau) {
        if (!errors[static_cast<std::size_t>(tau)].empty()) {
            throw std::runtime_error("fit_growth_model: iteration " + std::to_string(tau + 1) +
                                     ": " + errors[static_cast<std::size_t>(tau)]);
        }
    }
    return model;
}

std::vector<AbilityEstimate> estimate_new_respondent(const GrowthModel& model,
                                                     const RespondentSequence& prefix) {
    const int T = model.n_iterations();
    if (static_cast<int>(prefix.responses.size()) > T) {
        throw std::out_of_range("estimate_new_respondent: responses extend past iteration " +
                                std::to_string(T) + ", the model has no distribution there");
    }
    int expected = 1;
    for (const Response& r : prefix.responses) {
        if (r.iteration != expected++) {
            throw std::invalid_argument(
                "estimate_new_respondent: responses must cover iterations 1..t in order");
        }
    }

    const EloTrace trace = elo_trace(prefix, model.rank_config);
    std::vector<AbilityEstimate> out;
    out.reserve(trace.estimates.size());
    for (std::size_t i = 0; i < trace.estimates.size(); ++i) {
        const auto& cohort = model.training_cohorts[i];
        const RankProportion P = rank_proportion(cohort, trace.estimates[i]);
        const double theta = model.mu[i] + model.sigma[i] * inverse_normal_cdf(P.value);
        out.push_back({prefix.respondent_id, static_cast<int>(i) + 1, theta});
    }
    return out;
}

namespace {

void require(bool cond, const char* msg) {
    if (!cond) throw std::runtime_error(std::string("growth model: ") + msg);
}

}  // namespace

std::string GrowthModel::to_json() const {
    nlohmann::json j;
    j["version"] = 1;
    j["k_rank"] = rank_config.k;
    if (rank_config.policy == EloPolicy::decaying) j["rank_decay"] = rank_config.decay;
    j["weight_sd"] = weight_sd;
    j["start_theta"] = start_theta;
    nlohmann::json iters = nlohmann::json::array();
    for (int t = 0; t < n_iterations(); ++t) {
        iters.push_back({{"t", t + 1},
                         {"mu", mu[static_cast<std::size_t>(t)]},
                         {"sigma", sigma[static_cast<std::size_t>(t)]},
                         {"cohort", training_cohorts[static_cast<std::size_t>(t)]}});
    }
    j["iterations"] = std::move(iters);
    return j.dump(2);
}

GrowthModel GrowthModel::from_json(const std::string& text) {
    const nlohmann::json j = nlohmann::json::parse(text);
    require(j.at("version").get<int>() == 1, "unsupported version");
    GrowthModel m;
    m.weight_sd = j.at("weight_sd").get<double>();
    m.start_theta = j.at("start_theta").get<double>();
    const double k = j.at("k_rank").get<double>();
    if (j.contains("rank_decay")) {
        m.rank_config = EloConfig::decaying(k, j["rank_decay"].get<double>(), m.start_theta);
    } else {
        m.rank_config = EloConfig::constant(k, m.start_theta);
    }
    for (const auto& it : j.at("iterations")) {
        m.mu.push_back(it.at("mu").get<double>());
        m.sigma.push_back(it.at("sigma").get<double>());
        m.training_cohorts.push_back(it.at("cohort").get<std::vector<double>>());
        require(m.sigma.back() >= kSigmaMin, "sigma below the clamp");
        require(std::is_sorted(m.training_cohorts.back().begin(),
                               m.training_cohorts.back().end()),
                "cohort not sorted");
    }
    require(!m.mu.empty(), "no iterations");
    return m;
}

void GrowthModel::save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    out << to_json() << '\n';
}

GrowthModel GrowthModel::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open: " + path);
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return from_json(text);
}

}  // namespace abtrace
