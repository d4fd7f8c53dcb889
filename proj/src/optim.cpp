#include "abtrace/optim.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace abtrace {

double golden_section_max(const std::function<double(double)>& f, double lo, double hi,
                          double xtol) {
    const double invphi = (std::sqrt(5.0) - 1.0) / 2.0;
    double a = lo, b = hi;
    double x1 = b - invphi * (b - a);
    double x2 = a + invphi * (b - a);
    double f1 = f(x1), f2 = f(x2);
    while (b - a > xtol) {
        if (f1 < f2) {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + invphi * (b - a);
            f2 = f(x2);
        } else {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - invphi * (b - a);
            f1 = f(x1);
        }
    }
    return (a + b) / 2.0;
}

NelderMeadResult nelder_mead_min(const std::function<double(const std::vector<double>&)>& f,
                                 const std::vector<double>& x0,
                                 const std::vector<double>& initial_step, double diam_tol,
                                 std::size_t max_evals) {
    const std::size_t n = x0.size();
    std::vector<std::vector<double>> simplex(n + 1, x0);
    for (std::size_t i = 0; i < n; ++i) simplex[i + 1][i] += initial_step[i];

    std::size_t evals = 0;
    std::vector<double> fv(n + 1);
    for (std::size_t i = 0; i <= n; ++i) {
        fv[i] = f(simplex[i]);
        ++evals;
    }

    auto order = [&] {
        std::vector<std::size_t> idx(n + 1);
        std::iota(idx.begin(), idx.end(), 0);
        std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return fv[a] < fv[b]; });
        std::vector<std::vector<double>> s2(n + 1);
        std::vector<double> f2(n + 1);
        for (std::size_t i = 0; i <= n; ++i) {
            s2[i] = simplex[idx[i]];
            f2[i] = fv[idx[i]];
        }
        simplex.swap(s2);
        fv.swap(f2);
    };

    auto diameter = [&] {
        double d = 0.0;
        for (std::size_t i = 1; i <= n; ++i)
            for (std::size_t j = 0; j < n; ++j)
                d = std::max(d, std::abs(simplex[i][j] - simplex[0][j]));
        return d;
    };

    NelderMeadResult res;
    while (true) {
        order();
        if (diameter() < diam_tol) {
            res.converged = true;
            break;
        }
        if (evals >= max_evals) break;

        std::vector<double> centroid(n, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < n; ++j) centroid[j] += simplex[i][j];
        }
        for (double& c : centroid) c /= static_cast<double>(n);

        auto at = [&](double coef) {
            std::vector<double> p(n);
            for (std::size_t j = 0; j < n; ++j)
                p[j] = centroid[j] + coef * (simplex[n][j] - centroid[j]);
            return p;
        };

        std::vector<double> xr = at(-1.0);
        double fr = f(xr);
        ++evals;
        if (fr < fv[0]) {
            std::vector<double> xe = at(-2.0);
            double fe = f(xe);
            ++evals;
            if (fe < fr) {
                simplex[n] = std::move(xe);
                fv[n] = fe;
            } else {
                simplex[n] = std::move(xr);
                fv[n] = fr;
            }
        } else if (fr < fv[n - 1]) {
            simplex[n] = std::move(xr);
            fv[n] = fr;
        } else {
            const bool outside = fr < fv[n];
            std::vector<double> xc = at(outside ? -0.5 : 0.5);
            double fc = f(xc);
            ++evals;
            if (fc < std::min(fr, fv[n])) {
                simplex[n] = std::move(xc);
                fv[n] = fc;
            } else {
                // shrink toward the best vertex
                for (std::size_t i = 1; i <= n; ++i) {
                    for (std::size_t j = 0; j < n; ++j)
                        simplex[i][j] = simplex[0][j] + 0.5 * (simplex[i][j] - simplex[0][j]);
                    fv[i] = f(simplex[i]);
                    ++evals;
                }
            }
        }
    }
    res.x = simplex[0];
    res.value = fv[0];
    res.evaluations = evals;
    return res;
}

namespace {

std::vector<double> central_grad(const std::function<double(const std::vector<double>&)>& f,
                                 std::vector<double> x, double h, std::size_t& evals) {
    std::vector<double> g(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double xi = x[i];
        const double hi = h * std::max(1.0, std::abs(xi));
        x[i] = xi + hi;
        const double fp = f(x);
        x[i] = xi - hi;
        const double fm = f(x);
        x[i] = xi;
        g[i] = (fp - fm) / (2.0 * hi);
        evals += 2;
    }
    return g;
}

double inf_norm(const std::vector<double>& v) {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::abs(x));
    return m;
}

}  // namespace

BfgsResult bfgs_min(const std::function<double(const std::vector<double>&)>& f,
                    const std::vector<double>& x0, const BfgsOptions& opts) {
    const std::size_t n = x0.size();
    BfgsResult res;
    res.x = x0;
    std::size_t evals = 0;
    double fx = f(res.x);
    ++evals;
    std::vector<double> g = central_grad(f, res.x, opts.fd_step, evals);

    // inverse Hessian approximation
    std::vector<double> H(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) H[i * n + i] = 1.0;

    for (std::size_t iter = 0; iter < opts.max_iterations; ++iter) {
        res.grad_inf_norm = inf_norm(g);
        if (res.grad_inf_norm < opts.grad_tol) {
            res.converged = true;
            break;
        }

        std::vector<double> p(n, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            double s = 0.0;
            for (std::size_t j = 0; j < n; ++j) s += H[i * n + j] * g[j];
            p[i] = -s;
        }
        double gp = 0.0;
        for (std::size_t i = 0; i < n; ++i) gp += g[i] * p[i];
        if (gp >= 0.0) {
            // reset to steepest descent if H lost positive definiteness
            for (std::size_t i = 0; i < n; ++i) p[i] = -g[i];
            gp = 0.0;
            for (std::size_t i = 0; i < n; ++i) gp += g[i] * p[i];
            std::fill(H.begin(), H.end(), 0.0);
            for (std::size_t i = 0; i < n; ++i) H[i * n + i] = 1.0;
        }

        // backtracking Armijo line search
        double step = 1.0;
        double fnew = fx;
        std::vector<double> xnew(n);
        bool accepted = false;
        for (int ls = 0; ls < 60; ++ls) {
            for (std::size_t i = 0; i < n; ++i) xnew[i] = res.x[i] + step * p[i];
            fnew = f(xnew);
            ++evals;
            if (fnew <= fx + 1e-4 * step * gp) {
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (!accepted) break;  // line search stalled at the noise floor

        std::vector<double> gnew = central_grad(f, xnew, opts.fd_step, evals);
        std::vector<double> s(n), ydiff(n);
        for (std::size_t i = 0; i < n; ++i) {
            s[i] = xnew[i] - res.x[i];
            ydiff[i] = gnew[i] - g[i];
        }
        double sy = 0.0;
        for (std::size_t i = 0; i < n; ++i) sy += s[i] * ydiff[i];

        res.x = std::move(xnew);
        fx = fnew;
        g = std::move(gnew);
        res.iterations = iter + 1;

        if (sy > 1e-12) {
            // BFGS inverse update: H := (I - s y'/sy) H (I - y s'/sy) + s s'/sy
            std::vector<double> Hy(n, 0.0);
            for (std::size_t i = 0; i < n; ++i) {
                double acc = 0.0;
                for (std::size_t j = 0; j < n; ++j) acc += H[i * n + j] * ydiff[j];
                Hy[i] = acc;
            }
            double yHy = 0.0;
            for (std::size_t i = 0; i < n; ++i) yHy += ydiff[i] * Hy[i];
            const double c1 = (sy + yHy) / (sy * sy);
            for (std::size_t i = 0; i < n; ++i) {
                for (std::size_t j = 0; j < n; ++j) {
                    H[i * n + j] += c1 * s[i] * s[j] - (Hy[i] * s[j] + s[i] * Hy[j]) / sy;
                }
            }
        }
    }
    res.value = fx;
    res.grad_inf_norm = inf_norm(g);
    res.evaluations = evals;
    if (!res.converged) res.converged = res.grad_inf_norm < opts.grad_tol;
    return res;
}

}  // namespace abtrace
