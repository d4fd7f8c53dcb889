#pragma once

#include <cstddef>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace abtrace {

/// Raised when an optimizer exhausts its budget; carries the best point seen.
class OptimError : public std::runtime_error {
public:
    OptimError(const std::string& msg, std::vector<double> best_point, double best_value,
               std::size_t evaluations)
        : std::runtime_error(msg),
          best_point(std::move(best_point)),
          best_value(best_value),
          evaluations(evaluations) {}

    std::vector<double> best_point;
    double best_value;
    std::size_t evaluations;
};

/// Maximize a unimodal function on [lo, hi]; returns the abscissa.
double golden_section_max(const std::function<double(double)>& f, double lo, double hi,
                          double xtol = 1e-8);

struct NelderMeadResult {
    std::vector<double> x;
    double value = 0.0;
    std::size_t evaluations = 0;
    bool converged = false;
};

/// Downhill simplex minimization. Converged when the simplex diameter
/// (inf-norm around the best vertex) drops below diam_tol.
NelderMeadResult nelder_mead_min(const std::function<double(const std::vector<double>&)>& f,
                                 const std::vector<double>& x0,
                                 const std::vector<double>& initial_step,
                                 double diam_tol = 1e-6, std::size_t max_evals = 2000);

struct BfgsOptions {
    double grad_tol = 1e-5;     // inf-norm of the central-difference gradient
    double fd_step = 1e-5;
    std::size_t max_iterations = 500;
};

struct BfgsResult {
    std::vector<double> x;
    double value = 0.0;
    double grad_inf_norm = 0.0;
    std::size_t iterations = 0;
    std::size_t evaluations = 0;
    bool converged = false;
};

/// Quasi-Newton minimization with finite-difference gradients.
BfgsResult bfgs_min(const std::function<double(const std::vector<double>&)>& f,
                    const std::vector<double>& x0, const BfgsOptions& opts = {});

}  // namespace abtrace
