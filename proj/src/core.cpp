#include "abtrace/core.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace abtrace {

namespace {
constexpr double kLn10 = 2.302585092994045684;

void check_finite(double x, const char* what) {
    if (!std::isfinite(x)) {
        throw std::invalid_argument(std::string(what) + " must be finite");
    }
}
}  // namespace

ResponsePanel::ResponsePanel(std::vector<RespondentSequence> respondents)
    : respondents_(std::move(respondents)) {
    for (const auto& r : respondents_) {
        int expected = 1;
        for (const auto& resp : r.responses) {
            if (resp.iteration != expected) {
                throw std::invalid_argument(
                    "respondent '" + r.respondent_id + "': iteration " +
                    std::to_string(resp.iteration) + " out of order or gapped (expected " +
                    std::to_string(expected) + ")");
            }
            if (!std::isfinite(resp.difficulty)) {
                throw std::invalid_argument(
                    "respondent '" + r.respondent_id + "': non-finite difficulty at iteration " +
                    std::to_string(resp.iteration));
            }
            if (resp.outcome != 0 && resp.outcome != 1) {
                throw std::invalid_argument(
                    "respondent '" + r.respondent_id + "': outcome must be 0 or 1 at iteration " +
                    std::to_string(resp.iteration));
            }
            ++expected;
        }
        n_iterations_ = std::max(n_iterations_, static_cast<int>(r.responses.size()));
    }
}

std::size_t ResponsePanel::n_responses() const {
    std::size_t n = 0;
    for (const auto& r : respondents_) n += r.responses.size();
    return n;
}

bool ResponsePanel::is_balanced() const {
    for (const auto& r : respondents_) {
        if (static_cast<int>(r.responses.size()) != n_iterations_) return false;
    }
    return true;
}

void ResponsePanel::require_balanced(const char* context) const {
    if (!is_balanced()) {
        throw std::invalid_argument(std::string(context) +
                                    " requires a balanced panel (every respondent answers "
                                    "iterations 1..n_iterations)");
    }
}

double rasch_probability(double theta, double d) {
    check_finite(theta, "theta");
    check_finite(d, "d");
    const double x = theta - d;
    // Branch on sign so exp never overflows.
    if (x >= 0.0) {
        return 1.0 / (1.0 + std::exp(-x));
    }
    const double e = std::exp(x);
    return e / (1.0 + e);
}

double rating_to_theta(double rating) {
    check_finite(rating, "rating");
    return (rating - 1500.0) / 400.0 * kLn10;
}

double theta_to_rating(double theta) {
    check_finite(theta, "theta");
    return 1500.0 + 400.0 * theta / kLn10;
}

double softplus(double x) {
    if (x > 36.0) return x;               // e^-x below double epsilon
    if (x < -745.0) return 0.0;
    return std::log1p(std::exp(x));
}

}  // namespace abtrace
