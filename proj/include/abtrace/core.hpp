#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace abtrace {

/// One scored response: item difficulty on the theta scale and a 0/1 outcome.
/// Knowledge-component tags are optional and only used by LFA/PFA.
struct Response {
    int iteration = 0;    // 1-based position in the respondent's sequence
    double difficulty = 0.0;
    int outcome = 0;      // 1 correct, 0 incorrect
    std::vector<std::string> components;
};

struct RespondentSequence {
    std::string respondent_id;
    std::vector<Response> responses;   // ordered by iteration
};

/// Per-respondent response sequences. Construction validates that each
/// sequence runs 1..len with no gaps; balance across respondents is a
/// separate requirement imposed only on training data.
class ResponsePanel {
public:
    ResponsePanel() = default;
    explicit ResponsePanel(std::vector<RespondentSequence> respondents);

    const std::vector<RespondentSequence>& respondents() const { return respondents_; }
    std::size_t n_respondents() const { return respondents_.size(); }
    int n_iterations() const { return n_iterations_; }
    std::size_t n_responses() const;

    bool is_balanced() const;
    void require_balanced(const char* context) const;

private:
    std::vector<RespondentSequence> respondents_;
    int n_iterations_ = 0;
};

struct AbilityEstimate {
    std::string respondent_id;
    int iteration = 0;
    double theta_hat = 0.0;
};

/// Rasch success probability e^(theta-d) / (1 + e^(theta-d)).
double rasch_probability(double theta, double d);

/// Elo rating scale -> theta scale: (R - 1500)/400 * ln 10.
double rating_to_theta(double rating);

/// Inverse of rating_to_theta.
double theta_to_rating(double theta);

/// log(1 + e^x) without overflow.
double softplus(double x);

}  // namespace abtrace
