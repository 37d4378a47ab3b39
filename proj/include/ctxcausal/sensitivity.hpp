#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "json.hpp"

#include "ctxcausal/estimate.hpp"

namespace ctxcausal {

// Prior for a residual correlation with the unmeasured income variable,
// stated on the correlation scale and realized through a Fisher-z normal.
struct CorrelationPrior {
    enum class Target { IncomeTreatment, IncomeOutcome };
    double mean = 0.0;   // -1 < mean < 1
    double sd = 0.0;     // correlation-scale spread; 0 is a point mass
    Target target = Target::IncomeTreatment;
    std::string context;
};

// Normal parameters on the Fisher-z scale whose tanh image has the requested
// correlation-scale mean and sd.
struct ZScaleParams {
    double mean = 0.0;
    double sd = 0.0;
};
ZScaleParams match_correlation_prior(double mean, double sd);

Eigen::VectorXd sample_correlation(const CorrelationPrior& prior, std::uint64_t seed,
                                   Eigen::Index count);

// Per-draw standard deviation of the response-scale residuals y_i - mu_i(b).
Eigen::VectorXd residual_sd(const PosteriorDraws& draws, const Dataset& data);

// Named per-model views of the same computation.
inline Eigen::VectorXd outcome_residual_sd(const PosteriorDraws& draws, const Dataset& data) {
    return residual_sd(draws, data);
}
inline Eigen::VectorXd treatment_residual_sd(const PosteriorDraws& draws, const Dataset& data) {
    return residual_sd(draws, data);
}

// Omitted-variable bias from residual correlations and residual sds; the sd
// ratio sits outside the square root so the bias carries the outcome's units.
double ovb_bias(double r_outcome, double r_treatment, double sd_outcome_resid,
                double sd_treatment_resid);

struct BiasDraws {
    Eigen::VectorXd r_treatment;  // corr(I, X) draws
    Eigen::VectorXd r_outcome;    // corr(I, Y) draws
    Eigen::VectorXd sd_treatment;
    Eigen::VectorXd sd_outcome;
    Eigen::VectorXd bias;

    Eigen::Index b() const { return bias.size(); }
};

BiasDraws compute_bias_draws(const PosteriorDraws& outcome_draws, const Dataset& outcome_data,
                             const PosteriorDraws& treatment_draws, const Dataset& treatment_data,
                             const CorrelationPrior& treatment_prior,
                             const CorrelationPrior& outcome_prior, std::uint64_t seed);

// ACE table with the draw-wise additive bias applied to every increment.
AceTable adjusted_ace(const std::vector<std::pair<const PosteriorDraws*, const Dataset*>>& fits,
                      const std::vector<const BiasDraws*>& biases,
                      const std::vector<std::string>& context_labels);

struct Histogram {
    std::vector<double> edges;
    std::vector<std::size_t> counts;
    nlohmann::json to_json() const;
};
Histogram histogram(const Eigen::VectorXd& values, int bins = 40);

CsvTable bias_draws_csv(const BiasDraws& draws, const std::vector<std::string>& comments);

}  // namespace ctxcausal
