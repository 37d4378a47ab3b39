#pragma once

#include <cstdint>
#include <functional>

#include <Eigen/Core>

namespace ctxcausal {

// Log density with gradient on the unconstrained scale.
using LogDensityGrad = std::function<double(const Eigen::VectorXd&, Eigen::VectorXd&)>;

struct NutsOptions {
    int iterations = 2000;
    int warmup = 1000;
    int max_depth = 10;
    double target_accept = 0.8;
    std::uint64_t seed = 0;
    Eigen::VectorXd init;
};

struct ChainResult {
    Eigen::MatrixXd draws;  // (iterations - warmup) x dim, unconstrained
    Eigen::VectorXd logp;
    int divergences = 0;
    double mean_accept = 0.0;
    double mean_treedepth = 0.0;
    double step_size = 0.0;
    Eigen::VectorXd inv_metric;
};

// No-U-turn sampler with dual-averaging step size adaptation and windowed
// diagonal metric estimation during warmup.
ChainResult run_nuts(const LogDensityGrad& target, const NutsOptions& options);

}  // namespace ctxcausal
