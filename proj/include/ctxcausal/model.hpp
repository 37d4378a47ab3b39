#pragma once

#include <string>
#include <vector>

#include <Eigen/Core>

#include "ctxcausal/dataset.hpp"

namespace ctxcausal {

// Monotonic ordinal transform: mo(x, zeta) = sum of the first x-1 simplex
// increments; mo(1) = 0 and mo(x_max) = 1 with x_max = zeta.size() + 1.
double mo(int x, const Eigen::VectorXd& zeta);

// Simplex via stick breaking; returns log|Jacobian|.
double stick_breaking(const Eigen::VectorXd& raw, Eigen::VectorXd& zeta);
Eigen::VectorXd stick_breaking_inverse(const Eigen::VectorXd& zeta);

// Constrained parameter view of one draw.
struct ParamView {
    Eigen::VectorXd coefs;   // design coefficients, intercept first
    double mono_coef = 0.0;  // a
    Eigen::VectorXd zeta;    // simplex, length x_max - 1
    Eigen::VectorXd u;       // group intercepts (sigma_u * raw)
    double sigma_u = 0.0;
    double shape = 1.0;
};

// Gamma log-link regression with a monotonic ordinal treatment effect and
// non-centered group intercepts. Works on the unconstrained scale; the
// likelihood is unweighted (weights enter only downstream estimators).
class GammaRegressionModel {
public:
    GammaRegressionModel(const DesignMatrix& design, const PriorSettings& priors);

    int dim() const { return dim_; }
    Eigen::Index n() const { return design_.y.size(); }
    int n_coefs() const { return static_cast<int>(design_.X.cols()); }
    int n_zeta() const { return monotonic_ ? design_.encoding.x_max - 1 : 0; }
    int n_groups() const { return has_group_ ? static_cast<int>(design_.encoding.group_levels.size()) : 0; }

    // Log posterior density on the unconstrained scale, with transform
    // Jacobians included; fills the analytic gradient when grad != nullptr.
    double log_posterior(const Eigen::VectorXd& q, Eigen::VectorXd* grad) const;

    ParamView unpack(const Eigen::VectorXd& q) const;

    // Names of the constrained parameters reported per draw.
    std::vector<std::string> parameter_names() const;
    Eigen::VectorXd constrained(const Eigen::VectorXd& q) const;

    // Linear predictor for one design row at treatment level x.
    static double linear_predictor(const ParamView& p, const Eigen::RowVectorXd& row, int x,
                                   int group_index);

    const DesignMatrix& design() const { return design_; }
    const PriorSettings& priors() const { return priors_; }
    bool monotonic() const { return monotonic_; }
    bool has_group() const { return has_group_; }

private:
    DesignMatrix design_;
    PriorSettings priors_;
    bool monotonic_;
    bool has_group_;
    int dim_;
    Eigen::VectorXd prior_sd_;
};

}  // namespace ctxcausal
