#pragma once

#include <string>
#include <vector>

#include <Eigen/Core>

#include "json.hpp"

namespace ctxcausal {

struct ParamDiagnostics {
    double rhat = 1.0;
    double ess_bulk = 0.0;
};

// Split rank-normalized R-hat and bulk effective sample size for one scalar
// parameter observed across chains of equal length.
ParamDiagnostics split_rhat_ess(const std::vector<Eigen::VectorXd>& chains);

struct ChainStats {
    int divergences = 0;
    double mean_accept = 0.0;
    double mean_treedepth = 0.0;
    double step_size = 0.0;
};

struct FitDiagnostics {
    std::vector<std::string> names;
    std::vector<ParamDiagnostics> per_param;
    std::vector<ChainStats> chains;
    std::string sampler = "nuts";

    double max_rhat() const;
    double min_ess() const;
    nlohmann::json to_json() const;
};

}  // namespace ctxcausal
