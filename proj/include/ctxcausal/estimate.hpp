#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "ctxcausal/dataset.hpp"
#include "ctxcausal/diagnostics.hpp"
#include "ctxcausal/model.hpp"

namespace ctxcausal {

struct PosteriorDraws {
    std::vector<std::string> names;  // constrained parameter names
    Eigen::MatrixXd draws;           // B x names
    Eigen::VectorXd lp;
    Encoding encoding;
    int chains = 0;
    int draws_per_chain = 0;
    std::string context_level;
    std::uint64_t seed = 0;

    Eigen::Index b() const { return draws.rows(); }
    int col(const std::string& name) const;  // -1 when absent
    int require_col(const std::string& name) const;
    ParamView view(Eigen::Index draw) const;
};

struct FitResult {
    PosteriorDraws draws;
    FitDiagnostics diagnostics;
};

FitResult fit(const ModelSpec& spec, const Dataset& data, std::uint64_t seed);

struct EffectEstimate {
    double point = 0.0;
    double ci_lower = 0.0;
    double ci_upper = 0.0;
    Eigen::VectorXd per_draw;
};

// Plug-in counterfactual difference for extending the treatment one level
// from x, averaged over the factual stratum with weights renormalized within
// the stratum; the summary is the posterior mean with central 95% interval.
EffectEstimate counterfactual_difference(const PosteriorDraws& draws, const Dataset& data, int x,
                                         const std::string& context_level);

// Per-draw expected outcomes mu_i(theta_b) for every row; used by the
// sensitivity module's residual computations.
Eigen::MatrixXd posterior_means(const PosteriorDraws& draws, const Dataset& data);

struct AceRow {
    std::string context;
    int x = 0;
    double ace = 0.0;
    double ci_lower = 0.0;
    double ci_upper = 0.0;
    std::string note;  // nonempty when the stratum was unusable
};

struct AceTable {
    std::vector<AceRow> rows;
    CsvTable to_csv(const std::vector<std::string>& comments = {}) const;
};

AceTable ace_table(const std::vector<std::pair<const PosteriorDraws*, const Dataset*>>& fits,
                   const std::vector<std::string>& context_labels);

// Percentile with linear interpolation between order statistics.
double quantile(Eigen::VectorXd values, double prob);

void write_draws_csv(const std::string& path, const PosteriorDraws& draws,
                     const std::vector<std::string>& comments);
PosteriorDraws read_draws_csv(const std::string& path, const Encoding& encoding);

}  // namespace ctxcausal
