#pragma once

#include <set>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "json.hpp"

#include "ctxcausal/csv.hpp"

namespace ctxcausal {

struct PriorSettings {
    double coef_sd = 0.5;
    double intercept_sd = 2.0;
    double sd_df = 3.0;        // half-t prior on the group sd
    double sd_scale = 1.0;
    double simplex_conc = 2.0;  // Dirichlet concentration on the simplex
    double shape_df = 3.0;      // half-t prior on the gamma shape
    double shape_scale = 5.0;
};

struct SamplerSettings {
    int chains = 4;
    int iterations = 2000;
    int warmup = 1000;
    int max_depth = 10;
    double target_accept = 0.8;
};

struct ModelSpec {
    std::string context_level;
    std::string outcome_column;
    std::string treatment_column;
    int x_max = 15;
    std::string purpose_column;  // sub-purpose categories; empty to omit
    std::string group_column;    // random-intercept grouping; empty to omit
    std::vector<std::string> covariates;
    std::set<std::string> numeric_covariates;
    std::string weight_column;  // empty -> unit weights
    bool monotonic = true;
    PriorSettings priors;
    SamplerSettings sampler;

    static ModelSpec from_json(const nlohmann::json& j);
    nlohmann::json to_json() const;
};

// Estimation-ready slice of one context's survey data.
struct Dataset {
    struct Covariate {
        std::string name;
        bool numeric = false;
        std::vector<std::string> cat;  // categorical values
        Eigen::VectorXd num;           // numeric values
    };

    std::string context_level;
    Eigen::VectorXd outcome;    // positive
    Eigen::VectorXi treatment;  // 1..x_max
    std::vector<std::string> purpose;  // empty when unused
    std::vector<Covariate> covariates;
    std::vector<std::string> group;  // empty when unused
    Eigen::VectorXd weight;

    Eigen::Index n() const { return outcome.size(); }
};

Dataset dataset_from_csv(const CsvTable& table, const ModelSpec& spec);
Dataset load_dataset(const std::string& path, const ModelSpec& spec);

// One-hot design with most-frequent reference levels; reproducible from the
// same data and spec.
struct Encoding {
    struct CatColumn {
        std::string column;               // "purpose" uses the purpose column name
        std::vector<std::string> levels;  // sorted
        int reference = 0;
    };
    std::vector<std::string> design_names;  // alpha first
    std::vector<double> prior_sd;
    std::vector<CatColumn> categorical;
    std::vector<std::string> numeric_columns;
    std::vector<std::string> group_levels;  // sorted
    int x_max = 15;
    bool monotonic = true;
    bool has_group = false;

    nlohmann::json to_json() const;
    static Encoding from_json(const nlohmann::json& j);
};

struct DesignMatrix {
    Encoding encoding;
    Eigen::MatrixXd X;          // n x p, intercept in column 0
    Eigen::VectorXi group_idx;  // -1 when no group
    Eigen::VectorXi x;
    Eigen::VectorXd y;
    Eigen::VectorXd w;
};

DesignMatrix build_design(const Dataset& data, const ModelSpec& spec);

// Design rows for a subset of observations under an existing encoding;
// unseen group levels map to index -1 (population-level prediction).
Eigen::MatrixXd encode_rows(const Dataset& data, const Encoding& enc,
                            const std::vector<Eigen::Index>& rows, Eigen::VectorXi* group_idx);

}  // namespace ctxcausal
