#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"

#include "ctxcausal/ldag.hpp"
#include "ctxcausal/prob_table.hpp"

namespace ctxcausal {

// Conditional probability table over the node's all-context parent set. Rows
// are indexed mixed-radix in parent order; in a context where an inbound edge
// is absent the row must not depend on that parent (validated by probes).
struct DiscreteCpt {
    std::vector<std::string> levels;
    std::vector<double> level_values;  // optional numeric coding
    std::vector<std::string> parents;
    std::vector<std::vector<double>> rows;
};

// Positive continuous mechanism: mean exp(intercept + sum of per-level parent
// effects), noise Gamma(shape, 1) scaled to the mean.
struct GammaLogLink {
    double intercept = 0.0;
    double shape = 1.0;
    std::vector<std::string> parents;
    std::map<std::string, std::vector<double>> effects;  // parent -> per-level shift
};

struct NormalLinear {
    double intercept = 0.0;
    double sd = 1.0;
    std::vector<std::string> parents;
    std::map<std::string, std::vector<double>> effects;
};

using Mechanism = std::variant<DiscreteCpt, GammaLogLink, NormalLinear>;

struct ScmSpec {
    Ldag graph;
    std::map<std::string, Mechanism> mechanisms;

    const Mechanism& mechanism(const std::string& node) const;
    bool is_discrete(const std::string& node) const;
    const std::vector<std::string>& levels(const std::string& node) const;
};

// Simulated rectangular dataset; discrete values are stored as level indices.
struct SimDataset {
    struct Column {
        std::string name;
        std::vector<std::string> levels;  // empty for continuous columns
        std::vector<double> data;
    };
    std::vector<Column> columns;
    std::size_t n = 0;
    std::uint64_t seed = 0;

    const Column& column(const std::string& name) const;
    std::string cell_text(const Column& col, std::size_t row) const;
};

// Raises on any violated mechanism invariant (row sums, parent sets, context
// consistency probes, continuous non-sinks).
void validate_scm(const ScmSpec& scm);

SimDataset simulate_observational(const ScmSpec& scm, std::size_t n, std::uint64_t seed,
                                  bool include_latents = false);

// Exact joint over all nodes (latents included) by enumeration.
JointTable exact_joint(const ScmSpec& scm);

// Mutilated SCM: the node's mechanism becomes the constant `level` and its
// inbound edges are removed in every context.
ScmSpec oracle_interventional(const ScmSpec& scm, const std::string& node,
                              const std::string& level);

struct CounterfactualOracle {
    double delta = 0.0;
    double std_error = 0.0;
    std::size_t stratum_size = 0;
};

// Ground truth for the one-step counterfactual difference: simulates n units,
// keeps those with treatment==x and context==m, replays each with the
// treatment forced to x_cf (the next level up by default) while holding all
// exogenous noise fixed.
CounterfactualOracle oracle_counterfactual_difference(
    const ScmSpec& scm, const std::string& treatment, const std::string& x,
    const std::string& context_var, const std::string& m, const std::string& outcome,
    std::size_t n, std::uint64_t seed, const std::string& x_cf = "");

// Random strictly-positive CPTs consistent with the graph's context-specific
// structure; level counts default to 2.
ScmSpec random_discrete_scm(const Ldag& graph, std::uint64_t seed,
                            const std::map<std::string, int>& level_counts = {});

ScmSpec scm_from_json(const nlohmann::json& spec, const std::string& base_dir = "");
ScmSpec load_scm(const std::string& path);
nlohmann::json scm_to_json(const ScmSpec& scm);

// Travel-shaped benchmark SCM over graphs/travel_synthetic.ldag: discrete
// planning blocks, a gamma expenditure mechanism with a known monotonic
// night effect, and country intercepts. Used by the synthetic end-to-end
// checks and shipped as configs/synthetic_scm.json.
ScmSpec synthetic_travel_scm(const Ldag& graph);

void write_sim_csv(const std::string& path, const SimDataset& data, const ScmSpec& scm,
                   bool include_latents, const std::vector<std::string>& comments);

}  // namespace ctxcausal
