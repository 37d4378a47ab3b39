#pragma once

#include <functional>
#include <set>
#include <string>
#include <vector>

#include "ctxcausal/ldag.hpp"
#include "ctxcausal/rng.hpp"
#include "ctxcausal/scm.hpp"

namespace testutil {

inline std::string fixture(const std::string& rel) {
    return std::string(CTXCAUSAL_SOURCE_DIR) + "/" + rel;
}

// Brute-force d-separation oracle: enumerates every simple trail between the
// two sets and applies the blocking rules directly. Exponential, test-only.
inline bool dsep_by_paths(const ctxcausal::Dag& dag, const std::set<std::string>& a,
                          const std::set<std::string>& b, const std::set<std::string>& z) {
    using namespace ctxcausal;
    const auto parents = dag.parents();
    const auto children = dag.children();
    std::set<int> zi, bi;
    for (const auto& s : z) zi.insert(dag.require_index(s));
    for (const auto& s : b) bi.insert(dag.require_index(s));
    std::set<int> z_an = zi;
    {
        std::vector<int> stack(zi.begin(), zi.end());
        while (!stack.empty()) {
            const int v = stack.back();
            stack.pop_back();
            for (int p : parents[v]) {
                if (z_an.insert(p).second) stack.push_back(p);
            }
        }
    }

    // trail[i].arrow_in: the edge between trail[i-1] and trail[i] points into
    // trail[i].
    struct Step {
        int node;
        bool arrow_in;
    };
    std::vector<Step> trail;
    std::vector<bool> on_trail(dag.nodes.size(), false);
    bool connected = false;

    auto trail_open = [&]() {
        for (std::size_t i = 1; i + 1 < trail.size(); ++i) {
            const bool into_cur = trail[i].arrow_in;
            const bool into_cur_from_next = !trail[i + 1].arrow_in;
            const bool collider = into_cur && into_cur_from_next;
            const int node = trail[i].node;
            if (collider) {
                if (!z_an.count(node)) return false;
            } else {
                if (zi.count(node)) return false;
            }
        }
        return true;
    };

    std::function<void(int)> dfs = [&](int v) {
        if (connected) return;
        if (bi.count(v) && trail.size() > 1 && trail_open()) {
            connected = true;
            return;
        }
        auto visit = [&](int next, bool arrow_in) {
            if (connected || on_trail[next]) return;
            on_trail[next] = true;
            trail.push_back({next, arrow_in});
            dfs(next);
            trail.pop_back();
            on_trail[next] = false;
        };
        for (int c : children[v]) visit(c, true);
        for (int p : parents[v]) visit(p, false);
    };

    for (const auto& s : a) {
        const int start = dag.require_index(s);
        on_trail.assign(dag.nodes.size(), false);
        on_trail[start] = true;
        trail = {{start, false}};
        dfs(start);
        if (connected) return false;
    }
    return true;
}

// Random DAG over n nodes with the natural order topological.
inline ctxcausal::Dag random_dag(int n, double edge_prob, ctxcausal::Rng& rng) {
    ctxcausal::Dag dag;
    for (int i = 0; i < n; ++i) {
        dag.nodes.push_back({"n" + std::to_string(i), ctxcausal::NodeKind::Observed, {}});
    }
    for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) {
            if (rng.uniform01() < edge_prob) dag.edges.emplace_back(i, j);
        }
    }
    return dag;
}

// Five-node demonstration SCM over graphs/toy_csi.ldag with fixed CPTs:
// strong confounding at M=0 and a strong treatment->mediator edge at M=1.
inline ctxcausal::ScmSpec toy_csi_scm() {
    using namespace ctxcausal;
    ScmSpec scm;
    scm.graph = parse_ldag_file(fixture("graphs/toy_csi.ldag"));
    const std::vector<std::string> binary = {"0", "1"};

    DiscreteCpt m;
    m.levels = binary;
    m.rows = {{0.5, 0.5}};
    scm.mechanisms["M"] = m;

    DiscreteCpt u;
    u.levels = binary;
    u.rows = {{0.5, 0.5}};
    scm.mechanisms["U"] = u;

    // Parent order is sorted: X | M, U.  At M=1 the U column must not matter.
    DiscreteCpt x;
    x.levels = binary;
    x.parents = {"M", "U"};
    x.rows = {{0.8, 0.2}, {0.3, 0.7}, {0.4, 0.6}, {0.4, 0.6}};
    scm.mechanisms["X"] = x;

    // Z | M, U, X: ignores X at M=0 and ignores U at M=1.
    DiscreteCpt z;
    z.levels = binary;
    z.parents = {"M", "U", "X"};
    z.rows = {{0.75, 0.25}, {0.75, 0.25}, {0.25, 0.75}, {0.25, 0.75},
              {0.85, 0.15}, {0.25, 0.75}, {0.85, 0.15}, {0.25, 0.75}};
    scm.mechanisms["Z"] = z;

    DiscreteCpt y;  // Y | X, Z
    y.levels = binary;
    y.parents = {"X", "Z"};
    y.rows = {{0.9, 0.1}, {0.5, 0.5}, {0.6, 0.4}, {0.2, 0.8}};
    scm.mechanisms["Y"] = y;

    validate_scm(scm);
    return scm;
}

// Ground-truth parameters for the synthetic gamma-regression dataset.
struct GlmTruth {
    double alpha = 4.0;
    double mono_coef = 0.5;
    Eigen::VectorXd zeta;                      // x_max - 1 increments
    std::map<std::string, std::vector<double>> cat_effects;  // per-level shifts
    double numeric_coef = 0.15;
    std::vector<double> country_effects;
    double shape = 3.0;
    int x_max = 8;
};

// Draws a dataset straight from the regression model: categorical covariates
// c1 (3 levels) and c2 (2 levels), numeric covariate c3, five countries and a
// monotonic night effect.
inline ctxcausal::Dataset make_glm_dataset(std::size_t n, std::uint64_t seed, GlmTruth& truth) {
    using namespace ctxcausal;
    truth.zeta = Eigen::VectorXd(7);
    truth.zeta << 0.3, 0.2, 0.15, 0.12, 0.1, 0.08, 0.05;
    truth.cat_effects["c1"] = {0.0, 0.3, -0.2};
    truth.cat_effects["c2"] = {0.0, 0.25};
    truth.country_effects = {0.2, -0.15, 0.05, -0.2, 0.1};

    Dataset data;
    data.context_level = "0";
    data.outcome.resize(n);
    data.treatment.resize(n);
    data.weight = Eigen::VectorXd::Ones(n);
    data.group.resize(n);
    Dataset::Covariate c1{"c1", false, {}, {}};
    Dataset::Covariate c2{"c2", false, {}, {}};
    Dataset::Covariate c3{"c3", true, {}, Eigen::VectorXd(n)};
    c1.cat.resize(n);
    c2.cat.resize(n);

    Rng rng(seed);
    const std::vector<std::string> c1_levels = {"a", "b", "c"};
    const std::vector<std::string> c2_levels = {"no", "yes"};
    const std::vector<std::string> countries = {"AT", "DE", "FI", "SE", "US"};
    for (std::size_t i = 0; i < n; ++i) {
        const int x = 1 + rng.uniform_int(truth.x_max);
        const int l1 = rng.uniform_int(3);
        const int l2 = rng.uniform_int(2);
        const int country = rng.uniform_int(5);
        const double numeric = rng.normal();
        data.treatment[i] = x;
        c1.cat[i] = c1_levels[l1];
        c2.cat[i] = c2_levels[l2];
        c3.num[i] = numeric;
        data.group[i] = countries[country];

        double mo_x = 0.0;
        for (int k = 0; k < x - 1; ++k) mo_x += truth.zeta[k];
        const double eta = truth.alpha + truth.cat_effects["c1"][l1] +
                           truth.cat_effects["c2"][l2] + truth.numeric_coef * numeric +
                           truth.country_effects[country] + truth.mono_coef * mo_x;
        data.outcome[i] = std::exp(eta) / truth.shape * rng.gamma(truth.shape);
    }
    data.covariates = {c1, c2, c3};
    return data;
}

inline ctxcausal::ModelSpec glm_model_spec(const GlmTruth& truth) {
    ctxcausal::ModelSpec spec;
    spec.context_level = "0";
    spec.outcome_column = "y";
    spec.treatment_column = "x";
    spec.x_max = truth.x_max;
    spec.group_column = "country";
    spec.covariates = {"c1", "c2", "c3"};
    spec.numeric_covariates = {"c3"};
    spec.monotonic = true;
    return spec;
}

}  // namespace testutil
