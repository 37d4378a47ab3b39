#include "ctxcausal/scm.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "ctxcausal/csv.hpp"
#include "ctxcausal/rng.hpp"

namespace ctxcausal {

namespace {

struct NodeInfo {
    int index = 0;
    std::vector<int> parent_indices;       // into topo node list
    std::vector<std::string> parent_names;
};

const std::vector<std::string>& mech_parents(const Mechanism& m) {
    return std::visit([](const auto& mm) -> const std::vector<std::string>& { return mm.parents; },
                      m);
}

// Union-graph scaffolding: topological order plus per-node parent lists in
// mechanism order.
struct Scaffold {
    std::vector<std::string> order;              // node names, topological
    std::map<std::string, NodeInfo> info;
    std::map<std::string, int> order_index;
};

Scaffold build_scaffold(const ScmSpec& scm) {
    const Dag dag = as_dag(scm.graph);
    const auto topo = dag.topological_order();
    if (!topo) {
        throw std::runtime_error("the all-context union graph must be acyclic for simulation");
    }
    Scaffold s;
    for (int idx : *topo) s.order.push_back(dag.nodes[idx].name);
    for (std::size_t i = 0; i < s.order.size(); ++i) s.order_index[s.order[i]] = static_cast<int>(i);
    for (const auto& name : s.order) {
        const auto it = scm.mechanisms.find(name);
        if (it == scm.mechanisms.end()) {
            throw std::runtime_error("no mechanism for node " + name);
        }
        NodeInfo info;
        info.index = s.order_index[name];
        info.parent_names = mech_parents(it->second);
        for (const auto& p : info.parent_names) {
            const auto pit = s.order_index.find(p);
            if (pit == s.order_index.end()) {
                throw std::runtime_error("mechanism of " + name + " references unknown parent " + p);
            }
            info.parent_indices.push_back(pit->second);
        }
        s.info[name] = std::move(info);
    }
    return s;
}

std::size_t row_index(const DiscreteCpt& cpt, const Scaffold& s, const ScmSpec& scm,
                      const std::string& node, const std::vector<double>& values) {
    std::size_t idx = 0;
    const auto& info = s.info.at(node);
    for (std::size_t k = 0; k < cpt.parents.size(); ++k) {
        const auto& levels = scm.levels(cpt.parents[k]);
        idx = idx * levels.size() + static_cast<std::size_t>(values[info.parent_indices[k]]);
    }
    return idx;
}

double sample_node(const ScmSpec& scm, const Scaffold& s, const std::string& node,
                   const std::vector<double>& values, Rng& rng) {
    const Mechanism& mech = scm.mechanism(node);
    if (const auto* cpt = std::get_if<DiscreteCpt>(&mech)) {
        const auto& row = cpt->rows.at(row_index(*cpt, s, scm, node, values));
        const double u = rng.uniform01();
        double acc = 0.0;
        for (std::size_t level = 0; level < row.size(); ++level) {
            acc += row[level];
            if (u < acc) return static_cast<double>(level);
        }
        return static_cast<double>(row.size() - 1);
    }
    const auto& info = s.info.at(node);
    auto linear = [&](double intercept, const std::map<std::string, std::vector<double>>& effects,
                      const std::vector<std::string>& parents) {
        double eta = intercept;
        for (std::size_t k = 0; k < parents.size(); ++k) {
            const auto& shift = effects.at(parents[k]);
            eta += shift.at(static_cast<std::size_t>(values[info.parent_indices[k]]));
        }
        return eta;
    };
    if (const auto* gm = std::get_if<GammaLogLink>(&mech)) {
        const double mu = std::exp(linear(gm->intercept, gm->effects, gm->parents));
        return mu / gm->shape * rng.gamma(gm->shape);
    }
    const auto& nm = std::get<NormalLinear>(mech);
    return linear(nm.intercept, nm.effects, nm.parents) + nm.sd * rng.normal();
}

// One full ancestral pass for a unit; forced nodes override their mechanism.
void simulate_unit(const ScmSpec& scm, const Scaffold& s, std::uint64_t seed, std::size_t unit,
                   const std::map<std::string, double>& forced, std::vector<double>& values) {
    for (std::size_t i = 0; i < s.order.size(); ++i) {
        const auto& node = s.order[i];
        const auto fit = forced.find(node);
        if (fit != forced.end()) {
            values[i] = fit->second;
            continue;
        }
        Rng rng(Rng::mix(seed, static_cast<std::uint64_t>(i), static_cast<std::uint64_t>(unit)));
        values[i] = sample_node(scm, s, node, values, rng);
    }
}

}  // namespace

const Mechanism& ScmSpec::mechanism(const std::string& node) const {
    const auto it = mechanisms.find(node);
    if (it == mechanisms.end()) throw std::runtime_error("no mechanism for node " + node);
    return it->second;
}

bool ScmSpec::is_discrete(const std::string& node) const {
    return std::holds_alternative<DiscreteCpt>(mechanism(node));
}

const std::vector<std::string>& ScmSpec::levels(const std::string& node) const {
    const auto* cpt = std::get_if<DiscreteCpt>(&mechanism(node));
    if (!cpt) throw std::runtime_error("node " + node + " is not discrete");
    return cpt->levels;
}

const SimDataset::Column& SimDataset::column(const std::string& name) const {
    for (const auto& c : columns) {
        if (c.name == name) return c;
    }
    throw std::runtime_error("dataset has no column " + name);
}

std::string SimDataset::cell_text(const Column& col, std::size_t row) const {
    if (col.levels.empty()) {
        std::ostringstream out;
        out.precision(17);
        out << col.data[row];
        return out.str();
    }
    return col.levels.at(static_cast<std::size_t>(col.data[row]));
}

void validate_scm(const ScmSpec& scm) {
    const Scaffold s = build_scaffold(scm);
    const Dag dag = as_dag(scm.graph);

    for (const auto& name : s.order) {
        const Mechanism& mech = scm.mechanism(name);

        // Mechanism parents must be exactly the union-graph parents.
        std::set<std::string> graph_parents;
        for (const auto& e : scm.graph.edges) {
            if (e.to == name) graph_parents.insert(e.from);
        }
        const auto& mp = mech_parents(mech);
        if (std::set<std::string>(mp.begin(), mp.end()) != graph_parents) {
            throw std::runtime_error("mechanism parents of " + name +
                                     " do not match the graph parents");
        }
        for (const auto& p : mp) {
            if (!scm.is_discrete(p)) {
                throw std::runtime_error("continuous node " + p +
                                         " has children; continuous mechanisms must be sinks");
            }
        }

        const auto* cpt = std::get_if<DiscreteCpt>(&mech);
        if (!cpt) {
            const auto check_effects = [&](const std::map<std::string, std::vector<double>>& eff) {
                for (const auto& p : mp) {
                    const auto it = eff.find(p);
                    if (it == eff.end() || it->second.size() != scm.levels(p).size()) {
                        throw std::runtime_error("effect vector of " + name + " on parent " + p +
                                                 " does not cover the parent levels");
                    }
                }
            };
            if (const auto* gm = std::get_if<GammaLogLink>(&mech)) {
                if (gm->shape <= 0) throw std::runtime_error("gamma shape must be positive");
                check_effects(gm->effects);
            } else {
                const auto& nm = std::get<NormalLinear>(mech);
                if (nm.sd <= 0) throw std::runtime_error("normal sd must be positive");
                check_effects(nm.effects);
            }
            continue;
        }

        std::size_t n_rows = 1;
        for (const auto& p : cpt->parents) n_rows *= scm.levels(p).size();
        if (cpt->rows.size() != n_rows) {
            throw std::runtime_error("CPT of " + name + " has " + std::to_string(cpt->rows.size()) +
                                     " rows, expected " + std::to_string(n_rows));
        }
        for (const auto& row : cpt->rows) {
            if (row.size() != cpt->levels.size()) {
                throw std::runtime_error("CPT row width mismatch for " + name);
            }
            double total = 0.0;
            for (double v : row) {
                if (v < 0.0) throw std::runtime_error("negative CPT entry for " + name);
                total += v;
            }
            if (std::abs(total - 1.0) > 1e-12) {
                throw std::runtime_error("CPT row of " + name + " sums to " + std::to_string(total));
            }
        }

        // Context probes: inside a context that removes an inbound edge, the
        // row must be invariant to the absent parent's value.
        for (const auto& e : scm.graph.edges) {
            if (e.to != name || e.absent_in.empty()) continue;
            const auto pslot =
                std::find(cpt->parents.begin(), cpt->parents.end(), e.from) - cpt->parents.begin();
            for (const auto& cond : e.absent_in) {
                const auto cslot = std::find(cpt->parents.begin(), cpt->parents.end(),
                                             cond.variable) -
                                   cpt->parents.begin();
                if (cslot == static_cast<long>(cpt->parents.size())) {
                    throw std::runtime_error("label variable " + cond.variable +
                                             " is not a parent of " + name +
                                             "; the mechanism cannot branch on it");
                }
                const int cond_level = [&] {
                    const auto& lv = scm.levels(cond.variable);
                    const auto it = std::find(lv.begin(), lv.end(), cond.level);
                    if (it == lv.end()) {
                        throw std::runtime_error("unknown level in label: " + cond.variable + "=" +
                                                 cond.level);
                    }
                    return static_cast<int>(it - lv.begin());
                }();
                // Enumerate parent configurations matching the context level.
                std::vector<std::size_t> radices;
                for (const auto& p : cpt->parents) radices.push_back(scm.levels(p).size());
                std::vector<std::size_t> config(radices.size(), 0);
                const auto flat = [&] {
                    std::size_t idx = 0;
                    for (std::size_t k = 0; k < config.size(); ++k) idx = idx * radices[k] + config[k];
                    return idx;
                };
                bool done = false;
                while (!done) {
                    if (config[cslot] == static_cast<std::size_t>(cond_level) &&
                        config[pslot] == 0) {
                        const auto base = flat();
                        auto probe = config;
                        for (std::size_t alt = 1; alt < radices[pslot]; ++alt) {
                            probe[pslot] = alt;
                            std::size_t idx = 0;
                            for (std::size_t k = 0; k < probe.size(); ++k) {
                                idx = idx * radices[k] + probe[k];
                            }
                            for (std::size_t l = 0; l < cpt->levels.size(); ++l) {
                                if (std::abs(cpt->rows[base][l] - cpt->rows[idx][l]) > 1e-12) {
                                    throw std::runtime_error(
                                        "mechanism of " + name + " depends on " + e.from +
                                        " inside context " + cond.variable + "=" + cond.level);
                                }
                            }
                        }
                    }
                    done = true;
                    for (std::size_t k = config.size(); k-- > 0;) {
                        if (++config[k] < radices[k]) {
                            done = false;
                            break;
                        }
                        config[k] = 0;
                    }
                }
            }
        }
    }
    (void)dag;
}

SimDataset simulate_observational(const ScmSpec& scm, std::size_t n, std::uint64_t seed,
                                  bool include_latents) {
    if (n < 1) throw std::invalid_argument("simulation needs n >= 1");
    validate_scm(scm);
    const Scaffold s = build_scaffold(scm);

    SimDataset data;
    data.n = n;
    data.seed = seed;
    std::vector<int> kept;
    for (std::size_t i = 0; i < s.order.size(); ++i) {
        const NodeDecl* decl = scm.graph.find_node(s.order[i]);
        if (!include_latents && decl->kind == NodeKind::Latent) continue;
        kept.push_back(static_cast<int>(i));
        SimDataset::Column col;
        col.name = s.order[i];
        if (scm.is_discrete(s.order[i])) col.levels = scm.levels(s.order[i]);
        col.data.resize(n);
        data.columns.push_back(std::move(col));
    }

    std::vector<double> values(s.order.size());
    for (std::size_t unit = 0; unit < n; ++unit) {
        simulate_unit(scm, s, seed, unit, {}, values);
        for (std::size_t c = 0; c < kept.size(); ++c) {
            data.columns[c].data[unit] = values[kept[c]];
        }
    }
    return data;
}

JointTable exact_joint(const ScmSpec& scm) {
    validate_scm(scm);
    const Scaffold s = build_scaffold(scm);

    std::vector<TableVariable> vars;
    for (const auto& name : s.order) {
        if (!scm.is_discrete(name)) {
            throw std::runtime_error("exact joint requires discrete mechanisms, node " + name +
                                     " is continuous");
        }
        const auto* cpt = std::get_if<DiscreteCpt>(&scm.mechanism(name));
        TableVariable v;
        v.name = name;
        v.levels = cpt->levels;
        v.values = cpt->level_values;
        vars.push_back(std::move(v));
    }
    JointTable table(vars);

    std::vector<double> values(s.order.size());
    for (std::size_t flat = 0; flat < table.size(); ++flat) {
        const auto config = table.config_of(flat);
        double p = 1.0;
        for (std::size_t i = 0; i < s.order.size(); ++i) values[i] = config[i];
        for (std::size_t i = 0; i < s.order.size(); ++i) {
            const auto* cpt = std::get_if<DiscreteCpt>(&scm.mechanism(s.order[i]));
            const auto& row = cpt->rows.at(row_index(*cpt, s, scm, s.order[i], values));
            p *= row[config[i]];
        }
        table.probs()[static_cast<Eigen::Index>(flat)] = p;
    }
    return table;
}

ScmSpec oracle_interventional(const ScmSpec& scm, const std::string& node,
                              const std::string& level) {
    const auto& levels = scm.levels(node);
    const auto it = std::find(levels.begin(), levels.end(), level);
    if (it == levels.end()) {
        throw std::invalid_argument("level " + level + " outside the support of " + node);
    }
    ScmSpec out = scm;
    out.graph.edges.erase(std::remove_if(out.graph.edges.begin(), out.graph.edges.end(),
                                         [&](const LabeledEdge& e) { return e.to == node; }),
                          out.graph.edges.end());
    DiscreteCpt constant;
    constant.levels = levels;
    const auto* orig = std::get_if<DiscreteCpt>(&scm.mechanism(node));
    constant.level_values = orig->level_values;
    std::vector<double> row(levels.size(), 0.0);
    row[static_cast<std::size_t>(it - levels.begin())] = 1.0;
    constant.rows = {row};
    out.mechanisms[node] = constant;
    return out;
}

CounterfactualOracle oracle_counterfactual_difference(
    const ScmSpec& scm, const std::string& treatment, const std::string& x,
    const std::string& context_var, const std::string& m, const std::string& outcome,
    std::size_t n, std::uint64_t seed, const std::string& x_cf) {
    validate_scm(scm);
    const Scaffold s = build_scaffold(scm);
    const auto& x_levels = scm.levels(treatment);
    const auto x_it = std::find(x_levels.begin(), x_levels.end(), x);
    if (x_it == x_levels.end()) {
        throw std::invalid_argument("level " + x + " outside the support of " + treatment);
    }
    double cf_idx;
    if (x_cf.empty()) {
        if (x_it + 1 == x_levels.end()) {
            throw std::invalid_argument("treatment level " + x + " has no successor level");
        }
        cf_idx = static_cast<double>(x_it - x_levels.begin()) + 1;
    } else {
        const auto cf_it = std::find(x_levels.begin(), x_levels.end(), x_cf);
        if (cf_it == x_levels.end()) {
            throw std::invalid_argument("level " + x_cf + " outside the support of " + treatment);
        }
        cf_idx = static_cast<double>(cf_it - x_levels.begin());
    }
    const double x_idx = static_cast<double>(x_it - x_levels.begin());
    const double m_idx = [&] {
        const auto& m_levels = scm.levels(context_var);
        const auto it = std::find(m_levels.begin(), m_levels.end(), m);
        if (it == m_levels.end()) {
            throw std::invalid_argument("level " + m + " outside the support of " + context_var);
        }
        return static_cast<double>(it - m_levels.begin());
    }();

    const int t_slot = s.order_index.at(treatment);
    const int m_slot = s.order_index.at(context_var);
    const int y_slot = s.order_index.at(outcome);

    double sum = 0.0, sum_sq = 0.0;
    std::size_t count = 0;
    std::vector<double> fact(s.order.size()), cf(s.order.size());
    for (std::size_t unit = 0; unit < n; ++unit) {
        simulate_unit(scm, s, seed, unit, {}, fact);
        if (fact[t_slot] != x_idx || fact[m_slot] != m_idx) continue;
        simulate_unit(scm, s, seed, unit, {{treatment, cf_idx}}, cf);
        const double diff = cf[y_slot] - fact[y_slot];
        sum += diff;
        sum_sq += diff * diff;
        ++count;
    }
    if (count == 0) {
        throw std::runtime_error("no simulated units in stratum " + treatment + "=" + x + ", " +
                                 context_var + "=" + m);
    }
    CounterfactualOracle out;
    out.stratum_size = count;
    out.delta = sum / static_cast<double>(count);
    const double var =
        count > 1 ? (sum_sq - sum * sum / static_cast<double>(count)) / (static_cast<double>(count) - 1)
                  : 0.0;
    out.std_error = std::sqrt(std::max(0.0, var) / static_cast<double>(count));
    return out;
}

ScmSpec random_discrete_scm(const Ldag& graph, std::uint64_t seed,
                            const std::map<std::string, int>& level_counts) {
    ScmSpec scm;
    scm.graph = graph;
    const Dag dag = as_dag(graph);
    const auto topo = dag.topological_order();
    if (!topo) throw std::runtime_error("union graph must be acyclic");

    std::map<std::string, std::vector<std::string>> levels;
    for (const auto& n : graph.nodes) {
        if (n.kind == NodeKind::Context) {
            levels[n.name] = n.levels;
        } else {
            const auto it = level_counts.find(n.name);
            const int k = it == level_counts.end() ? 2 : it->second;
            std::vector<std::string> lv;
            for (int i = 0; i < k; ++i) lv.push_back(std::to_string(i));
            levels[n.name] = lv;
        }
    }

    Rng rng(Rng::mix(seed, 0x5bd1e995ULL));
    for (int node_idx : *topo) {
        const auto& name = dag.nodes[node_idx].name;
        DiscreteCpt cpt;
        cpt.levels = levels[name];
        for (const auto& e : graph.edges) {
            if (e.to == name) cpt.parents.push_back(e.from);
        }
        std::sort(cpt.parents.begin(), cpt.parents.end());

        std::vector<std::size_t> radices;
        for (const auto& p : cpt.parents) radices.push_back(levels[p].size());
        std::size_t n_rows = 1;
        for (auto r : radices) n_rows *= r;

        // Inbound labels: per parent, the set of (context slot, level) pairs
        // under which that parent is ignored.
        std::map<std::string, std::vector<ContextCondition>> absent;
        for (const auto& e : graph.edges) {
            if (e.to == name && !e.absent_in.empty()) absent[e.from] = e.absent_in;
        }

        std::map<std::vector<int>, std::vector<double>> memo;
        cpt.rows.resize(n_rows);
        std::vector<std::size_t> config(radices.size(), 0);
        for (std::size_t row = 0; row < n_rows; ++row) {
            // Effective configuration: absent parents masked to -1.
            std::vector<int> eff(config.size());
            for (std::size_t k = 0; k < config.size(); ++k) {
                eff[k] = static_cast<int>(config[k]);
                const auto ait = absent.find(cpt.parents[k]);
                if (ait == absent.end()) continue;
                for (const auto& cond : ait->second) {
                    const auto cslot = std::find(cpt.parents.begin(), cpt.parents.end(),
                                                 cond.variable) -
                                       cpt.parents.begin();
                    if (cslot == static_cast<long>(cpt.parents.size())) {
                        throw std::runtime_error("label variable " + cond.variable +
                                                 " is not a parent of " + name);
                    }
                    const auto& clv = levels[cond.variable];
                    const int cl = static_cast<int>(
                        std::find(clv.begin(), clv.end(), cond.level) - clv.begin());
                    if (static_cast<int>(config[cslot]) == cl) eff[k] = -1;
                }
            }
            auto mit = memo.find(eff);
            if (mit == memo.end()) {
                std::vector<double> p(cpt.levels.size());
                double total = 0.0;
                for (auto& v : p) {
                    v = -std::log(rng.uniform_open());
                    total += v;
                }
                // Mix with uniform mass so every entry stays well positive.
                for (auto& v : p) {
                    v = 0.8 * v / total + 0.2 / static_cast<double>(p.size());
                }
                double renorm = 0.0;
                for (double v : p) renorm += v;
                for (auto& v : p) v /= renorm;
                mit = memo.emplace(eff, std::move(p)).first;
            }
            cpt.rows[row] = mit->second;

            for (std::size_t k = config.size(); k-- > 0;) {
                if (++config[k] < radices[k]) break;
                config[k] = 0;
            }
        }
        scm.mechanisms[name] = std::move(cpt);
    }
    validate_scm(scm);
    return scm;
}

// --- JSON IO ---------------------------------------------------------------

namespace {

std::vector<double> json_doubles(const nlohmann::json& j) {
    return j.get<std::vector<double>>();
}

}  // namespace

ScmSpec scm_from_json(const nlohmann::json& spec, const std::string& base_dir) {
    ScmSpec scm;
    if (spec.contains("graph_text")) {
        scm.graph = parse_ldag(spec.at("graph_text").get<std::string>());
    } else if (spec.contains("graph_file")) {
        std::string path = spec.at("graph_file").get<std::string>();
        if (!base_dir.empty() && !path.empty() && path[0] != '/') path = base_dir + "/" + path;
        scm.graph = parse_ldag_file(path);
    } else {
        throw std::runtime_error("scm spec needs graph_text or graph_file");
    }

    const auto& nodes = spec.at("nodes");
    for (auto it = nodes.begin(); it != nodes.end(); ++it) {
        const auto& body = it.value();
        const std::string kind = body.at("kind").get<std::string>();
        if (kind == "cpt") {
            DiscreteCpt cpt;
            cpt.levels = body.at("levels").get<std::vector<std::string>>();
            if (body.contains("level_values")) cpt.level_values = json_doubles(body["level_values"]);
            if (body.contains("parents")) {
                cpt.parents = body["parents"].get<std::vector<std::string>>();
            }
            for (const auto& row : body.at("table")) cpt.rows.push_back(json_doubles(row));
            scm.mechanisms[it.key()] = std::move(cpt);
        } else if (kind == "gamma" || kind == "normal") {
            std::vector<std::string> parents;
            std::map<std::string, std::vector<double>> effects;
            if (body.contains("effects")) {
                for (auto eit = body["effects"].begin(); eit != body["effects"].end(); ++eit) {
                    parents.push_back(eit.key());
                    effects[eit.key()] = json_doubles(eit.value());
                }
            }
            if (kind == "gamma") {
                GammaLogLink gm;
                gm.intercept = body.at("intercept").get<double>();
                gm.shape = body.at("shape").get<double>();
                gm.parents = parents;
                gm.effects = effects;
                scm.mechanisms[it.key()] = std::move(gm);
            } else {
                NormalLinear nm;
                nm.intercept = body.at("intercept").get<double>();
                nm.sd = body.at("sd").get<double>();
                nm.parents = parents;
                nm.effects = effects;
                scm.mechanisms[it.key()] = std::move(nm);
            }
        } else {
            throw std::runtime_error("unknown mechanism kind: " + kind);
        }
    }
    validate_scm(scm);
    return scm;
}

ScmSpec load_scm(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open scm spec: " + path);
    nlohmann::json j;
    in >> j;
    std::string dir = ".";
    const auto slash = path.find_last_of('/');
    if (slash != std::string::npos) dir = path.substr(0, slash);
    return scm_from_json(j, dir);
}

nlohmann::json scm_to_json(const ScmSpec& scm) {
    nlohmann::json nodes = nlohmann::json::object();
    for (const auto& [name, mech] : scm.mechanisms) {
        nlohmann::json body;
        if (const auto* cpt = std::get_if<DiscreteCpt>(&mech)) {
            body["kind"] = "cpt";
            body["levels"] = cpt->levels;
            if (!cpt->level_values.empty()) body["level_values"] = cpt->level_values;
            if (!cpt->parents.empty()) body["parents"] = cpt->parents;
            body["table"] = cpt->rows;
        } else if (const auto* gm = std::get_if<GammaLogLink>(&mech)) {
            body["kind"] = "gamma";
            body["intercept"] = gm->intercept;
            body["shape"] = gm->shape;
            body["effects"] = gm->effects;
        } else {
            const auto& nm = std::get<NormalLinear>(mech);
            body["kind"] = "normal";
            body["intercept"] = nm.intercept;
            body["sd"] = nm.sd;
            body["effects"] = nm.effects;
        }
        nodes[name] = std::move(body);
    }
    return {{"graph_text", serialize_ldag(scm.graph)}, {"nodes", nodes}};
}

namespace {

// Enumerates full parent configurations and fills CPT rows from a probability
// function of the named parent values.
DiscreteCpt build_cpt(const ScmSpec& scm, const Ldag& graph, const std::string& node,
                      std::vector<std::string> levels,
                      const std::function<std::vector<double>(
                          const std::map<std::string, int>&)>& row_fn) {
    DiscreteCpt cpt;
    cpt.levels = std::move(levels);
    for (const auto& e : graph.edges) {
        if (e.to == node) cpt.parents.push_back(e.from);
    }
    std::sort(cpt.parents.begin(), cpt.parents.end());
    std::vector<std::size_t> radices;
    for (const auto& p : cpt.parents) radices.push_back(scm.levels(p).size());
    std::size_t n_rows = 1;
    for (auto r : radices) n_rows *= r;
    std::vector<std::size_t> config(radices.size(), 0);
    for (std::size_t row = 0; row < n_rows; ++row) {
        std::map<std::string, int> values;
        for (std::size_t k = 0; k < cpt.parents.size(); ++k) {
            values[cpt.parents[k]] = static_cast<int>(config[k]);
        }
        cpt.rows.push_back(row_fn(values));
        for (std::size_t k = config.size(); k-- > 0;) {
            if (++config[k] < radices[k]) break;
            config[k] = 0;
        }
    }
    return cpt;
}

std::vector<double> bernoulli_row(double p1) {
    const double p = std::min(0.95, std::max(0.05, p1));
    return {1.0 - p, p};
}

}  // namespace

ScmSpec synthetic_travel_scm(const Ldag& graph) {
    ScmSpec scm;
    scm.graph = graph;

    const std::vector<std::string> binary = {"0", "1"};
    auto root = [&](const std::string& node, std::vector<std::string> levels,
                    std::vector<double> probs) {
        DiscreteCpt cpt;
        cpt.levels = std::move(levels);
        cpt.rows = {std::move(probs)};
        scm.mechanisms[node] = std::move(cpt);
    };
    root("D", binary, {0.6, 0.4});
    root("L", {"AT", "DE", "FI", "SE", "US"}, {0.3, 0.25, 0.2, 0.15, 0.1});
    root("U1", binary, {0.5, 0.5});
    root("U2", binary, {0.55, 0.45});

    scm.mechanisms["M"] = build_cpt(scm, graph, "M", binary, [](const auto& v) {
        return bernoulli_row(0.3 + 0.25 * v.at("D"));
    });

    // Six night levels; preference noise U1 moves the planning block only on
    // personal trips.
    {
        DiscreteCpt cpt = build_cpt(
            scm, graph, "X", {"1", "2", "3", "4", "5", "6"}, [](const auto& v) {
                const int m = v.at("M");
                const double center = 1.2 + 0.8 * v.at("D") + 1.1 * m +
                                      (m == 0 ? 1.4 * v.at("U1") : 0.0) + 0.9 * v.at("U2");
                std::vector<double> row(6);
                double total = 0.0;
                for (int x = 1; x <= 6; ++x) {
                    row[x - 1] = std::exp(-0.45 * std::abs(x - center));
                    total += row[x - 1];
                }
                for (auto& p : row) p /= total;
                return row;
            });
        scm.mechanisms["X"] = std::move(cpt);
    }
    scm.mechanisms["C"] = build_cpt(scm, graph, "C", binary, [](const auto& v) {
        const int m = v.at("M");
        return bernoulli_row(0.25 + 0.2 * v.at("D") + 0.15 * m +
                             (m == 0 ? 0.25 * v.at("U1") : 0.0) + 0.15 * v.at("U2"));
    });
    scm.mechanisms["S"] = build_cpt(scm, graph, "S", binary, [](const auto& v) {
        const int m = v.at("M");
        return bernoulli_row(0.3 + 0.15 * v.at("D") + 0.2 * m +
                             (m == 0 ? 0.2 * v.at("U1") : 0.0) - 0.15 * v.at("U2"));
    });
    scm.mechanisms["Z"] = build_cpt(scm, graph, "Z", binary, [](const auto& v) {
        if (v.at("M") == 0) {
            return bernoulli_row(0.3 + 0.25 * v.at("U1") + 0.15 * v.at("D"));
        }
        return bernoulli_row(0.2 + 0.25 * v.at("U1") + 0.1 * v.at("D") + 0.15 * v.at("C") +
                             0.1 * v.at("S") + 0.05 * v.at("X"));
    });
    scm.mechanisms["W"] = build_cpt(scm, graph, "W", binary, [](const auto& v) {
        if (v.at("M") == 0) {
            return bernoulli_row(0.25 + 0.2 * v.at("U1") + 0.15 * v.at("Z") + 0.1 * v.at("D"));
        }
        return bernoulli_row(0.15 + 0.2 * v.at("U1") + 0.15 * v.at("Z") + 0.1 * v.at("D") +
                             0.1 * v.at("C") + 0.05 * v.at("S") + 0.04 * v.at("X"));
    });

    GammaLogLink y;
    y.intercept = 4.4;
    y.shape = 2.5;
    for (const auto& e : graph.edges) {
        if (e.to == "Y") y.parents.push_back(e.from);
    }
    std::sort(y.parents.begin(), y.parents.end());
    // Night effect 0.55 * mo(x) with increments (0.35, 0.25, 0.20, 0.12, 0.08).
    y.effects["X"] = {0.0, 0.1925, 0.33, 0.44, 0.506, 0.55};
    y.effects["C"] = {0.0, 0.2};
    y.effects["S"] = {0.0, 0.1};
    y.effects["Z"] = {0.0, 0.15};
    y.effects["W"] = {0.0, 0.18};
    y.effects["D"] = {0.0, 0.12};
    y.effects["M"] = {0.0, -0.25};
    y.effects["L"] = {0.18, -0.12, 0.05, -0.1, 0.08};
    scm.mechanisms["Y"] = std::move(y);

    validate_scm(scm);
    return scm;
}

void write_sim_csv(const std::string& path, const SimDataset& data, const ScmSpec& scm,
                   bool include_latents, const std::vector<std::string>& comments) {
    CsvTable table;
    table.comments = comments;
    std::vector<const SimDataset::Column*> cols;
    for (const auto& col : data.columns) {
        const NodeDecl* decl = scm.graph.find_node(col.name);
        if (!include_latents && decl && decl->kind == NodeKind::Latent) continue;
        cols.push_back(&col);
        table.header.push_back(col.name);
    }
    table.header.push_back("weight");
    for (std::size_t row = 0; row < data.n; ++row) {
        std::vector<std::string> rec;
        for (const auto* col : cols) rec.push_back(data.cell_text(*col, row));
        rec.push_back("1");
        table.rows.push_back(std::move(rec));
    }
    write_csv(path, table);
}

}  // namespace ctxcausal
