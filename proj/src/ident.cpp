#include "ctxcausal/ident.hpp"

#include <algorithm>
#include <sstream>
#include <stdexcept>

namespace ctxcausal {

namespace {

using StrSet = std::set<std::string>;

std::string join(const StrSet& s, const char* sep = ",") {
    std::string out;
    for (const auto& v : s) {
        if (!out.empty()) out += sep;
        out += v;
    }
    return out;
}

StrSet set_minus(const StrSet& a, const StrSet& b) {
    StrSet out;
    std::set_difference(a.begin(), a.end(), b.begin(), b.end(), std::inserter(out, out.begin()));
    return out;
}

StrSet set_union(const StrSet& a, const StrSet& b) {
    StrSet out = a;
    out.insert(b.begin(), b.end());
    return out;
}

StrSet set_intersect(const StrSet& a, const StrSet& b) {
    StrSet out;
    std::set_intersection(a.begin(), a.end(), b.begin(), b.end(),
                          std::inserter(out, out.begin()));
    return out;
}

// --- ADMG helpers --------------------------------------------------------

Admg induced(const Admg& g, const StrSet& keep) {
    Admg out;
    std::map<int, int> remap;
    for (std::size_t i = 0; i < g.nodes.size(); ++i) {
        if (keep.count(g.nodes[i])) {
            remap[static_cast<int>(i)] = static_cast<int>(out.nodes.size());
            out.nodes.push_back(g.nodes[i]);
        }
    }
    for (const auto& [f, t] : g.directed) {
        if (remap.count(f) && remap.count(t)) out.directed.emplace_back(remap[f], remap[t]);
    }
    for (const auto& e : g.bidirected) {
        if (keep.count(e.a) && keep.count(e.b)) out.bidirected.push_back(e);
    }
    return out;
}

Admg remove_incoming(const Admg& g, const StrSet& into) {
    Admg out;
    out.nodes = g.nodes;
    for (const auto& [f, t] : g.directed) {
        if (!into.count(g.nodes[t])) out.directed.emplace_back(f, t);
    }
    for (const auto& e : g.bidirected) {
        if (!into.count(e.a) && !into.count(e.b)) out.bidirected.push_back(e);
    }
    return out;
}

StrSet ancestors_of(const Admg& g, const StrSet& of) {
    std::vector<std::vector<int>> parents(g.nodes.size());
    for (const auto& [f, t] : g.directed) parents[t].push_back(f);
    std::vector<bool> seen(g.nodes.size(), false);
    std::vector<int> stack;
    for (const auto& name : of) {
        const int i = g.index_of(name);
        if (i >= 0 && !seen[i]) {
            seen[i] = true;
            stack.push_back(i);
        }
    }
    while (!stack.empty()) {
        const int v = stack.back();
        stack.pop_back();
        for (int p : parents[v]) {
            if (!seen[p]) {
                seen[p] = true;
                stack.push_back(p);
            }
        }
    }
    StrSet out;
    for (std::size_t i = 0; i < g.nodes.size(); ++i) {
        if (seen[i]) out.insert(g.nodes[i]);
    }
    return out;
}

// C-components of the bidirected part.
std::vector<StrSet> districts(const Admg& g) {
    std::vector<int> comp(g.nodes.size());
    for (std::size_t i = 0; i < g.nodes.size(); ++i) comp[i] = static_cast<int>(i);
    std::function<int(int)> find = [&](int v) {
        while (comp[v] != v) v = comp[v] = comp[comp[v]];
        return v;
    };
    for (const auto& e : g.bidirected) {
        const int a = g.index_of(e.a), b = g.index_of(e.b);
        comp[find(a)] = find(b);
    }
    std::map<int, StrSet> groups;
    for (std::size_t i = 0; i < g.nodes.size(); ++i) {
        groups[find(static_cast<int>(i))].insert(g.nodes[i]);
    }
    std::vector<StrSet> out;
    for (auto& [root, members] : groups) out.push_back(std::move(members));
    return out;
}

std::vector<std::string> topo_order(const Admg& g) {
    std::vector<int> indeg(g.nodes.size(), 0);
    std::vector<std::vector<int>> children(g.nodes.size());
    for (const auto& [f, t] : g.directed) {
        ++indeg[t];
        children[f].push_back(t);
    }
    // Deterministic order: smallest node name first among ready nodes.
    std::set<std::pair<std::string, int>> ready;
    for (std::size_t i = 0; i < g.nodes.size(); ++i) {
        if (indeg[i] == 0) ready.emplace(g.nodes[i], static_cast<int>(i));
    }
    std::vector<std::string> order;
    while (!ready.empty()) {
        const auto [name, v] = *ready.begin();
        ready.erase(ready.begin());
        order.push_back(name);
        for (int c : children[v]) {
            if (--indeg[c] == 0) ready.emplace(g.nodes[c], c);
        }
    }
    if (order.size() != g.nodes.size()) {
        throw std::runtime_error("directed part of the mixed graph is cyclic");
    }
    return order;
}

// --- probability expression helpers --------------------------------------

std::vector<Term> plain_terms(const StrSet& names) {
    std::vector<Term> out;
    for (const auto& n : names) out.push_back({n, std::nullopt});
    return out;
}

bool is_full_joint(const Expr& p, const StrSet& current) {
    if (p->kind != ExprKind::Atomic || !p->given.empty()) return false;
    if (p->vars.size() != current.size()) return false;
    for (const auto& t : p->vars) {
        if (t.fixed || !current.count(t.name)) return false;
    }
    return true;
}

Expr marginalize(const Expr& p, const StrSet& current, const StrSet& keep) {
    const StrSet drop = set_minus(current, keep);
    if (drop.empty()) return p;
    if (is_full_joint(p, current)) return make_atomic(plain_terms(keep), {});
    return make_sum({drop.begin(), drop.end()}, p);
}

// p_P(vars | given) for the current distribution P over `current`.
Expr conditional(const Expr& p, const StrSet& current, const StrSet& vars, const StrSet& given) {
    if (is_full_joint(p, current)) {
        if (given.empty()) return make_atomic(plain_terms(vars), {});
        return make_atomic(plain_terms(vars), plain_terms(given));
    }
    const Expr num = marginalize(p, current, set_union(vars, given));
    if (given.empty()) return num;
    const Expr den = marginalize(p, current, given);
    return make_fraction(num, den);
}

struct HedgeFail {
    StrSet component;    // district of the whole current graph
    StrSet sub_district;  // district of G minus the intervention set
    StrSet intervention;
    std::vector<BidirectedEdge> arcs;
};

class IdFailure : public std::exception {
public:
    explicit IdFailure(HedgeFail fail) : fail_(std::move(fail)) {}
    const HedgeFail& fail() const { return fail_; }
    const char* what() const noexcept override { return "identification failed"; }

private:
    HedgeFail fail_;
};

std::string witness_text(const HedgeFail& f) {
    std::ostringstream out;
    out << "identification fails when intervening on {" << join(f.intervention)
        << "}: district {" << join(f.sub_district) << "} and component {" << join(f.component)
        << "} form a hedge";
    if (!f.arcs.empty()) {
        out << "; confounding arcs:";
        for (const auto& e : f.arcs) {
            out << " " << e.a << "<->" << e.b;
            if (!e.via.empty()) out << " (via " << e.via << ")";
        }
    }
    return out.str();
}

Expr id_recurse(const StrSet& y, const StrSet& x, const Expr& p, const StrSet& current,
                const Admg& g) {
    // 1: no intervention left.
    if (x.empty()) return marginalize(p, current, y);

    // 2: restrict to ancestors of y.
    const StrSet an_y = ancestors_of(g, y);
    if (an_y != current) {
        return id_recurse(y, set_intersect(x, an_y), marginalize(p, current, an_y), an_y,
                          induced(g, an_y));
    }

    // 3: enlarge the intervention with w.
    const StrSet an_y_no_x = ancestors_of(remove_incoming(g, x), y);
    const StrSet w = set_minus(set_minus(current, x), an_y_no_x);
    if (!w.empty()) return id_recurse(y, set_union(x, w), p, current, g);

    // 4: factorize over the districts of G[V \ X].
    const auto sub_districts = districts(induced(g, set_minus(current, x)));
    if (sub_districts.size() > 1) {
        std::vector<Expr> factors;
        for (const auto& s : sub_districts) {
            factors.push_back(id_recurse(s, set_minus(current, s), p, current, g));
        }
        const StrSet outer = set_minus(set_minus(current, y), x);
        const Expr prod = make_product(std::move(factors));
        if (outer.empty()) return prod;
        return make_sum({outer.begin(), outer.end()}, prod);
    }

    const StrSet s = sub_districts.at(0);
    const auto g_districts = districts(g);

    // 5a: the whole graph is one c-component -> hedge.
    if (g_districts.size() == 1) {
        throw IdFailure({g_districts[0], s, x, induced(g, g_districts[0]).bidirected});
    }

    const auto order = topo_order(g);
    auto predecessors = [&order](const std::string& v) {
        StrSet pred;
        for (const auto& u : order) {
            if (u == v) break;
            pred.insert(u);
        }
        return pred;
    };

    // 5b: S is itself a district of G.
    for (const auto& d : g_districts) {
        if (d == s) {
            std::vector<Expr> factors;
            for (const auto& v : s) factors.push_back(conditional(p, current, {v}, predecessors(v)));
            const StrSet outer = set_minus(s, y);
            const Expr prod = make_product(std::move(factors));
            if (outer.empty()) return prod;
            return make_sum({outer.begin(), outer.end()}, prod);
        }
    }

    // 5c: recurse into the district containing S.
    for (const auto& d : g_districts) {
        if (std::includes(d.begin(), d.end(), s.begin(), s.end())) {
            std::vector<Expr> factors;
            for (const auto& v : d) factors.push_back(conditional(p, current, {v}, predecessors(v)));
            return id_recurse(y, set_intersect(x, d), make_product(std::move(factors)), d,
                              induced(g, d));
        }
    }
    throw std::logic_error("ID recursion: no district contains the target component");
}

}  // namespace

IdentResult id_effect(const Admg& admg, const std::string& treatment,
                      const StrSet& outcomes) {
    StrSet current(admg.nodes.begin(), admg.nodes.end());
    if (!current.count(treatment)) throw std::invalid_argument("unknown treatment " + treatment);
    for (const auto& y : outcomes) {
        if (!current.count(y)) throw std::invalid_argument("unknown outcome " + y);
        if (y == treatment) throw std::invalid_argument("treatment cannot be an outcome");
    }
    topo_order(admg);  // rejects cyclic inputs up front

    const Expr joint = make_atomic(plain_terms(current), {});
    IdentResult res;
    try {
        res.functional = id_recurse(outcomes, {treatment}, joint, current, admg);
        res.status = IdentResult::Status::Identified;
    } catch (const IdFailure& f) {
        res.status = IdentResult::Status::NotIdentified;
        res.witness = witness_text(f.fail());
    }
    return res;
}

namespace {

StrSet observed_nodes(const Ldag& g) {
    StrSet out;
    for (const auto& n : g.nodes) {
        if (n.kind != NodeKind::Latent) out.insert(n.name);
    }
    return out;
}

std::vector<Term> fixed_ctx_terms(const ContextAssignment& ctx) {
    std::vector<Term> out;
    for (const auto& [var, level] : ctx.values) out.push_back({var, level});
    return out;
}

}  // namespace

IdentResult identify_context_effect(const Ldag& g, const std::string& treatment,
                                    const std::string& outcome, const ContextAssignment& ctx) {
    for (const auto& v : g.context_variables()) {
        if (!ctx.values.count(v)) {
            throw std::invalid_argument("context assignment must fix variable " + v);
        }
    }
    const Dag proj = project(g, ctx);
    const int xi = proj.require_index(treatment);
    proj.require_index(outcome);

    const std::set<int> de_x = proj.descendants({xi});
    for (const auto& [var, level] : ctx.values) {
        if (de_x.count(proj.require_index(var))) {
            throw std::invalid_argument("context variable " + var +
                                        " is a descendant of treatment " + treatment);
        }
    }

    const StrSet observed = observed_nodes(g);
    StrSet ctx_vars;
    for (const auto& [var, level] : ctx.values) ctx_vars.insert(var);

    // Candidate adjustment set: observed non-descendants of X, minus the
    // treatment, outcome and context variables themselves.
    StrSet adj;
    for (const auto& name : observed) {
        if (name == treatment || name == outcome || ctx_vars.count(name)) continue;
        if (de_x.count(proj.require_index(name))) continue;
        adj.insert(name);
    }

    // Backdoor criterion in the projected graph: with X's outgoing edges
    // removed, X and Y must be separated by adj + the context variables.
    Dag no_out = proj;
    no_out.edges.erase(std::remove_if(no_out.edges.begin(), no_out.edges.end(),
                                      [xi](const std::pair<int, int>& e) { return e.first == xi; }),
                       no_out.edges.end());
    const bool backdoor_ok =
        d_separated(no_out, {treatment}, {outcome}, set_union(adj, ctx_vars));

    IdentResult res;
    if (backdoor_ok) {
        const std::vector<Term> ctx_fixed = fixed_ctx_terms(ctx);
        std::vector<Term> regress_given = ctx_fixed;
        regress_given.push_back({treatment, std::nullopt});
        for (const auto& s : adj) regress_given.push_back({s, std::nullopt});
        const Expr outcome_term = make_atomic({{outcome, std::nullopt}}, regress_given);

        Expr inner;
        if (adj.empty()) {
            inner = outcome_term;
        } else {
            const Expr cov_term = make_atomic(plain_terms(adj), ctx_fixed);
            inner = make_sum({adj.begin(), adj.end()}, make_product({cov_term, outcome_term}));
        }
        Expr numerator;
        if (ctx.values.empty()) {
            numerator = inner;
        } else {
            const Expr ctx_prob = make_atomic(fixed_ctx_terms(ctx), {});
            numerator = make_product({ctx_prob, inner});
        }
        res.status = IdentResult::Status::Identified;
        res.functional = make_fraction(numerator, make_sum({outcome}, numerator));
        res.adjustment_set = std::vector<std::string>(adj.begin(), adj.end());
        return res;
    }

    // General route: identify P(Y, ctx | do(X)) on the latent projection and
    // leave the context variables free (bound at evaluation time).
    const Admg admg = latent_project(proj, observed);
    const IdentResult general = id_effect(admg, treatment, set_union({outcome}, ctx_vars));
    if (!general.identified()) {
        res.status = IdentResult::Status::NotIdentified;
        res.witness = "context " + (ctx.values.empty() ? std::string("<none>") : ctx.to_string()) +
                      ": " + general.witness;
        return res;
    }
    res.status = IdentResult::Status::Identified;
    res.functional =
        make_fraction(general.functional, make_sum({outcome}, general.functional));
    return res;
}

IdentResult combine_contexts(const Ldag& g, const std::string& treatment,
                             const std::string& outcome, const std::string& context_var) {
    const NodeDecl* decl = g.find_node(context_var);
    if (!decl || decl->kind != NodeKind::Context) {
        throw std::invalid_argument(context_var + " is not a declared context variable");
    }
    const auto ctx_vars = g.context_variables();
    if (ctx_vars.size() != 1) {
        throw std::invalid_argument(
            "combine_contexts supports exactly one context variable per graph");
    }

    // Validity precondition for recombining per-context functionals: the
    // context variable must be observed and a non-descendant of the treatment
    // in every context; per-context identifiability alone is not sufficient
    // in general.
    for (const auto& level : decl->levels) {
        ContextAssignment ctx;
        ctx.values[context_var] = level;
        const Dag proj = project(g, ctx);
        if (proj.descendants({proj.require_index(treatment)})
                .count(proj.require_index(context_var))) {
            throw std::invalid_argument(
                "cannot combine contexts: " + context_var + " is a descendant of " + treatment +
                " in context " + context_var + "=" + level +
                "; per-context identification does not compose here");
        }
    }

    std::vector<std::pair<std::string, Expr>> arms;
    for (const auto& level : decl->levels) {
        ContextAssignment ctx;
        ctx.values[context_var] = level;
        const IdentResult per = identify_context_effect(g, treatment, outcome, ctx);
        if (!per.identified()) {
            IdentResult res;
            res.status = IdentResult::Status::NotIdentified;
            res.witness = "context " + context_var + "=" + level + " not identified: " + per.witness;
            return res;
        }
        // Numerator of the per-context fraction is P(Y, ctx | do(X)).
        arms.emplace_back(level, per.functional->children[0]);
    }
    IdentResult res;
    res.status = IdentResult::Status::Identified;
    res.functional = make_mix(context_var, std::move(arms));
    return res;
}

IdentResult counterfactual_functional(const Ldag& g, const std::string& treatment,
                                      const std::string& outcome, const ContextAssignment& ctx,
                                      const std::string& x, const std::string& x_cf) {
    const IdentResult ctx_effect = identify_context_effect(g, treatment, outcome, ctx);
    if (!ctx_effect.identified()) return ctx_effect;
    if (!ctx_effect.adjustment_set) {
        IdentResult res;
        res.status = IdentResult::Status::NotIdentified;
        res.witness = "context effect is identified but not in backdoor form; "
                      "the one-step counterfactual requires an adjustment set";
        return res;
    }

    const Dag proj = project(g, ctx);
    const auto de_x = proj.descendants({proj.require_index(treatment)});
    for (const auto& s : *ctx_effect.adjustment_set) {
        if (de_x.count(proj.require_index(s))) {
            throw std::invalid_argument("adjustment set contains a descendant of the treatment: " +
                                        s);
        }
    }

    const std::vector<Term> ctx_fixed = fixed_ctx_terms(ctx);
    const auto& adj = *ctx_effect.adjustment_set;

    std::vector<Term> regress_given = ctx_fixed;
    regress_given.push_back({treatment, x_cf});
    for (const auto& s : adj) regress_given.push_back({s, std::nullopt});
    const Expr regression = make_expectation(outcome, regress_given);

    IdentResult res;
    res.status = IdentResult::Status::Identified;
    res.adjustment_set = ctx_effect.adjustment_set;
    if (adj.empty()) {
        res.functional = regression;
        return res;
    }
    std::vector<Term> cov_given = ctx_fixed;
    cov_given.push_back({treatment, x});
    std::vector<Term> cov_vars;
    for (const auto& s : adj) cov_vars.push_back({s, std::nullopt});
    const Expr cov = make_atomic(cov_vars, cov_given);
    res.functional = make_sum({adj.begin(), adj.end()}, make_product({cov, regression}));
    return res;
}

IdentResult check_conditioned_counterfactual(const Ldag&, const std::string& treatment,
                                             const std::string& outcome,
                                             const ContextAssignment& ctx) {
    IdentResult res;
    res.status = IdentResult::Status::NotIdentified;
    res.witness = "E(" + outcome + "_{x+1} | " + outcome + "=y, " + treatment + "=x" +
                  (ctx.values.empty() ? "" : ", " + ctx.to_string()) +
                  ") conditions on the realized outcome; this one-step counterfactual family "
                  "is not identifiable and is rejected by rule";
    return res;
}

// --- simplification ------------------------------------------------------

namespace {

bool term_has_free(const Term& t, const std::string& var) {
    return t.name == var && !t.fixed;
}

bool expr_mentions_free(const Expr& e, const std::string& var) {
    return free_variables(e).count(var) > 0;
}

// Attempts the law-of-total-probability rules for one summed variable over a
// product of factors. Returns true when the factor list was rewritten and the
// variable eliminated.
bool eliminate_var(std::vector<Expr>& factors, const std::string& z) {
    std::vector<std::size_t> involved;
    for (std::size_t i = 0; i < factors.size(); ++i) {
        if (expr_mentions_free(factors[i], z)) involved.push_back(i);
    }
    if (involved.empty()) return false;

    // Marginalization: z occurs free only in the vars-position of one atomic.
    if (involved.size() == 1) {
        const Expr& f = factors[involved[0]];
        if (f->kind != ExprKind::Atomic) return false;
        const bool in_given = std::any_of(f->given.begin(), f->given.end(),
                                          [&](const Term& t) { return term_has_free(t, z); });
        if (in_given) return false;
        std::vector<Term> rest;
        for (const auto& t : f->vars) {
            if (!term_has_free(t, z)) rest.push_back(t);
        }
        if (rest.empty()) {
            if (factors.size() == 1) return false;  // would leave an empty product
            factors.erase(factors.begin() + involved[0]);
        } else {
            factors[involved[0]] = make_atomic(rest, f->given);
        }
        return true;
    }

    // Chain collapse: sum_z p(z | W) p(A | W, z) = p(A | W).
    if (involved.size() == 2) {
        for (int swap = 0; swap < 2; ++swap) {
            const std::size_t i0 = involved[swap], i1 = involved[1 - swap];
            const Expr& f0 = factors[i0];
            const Expr& f1 = factors[i1];
            if (f0->kind != ExprKind::Atomic || f1->kind != ExprKind::Atomic) continue;
            if (f0->vars.size() != 1 || !term_has_free(f0->vars[0], z)) continue;
            const bool z_in_f1_given = std::any_of(f1->given.begin(), f1->given.end(),
                                                   [&](const Term& t) { return term_has_free(t, z); });
            const bool z_in_f1_vars = std::any_of(f1->vars.begin(), f1->vars.end(),
                                                  [&](const Term& t) { return t.name == z; });
            if (!z_in_f1_given || z_in_f1_vars) continue;
            std::vector<Term> f1_given_rest;
            for (const auto& t : f1->given) {
                if (!term_has_free(t, z)) f1_given_rest.push_back(t);
            }
            if (f1_given_rest != f0->given) continue;
            factors[i1] = make_atomic(f1->vars, f0->given);
            factors.erase(factors.begin() + i0);
            return true;
        }
    }
    return false;
}

Expr simplify_sum(const std::vector<std::string>& sum_vars, Expr body) {
    std::vector<Expr> factors;
    if (body->kind == ExprKind::Product) {
        factors = body->children;
    } else {
        factors = {body};
    }

    std::vector<std::string> remaining = sum_vars;
    bool changed = true;
    while (changed) {
        changed = false;
        for (auto it = remaining.begin(); it != remaining.end(); ++it) {
            if (eliminate_var(factors, *it)) {
                remaining.erase(it);
                changed = true;
                break;
            }
        }
    }

    // Hoist factors mentioning none of the remaining sum variables.
    std::vector<Expr> outside, inside;
    for (const auto& f : factors) {
        const auto free = free_variables(f);
        const bool touches = std::any_of(remaining.begin(), remaining.end(),
                                         [&](const std::string& v) { return free.count(v) > 0; });
        (touches ? inside : outside).push_back(f);
    }
    if (remaining.empty() || inside.empty()) {
        outside.insert(outside.end(), inside.begin(), inside.end());
        return make_product(std::move(outside));
    }
    Expr summed = make_sum(remaining, make_product(std::move(inside)));
    if (outside.empty()) return summed;
    outside.push_back(summed);
    return make_product(std::move(outside));
}

}  // namespace

Expr simplify(const Expr& e) {
    switch (e->kind) {
        case ExprKind::Atomic:
        case ExprKind::Expectation:
            return e;
        case ExprKind::Product: {
            std::vector<Expr> children;
            for (const auto& c : e->children) children.push_back(simplify(c));
            return make_product(std::move(children));
        }
        case ExprKind::Fraction:
            return make_fraction(simplify(e->children[0]), simplify(e->children[1]));
        case ExprKind::SumOver:
            return simplify_sum(e->sum_vars, simplify(e->child));
        case ExprKind::IndicatorMix: {
            std::vector<std::pair<std::string, Expr>> arms;
            for (const auto& [level, arm] : e->arms) arms.emplace_back(level, simplify(arm));
            return make_mix(e->mix_var, std::move(arms));
        }
    }
    throw std::logic_error("unreachable");
}

// --- evaluation ----------------------------------------------------------

namespace {

int resolve_level(const JointTable& table, const Env& env, const Term& t) {
    if (t.fixed) return table.level_index(t.name, *t.fixed);
    const auto it = env.find(t.name);
    if (it == env.end()) {
        throw std::runtime_error("unbound variable in functional: " + t.name);
    }
    return table.level_index(t.name, it->second);
}

std::string event_text(const JointTable& table, const Env& env, const std::vector<Term>& terms) {
    std::string out;
    for (const auto& t : terms) {
        if (!out.empty()) out += ",";
        out += t.name + "=" + (t.fixed ? *t.fixed : env.at(t.name));
    }
    return out;
}

double eval_rec(const Expr& e, const JointTable& table, Env& env) {
    switch (e->kind) {
        case ExprKind::Atomic: {
            std::map<int, int> num_assign, den_assign;
            for (const auto& t : e->given) {
                den_assign[table.require_var(t.name)] = resolve_level(table, env, t);
            }
            num_assign = den_assign;
            for (const auto& t : e->vars) {
                num_assign[table.require_var(t.name)] = resolve_level(table, env, t);
            }
            const double den = e->given.empty() ? table.total() : table.marginal(den_assign);
            if (den <= 0.0) {
                throw std::runtime_error("conditioning on zero-probability event: " +
                                         event_text(table, env, e->given));
            }
            return table.marginal(num_assign) / den;
        }
        case ExprKind::Expectation: {
            std::map<int, int> given_assign;
            for (const auto& t : e->given) {
                given_assign[table.require_var(t.name)] = resolve_level(table, env, t);
            }
            const double den = e->given.empty() ? table.total() : table.marginal(given_assign);
            if (den <= 0.0) {
                throw std::runtime_error("conditioning on zero-probability event: " +
                                         event_text(table, env, e->given));
            }
            const int yi = table.require_var(e->variable);
            const auto& yvar = table.variables()[yi];
            double acc = 0.0;
            for (std::size_t level = 0; level < yvar.levels.size(); ++level) {
                auto assign = given_assign;
                assign[yi] = static_cast<int>(level);
                acc += yvar.values[level] * table.marginal(assign);
            }
            return acc / den;
        }
        case ExprKind::Product: {
            double acc = 1.0;
            for (const auto& c : e->children) acc *= eval_rec(c, table, env);
            return acc;
        }
        case ExprKind::SumOver: {
            // Outer bindings of a summed name are shadowed and restored.
            std::vector<std::pair<std::string, std::optional<std::string>>> saved;
            for (const auto& name : e->sum_vars) {
                const auto it = env.find(name);
                saved.emplace_back(name, it == env.end()
                                             ? std::nullopt
                                             : std::optional<std::string>(it->second));
            }
            double acc = 0.0;
            std::function<void(std::size_t)> loop = [&](std::size_t k) {
                if (k == e->sum_vars.size()) {
                    acc += eval_rec(e->child, table, env);
                    return;
                }
                const auto& name = e->sum_vars[k];
                const auto& var = table.variables()[table.require_var(name)];
                for (const auto& level : var.levels) {
                    env[name] = level;
                    loop(k + 1);
                }
            };
            loop(0);
            for (const auto& [name, prev] : saved) {
                if (prev) {
                    env[name] = *prev;
                } else {
                    env.erase(name);
                }
            }
            return acc;
        }
        case ExprKind::Fraction: {
            const double den = eval_rec(e->children[1], table, env);
            if (den == 0.0) throw std::runtime_error("zero denominator in functional fraction");
            return eval_rec(e->children[0], table, env) / den;
        }
        case ExprKind::IndicatorMix: {
            const auto it = env.find(e->mix_var);
            if (it != env.end()) {
                for (const auto& [level, arm] : e->arms) {
                    if (level == it->second) return eval_rec(arm, table, env);
                }
                return 0.0;  // level outside the mixture's arms
            }
            double acc = 0.0;
            for (const auto& [level, arm] : e->arms) {
                env[e->mix_var] = level;
                acc += eval_rec(arm, table, env);
            }
            env.erase(e->mix_var);
            return acc;
        }
    }
    throw std::logic_error("unreachable");
}

}  // namespace

double evaluate(const Expr& e, const JointTable& table, const Env& env) {
    Env mutable_env = env;
    return eval_rec(e, table, mutable_env);
}

}  // namespace ctxcausal
