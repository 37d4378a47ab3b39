#include "ctxcausal/functional.hpp"

#include <algorithm>
#include <sstream>
#include <stdexcept>

namespace ctxcausal {

namespace {

std::vector<Term> sorted_terms(std::vector<Term> terms) {
    std::sort(terms.begin(), terms.end());
    return terms;
}

}  // namespace

Expr make_atomic(std::vector<Term> vars, std::vector<Term> given) {
    auto node = std::make_shared<ExprNode>();
    node->kind = ExprKind::Atomic;
    node->vars = sorted_terms(std::move(vars));
    node->given = sorted_terms(std::move(given));
    if (node->vars.empty()) throw std::runtime_error("atomic term with no variables");
    return node;
}

Expr make_expectation(std::string variable, std::vector<Term> given) {
    auto node = std::make_shared<ExprNode>();
    node->kind = ExprKind::Expectation;
    node->variable = std::move(variable);
    node->given = sorted_terms(std::move(given));
    return node;
}

Expr make_product(std::vector<Expr> children) {
    std::vector<Expr> flat;
    for (auto& c : children) {
        if (!c) throw std::runtime_error("null child in product");
        if (c->kind == ExprKind::Product) {
            flat.insert(flat.end(), c->children.begin(), c->children.end());
        } else {
            flat.push_back(std::move(c));
        }
    }
    if (flat.size() == 1) return flat[0];
    auto node = std::make_shared<ExprNode>();
    node->kind = ExprKind::Product;
    node->children = std::move(flat);
    return node;
}

Expr make_sum(std::vector<std::string> vars, Expr child) {
    if (!child) throw std::runtime_error("null child in sum");
    std::sort(vars.begin(), vars.end());
    vars.erase(std::unique(vars.begin(), vars.end()), vars.end());
    if (vars.empty()) return child;
    const auto free = free_variables(child);
    for (const auto& v : vars) {
        if (!free.count(v)) {
            throw std::runtime_error("sum binds variable not free in its body: " + v);
        }
    }
    auto node = std::make_shared<ExprNode>();
    node->kind = ExprKind::SumOver;
    node->sum_vars = std::move(vars);
    node->child = std::move(child);
    return node;
}

Expr make_fraction(Expr num, Expr den) {
    if (!num || !den) throw std::runtime_error("null child in fraction");
    auto node = std::make_shared<ExprNode>();
    node->kind = ExprKind::Fraction;
    node->children = {std::move(num), std::move(den)};
    return node;
}

Expr make_mix(std::string mix_var, std::vector<std::pair<std::string, Expr>> arms) {
    if (arms.empty()) throw std::runtime_error("indicator mixture with no arms");
    std::set<std::string> seen;
    for (const auto& [level, expr] : arms) {
        if (!expr) throw std::runtime_error("null arm in indicator mixture");
        if (!seen.insert(level).second) {
            throw std::runtime_error("duplicate arm level " + level + " in indicator mixture");
        }
    }
    auto node = std::make_shared<ExprNode>();
    node->kind = ExprKind::IndicatorMix;
    node->mix_var = std::move(mix_var);
    node->arms = std::move(arms);
    return node;
}

namespace {

void collect_free(const Expr& e, std::set<std::string>& bound, std::set<std::string>& out) {
    switch (e->kind) {
        case ExprKind::Atomic:
        case ExprKind::Expectation: {
            for (const auto& t : e->vars) {
                if (!t.fixed && !bound.count(t.name)) out.insert(t.name);
            }
            for (const auto& t : e->given) {
                if (!t.fixed && !bound.count(t.name)) out.insert(t.name);
            }
            break;
        }
        case ExprKind::Product:
        case ExprKind::Fraction:
            for (const auto& c : e->children) collect_free(c, bound, out);
            break;
        case ExprKind::SumOver: {
            std::vector<std::string> added;
            for (const auto& v : e->sum_vars) {
                if (bound.insert(v).second) added.push_back(v);
            }
            collect_free(e->child, bound, out);
            for (const auto& v : added) bound.erase(v);
            break;
        }
        case ExprKind::IndicatorMix: {
            if (!bound.count(e->mix_var)) out.insert(e->mix_var);
            const bool added = bound.insert(e->mix_var).second;
            for (const auto& [level, arm] : e->arms) collect_free(arm, bound, out);
            if (added) bound.erase(e->mix_var);
            break;
        }
    }
}

void collect_mentioned(const Expr& e, std::set<std::string>& out) {
    switch (e->kind) {
        case ExprKind::Atomic:
        case ExprKind::Expectation:
            for (const auto& t : e->vars) out.insert(t.name);
            for (const auto& t : e->given) out.insert(t.name);
            if (!e->variable.empty()) out.insert(e->variable);
            break;
        case ExprKind::Product:
        case ExprKind::Fraction:
            for (const auto& c : e->children) collect_mentioned(c, out);
            break;
        case ExprKind::SumOver:
            for (const auto& v : e->sum_vars) out.insert(v);
            collect_mentioned(e->child, out);
            break;
        case ExprKind::IndicatorMix:
            out.insert(e->mix_var);
            for (const auto& [level, arm] : e->arms) collect_mentioned(arm, out);
            break;
    }
}

std::string terms_text(const std::vector<Term>& terms) {
    std::string out;
    for (std::size_t i = 0; i < terms.size(); ++i) {
        if (i) out += ",";
        out += terms[i].name;
        if (terms[i].fixed) out += "=" + *terms[i].fixed;
    }
    return out;
}

}  // namespace

std::set<std::string> free_variables(const Expr& e) {
    std::set<std::string> bound, out;
    collect_free(e, bound, out);
    return out;
}

std::set<std::string> mentioned_variables(const Expr& e) {
    std::set<std::string> out;
    collect_mentioned(e, out);
    return out;
}

std::string to_text(const Expr& e) {
    std::ostringstream out;
    switch (e->kind) {
        case ExprKind::Atomic:
            out << "p(" << terms_text(e->vars);
            if (!e->given.empty()) out << "|" << terms_text(e->given);
            out << ")";
            break;
        case ExprKind::Expectation: {
            out << "E(" << e->variable;
            if (!e->given.empty()) out << "|" << terms_text(e->given);
            out << ")";
            break;
        }
        case ExprKind::Product:
            for (std::size_t i = 0; i < e->children.size(); ++i) {
                if (i) out << " ";
                const bool wrap = e->children[i]->kind == ExprKind::Fraction ||
                                  e->children[i]->kind == ExprKind::IndicatorMix;
                out << (wrap ? "[" : "") << to_text(e->children[i]) << (wrap ? "]" : "");
            }
            break;
        case ExprKind::SumOver: {
            out << "\\sum_{";
            for (std::size_t i = 0; i < e->sum_vars.size(); ++i) {
                if (i) out << ",";
                out << e->sum_vars[i];
            }
            out << "} " << to_text(e->child);
            break;
        }
        case ExprKind::Fraction:
            out << "\\frac{" << to_text(e->children[0]) << "}{" << to_text(e->children[1]) << "}";
            break;
        case ExprKind::IndicatorMix: {
            for (std::size_t i = 0; i < e->arms.size(); ++i) {
                if (i) out << " + ";
                out << "1(" << e->mix_var << "=" << e->arms[i].first << ") "
                    << to_text(e->arms[i].second);
            }
            break;
        }
    }
    return out.str();
}

namespace {

nlohmann::json terms_json(const std::vector<Term>& terms) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& t : terms) {
        nlohmann::json obj{{"name", t.name}};
        if (t.fixed) obj["value"] = *t.fixed;
        arr.push_back(obj);
    }
    return arr;
}

}  // namespace

nlohmann::json to_json(const Expr& e) {
    switch (e->kind) {
        case ExprKind::Atomic:
            return {{"kind", "p"}, {"vars", terms_json(e->vars)}, {"given", terms_json(e->given)}};
        case ExprKind::Expectation:
            return {{"kind", "expectation"},
                    {"variable", e->variable},
                    {"given", terms_json(e->given)}};
        case ExprKind::Product: {
            nlohmann::json children = nlohmann::json::array();
            for (const auto& c : e->children) children.push_back(to_json(c));
            return {{"kind", "product"}, {"children", children}};
        }
        case ExprKind::SumOver:
            return {{"kind", "sum"}, {"over", e->sum_vars}, {"child", to_json(e->child)}};
        case ExprKind::Fraction:
            return {{"kind", "fraction"},
                    {"numerator", to_json(e->children[0])},
                    {"denominator", to_json(e->children[1])}};
        case ExprKind::IndicatorMix: {
            nlohmann::json arms = nlohmann::json::object();
            for (const auto& [level, arm] : e->arms) arms[level] = to_json(arm);
            return {{"kind", "mix"}, {"on", e->mix_var}, {"arms", arms}};
        }
    }
    throw std::logic_error("unreachable");
}

bool equal(const Expr& a, const Expr& b) {
    if (a == b) return true;
    if (!a || !b || a->kind != b->kind) return false;
    switch (a->kind) {
        case ExprKind::Atomic:
        case ExprKind::Expectation:
            return a->vars == b->vars && a->given == b->given && a->variable == b->variable;
        case ExprKind::Product:
        case ExprKind::Fraction: {
            if (a->children.size() != b->children.size()) return false;
            for (std::size_t i = 0; i < a->children.size(); ++i) {
                if (!equal(a->children[i], b->children[i])) return false;
            }
            return true;
        }
        case ExprKind::SumOver:
            return a->sum_vars == b->sum_vars && equal(a->child, b->child);
        case ExprKind::IndicatorMix: {
            if (a->mix_var != b->mix_var || a->arms.size() != b->arms.size()) return false;
            for (std::size_t i = 0; i < a->arms.size(); ++i) {
                if (a->arms[i].first != b->arms[i].first) return false;
                if (!equal(a->arms[i].second, b->arms[i].second)) return false;
            }
            return true;
        }
    }
    return false;
}

}  // namespace ctxcausal
