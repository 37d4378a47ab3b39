#pragma once

#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"

namespace ctxcausal {

// One variable occurrence inside a probability term; `fixed` pins it to a
// literal level independent of any enclosing binding.
struct Term {
    std::string name;
    std::optional<std::string> fixed;

    auto operator<=>(const Term&) const = default;
};

struct ExprNode;
using Expr = std::shared_ptr<const ExprNode>;

enum class ExprKind { Atomic, Expectation, Product, SumOver, Fraction, IndicatorMix };

// Symbolic identifying functional: conditional-probability atoms composed by
// products, sums, fractions, expectations and context-indicator mixtures.
struct ExprNode {
    ExprKind kind;

    // Atomic: p(vars | given)
    std::vector<Term> vars;
    std::vector<Term> given;

    // Expectation: E(variable | given)
    std::string variable;

    // Product / Fraction children (Fraction: children = {num, den})
    std::vector<Expr> children;

    // SumOver
    std::vector<std::string> sum_vars;
    Expr child;

    // IndicatorMix over `mix_var`
    std::string mix_var;
    std::vector<std::pair<std::string, Expr>> arms;  // level -> expression
};

Expr make_atomic(std::vector<Term> vars, std::vector<Term> given);
Expr make_expectation(std::string variable, std::vector<Term> given);
Expr make_product(std::vector<Expr> children);
Expr make_sum(std::vector<std::string> vars, Expr child);
Expr make_fraction(Expr num, Expr den);
Expr make_mix(std::string mix_var, std::vector<std::pair<std::string, Expr>> arms);

// Variables that must be bound by the environment (or an enclosing sum) for
// the expression to evaluate.
std::set<std::string> free_variables(const Expr& e);

// All variable names mentioned anywhere in the expression.
std::set<std::string> mentioned_variables(const Expr& e);

std::string to_text(const Expr& e);
nlohmann::json to_json(const Expr& e);

bool equal(const Expr& a, const Expr& b);

}  // namespace ctxcausal
