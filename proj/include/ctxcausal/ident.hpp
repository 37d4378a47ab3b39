#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "ctxcausal/functional.hpp"
#include "ctxcausal/ldag.hpp"
#include "ctxcausal/prob_table.hpp"

namespace ctxcausal {

struct IdentResult {
    enum class Status { Identified, NotIdentified };
    Status status = Status::NotIdentified;
    Expr functional;     // populated when identified
    std::string witness;  // populated when not identified
    std::optional<std::vector<std::string>> adjustment_set;

    bool identified() const { return status == Status::Identified; }
};

// Interventional identification on an ADMG via the ID recursion. On success
// the functional's free variables are the outcome set plus the treatment; on
// failure the witness names the hedge-forming district and intervention set.
IdentResult id_effect(const Admg& admg, const std::string& treatment,
                      const std::set<std::string>& outcomes);

// P(Y | do(X), ctx) for one full context assignment, returned as a fraction
// whose numerator identifies P(Y, ctx | do(X)). When the observed
// non-descendants of X form a valid backdoor set the numerator is emitted in
// adjustment form and the set is reported.
IdentResult identify_context_effect(const Ldag& g, const std::string& treatment,
                                    const std::string& outcome, const ContextAssignment& ctx);

// Mixture of the per-context numerators over the levels of the context
// variable; throws when the context variable is latent or a descendant of the
// treatment in any context.
IdentResult combine_contexts(const Ldag& g, const std::string& treatment,
                             const std::string& outcome, const std::string& context_var);

// E(Y_{x_cf} | X = x, ctx): covariate distribution at the factual level,
// outcome regression at the counterfactual one.
IdentResult counterfactual_functional(const Ldag& g, const std::string& treatment,
                                      const std::string& outcome, const ContextAssignment& ctx,
                                      const std::string& x, const std::string& x_cf);

// The outcome-conditioned one-step counterfactual is rejected as a family
// rule for every graph.
IdentResult check_conditioned_counterfactual(const Ldag& g, const std::string& treatment,
                                             const std::string& outcome,
                                             const ContextAssignment& ctx);

// Sum-of-complete-conditional elimination and constant hoisting; output is
// extensionally equal to the input on every discrete distribution.
Expr simplify(const Expr& e);

using Env = std::map<std::string, std::string>;

// Recursive evaluation against an exact joint table; env binds the free
// variables to level names.
double evaluate(const Expr& e, const JointTable& table, const Env& env = {});

}  // namespace ctxcausal
