#pragma once

#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace ctxcausal {

enum class NodeKind { Observed, Latent, Context };

struct NodeDecl {
    std::string name;
    NodeKind kind = NodeKind::Observed;
    std::vector<std::string> levels;  // context nodes only

    bool operator==(const NodeDecl&) const = default;
};

// One "variable = level" condition inside an edge label.
struct ContextCondition {
    std::string variable;
    std::string level;

    auto operator<=>(const ContextCondition&) const = default;
};

struct LabeledEdge {
    std::string from;
    std::string to;
    std::vector<ContextCondition> absent_in;  // sorted, unique

    bool labelled() const { return !absent_in.empty(); }
    bool operator==(const LabeledEdge&) const = default;
};

// Full assignment of context variables to levels.
struct ContextAssignment {
    std::map<std::string, std::string> values;

    const std::string& at(const std::string& var) const;
    bool contains(const ContextCondition& cond) const;
    std::string to_string() const;
};

struct LdagIssue {
    std::string code;  // stable identifier, e.g. "cycle", "edge-absent-everywhere"
    std::string message;
};

struct Ldag {
    std::string name;
    std::vector<NodeDecl> nodes;
    std::vector<LabeledEdge> edges;

    const NodeDecl* find_node(const std::string& name) const;
    std::vector<std::string> context_variables() const;
    std::vector<ContextAssignment> context_product() const;

    // Order-insensitive structural equality.
    bool operator==(const Ldag& other) const;
};

// Plain directed graph over named nodes; node kinds are carried along so the
// latent projection and context handling downstream know which is which.
struct Dag {
    std::vector<NodeDecl> nodes;
    std::vector<std::pair<int, int>> edges;  // indices into nodes

    int index_of(const std::string& name) const;  // -1 when absent
    int require_index(const std::string& name) const;
    std::vector<std::vector<int>> parents() const;
    std::vector<std::vector<int>> children() const;

    bool has_edge(const std::string& from, const std::string& to) const;
    std::optional<std::vector<int>> topological_order() const;  // nullopt on cycle

    // Ancestors of the given set (inclusive).
    std::set<int> ancestors(const std::set<int>& of) const;
    std::set<int> descendants(const std::set<int>& of) const;
};

struct BidirectedEdge {
    std::string a;
    std::string b;              // a < b canonically
    std::string via;            // latent node that induced the arc (diagnostic)

    bool operator==(const BidirectedEdge&) const = default;
};

// Acyclic directed mixed graph over observed nodes.
struct Admg {
    std::vector<std::string> nodes;
    std::vector<std::pair<int, int>> directed;
    std::vector<BidirectedEdge> bidirected;

    int index_of(const std::string& name) const;
    bool has_directed(const std::string& from, const std::string& to) const;
    bool has_bidirected(const std::string& a, const std::string& b) const;
};

class ParseError : public std::runtime_error {
public:
    ParseError(int line, int column, const std::string& what);
    int line;
    int column;
};

// --- operations ---------------------------------------------------------

Ldag parse_ldag(const std::string& text);
Ldag parse_ldag_file(const std::string& path);
std::string serialize_ldag(const Ldag& g);

// Removes exactly the edges whose label covers ctx; all nodes retained.
Dag project(const Ldag& g, const ContextAssignment& ctx);

// Ldag with no labels behaves as a plain DAG in every context.
Dag as_dag(const Ldag& g);

// Standard latent projection onto `observed`. Directed a->b iff a reaches b
// through latent-only intermediates; a<->b iff a latent common cause reaches
// both through latent-only paths.
Admg latent_project(const Dag& dag, const std::set<std::string>& observed);

bool d_separated(const Dag& dag, const std::set<std::string>& a,
                 const std::set<std::string>& b, const std::set<std::string>& z);

bool csi_separated(const Ldag& g, const std::set<std::string>& a,
                   const std::set<std::string>& b, const std::set<std::string>& z,
                   const ContextAssignment& ctx);

std::vector<LdagIssue> validate(const Ldag& g);

}  // namespace ctxcausal
