#include "ctxcausal/ldag.hpp"

#include <algorithm>
#include <cctype>
#include <deque>
#include <fstream>
#include <sstream>

namespace ctxcausal {

// --- ContextAssignment ---------------------------------------------------

const std::string& ContextAssignment::at(const std::string& var) const {
    const auto it = values.find(var);
    if (it == values.end()) {
        throw std::runtime_error("context assignment does not cover variable " + var);
    }
    return it->second;
}

bool ContextAssignment::contains(const ContextCondition& cond) const {
    const auto it = values.find(cond.variable);
    return it != values.end() && it->second == cond.level;
}

std::string ContextAssignment::to_string() const {
    std::string out;
    for (const auto& [k, v] : values) {
        if (!out.empty()) out += ",";
        out += k + "=" + v;
    }
    return out;
}

// --- Ldag ----------------------------------------------------------------

const NodeDecl* Ldag::find_node(const std::string& node_name) const {
    for (const auto& n : nodes) {
        if (n.name == node_name) return &n;
    }
    return nullptr;
}

std::vector<std::string> Ldag::context_variables() const {
    std::vector<std::string> out;
    for (const auto& n : nodes) {
        if (n.kind == NodeKind::Context) out.push_back(n.name);
    }
    return out;
}

std::vector<ContextAssignment> Ldag::context_product() const {
    std::vector<ContextAssignment> result{ContextAssignment{}};
    for (const auto& n : nodes) {
        if (n.kind != NodeKind::Context) continue;
        std::vector<ContextAssignment> next;
        for (const auto& partial : result) {
            for (const auto& level : n.levels) {
                ContextAssignment extended = partial;
                extended.values[n.name] = level;
                next.push_back(std::move(extended));
            }
        }
        result = std::move(next);
    }
    return result;
}

namespace {

Ldag canonical(const Ldag& g) {
    Ldag out = g;
    std::sort(out.nodes.begin(), out.nodes.end(),
              [](const NodeDecl& a, const NodeDecl& b) { return a.name < b.name; });
    for (auto& e : out.edges) {
        std::sort(e.absent_in.begin(), e.absent_in.end());
    }
    std::sort(out.edges.begin(), out.edges.end(),
              [](const LabeledEdge& a, const LabeledEdge& b) {
                  return std::tie(a.from, a.to) < std::tie(b.from, b.to);
              });
    return out;
}

}  // namespace

bool Ldag::operator==(const Ldag& other) const {
    const Ldag a = canonical(*this);
    const Ldag b = canonical(other);
    return a.name == b.name && a.nodes == b.nodes && a.edges == b.edges;
}

// --- Dag -----------------------------------------------------------------

int Dag::index_of(const std::string& name) const {
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        if (nodes[i].name == name) return static_cast<int>(i);
    }
    return -1;
}

int Dag::require_index(const std::string& name) const {
    const int i = index_of(name);
    if (i < 0) throw std::runtime_error("unknown node: " + name);
    return i;
}

std::vector<std::vector<int>> Dag::parents() const {
    std::vector<std::vector<int>> out(nodes.size());
    for (const auto& [from, to] : edges) out[to].push_back(from);
    return out;
}

std::vector<std::vector<int>> Dag::children() const {
    std::vector<std::vector<int>> out(nodes.size());
    for (const auto& [from, to] : edges) out[from].push_back(to);
    return out;
}

bool Dag::has_edge(const std::string& from, const std::string& to) const {
    const int f = index_of(from), t = index_of(to);
    return std::find(edges.begin(), edges.end(), std::make_pair(f, t)) != edges.end();
}

std::optional<std::vector<int>> Dag::topological_order() const {
    std::vector<int> indeg(nodes.size(), 0);
    for (const auto& [from, to] : edges) ++indeg[to];
    std::deque<int> ready;
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        if (indeg[i] == 0) ready.push_back(static_cast<int>(i));
    }
    const auto ch = children();
    std::vector<int> order;
    while (!ready.empty()) {
        const int v = ready.front();
        ready.pop_front();
        order.push_back(v);
        for (int c : ch[v]) {
            if (--indeg[c] == 0) ready.push_back(c);
        }
    }
    if (order.size() != nodes.size()) return std::nullopt;
    return order;
}

std::set<int> Dag::ancestors(const std::set<int>& of) const {
    const auto pa = parents();
    std::set<int> seen = of;
    std::deque<int> frontier(of.begin(), of.end());
    while (!frontier.empty()) {
        const int v = frontier.front();
        frontier.pop_front();
        for (int p : pa[v]) {
            if (seen.insert(p).second) frontier.push_back(p);
        }
    }
    return seen;
}

std::set<int> Dag::descendants(const std::set<int>& of) const {
    const auto ch = children();
    std::set<int> seen = of;
    std::deque<int> frontier(of.begin(), of.end());
    while (!frontier.empty()) {
        const int v = frontier.front();
        frontier.pop_front();
        for (int c : ch[v]) {
            if (seen.insert(c).second) frontier.push_back(c);
        }
    }
    return seen;
}

// --- Admg ----------------------------------------------------------------

int Admg::index_of(const std::string& name) const {
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        if (nodes[i] == name) return static_cast<int>(i);
    }
    return -1;
}

bool Admg::has_directed(const std::string& from, const std::string& to) const {
    const int f = index_of(from), t = index_of(to);
    return std::find(directed.begin(), directed.end(), std::make_pair(f, t)) != directed.end();
}

bool Admg::has_bidirected(const std::string& a, const std::string& b) const {
    const std::string lo = std::min(a, b), hi = std::max(a, b);
    return std::any_of(bidirected.begin(), bidirected.end(),
                       [&](const BidirectedEdge& e) { return e.a == lo && e.b == hi; });
}

// --- projection ----------------------------------------------------------

Dag project(const Ldag& g, const ContextAssignment& ctx) {
    for (const auto& e : g.edges) {
        for (const auto& cond : e.absent_in) {
            if (!ctx.values.count(cond.variable)) {
                throw std::runtime_error("incomplete context assignment: missing " +
                                         cond.variable);
            }
        }
    }
    Dag dag;
    dag.nodes = g.nodes;
    for (const auto& e : g.edges) {
        const bool absent = std::any_of(e.absent_in.begin(), e.absent_in.end(),
                                        [&](const ContextCondition& c) { return ctx.contains(c); });
        if (!absent) {
            dag.edges.emplace_back(dag.require_index(e.from), dag.require_index(e.to));
        }
    }
    return dag;
}

Dag as_dag(const Ldag& g) {
    Dag dag;
    dag.nodes = g.nodes;
    for (const auto& e : g.edges) {
        dag.edges.emplace_back(dag.require_index(e.from), dag.require_index(e.to));
    }
    return dag;
}

// --- latent projection ---------------------------------------------------

Admg latent_project(const Dag& dag, const std::set<std::string>& observed) {
    for (const auto& name : observed) dag.require_index(name);

    std::vector<bool> is_obs(dag.nodes.size(), false);
    for (std::size_t i = 0; i < dag.nodes.size(); ++i) {
        is_obs[i] = observed.count(dag.nodes[i].name) > 0;
    }

    const auto ch = dag.children();
    // Observed nodes reachable from `start`'s children through latent-only
    // intermediates.
    auto reach_observed = [&](int start) {
        std::set<int> reached;
        std::deque<int> frontier;
        std::set<int> seen_latent;
        for (int c : ch[start]) {
            if (is_obs[c]) {
                reached.insert(c);
            } else if (seen_latent.insert(c).second) {
                frontier.push_back(c);
            }
        }
        while (!frontier.empty()) {
            const int v = frontier.front();
            frontier.pop_front();
            for (int c : ch[v]) {
                if (is_obs[c]) {
                    reached.insert(c);
                } else if (seen_latent.insert(c).second) {
                    frontier.push_back(c);
                }
            }
        }
        return reached;
    };

    Admg admg;
    std::vector<int> obs_index(dag.nodes.size(), -1);
    for (std::size_t i = 0; i < dag.nodes.size(); ++i) {
        if (is_obs[i]) {
            obs_index[i] = static_cast<int>(admg.nodes.size());
            admg.nodes.push_back(dag.nodes[i].name);
        }
    }

    std::set<std::pair<int, int>> dir;
    for (std::size_t i = 0; i < dag.nodes.size(); ++i) {
        if (!is_obs[i]) continue;
        for (int t : reach_observed(static_cast<int>(i))) {
            dir.emplace(obs_index[i], obs_index[t]);
        }
    }
    admg.directed.assign(dir.begin(), dir.end());

    std::set<std::pair<std::string, std::string>> seen_bidir;
    for (std::size_t i = 0; i < dag.nodes.size(); ++i) {
        if (is_obs[i]) continue;
        const auto reached = reach_observed(static_cast<int>(i));
        for (auto a = reached.begin(); a != reached.end(); ++a) {
            for (auto b = std::next(a); b != reached.end(); ++b) {
                const std::string na = dag.nodes[*a].name, nb = dag.nodes[*b].name;
                const std::string lo = std::min(na, nb), hi = std::max(na, nb);
                if (seen_bidir.emplace(lo, hi).second) {
                    admg.bidirected.push_back({lo, hi, dag.nodes[i].name});
                }
            }
        }
    }
    std::sort(admg.bidirected.begin(), admg.bidirected.end(),
              [](const BidirectedEdge& x, const BidirectedEdge& y) {
                  return std::tie(x.a, x.b) < std::tie(y.a, y.b);
              });
    return admg;
}

// --- d-separation (reachability / Bayes-ball) ----------------------------

bool d_separated(const Dag& dag, const std::set<std::string>& a,
                 const std::set<std::string>& b, const std::set<std::string>& z) {
    for (const auto& x : a) {
        if (b.count(x) || z.count(x)) throw std::runtime_error("d_separated: sets overlap");
    }
    for (const auto& x : b) {
        if (z.count(x)) throw std::runtime_error("d_separated: sets overlap");
    }

    std::set<int> zi, bi;
    for (const auto& s : z) zi.insert(dag.require_index(s));
    for (const auto& s : b) bi.insert(dag.require_index(s));
    const std::set<int> an_z = dag.ancestors(zi);

    const auto pa = dag.parents();
    const auto ch = dag.children();

    // State: (node, direction); Up = ball travelling towards parents (arrived
    // from a child), Down = arrived from a parent.
    enum Dir { Up = 0, Down = 1 };
    const int n = static_cast<int>(dag.nodes.size());
    std::vector<std::array<bool, 2>> visited(n, {false, false});
    std::deque<std::pair<int, Dir>> frontier;
    for (const auto& s : a) frontier.emplace_back(dag.require_index(s), Up);

    while (!frontier.empty()) {
        const auto [v, dir] = frontier.front();
        frontier.pop_front();
        if (visited[v][dir]) continue;
        visited[v][dir] = true;
        const bool in_z = zi.count(v) > 0;
        if (!in_z && bi.count(v)) return false;
        if (dir == Up) {
            if (!in_z) {
                for (int p : pa[v]) frontier.emplace_back(p, Up);
                for (int c : ch[v]) frontier.emplace_back(c, Down);
            }
        } else {
            if (!in_z) {
                for (int c : ch[v]) frontier.emplace_back(c, Down);
            }
            if (an_z.count(v)) {
                for (int p : pa[v]) frontier.emplace_back(p, Up);
            }
        }
    }
    return true;
}

bool csi_separated(const Ldag& g, const std::set<std::string>& a,
                   const std::set<std::string>& b, const std::set<std::string>& z,
                   const ContextAssignment& ctx) {
    const Dag dag = project(g, ctx);
    std::set<std::string> cond = z;
    for (const auto& [var, level] : ctx.values) {
        if (!a.count(var) && !b.count(var)) cond.insert(var);
    }
    return d_separated(dag, a, b, cond);
}

// --- validation ----------------------------------------------------------

std::vector<LdagIssue> validate(const Ldag& g) {
    std::vector<LdagIssue> issues;
    auto add = [&issues](const std::string& code, const std::string& msg) {
        issues.push_back({code, msg});
    };

    std::set<std::string> names;
    for (const auto& n : g.nodes) {
        if (!names.insert(n.name).second) {
            add("duplicate-node", "node declared twice: " + n.name);
        }
        if (n.kind == NodeKind::Context && n.levels.size() < 2) {
            add("context-levels", "context variable " + n.name + " needs at least 2 levels");
        }
        if (n.kind != NodeKind::Context && !n.levels.empty()) {
            add("levels-on-noncontext", "levels declared on non-context node " + n.name);
        }
    }

    for (const auto& e : g.edges) {
        if (e.from == e.to) {
            add("self-loop", "self loop on " + e.from);
            continue;
        }
        if (!names.count(e.from)) add("unknown-node", "edge references unknown node " + e.from);
        if (!names.count(e.to)) add("unknown-node", "edge references unknown node " + e.to);

        std::set<std::string> label_vars;
        std::set<std::string> label_levels;
        for (const auto& cond : e.absent_in) {
            label_vars.insert(cond.variable);
            const NodeDecl* ctx_node = g.find_node(cond.variable);
            if (!ctx_node || ctx_node->kind != NodeKind::Context) {
                add("label-variable", "label on " + e.from + " -> " + e.to +
                                          " references non-context variable " + cond.variable);
                continue;
            }
            if (std::find(ctx_node->levels.begin(), ctx_node->levels.end(), cond.level) ==
                ctx_node->levels.end()) {
                add("label-level", "label on " + e.from + " -> " + e.to +
                                       " references unknown level " + cond.variable + "=" +
                                       cond.level);
                continue;
            }
            label_levels.insert(cond.level);
        }
        if (label_vars.size() > 1) {
            add("label-conjunct", "label on " + e.from + " -> " + e.to +
                                      " references more than one context variable");
        } else if (label_vars.size() == 1) {
            const NodeDecl* ctx_node = g.find_node(*label_vars.begin());
            if (ctx_node && ctx_node->kind == NodeKind::Context &&
                label_levels.size() >= ctx_node->levels.size()) {
                add("edge-absent-everywhere",
                    "edge " + e.from + " -> " + e.to + " is absent in all contexts");
            }
        }
    }

    if (issues.empty()) {
        for (const auto& ctx : g.context_product()) {
            const Dag dag = project(g, ctx);
            if (!dag.topological_order()) {
                std::string where = ctx.values.empty() ? "" : " in context " + ctx.to_string();
                add("cycle", "projected graph is cyclic" + where);
            }
        }
    }
    return issues;
}

// --- DSL parser ----------------------------------------------------------

ParseError::ParseError(int line_, int column_, const std::string& what)
    : std::runtime_error("line " + std::to_string(line_) + ":" + std::to_string(column_) +
                         ": " + what),
      line(line_),
      column(column_) {}

namespace {

struct Token {
    enum Kind { Ident, Punct, End } kind = End;
    std::string text;
    int line = 0;
    int col = 0;
};

class Lexer {
public:
    explicit Lexer(const std::string& text) : text_(text) { advance(); }

    const Token& peek() const { return current_; }

    Token take() {
        Token t = current_;
        advance();
        return t;
    }

private:
    void advance() {
        while (pos_ < text_.size()) {
            const char c = text_[pos_];
            if (c == '#') {
                while (pos_ < text_.size() && text_[pos_] != '\n') ++pos_;
            } else if (c == '\n') {
                ++line_;
                col_ = 1;
                ++pos_;
            } else if (std::isspace(static_cast<unsigned char>(c))) {
                ++col_;
                ++pos_;
            } else {
                break;
            }
        }
        if (pos_ >= text_.size()) {
            current_ = {Token::End, "", line_, col_};
            return;
        }
        const int start_line = line_, start_col = col_;
        const char c = text_[pos_];
        if (std::isalnum(static_cast<unsigned char>(c)) || c == '_') {
            std::string ident;
            while (pos_ < text_.size() &&
                   (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_')) {
                ident.push_back(text_[pos_]);
                ++pos_;
                ++col_;
            }
            current_ = {Token::Ident, ident, start_line, start_col};
            return;
        }
        if (c == '-' && pos_ + 1 < text_.size() && text_[pos_ + 1] == '>') {
            pos_ += 2;
            col_ += 2;
            current_ = {Token::Punct, "->", start_line, start_col};
            return;
        }
        static const std::string puncts = "{}[],=:;";
        if (puncts.find(c) != std::string::npos) {
            ++pos_;
            ++col_;
            current_ = {Token::Punct, std::string(1, c), start_line, start_col};
            return;
        }
        throw ParseError(start_line, start_col, std::string("unexpected character '") + c + "'");
    }

    const std::string& text_;
    std::size_t pos_ = 0;
    int line_ = 1;
    int col_ = 1;
    Token current_;
};

class Parser {
public:
    explicit Parser(const std::string& text) : lex_(text) {}

    Ldag parse() {
        expect_keyword("graph");
        graph_.name = expect_ident("graph name");
        expect_punct("{");
        while (!is_punct("}")) {
            if (lex_.peek().kind == Token::End) {
                fail("unexpected end of input, expected '}'");
            }
            statement();
            while (is_punct(";")) lex_.take();
        }
        lex_.take();  // '}'
        if (lex_.peek().kind != Token::End) fail("trailing input after graph body");
        finish();
        return graph_;
    }

private:
    void statement() {
        const Token t = lex_.peek();
        if (t.kind != Token::Ident) fail("expected statement");
        if (t.text == "context") {
            lex_.take();
            context_decl();
        } else if (t.text == "node") {
            lex_.take();
            declare(expect_ident_token("node name"), NodeKind::Observed, {});
        } else if (t.text == "latent") {
            lex_.take();
            declare(expect_ident_token("latent name"), NodeKind::Latent, {});
        } else {
            edge_decl();
        }
    }

    void context_decl() {
        const Token name = expect_ident_token("context variable name");
        expect_keyword("in");
        expect_punct("{");
        std::vector<std::string> levels;
        levels.push_back(expect_ident("level name"));
        while (is_punct(",")) {
            lex_.take();
            levels.push_back(expect_ident("level name"));
        }
        expect_punct("}");
        for (std::size_t i = 0; i < levels.size(); ++i) {
            for (std::size_t j = i + 1; j < levels.size(); ++j) {
                if (levels[i] == levels[j]) {
                    throw ParseError(name.line, name.col,
                                     "duplicate level " + levels[i] + " on context " + name.text);
                }
            }
        }
        if (levels.size() < 2) {
            throw ParseError(name.line, name.col,
                             "context variable " + name.text + " needs at least 2 levels");
        }
        declare(name, NodeKind::Context, levels);
    }

    void declare(const Token& name, NodeKind kind, std::vector<std::string> levels) {
        if (graph_.find_node(name.text)) {
            throw ParseError(name.line, name.col, "duplicate node " + name.text);
        }
        graph_.nodes.push_back({name.text, kind, std::move(levels)});
    }

    void edge_decl() {
        const Token from = expect_ident_token("node name");
        expect_punct("->");
        const Token to = expect_ident_token("node name");
        LabeledEdge edge{from.text, to.text, {}};
        require_declared(from);
        require_declared(to);
        if (from.text == to.text) {
            throw ParseError(from.line, from.col, "self loop on " + from.text);
        }
        if (is_punct("[")) {
            lex_.take();
            expect_keyword("absent");
            expect_punct(":");
            edge.absent_in.push_back(label_condition());
            while (is_punct(",")) {
                lex_.take();
                edge.absent_in.push_back(label_condition());
            }
            expect_punct("]");
            check_label(edge, from);
        }
        for (const auto& e : graph_.edges) {
            if (e.from == edge.from && e.to == edge.to) {
                throw ParseError(from.line, from.col,
                                 "duplicate edge " + edge.from + " -> " + edge.to);
            }
        }
        std::sort(edge.absent_in.begin(), edge.absent_in.end());
        graph_.edges.push_back(std::move(edge));
    }

    ContextCondition label_condition() {
        const Token var = expect_ident_token("context variable");
        expect_punct("=");
        const Token level = expect_ident_token("context level");
        const NodeDecl* decl = graph_.find_node(var.text);
        if (!decl || decl->kind != NodeKind::Context) {
            throw ParseError(var.line, var.col,
                             "label references undeclared context variable " + var.text);
        }
        if (std::find(decl->levels.begin(), decl->levels.end(), level.text) ==
            decl->levels.end()) {
            throw ParseError(level.line, level.col,
                             "unknown level " + level.text + " for context " + var.text);
        }
        return {var.text, level.text};
    }

    void check_label(const LabeledEdge& edge, const Token& at) {
        std::set<std::string> vars;
        std::set<std::string> levels;
        for (const auto& c : edge.absent_in) {
            vars.insert(c.variable);
            levels.insert(c.level);
        }
        if (vars.size() > 1) {
            throw ParseError(at.line, at.col,
                             "label may reference only one context variable per edge");
        }
        const NodeDecl* decl = graph_.find_node(*vars.begin());
        if (levels.size() >= decl->levels.size()) {
            throw ParseError(at.line, at.col, "edge " + edge.from + " -> " + edge.to +
                                                  " would be absent in all contexts; delete it");
        }
    }

    void require_declared(const Token& name) {
        if (!graph_.find_node(name.text)) {
            throw ParseError(name.line, name.col, "undeclared node " + name.text);
        }
    }

    void finish() {
        for (const auto& ctx : graph_.context_product()) {
            const Dag dag = project(graph_, ctx);
            if (!dag.topological_order()) {
                std::string where = ctx.values.empty() ? "" : " in context " + ctx.to_string();
                fail("projected graph is cyclic" + where);
            }
        }
    }

    bool is_punct(const std::string& p) const {
        return lex_.peek().kind == Token::Punct && lex_.peek().text == p;
    }

    void expect_punct(const std::string& p) {
        if (!is_punct(p)) fail("expected '" + p + "'");
        lex_.take();
    }

    void expect_keyword(const std::string& kw) {
        const Token t = lex_.peek();
        if (t.kind != Token::Ident || t.text != kw) fail("expected '" + kw + "'");
        lex_.take();
    }

    Token expect_ident_token(const std::string& what) {
        const Token t = lex_.peek();
        if (t.kind != Token::Ident) fail("expected " + what);
        return lex_.take();
    }

    std::string expect_ident(const std::string& what) { return expect_ident_token(what).text; }

    [[noreturn]] void fail(const std::string& msg) const {
        throw ParseError(lex_.peek().line, lex_.peek().col, msg);
    }

    Lexer lex_;
    Ldag graph_;
};

}  // namespace

Ldag parse_ldag(const std::string& text) {
    return Parser(text).parse();
}

Ldag parse_ldag_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open graph file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_ldag(buf.str());
}

std::string serialize_ldag(const Ldag& g) {
    const Ldag c = canonical(g);
    std::ostringstream out;
    out << "graph " << c.name << " {\n";
    for (const auto& n : c.nodes) {
        if (n.kind != NodeKind::Context) continue;
        out << "  context " << n.name << " in {";
        for (std::size_t i = 0; i < n.levels.size(); ++i) {
            if (i) out << ", ";
            out << n.levels[i];
        }
        out << "}\n";
    }
    for (const auto& n : c.nodes) {
        if (n.kind == NodeKind::Observed) out << "  node " << n.name << "\n";
    }
    for (const auto& n : c.nodes) {
        if (n.kind == NodeKind::Latent) out << "  latent " << n.name << "\n";
    }
    for (const auto& e : c.edges) {
        out << "  " << e.from << " -> " << e.to;
        if (!e.absent_in.empty()) {
            out << " [absent: ";
            for (std::size_t i = 0; i < e.absent_in.size(); ++i) {
                if (i) out << ", ";
                out << e.absent_in[i].variable << "=" << e.absent_in[i].level;
            }
            out << "]";
        }
        out << "\n";
    }
    out << "}\n";
    return out.str();
}

}  // namespace ctxcausal
