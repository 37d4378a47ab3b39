#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <set>

#include "ctxcausal/ldag.hpp"
#include "ctxcausal/scm.hpp"
#include "ctxcausal/special.hpp"
#include "helpers.hpp"

using namespace ctxcausal;
using testutil::fixture;

namespace {

ContextAssignment ctx_m(const std::string& level) {
    ContextAssignment ctx;
    ctx.values["M"] = level;
    return ctx;
}

std::set<std::string> edge_set(const Dag& dag) {
    std::set<std::string> out;
    for (const auto& [f, t] : dag.edges) {
        out.insert(dag.nodes[f].name + ">" + dag.nodes[t].name);
    }
    return out;
}

}  // namespace

TEST_CASE("parser reads the five-node context fixture") {
    const Ldag g = parse_ldag_file(fixture("graphs/toy_csi.ldag"));
    CHECK(g.nodes.size() == 5);
    int labelled = 0;
    for (const auto& e : g.edges) labelled += e.labelled() ? 1 : 0;
    CHECK(labelled == 3);
    const NodeDecl* m = g.find_node("M");
    REQUIRE(m != nullptr);
    CHECK(m->kind == NodeKind::Context);
    CHECK(m->levels == std::vector<std::string>{"0", "1"});
}

TEST_CASE("graph with no labels parses as a plain DAG") {
    const Ldag g = parse_ldag("graph plain { node A node B A -> B }");
    CHECK(g.edges.size() == 1);
    CHECK_FALSE(g.edges[0].labelled());
    CHECK(g.context_variables().empty());
    CHECK(g.context_product().size() == 1);
}

TEST_CASE("travel fixture carries nine labelled edges") {
    const Ldag g = parse_ldag_file(fixture("graphs/travel_expenditure.ldag"));
    int m0 = 0, m1 = 0;
    for (const auto& e : g.edges) {
        for (const auto& cond : e.absent_in) {
            if (cond.level == "0") ++m0;
            if (cond.level == "1") ++m1;
        }
    }
    CHECK(m0 == 6);
    CHECK(m1 == 3);
    CHECK(validate(g).empty());
}

TEST_CASE("parse errors carry position and reason") {
    CHECK_THROWS_AS(parse_ldag("graph g { node A node A }"), ParseError);
    CHECK_THROWS_AS(parse_ldag("graph g { node A A -> B }"), ParseError);
    CHECK_THROWS_AS(parse_ldag("graph g { context M in {0,1} node A node B A -> B [absent: M=2] }"),
                    ParseError);
    CHECK_THROWS_AS(parse_ldag("graph g { node A node B A -> B extra"), ParseError);
    // conjunct labels over two context variables are rejected
    CHECK_THROWS_AS(
        parse_ldag("graph g { context M in {0,1} context K in {0,1} node A node B "
                   "A -> B [absent: M=0, K=1] }"),
        ParseError);
    // a label covering every level would delete the edge everywhere
    CHECK_THROWS_AS(parse_ldag("graph g { context M in {0,1} node A node B "
                               "A -> B [absent: M=0, M=1] }"),
                    ParseError);
    // cyclic projection
    CHECK_THROWS_AS(parse_ldag("graph g { node A node B A -> B B -> A }"), ParseError);
    try {
        parse_ldag("graph g {\n  node A\n  node A\n}");
        FAIL("expected ParseError");
    } catch (const ParseError& err) {
        CHECK(err.line == 3);
        CHECK(err.column >= 1);
    }
}

TEST_CASE("projection removes exactly the labelled edges") {
    const Ldag g = parse_ldag_file(fixture("graphs/toy_csi.ldag"));

    const Dag at_m1 = project(g, ctx_m("1"));
    CHECK(edge_set(at_m1) ==
          std::set<std::string>{"M>X", "M>Z", "X>Z", "X>Y", "Z>Y"});

    const Dag at_m0 = project(g, ctx_m("0"));
    CHECK(edge_set(at_m0) ==
          std::set<std::string>{"M>X", "M>Z", "U>X", "U>Z", "X>Y", "Z>Y"});

    // unlabelled graph: identity in any context
    const Ldag plain = parse_ldag("graph p { context M in {0,1} node A node B A -> B M -> A }");
    CHECK(edge_set(project(plain, ctx_m("0"))) == edge_set(project(plain, ctx_m("1"))));

    ContextAssignment empty;
    CHECK_THROWS(project(g, empty));
}

TEST_CASE("every context projection of the fixtures is acyclic") {
    for (const auto& name : {"graphs/toy_confounded.ldag", "graphs/toy_csi.ldag",
                             "graphs/travel_expenditure.ldag", "graphs/travel_income.ldag",
                             "graphs/travel_synthetic.ldag"}) {
        const Ldag g = parse_ldag_file(fixture(name));
        for (const auto& ctx : g.context_product()) {
            CHECK(project(g, ctx).topological_order().has_value());
        }
    }
}

TEST_CASE("latent projection produces the expected confounding arcs") {
    const Ldag toy = parse_ldag_file(fixture("graphs/toy_csi.ldag"));
    const Admg at_m0 = latent_project(project(toy, ctx_m("0")), {"M", "X", "Z", "Y"});
    CHECK(at_m0.has_bidirected("X", "Z"));
    CHECK(at_m0.bidirected.size() == 1);
    CHECK(at_m0.bidirected[0].via == "U");
    CHECK(at_m0.has_directed("M", "X"));
    CHECK_FALSE(at_m0.has_directed("X", "Z"));  // absent at M=0

    // all nodes observed: no bidirected edges, projection is the identity
    const Dag plain = project(toy, ctx_m("1"));
    std::set<std::string> all;
    for (const auto& n : plain.nodes) all.insert(n.name);
    const Admg full = latent_project(plain, all);
    CHECK(full.bidirected.empty());
    CHECK(full.directed.size() == plain.edges.size());

    // augmented travel graph: income confounds treatment and outcome
    const Ldag income = parse_ldag_file(fixture("graphs/travel_income.ldag"));
    const Admg aug = latent_project(project(income, ctx_m("0")),
                                    {"D", "M", "X", "C", "S", "Z", "W", "Y"});
    CHECK(aug.has_bidirected("X", "Y"));
    bool via_income = false;
    for (const auto& e : aug.bidirected) {
        if (e.a == "X" && e.b == "Y" && e.via == "I") via_income = true;
    }
    CHECK(via_income);
}

TEST_CASE("latent projection is the identity on latent-free graphs") {
    Rng rng(77);
    for (int rep = 0; rep < 20; ++rep) {
        const Dag dag = testutil::random_dag(7, 0.3, rng);
        std::set<std::string> all;
        for (const auto& n : dag.nodes) all.insert(n.name);
        const Admg admg = latent_project(dag, all);
        CHECK(admg.bidirected.empty());
        CHECK(admg.directed.size() == dag.edges.size());
    }
}

TEST_CASE("d-separation on the five-node fixture") {
    const Ldag g = parse_ldag_file(fixture("graphs/toy_csi.ldag"));
    const Dag at_m0 = project(g, ctx_m("0"));
    CHECK(d_separated(at_m0, {"X"}, {"Z"}, {"M", "U"}));
    const Dag at_m1 = project(g, ctx_m("1"));
    CHECK_FALSE(d_separated(at_m1, {"X"}, {"Z"}, {"M"}));

    // disconnected nodes are separated by anything
    const Ldag iso = parse_ldag("graph i { node A node B node C }");
    CHECK(d_separated(as_dag(iso), {"A"}, {"B"}, {}));
    CHECK(d_separated(as_dag(iso), {"A"}, {"B"}, {"C"}));

    CHECK_THROWS(d_separated(at_m0, {"X"}, {"X"}, {}));
}

TEST_CASE("reachability d-separation matches path enumeration on random graphs") {
    Rng rng(20240817);
    int checked = 0;
    for (int rep = 0; rep < 160; ++rep) {
        const int n = 4 + rng.uniform_int(9);  // up to 12 nodes
        const Dag dag = testutil::random_dag(n, 0.25 + 0.2 * rng.uniform01(), rng);
        std::set<std::string> a, b, z;
        const int ai = rng.uniform_int(n);
        int bi = rng.uniform_int(n);
        while (bi == ai) bi = rng.uniform_int(n);
        a.insert(dag.nodes[ai].name);
        b.insert(dag.nodes[bi].name);
        for (int i = 0; i < n; ++i) {
            if (i != ai && i != bi && rng.uniform01() < 0.3) z.insert(dag.nodes[i].name);
        }
        const bool fast = d_separated(dag, a, b, z);
        const bool slow = testutil::dsep_by_paths(dag, a, b, z);
        CHECK(fast == slow);
        CHECK(fast == d_separated(dag, b, a, z));  // symmetry
        ++checked;
    }
    CHECK(checked == 160);
}

TEST_CASE("context-specific separation on the travel fixture") {
    const Ldag g = parse_ldag_file(fixture("graphs/travel_expenditure.ldag"));
    CHECK_FALSE(csi_separated(g, {"W"}, {"X"}, {"C", "S", "D", "Z"}, ctx_m("1")));
    CHECK(csi_separated(g, {"W"}, {"X"}, {"D", "U1", "U2", "C", "S", "Z"}, ctx_m("0")));

    // adjacent nodes with nothing conditioned are never separated
    CHECK_FALSE(csi_separated(g, {"X"}, {"Y"}, {}, ctx_m("0")));
}

TEST_CASE("validate reports the invariant violations") {
    const Ldag travel = parse_ldag_file(fixture("graphs/travel_expenditure.ldag"));
    CHECK(validate(travel).empty());

    Ldag cyclic;
    cyclic.name = "c";
    cyclic.nodes = {{"X", NodeKind::Observed, {}}, {"Y", NodeKind::Observed, {}}};
    cyclic.edges = {{"X", "Y", {}}, {"Y", "X", {}}};
    const auto cycle_issues = validate(cyclic);
    REQUIRE(cycle_issues.size() == 1);
    CHECK(cycle_issues[0].code == "cycle");

    Ldag dead_edge;
    dead_edge.name = "d";
    dead_edge.nodes = {{"M", NodeKind::Context, {"0", "1"}},
                       {"A", NodeKind::Observed, {}},
                       {"B", NodeKind::Observed, {}}};
    dead_edge.edges = {{"M", "A", {}}, {"A", "B", {{"M", "0"}, {"M", "1"}}}};
    bool found = false;
    for (const auto& issue : validate(dead_edge)) {
        if (issue.code == "edge-absent-everywhere") found = true;
    }
    CHECK(found);
}

TEST_CASE("serializer round-trips fixtures and random graphs") {
    for (const auto& name : {"graphs/toy_confounded.ldag", "graphs/toy_csi.ldag",
                             "graphs/travel_expenditure.ldag", "graphs/travel_income.ldag"}) {
        const Ldag g = parse_ldag_file(fixture(name));
        CHECK(parse_ldag(serialize_ldag(g)) == g);
    }

    Rng rng(42);
    for (int rep = 0; rep < 50; ++rep) {
        Ldag g;
        g.name = "r" + std::to_string(rep);
        const int n = 3 + rng.uniform_int(6);
        g.nodes.push_back({"M", NodeKind::Context, {"a", "b", "c"}});
        for (int i = 0; i < n; ++i) {
            g.nodes.push_back({"v" + std::to_string(i),
                               rng.uniform01() < 0.2 ? NodeKind::Latent : NodeKind::Observed,
                               {}});
        }
        for (int i = 0; i < n; ++i) {
            for (int j = i + 1; j < n; ++j) {
                if (rng.uniform01() > 0.35) continue;
                LabeledEdge e{"v" + std::to_string(i), "v" + std::to_string(j), {}};
                const double roll = rng.uniform01();
                if (roll < 0.2) {
                    e.absent_in = {{"M", "a"}};
                } else if (roll < 0.3) {
                    e.absent_in = {{"M", "a"}, {"M", "c"}};
                }
                g.edges.push_back(e);
            }
        }
        CHECK(parse_ldag(serialize_ldag(g)) == g);
    }
}

TEST_CASE("separation implies independence in simulated data") {
    const ScmSpec scm = testutil::toy_csi_scm();
    const SimDataset data = simulate_observational(scm, 50000, 991, /*include_latents=*/true);
    const auto& m = data.column("M").data;
    const auto& u = data.column("U").data;
    const auto& x = data.column("X").data;
    const auto& z = data.column("Z").data;

    auto chi_square = [&](int m_level, bool stratify_u, double& stat, double& df) {
        stat = 0.0;
        df = 0.0;
        for (int u_level = 0; u_level < (stratify_u ? 2 : 1); ++u_level) {
            double counts[2][2] = {{0, 0}, {0, 0}};
            double total = 0;
            for (std::size_t i = 0; i < data.n; ++i) {
                if (static_cast<int>(m[i]) != m_level) continue;
                if (stratify_u && static_cast<int>(u[i]) != u_level) continue;
                counts[static_cast<int>(x[i])][static_cast<int>(z[i])] += 1;
                total += 1;
            }
            double rows[2] = {counts[0][0] + counts[0][1], counts[1][0] + counts[1][1]};
            double cols[2] = {counts[0][0] + counts[1][0], counts[0][1] + counts[1][1]};
            for (int r = 0; r < 2; ++r) {
                for (int c = 0; c < 2; ++c) {
                    const double expected = rows[r] * cols[c] / total;
                    stat += (counts[r][c] - expected) * (counts[r][c] - expected) / expected;
                }
            }
            df += 1.0;
        }
    };

    double stat = 0, df = 0;
    chi_square(0, true, stat, df);
    CHECK(chi_square_sf(stat, df) > 0.01);  // X indep Z given U within M=0

    chi_square(1, false, stat, df);
    CHECK(chi_square_sf(stat, df) < 0.001);  // X and Z dependent within M=1
}
