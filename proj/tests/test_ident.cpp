#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "ctxcausal/ident.hpp"
#include "ctxcausal/ldag.hpp"
#include "ctxcausal/scm.hpp"
#include "helpers.hpp"

using namespace ctxcausal;
using testutil::fixture;

namespace {

ContextAssignment ctx_m(const std::string& level) {
    ContextAssignment ctx;
    ctx.values["M"] = level;
    return ctx;
}

// Interventional ground truth by mutilated-graph enumeration.
double do_marginal(const ScmSpec& scm, const std::string& treatment, const std::string& x,
                   const Env& event) {
    const JointTable t = exact_joint(oracle_interventional(scm, treatment, x));
    std::map<int, int> assign;
    for (const auto& [var, level] : event) {
        assign[t.require_var(var)] = t.level_index(var, level);
    }
    return t.marginal(assign);
}

Term t(const std::string& name) { return {name, std::nullopt}; }
Term tf(const std::string& name, const std::string& level) { return {name, level}; }

// The combined two-context functional written out by hand, with the context
// variable left free inside the arms.
Expr hand_combined_mix() {
    const Expr outcome = make_atomic({t("Y")}, {t("X"), t("Z"), t("M")});
    const Expr arm1 = make_product({make_atomic({t("Z")}, {t("X"), t("M")}),
                                    make_atomic({t("M")}, {})});
    const Expr arm0 = make_product({make_atomic({t("Z")}, {t("M")}),
                                    make_atomic({t("M")}, {})});
    return make_sum({"Z", "M"},
                    make_product({outcome, make_mix("M", {{"0", arm0}, {"1", arm1}})}));
}

// The simplified per-context presentation of the same functional.
Expr hand_simplified_mix() {
    const Expr arm1 = make_product(
        {make_atomic({t("Y")}, {t("X"), tf("M", "1")}), make_atomic({tf("M", "1")}, {})});
    const Expr arm0 = make_sum(
        {"Z"}, make_product({make_atomic({t("Y")}, {t("X"), t("Z"), tf("M", "0")}),
                             make_atomic({t("Z")}, {tf("M", "0")}),
                             make_atomic({tf("M", "0")}, {})}));
    return make_mix("M", {{"0", arm0}, {"1", arm1}});
}

}  // namespace

TEST_CASE("confounded mediator makes the effect non-identifiable") {
    const Ldag g = parse_ldag_file(fixture("graphs/toy_confounded.ldag"));
    const Admg admg = latent_project(as_dag(g), {"M", "X", "Z", "Y"});
    REQUIRE(admg.has_bidirected("X", "Z"));
    REQUIRE(admg.has_directed("X", "Z"));
    const IdentResult res = id_effect(admg, "X", {"Y"});
    CHECK_FALSE(res.identified());
    CHECK(res.witness.find("hedge") != std::string::npos);
    CHECK(res.witness.find("X") != std::string::npos);
    CHECK(res.witness.find("Z") != std::string::npos);
}

TEST_CASE("projected context graph without latents is identifiable") {
    const Ldag g = parse_ldag_file(fixture("graphs/toy_csi.ldag"));
    const Dag at_m1 = project(g, ctx_m("1"));
    const Admg admg = latent_project(at_m1, {"M", "X", "Z", "Y"});
    const IdentResult res = id_effect(admg, "X", {"Y"});
    REQUIRE(res.identified());

    // Extensional check against mutilated-graph enumeration on random SCMs
    // over the always-on M=1 edge set.
    Ldag m1_graph;
    m1_graph.name = "m1";
    m1_graph.nodes = {{"M", NodeKind::Observed, {}},
                      {"X", NodeKind::Observed, {}},
                      {"Z", NodeKind::Observed, {}},
                      {"Y", NodeKind::Observed, {}}};
    m1_graph.edges = {
        {"M", "X", {}}, {"M", "Z", {}}, {"X", "Z", {}}, {"X", "Y", {}}, {"Z", "Y", {}}};
    for (int rep = 0; rep < 10; ++rep) {
        const ScmSpec scm = random_discrete_scm(m1_graph, 100 + rep);
        const JointTable joint = exact_joint(scm);
        for (const auto& x : {"0", "1"}) {
            for (const auto& y : {"0", "1"}) {
                const double expected = do_marginal(scm, "X", x, {{"Y", y}});
                const double got = evaluate(res.functional, joint, {{"X", x}, {"Y", y}});
                CHECK(std::abs(got - expected) < 1e-10);
            }
        }
    }
}

TEST_CASE("markov chain collapses to the truncated product") {
    const Ldag chain = parse_ldag("graph c { node X node Z node Y X -> Z Z -> Y }");
    const Admg admg = latent_project(as_dag(chain), {"X", "Z", "Y"});
    const IdentResult res = id_effect(admg, "X", {"Y"});
    REQUIRE(res.identified());
    for (int rep = 0; rep < 5; ++rep) {
        const ScmSpec scm = random_discrete_scm(chain, 300 + rep);
        const JointTable joint = exact_joint(scm);
        for (const auto& x : {"0", "1"}) {
            const double expected = do_marginal(scm, "X", x, {{"Y", "1"}});
            CHECK(std::abs(evaluate(res.functional, joint, {{"X", x}, {"Y", "1"}}) - expected) <
                  1e-10);
        }
    }
}

TEST_CASE("front-door structure identifies through the mediator district") {
    const Ldag fd = parse_ldag("graph f { node X node Z node Y latent U "
                               "U -> X U -> Y X -> Z Z -> Y }");
    const Admg admg = latent_project(as_dag(fd), {"X", "Z", "Y"});
    REQUIRE(admg.has_bidirected("X", "Y"));
    const IdentResult res = id_effect(admg, "X", {"Y"});
    REQUIRE(res.identified());
    for (int rep = 0; rep < 10; ++rep) {
        const ScmSpec scm = random_discrete_scm(fd, 9000 + rep);
        const JointTable joint = exact_joint(scm);
        for (const auto& x : {"0", "1"}) {
            const double expected = do_marginal(scm, "X", x, {{"Y", "1"}});
            CHECK(std::abs(evaluate(res.functional, joint, {{"X", x}, {"Y", "1"}}) - expected) <
                  1e-10);
        }
    }
}

TEST_CASE("bow arc fails with a district witness") {
    Admg bow;
    bow.nodes = {"X", "Y"};
    bow.directed = {{0, 1}};
    bow.bidirected = {{"X", "Y", "U"}};
    const IdentResult res = id_effect(bow, "X", {"Y"});
    CHECK_FALSE(res.identified());
    CHECK(res.witness.find("X<->Y") != std::string::npos);
    CHECK(res.witness.find("via U") != std::string::npos);
}

TEST_CASE("context effects on the travel fixture reproduce the adjustment sets") {
    const Ldag g = parse_ldag_file(fixture("graphs/travel_expenditure.ldag"));

    const IdentResult m0 = identify_context_effect(g, "X", "Y", ctx_m("0"));
    REQUIRE(m0.identified());
    REQUIRE(m0.adjustment_set.has_value());
    CHECK(*m0.adjustment_set == std::vector<std::string>{"C", "D", "S", "W", "Z"});

    const IdentResult m1 = identify_context_effect(g, "X", "Y", ctx_m("1"));
    REQUIRE(m1.identified());
    REQUIRE(m1.adjustment_set.has_value());
    CHECK(*m1.adjustment_set == std::vector<std::string>{"C", "D", "S"});

    // Emitted adjustment sets satisfy the backdoor criterion in the projected
    // graph, checked independently with d-separation.
    for (const auto& level : {"0", "1"}) {
        const IdentResult res = identify_context_effect(g, "X", "Y", ctx_m(level));
        Dag proj = project(g, ctx_m(level));
        const int xi = proj.require_index("X");
        proj.edges.erase(
            std::remove_if(proj.edges.begin(), proj.edges.end(),
                           [xi](const std::pair<int, int>& e) { return e.first == xi; }),
            proj.edges.end());
        std::set<std::string> cond(res.adjustment_set->begin(), res.adjustment_set->end());
        cond.insert("M");
        CHECK(d_separated(proj, {"X"}, {"Y"}, cond));
    }
}

TEST_CASE("income-augmented graph is not identifiable") {
    const Ldag g = parse_ldag_file(fixture("graphs/travel_income.ldag"));
    for (const auto& level : {"0", "1"}) {
        const IdentResult res = identify_context_effect(g, "X", "Y", ctx_m(level));
        CHECK_FALSE(res.identified());
        CHECK(res.witness.find("X") != std::string::npos);
        CHECK(res.witness.find("Y") != std::string::npos);
    }
}

TEST_CASE("erasing the labels destroys identifiability") {
    Ldag g = parse_ldag_file(fixture("graphs/travel_expenditure.ldag"));
    for (auto& e : g.edges) e.absent_in.clear();
    for (const auto& level : {"0", "1"}) {
        const IdentResult res = identify_context_effect(g, "X", "Y", ctx_m(level));
        CHECK_FALSE(res.identified());
        CHECK_FALSE(res.witness.empty());
    }
}

TEST_CASE("context variable downstream of the treatment is rejected") {
    const Ldag g = parse_ldag("graph g { context M in {0,1} node X node Y "
                              "X -> M M -> Y X -> Y }");
    CHECK_THROWS_AS(identify_context_effect(g, "X", "Y", ctx_m("0")), std::invalid_argument);
    CHECK_THROWS_AS(combine_contexts(g, "X", "Y", "M"), std::invalid_argument);
}

TEST_CASE("combined functional matches the interventional truth extensionally") {
    const Ldag toy = parse_ldag_file(fixture("graphs/toy_csi.ldag"));
    const IdentResult combined = combine_contexts(toy, "X", "Y", "M");
    REQUIRE(combined.identified());
    REQUIRE(combined.functional->kind == ExprKind::IndicatorMix);

    for (int rep = 0; rep < 25; ++rep) {
        const ScmSpec scm = random_discrete_scm(toy, 5000 + rep);
        const JointTable joint = exact_joint(scm);
        for (const auto& x : {"0", "1"}) {
            for (const auto& y : {"0", "1"}) {
                const double expected = do_marginal(scm, "X", x, {{"Y", y}});
                const double got = evaluate(combined.functional, joint, {{"X", x}, {"Y", y}});
                CHECK(std::abs(got - expected) < 1e-10);
            }
        }
    }
}

TEST_CASE("travel-shaped combination matches enumeration on random discrete SCMs") {
    const Ldag travel = parse_ldag_file(fixture("graphs/travel_expenditure.ldag"));
    const IdentResult combined = combine_contexts(travel, "X", "Y", "M");
    REQUIRE(combined.identified());
    for (int rep = 0; rep < 3; ++rep) {
        const ScmSpec scm = random_discrete_scm(travel, 7100 + rep);
        const JointTable joint = exact_joint(scm);
        for (const auto& x : {"0", "1"}) {
            const double expected = do_marginal(scm, "X", x, {{"Y", "1"}});
            const double got = evaluate(combined.functional, joint, {{"X", x}, {"Y", "1"}});
            CHECK(std::abs(got - expected) < 1e-10);
        }
    }
}

TEST_CASE("label-free latent-free graph collapses to one context") {
    const Ldag g = parse_ldag("graph g { context M in {0,1} node X node Z node Y "
                              "M -> X M -> Z X -> Z Z -> Y X -> Y }");
    const IdentResult combined = combine_contexts(g, "X", "Y", "M");
    REQUIRE(combined.identified());
    for (int rep = 0; rep < 5; ++rep) {
        const ScmSpec scm = random_discrete_scm(g, 880 + rep);
        const JointTable joint = exact_joint(scm);
        for (const auto& x : {"0", "1"}) {
            const double expected = do_marginal(scm, "X", x, {{"Y", "1"}});
            CHECK(std::abs(evaluate(combined.functional, joint, {{"X", x}, {"Y", "1"}}) -
                           expected) < 1e-10);
        }
    }
}

TEST_CASE("per-context arms fail with the failing context named") {
    const Ldag income = parse_ldag_file(fixture("graphs/travel_income.ldag"));
    const IdentResult res = combine_contexts(income, "X", "Y", "M");
    CHECK_FALSE(res.identified());
    CHECK(res.witness.find("context M=0") != std::string::npos);
}

TEST_CASE("simplify collapses a mediator sum to the conditional") {
    const Expr arm = make_sum({"Z"}, make_product({make_atomic({t("Y")}, {t("X"), t("Z"), t("M")}),
                                                   make_atomic({t("Z")}, {t("X"), t("M")})}));
    const Expr simplified = simplify(arm);
    CHECK(equal(simplified, make_atomic({t("Y")}, {t("X"), t("M")})));

    // fixpoint: nothing to eliminate
    const Expr stubborn = make_sum({"Z"}, make_product({make_atomic({t("Y")}, {t("Z")}),
                                                        make_atomic({t("Z")}, {t("X")})}));
    CHECK(equal(simplify(stubborn), stubborn));
}

TEST_CASE("simplify reduces the pre-combination arm to the per-context form") {
    // sum over {C,S,Z,W,D} of p(Y|X,M,CSZWD) p(W|X,M,CSZD) p(Z|X,M,CSD) p(M,CSD)
    const Expr arm = make_sum(
        {"C", "S", "Z", "W", "D"},
        make_product(
            {make_atomic({t("Y")}, {t("X"), t("M"), t("C"), t("S"), t("Z"), t("W"), t("D")}),
             make_atomic({t("W")}, {t("X"), t("M"), t("C"), t("S"), t("Z"), t("D")}),
             make_atomic({t("Z")}, {t("X"), t("M"), t("C"), t("S"), t("D")}),
             make_atomic({t("M"), t("C"), t("S"), t("D")}, {})}));
    const Expr simplified = simplify(arm);
    const Expr expected = make_sum(
        {"C", "S", "D"},
        make_product({make_atomic({t("Y")}, {t("X"), t("M"), t("C"), t("S"), t("D")}),
                      make_atomic({t("M"), t("C"), t("S"), t("D")}, {})}));
    CHECK(equal(simplified, expected));

    // and stays extensionally faithful on random discrete models
    const Ldag travel = parse_ldag_file(fixture("graphs/travel_expenditure.ldag"));
    for (int rep = 0; rep < 10; ++rep) {
        const ScmSpec scm = random_discrete_scm(travel, 4100 + rep);
        const JointTable joint = exact_joint(scm);
        const Env env{{"X", "1"}, {"Y", "1"}, {"M", "1"}};
        CHECK(std::abs(evaluate(arm, joint, env) - evaluate(simplified, joint, env)) < 1e-12);
    }
}

TEST_CASE("hand-written combined functional equals its simplified form everywhere") {
    const Ldag toy = parse_ldag_file(fixture("graphs/toy_csi.ldag"));
    const Expr full = hand_combined_mix();
    const Expr reduced = hand_simplified_mix();
    for (int rep = 0; rep < 20; ++rep) {
        const ScmSpec scm = random_discrete_scm(toy, 640 + rep);
        const JointTable joint = exact_joint(scm);
        for (const auto& x : {"0", "1"}) {
            for (const auto& y : {"0", "1"}) {
                const Env env{{"X", x}, {"Y", y}};
                const double truth = do_marginal(scm, "X", x, {{"Y", y}});
                CHECK(std::abs(evaluate(full, joint, env) - truth) < 1e-10);
                CHECK(std::abs(evaluate(reduced, joint, env) - truth) < 1e-10);
            }
        }
    }
}

TEST_CASE("context fractions normalize over the outcome") {
    const Ldag travel = parse_ldag_file(fixture("graphs/travel_expenditure.ldag"));
    const ScmSpec scm = random_discrete_scm(travel, 31);
    const JointTable joint = exact_joint(scm);
    for (const auto& level : {"0", "1"}) {
        const IdentResult res = identify_context_effect(travel, "X", "Y", ctx_m(level));
        REQUIRE(res.identified());
        double total = 0.0;
        for (const auto& y : {"0", "1"}) {
            total += evaluate(res.functional, joint, {{"X", "1"}, {"Y", y}});
        }
        CHECK(std::abs(total - 1.0) < 1e-10);
    }
}

TEST_CASE("counterfactual functional collapses to the factual regression") {
    const Ldag travel = parse_ldag_file(fixture("graphs/travel_expenditure.ldag"));
    for (int rep = 0; rep < 20; ++rep) {
        const ScmSpec scm = random_discrete_scm(travel, 2024 + rep);
        const JointTable joint = exact_joint(scm);
        for (const auto& level : {"0", "1"}) {
            const IdentResult cf =
                counterfactual_functional(travel, "X", "Y", ctx_m(level), "1", "1");
            REQUIRE(cf.identified());
            const Expr factual = make_expectation("Y", {tf("X", "1"), tf("M", level)});
            const double lhs = evaluate(cf.functional, joint);
            const double rhs = evaluate(factual, joint);
            CHECK(std::abs(lhs - rhs) < 1e-10);
        }
    }
}

TEST_CASE("counterfactual functional carries the context adjustment sets") {
    const Ldag travel = parse_ldag_file(fixture("graphs/travel_expenditure.ldag"));
    const IdentResult m0 = counterfactual_functional(travel, "X", "Y", ctx_m("0"), "1", "2");
    REQUIRE(m0.identified());
    CHECK(*m0.adjustment_set == std::vector<std::string>{"C", "D", "S", "W", "Z"});
    const IdentResult m1 = counterfactual_functional(travel, "X", "Y", ctx_m("1"), "1", "2");
    REQUIRE(m1.identified());
    CHECK(*m1.adjustment_set == std::vector<std::string>{"C", "D", "S"});

    const Ldag income = parse_ldag_file(fixture("graphs/travel_income.ldag"));
    CHECK_FALSE(counterfactual_functional(income, "X", "Y", ctx_m("0"), "1", "2").identified());
}

TEST_CASE("outcome-conditioned counterfactual is rejected for every graph") {
    const Ldag travel = parse_ldag_file(fixture("graphs/travel_expenditure.ldag"));
    CHECK_FALSE(check_conditioned_counterfactual(travel, "X", "Y", ctx_m("0")).identified());
    CHECK_FALSE(check_conditioned_counterfactual(travel, "X", "Y", ctx_m("1")).identified());
    const Ldag toy = parse_ldag_file(fixture("graphs/toy_csi.ldag"));
    const IdentResult res = check_conditioned_counterfactual(toy, "X", "Y", ctx_m("1"));
    CHECK_FALSE(res.identified());
    CHECK(res.witness.find("rejected by rule") != std::string::npos);
}

TEST_CASE("evaluation agrees with the truncated factorization on the demo SCM") {
    const ScmSpec scm = testutil::toy_csi_scm();
    const JointTable joint = exact_joint(scm);

    const Expr eq_full = hand_combined_mix();
    for (const auto& x : {"0", "1"}) {
        for (const auto& y : {"0", "1"}) {
            const double truth = do_marginal(scm, "X", x, {{"Y", y}});
            CHECK(std::abs(evaluate(eq_full, joint, {{"X", x}, {"Y", y}}) - truth) < 1e-12);
        }
    }

    // marginals normalize
    double total = 0.0;
    for (const auto& y : {"0", "1"}) {
        total += evaluate(make_atomic({t("Y")}, {}), joint, {{"Y", y}});
    }
    CHECK(std::abs(total - 1.0) < 1e-12);
}

TEST_CASE("conditioning on an impossible event raises a named error") {
    JointTable table({{"X", {"0", "1"}, {}}, {"Y", {"0", "1"}, {}}});
    table.at({1, 0}) = 0.5;
    table.at({1, 1}) = 0.5;
    const Expr cond = make_atomic({t("Y")}, {tf("X", "0")});
    CHECK_THROWS_WITH_AS(evaluate(cond, table, {{"Y", "1"}}), doctest::Contains("X=0"),
                         std::runtime_error);
}
