#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstdio>
#include <map>

#include "ctxcausal/estimate.hpp"
#include "helpers.hpp"

using namespace ctxcausal;

namespace {

SamplerSettings quick_sampler(int chains, int iterations, int warmup) {
    SamplerSettings s;
    s.chains = chains;
    s.iterations = iterations;
    s.warmup = warmup;
    return s;
}

// Small all-discrete dataset for the plug-in consistency check.
Dataset discrete_dataset(std::size_t n, std::uint64_t seed, int x_max) {
    Dataset data;
    data.context_level = "0";
    data.outcome.resize(n);
    data.treatment.resize(n);
    data.weight.resize(n);
    data.group.resize(n);
    Dataset::Covariate c1{"c1", false, {}, {}};
    c1.cat.resize(n);
    Rng rng(seed);
    const std::vector<std::string> levels = {"a", "b"};
    const std::vector<std::string> countries = {"FI", "SE"};
    for (std::size_t i = 0; i < n; ++i) {
        data.treatment[i] = 1 + rng.uniform_int(x_max);
        c1.cat[i] = levels[rng.uniform_int(2)];
        data.group[i] = countries[rng.uniform_int(2)];
        data.weight[i] = 0.5 + rng.uniform01();
        data.outcome[i] = std::exp(3.0 + 0.1 * data.treatment[i]) / 2.0 * rng.gamma(2.0);
    }
    data.covariates = {c1};
    return data;
}

}  // namespace

TEST_CASE("fit is deterministic given the seed") {
    testutil::GlmTruth truth;
    const Dataset data = testutil::make_glm_dataset(250, 51, truth);
    ModelSpec spec = testutil::glm_model_spec(truth);
    spec.sampler = quick_sampler(2, 120, 60);

    const FitResult a = fit(spec, data, 17);
    const FitResult b = fit(spec, data, 17);
    CHECK(a.draws.draws == b.draws.draws);
    CHECK(a.draws.lp == b.draws.lp);

    const FitResult c = fit(spec, data, 18);
    CHECK(a.draws.draws != c.draws.draws);

    CHECK(a.draws.b() == 2 * 60);
    CHECK(a.draws.names.size() == static_cast<std::size_t>(a.draws.draws.cols()));
}

TEST_CASE("posterior recovers the generating parameters") {
    testutil::GlmTruth truth;
    const Dataset data = testutil::make_glm_dataset(2000, 2025, truth);
    ModelSpec spec = testutil::glm_model_spec(truth);
    spec.sampler = quick_sampler(4, 700, 350);

    const FitResult result = fit(spec, data, 99);
    const PosteriorDraws& draws = result.draws;

    // Reference levels are the most frequent ones; effects are relative.
    const auto& enc = draws.encoding;
    std::map<std::string, double> expected;
    double alpha_shift = 0.0;
    for (const auto& cat : enc.categorical) {
        const auto& effects = truth.cat_effects.at(cat.column);
        const double ref_effect = effects[static_cast<std::size_t>(
            std::find(cat.levels.begin(), cat.levels.end(),
                      cat.levels[cat.reference]) -
            cat.levels.begin())];
        alpha_shift += ref_effect;
        for (std::size_t l = 0; l < cat.levels.size(); ++l) {
            if (static_cast<int>(l) == cat.reference) continue;
            // level names are "a","b","c" / "no","yes" in sorted order
            const double eff = effects[l];
            expected["b_" + cat.column + "=" + cat.levels[l]] = eff - ref_effect;
        }
    }
    expected["alpha"] = truth.alpha + alpha_shift;
    expected["b_c3"] = truth.numeric_coef;
    expected["a_mono"] = truth.mono_coef;
    expected["shape"] = truth.shape;

    for (const auto& [name, value] : expected) {
        const int col = draws.require_col(name);
        const Eigen::VectorXd v = draws.draws.col(col);
        const double mean = v.mean();
        const double sd = std::sqrt((v.array() - mean).square().sum() / (v.size() - 1));
        INFO(name, " mean ", mean, " sd ", sd, " truth ", value);
        CHECK(std::abs(mean - value) < 3.0 * sd);
    }

    // Group sd posterior should cover the realized country-effect spread.
    {
        Eigen::Map<const Eigen::VectorXd> u(truth.country_effects.data(), 5);
        const double realized = std::sqrt((u.array() - u.mean()).square().sum() / 4.0);
        const int col = draws.require_col("sigma_u");
        const Eigen::VectorXd v = draws.draws.col(col);
        const double mean = v.mean();
        const double sd = std::sqrt((v.array() - mean).square().sum() / (v.size() - 1));
        CHECK(std::abs(mean - realized) < 3.0 * sd);
    }

    // Mixing diagnostics on the key parameters.
    for (const auto& name : {"alpha", "a_mono", "shape", "sigma_u"}) {
        const int idx = [&] {
            for (std::size_t i = 0; i < result.diagnostics.names.size(); ++i) {
                if (result.diagnostics.names[i] == name) return static_cast<int>(i);
            }
            return -1;
        }();
        REQUIRE(idx >= 0);
        CHECK(result.diagnostics.per_param[idx].rhat < 1.02);
    }
}

TEST_CASE("null monotonic effect keeps zero inside the interval") {
    // a = 0 in truth; over replicates the 95% interval should cover zero at
    // roughly the nominal rate.
    int covered = 0;
    const int reps = 20;
    for (int rep = 0; rep < reps; ++rep) {
        testutil::GlmTruth truth;
        truth.mono_coef = 0.0;
        const Dataset data = testutil::make_glm_dataset(400, 9000 + rep, truth);
        ModelSpec spec = testutil::glm_model_spec(truth);
        spec.sampler = quick_sampler(2, 400, 200);
        const FitResult result = fit(spec, data, 100 + rep);
        Eigen::VectorXd a = result.draws.draws.col(result.draws.require_col("a_mono"));
        const double lo = quantile(a, 0.025);
        const double hi = quantile(a, 0.975);
        if (lo <= 0.0 && 0.0 <= hi) ++covered;
    }
    CHECK(covered >= 15);
}

TEST_CASE("zero monotonic coefficient gives an exactly zero difference") {
    testutil::GlmTruth truth;
    const Dataset data = testutil::make_glm_dataset(300, 61, truth);
    ModelSpec spec = testutil::glm_model_spec(truth);
    spec.sampler = quick_sampler(2, 60, 30);
    FitResult result = fit(spec, data, 5);
    result.draws.draws.col(result.draws.require_col("a_mono")).setZero();

    const EffectEstimate est = counterfactual_difference(result.draws, data, 2, "0");
    CHECK(est.point == 0.0);
    CHECK(est.ci_lower == 0.0);
    CHECK(est.ci_upper == 0.0);
    CHECK(est.per_draw.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("weights can be rescaled without changing the estimate") {
    testutil::GlmTruth truth;
    Dataset data = testutil::make_glm_dataset(300, 62, truth);
    Rng rng(3);
    for (Eigen::Index i = 0; i < data.n(); ++i) data.weight[i] = 0.2 + rng.uniform01() * 3.0;
    ModelSpec spec = testutil::glm_model_spec(truth);
    spec.sampler = quick_sampler(2, 80, 40);
    const FitResult result = fit(spec, data, 7);

    const EffectEstimate base = counterfactual_difference(result.draws, data, 1, "0");
    Dataset scaled = data;
    scaled.weight *= 37.5;
    const EffectEstimate rescaled = counterfactual_difference(result.draws, scaled, 1, "0");
    CHECK((base.per_draw - rescaled.per_draw).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("stratum errors are explicit") {
    testutil::GlmTruth truth;
    Dataset data = testutil::make_glm_dataset(120, 63, truth);
    for (Eigen::Index i = 0; i < data.n(); ++i) {
        if (data.treatment[i] == 5) data.treatment[i] = 4;
    }
    ModelSpec spec = testutil::glm_model_spec(truth);
    spec.sampler = quick_sampler(1, 40, 20);
    const FitResult result = fit(spec, data, 8);
    CHECK_THROWS_WITH_AS(counterfactual_difference(result.draws, data, 5, "0"),
                         doctest::Contains("stratum"), std::runtime_error);
    CHECK_THROWS_WITH_AS(counterfactual_difference(result.draws, data, truth.x_max, "0"),
                         doctest::Contains("x_max"), std::invalid_argument);
}

TEST_CASE("plug-in difference equals the direct covariate-frequency evaluation") {
    const int x_max = 4;
    const Dataset data = discrete_dataset(200, 777, x_max);
    ModelSpec spec;
    spec.context_level = "0";
    spec.outcome_column = "y";
    spec.treatment_column = "x";
    spec.x_max = x_max;
    spec.group_column = "country";
    spec.covariates = {"c1"};
    spec.sampler = quick_sampler(1, 60, 30);
    const FitResult result = fit(spec, data, 12);
    const PosteriorDraws& draws = result.draws;

    const int x = 2;
    // Empirical weighted covariate distribution within the factual stratum.
    std::map<std::pair<std::string, std::string>, double> stratum_weight;
    double total_weight = 0.0;
    for (Eigen::Index i = 0; i < data.n(); ++i) {
        if (data.treatment[i] != x) continue;
        stratum_weight[{data.covariates[0].cat[i], data.group[i]}] += data.weight[i];
        total_weight += data.weight[i];
    }
    REQUIRE(total_weight > 0.0);

    const EffectEstimate est = counterfactual_difference(draws, data, x, "0");
    for (Eigen::Index b = 0; b < std::min<Eigen::Index>(draws.b(), 10); ++b) {
        const ParamView view = draws.view(b);
        double direct = 0.0;
        for (const auto& [key, weight] : stratum_weight) {
            Dataset probe = data;
            probe.covariates[0].cat[0] = key.first;
            probe.group[0] = key.second;
            Eigen::VectorXi gidx;
            const Eigen::MatrixXd row = encode_rows(probe, draws.encoding, {0}, &gidx);
            const double base = row.row(0).dot(view.coefs) + (gidx[0] >= 0 ? view.u[gidx[0]] : 0.0);
            const double mu_cf = std::exp(base + view.mono_coef * mo(x + 1, view.zeta));
            const double mu_fact = std::exp(base + view.mono_coef * mo(x, view.zeta));
            direct += weight / total_weight * (mu_cf - mu_fact);
        }
        CHECK(std::abs(est.per_draw[b] - direct) < 1e-10);
    }
}

TEST_CASE("ace table walks every increment and records stratum notes") {
    testutil::GlmTruth truth;
    Dataset data = testutil::make_glm_dataset(300, 64, truth);
    for (Eigen::Index i = 0; i < data.n(); ++i) {
        if (data.treatment[i] == 3) data.treatment[i] = 2;  // vacate level 3
    }
    ModelSpec spec = testutil::glm_model_spec(truth);
    spec.sampler = quick_sampler(1, 60, 30);
    const FitResult result = fit(spec, data, 13);

    const AceTable table = ace_table({{&result.draws, &data}}, {"Personal"});
    CHECK(table.rows.size() == static_cast<std::size_t>(truth.x_max - 1));
    bool note_seen = false;
    for (const auto& row : table.rows) {
        CHECK(row.context == "Personal");
        if (row.x == 3) {
            CHECK_FALSE(row.note.empty());
            note_seen = true;
        } else {
            CHECK(row.note.empty());
        }
    }
    CHECK(note_seen);

    const CsvTable csv = table.to_csv({" test"});
    CHECK(csv.header.size() == 7);
    CHECK(csv.rows.size() == table.rows.size());
}

TEST_CASE("draws round-trip through the CSV layout") {
    testutil::GlmTruth truth;
    const Dataset data = testutil::make_glm_dataset(150, 65, truth);
    ModelSpec spec = testutil::glm_model_spec(truth);
    spec.sampler = quick_sampler(2, 50, 25);
    const FitResult result = fit(spec, data, 14);

    const std::string path = "/tmp/ctxcausal_test_draws.csv";
    write_draws_csv(path, result.draws, {" round-trip"});
    const PosteriorDraws back = read_draws_csv(path, result.draws.encoding);
    CHECK(back.names == result.draws.names);
    CHECK(back.chains == result.draws.chains);
    CHECK((back.draws - result.draws.draws).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((back.lp - result.draws.lp).cwiseAbs().maxCoeff() < 1e-12);
    std::remove(path.c_str());
}
