#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"

#include "ctxcausal/cli_commands.hpp"
#include "ctxcausal/csv.hpp"
#include "ctxcausal/ldag.hpp"
#include "ctxcausal/scm.hpp"
#include "helpers.hpp"

using namespace ctxcausal;
using testutil::fixture;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() /
               ("ctxcausal_cli_" + std::to_string(::getpid()) + "_" +
                std::to_string(counter()++));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string operator/(const std::string& rel) const { return (path / rel).string(); }
    static int& counter() {
        static int c = 0;
        return c;
    }
};

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

nlohmann::json slurp_json(const std::string& path) {
    return nlohmann::json::parse(slurp(path));
}

// Splits a simulated dataset into one CSV per context level.
void split_by_context(const std::string& sim_csv, const std::string& m0_csv,
                      const std::string& m1_csv) {
    const CsvTable table = read_csv(sim_csv);
    const int mc = table.require_column("M");
    CsvTable m0, m1;
    m0.header = m1.header = table.header;
    for (const auto& row : table.rows) {
        (row[mc] == "0" ? m0 : m1).rows.push_back(row);
    }
    write_csv(m0_csv, m0);
    write_csv(m1_csv, m1);
}

nlohmann::json pipeline_config(const TempDir& dir, int n_sampler_iterations) {
    nlohmann::json cfg;
    cfg["graph"] = fixture("graphs/travel_synthetic.ldag");
    cfg["context_variable"] = "M";
    cfg["treatment"] = "X";
    cfg["outcome"] = "Y";
    cfg["data"]["0"] = dir / "m0.csv";
    cfg["data"]["1"] = dir / "m1.csv";
    cfg["context_labels"]["0"] = "Personal";
    cfg["context_labels"]["1"] = "Work-related";
    cfg["node_columns"] = {{"C", {"C"}}, {"D", {"D"}}, {"L", {"L"}},
                           {"S", {"S"}}, {"W", {"W"}}, {"Z", {"Z"}}};
    cfg["outcome_column"] = "Y";
    cfg["treatment_column"] = "X";
    cfg["group_column"] = "L";
    cfg["weight_column"] = "weight";
    cfg["x_max"] = 6;
    cfg["sampler"] = {{"chains", 2},
                      {"iterations", n_sampler_iterations},
                      {"warmup", n_sampler_iterations / 2}};
    cfg["sensitivity"]["0"] = {{"treatment_corr", {{"mean", 0.1}, {"sd", 0.15}}},
                               {"outcome_corr", {{"mean", 0.45}, {"sd", 0.1}}}};
    cfg["sensitivity"]["1"] = {{"treatment_corr", {{"mean", 0.05}, {"sd", 0.15}}},
                               {"outcome_corr", {{"mean", 0.2}, {"sd", 0.1}}}};
    cfg["seed"] = 424242;
    return cfg;
}

}  // namespace

TEST_CASE("parse-graph canonicalizes or fails with exit 2") {
    TempDir dir;
    CHECK(cli::run_parse_graph(fixture("graphs/travel_expenditure.ldag"), dir / "canon.ldag") ==
          cli::kOk);
    const Ldag back = parse_ldag(slurp(dir / "canon.ldag"));
    CHECK(back == parse_ldag_file(fixture("graphs/travel_expenditure.ldag")));

    const std::string bad = dir / "bad.ldag";
    std::ofstream(bad) << "graph g { node A node A }";
    CHECK(cli::run_parse_graph(bad, "") == cli::kInputError);
    CHECK(cli::run_parse_graph(dir / "nonexistent.ldag", "") == cli::kInputError);
}

TEST_CASE("dsep command answers context queries") {
    CHECK(cli::run_dsep(fixture("graphs/toy_csi.ldag"), "X", "Z", "M,U", "M=0") == cli::kOk);
    CHECK(cli::run_dsep(fixture("graphs/toy_csi.ldag"), "X", "Z", "M", "") == cli::kOk);
    CHECK(cli::run_dsep(fixture("graphs/toy_csi.ldag"), "X", "X", "", "") == cli::kInputError);
}

TEST_CASE("identify writes adjustment sets and witnesses with contract exit codes") {
    TempDir dir;

    SUBCASE("travel fixture identifies both contexts") {
        CHECK(cli::run_identify(fixture("graphs/travel_expenditure.ldag"), "X", "Y", "M",
                                dir / "out") == cli::kOk);
        const auto report = slurp_json(dir / "out/identify.json");
        CHECK(report["contexts"]["0"]["adjustment_set"] ==
              nlohmann::json({"C", "D", "S", "W", "Z"}));
        CHECK(report["contexts"]["1"]["adjustment_set"] == nlohmann::json({"C", "D", "S"}));
        CHECK(fs::exists(dir / "out/functional_0.txt"));
        CHECK(fs::exists(dir / "out/functional_1.txt"));
        CHECK(report.contains("combined"));
    }

    SUBCASE("income graph exits 3 and mentions the confounding arc") {
        CHECK(cli::run_identify(fixture("graphs/travel_income.ldag"), "X", "Y", "M",
                                dir / "inc") == cli::kNotIdentified);
        const std::string witness = slurp(dir / "inc/witness_0.txt");
        CHECK(witness.find("X<->Y") != std::string::npos);
        CHECK(witness.find("via I") != std::string::npos);
    }

    SUBCASE("fully confounded demo graph exits 3") {
        CHECK(cli::run_identify(fixture("graphs/toy_confounded.ldag"), "X", "Y", "M",
                                dir / "toy") == cli::kNotIdentified);
    }

    SUBCASE("unparseable graph exits 2") {
        const std::string bad = dir / "bad.ldag";
        std::ofstream(bad) << "graph g { node A -> }";
        CHECK(cli::run_identify(bad, "X", "Y", "M", dir / "b") == cli::kInputError);
    }
}

TEST_CASE("simulate writes the dataset with a seed sidecar") {
    TempDir dir;
    CHECK(cli::run_simulate(fixture("configs/synthetic_scm.json"), 200, 7, dir / "sim.csv",
                            false) == cli::kOk);
    const CsvTable table = read_csv(dir / "sim.csv");
    CHECK(table.rows.size() == 200);
    CHECK(table.column("Y") >= 0);
    CHECK(table.column("U1") == -1);  // latents stay hidden by default
    const auto meta = slurp_json(dir / "sim.csv.meta.json");
    CHECK(meta["seed"] == 7);
    CHECK(meta["n"] == 200);
}

TEST_CASE("ingest writes per-context files and the report") {
    TempDir dir;
    CsvTable table;
    table.header = SurveySchema::canonical_columns();
    for (int i = 0; i < 30; ++i) {
        std::vector<std::string> row = {
            i % 3 == 0 ? "Conference or congress or fair" : "Vacation, leisure, or recreation",
            std::to_string(1 + i % 10),
            "250.0",
            "1.0",
            "Helsinki",
            "1",
            "25-44 years",
            i % 2 ? "Male" : "Female",
            "DE",
            "Airplane",
            "Hotel or hostel",
            "1",
            "I travel alone",
            "0",
            "Yes",
            "No",
            "No",
            "No",
            "No",
            "No",
            "No",
            "No",
            "Yes"};
        table.rows.push_back(std::move(row));
    }
    write_csv(dir / "survey.csv", table);
    CHECK(cli::run_ingest(dir / "survey.csv", "", dir / "out") == cli::kOk);
    CHECK(fs::exists(dir / "out/personal.csv"));
    CHECK(fs::exists(dir / "out/work_related.csv"));
    const auto report = slurp_json(dir / "out/preprocess_report.json");
    CHECK(report["rows_in"] == 30);
    CHECK(report["context_rows_after_missing"]["0"] == 20);
    CHECK(report["context_rows_after_missing"]["1"] == 10);
}

TEST_CASE("pipeline produces the full artifact set deterministically") {
    TempDir dir;

    // Simulate a small synthetic survey and split it by context.
    const Ldag graph = parse_ldag_file(fixture("graphs/travel_synthetic.ldag"));
    const ScmSpec scm = synthetic_travel_scm(graph);
    const SimDataset sim = simulate_observational(scm, 900, 31415, false);
    write_sim_csv(dir / "sim.csv", sim, scm, false, {});
    split_by_context(dir / "sim.csv", dir / "m0.csv", dir / "m1.csv");

    const nlohmann::json cfg = pipeline_config(dir, 240);
    std::ofstream(dir / "config.json") << cfg.dump(2);

    cli::PipelineOverrides overrides;
    overrides.out_dir = dir / "run";
    const int rc = cli::run_pipeline(dir / "config.json", overrides);
    CHECK((rc == cli::kOk || rc == cli::kDiagnosticsFailure));  // short chains may misconverge

    for (const auto& artifact :
         {"identify.json", "ace.csv", "adjusted_ace.csv", "fit_m0_draws.csv", "fit_m1_draws.csv",
          "fit_m0_diagnostics.json", "treatfit_m0_draws.csv", "bias_m0.csv", "bias_hist_m0.json",
          "pipeline_summary.json"}) {
        INFO(artifact);
        CHECK(fs::exists(dir / (std::string("run/") + artifact)));
    }

    // Tables carry the config hash and seed stamps.
    const CsvTable ace = read_csv(dir / "run/ace.csv");
    REQUIRE(ace.comments.size() == 2);
    CHECK(ace.comments[0].find("config_hash=") != std::string::npos);
    CHECK(ace.comments[1].find("seed=424242") != std::string::npos);
    CHECK(ace.rows.size() == 10);  // 5 increments per context

    // Re-running the same configuration reproduces the tables byte for byte.
    const std::string first_ace = slurp(dir / "run/ace.csv");
    const std::string first_adjusted = slurp(dir / "run/adjusted_ace.csv");
    CHECK(cli::run_pipeline(dir / "config.json", overrides) == rc);
    CHECK(slurp(dir / "run/ace.csv") == first_ace);
    CHECK(slurp(dir / "run/adjusted_ace.csv") == first_adjusted);
}

TEST_CASE("pipeline on a zero-effect model brackets zero") {
    TempDir dir;
    const Ldag graph = parse_ldag_file(fixture("graphs/travel_synthetic.ldag"));
    ScmSpec scm = synthetic_travel_scm(graph);
    auto y = std::get<GammaLogLink>(scm.mechanism("Y"));
    y.effects["X"] = {0, 0, 0, 0, 0, 0};
    scm.mechanisms["Y"] = y;

    const SimDataset sim = simulate_observational(scm, 900, 2721, false);
    write_sim_csv(dir / "sim.csv", sim, scm, false, {});
    split_by_context(dir / "sim.csv", dir / "m0.csv", dir / "m1.csv");

    nlohmann::json cfg = pipeline_config(dir, 240);
    cfg.erase("sensitivity");  // effect tables only
    std::ofstream(dir / "config.json") << cfg.dump(2);
    cli::PipelineOverrides overrides;
    overrides.out_dir = dir / "run";
    const int rc = cli::run_pipeline(dir / "config.json", overrides);
    CHECK((rc == cli::kOk || rc == cli::kDiagnosticsFailure));
    CHECK_FALSE(fs::exists(dir / "run/adjusted_ace.csv"));

    const CsvTable ace = read_csv(dir / "run/ace.csv");
    const int lo = ace.require_column("ci_lower");
    const int hi = ace.require_column("ci_upper");
    const int note = ace.require_column("note");
    int bracketing = 0, usable = 0;
    for (const auto& row : ace.rows) {
        if (!row[note].empty()) continue;
        ++usable;
        if (std::stod(row[lo]) <= 0.0 && 0.0 <= std::stod(row[hi])) ++bracketing;
    }
    REQUIRE(usable >= 8);
    CHECK(bracketing >= usable - 1);  // allow one short-chain wobble
}

TEST_CASE("pipeline exits 3 when identification fails, before any fitting") {
    TempDir dir;
    nlohmann::json cfg = pipeline_config(dir, 100);
    cfg["graph"] = fixture("graphs/travel_income.ldag");
    // No datasets needed: identification is checked first.
    cfg["node_columns"] = nlohmann::json::object();
    std::ofstream(dir / "config.json") << cfg.dump(2);
    cli::PipelineOverrides overrides;
    overrides.out_dir = dir / "run";
    CHECK(cli::run_pipeline(dir / "config.json", overrides) == cli::kNotIdentified);
    CHECK(fs::exists(dir / "run/witness_0.txt"));
    CHECK_FALSE(fs::exists(dir / "run/ace.csv"));
}
