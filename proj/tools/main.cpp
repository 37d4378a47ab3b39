#include <cstdint>
#include <optional>
#include <string>

#include "CLI11.hpp"

#include "ctxcausal/cli_commands.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Causal effect identification and estimation under context-specific independence"};
    app.require_subcommand(1);

    using namespace ctxcausal::cli;

    std::string graph, out, from, to, given, context, treatment, outcome, context_var;
    std::string scm_path, data_path, schema_path, model_path, meta_path, draws_path;
    std::string t_meta, t_draws, t_data, priors_path, config_path;
    std::uint64_t seed = 0;
    std::size_t n = 1000;
    bool include_latents = false;
    int x_level = -1;

    auto* parse_cmd = app.add_subcommand("parse-graph", "Parse, validate and canonicalize a graph");
    parse_cmd->add_option("--graph", graph, "graph file")->required();
    parse_cmd->add_option("--out", out, "write canonical form here (stdout by default)");
    parse_cmd->callback([&] { std::exit(run_parse_graph(graph, out)); });

    auto* dsep_cmd = app.add_subcommand("dsep", "d-separation query, optionally per context");
    dsep_cmd->add_option("--graph", graph)->required();
    dsep_cmd->add_option("--from", from, "comma-separated node set")->required();
    dsep_cmd->add_option("--to", to, "comma-separated node set")->required();
    dsep_cmd->add_option("--given", given, "comma-separated conditioning set");
    dsep_cmd->add_option("--context", context, "context assignment, e.g. M=0");
    dsep_cmd->callback([&] { std::exit(run_dsep(graph, from, to, given, context)); });

    auto* ident_cmd = app.add_subcommand("identify", "Per-context identifying functionals");
    ident_cmd->add_option("--graph", graph)->required();
    ident_cmd->add_option("--treatment", treatment)->required();
    ident_cmd->add_option("--outcome", outcome)->required();
    ident_cmd->add_option("--context-var", context_var, "context variable name");
    ident_cmd->add_option("--out-dir", out)->required();
    ident_cmd->callback(
        [&] { std::exit(run_identify(graph, treatment, outcome, context_var, out)); });

    auto* sim_cmd = app.add_subcommand("simulate", "Draw observational data from an SCM spec");
    sim_cmd->add_option("--scm", scm_path)->required();
    sim_cmd->add_option("--n", n)->required();
    sim_cmd->add_option("--seed", seed);
    sim_cmd->add_option("--out", out)->required();
    sim_cmd->add_flag("--include-latents", include_latents);
    sim_cmd->callback([&] { std::exit(run_simulate(scm_path, n, seed, out, include_latents)); });

    auto* ingest_cmd = app.add_subcommand("ingest", "Preprocess the visitor-survey CSV");
    ingest_cmd->add_option("--data", data_path)->required();
    ingest_cmd->add_option("--schema", schema_path, "schema/rename-map JSON");
    ingest_cmd->add_option("--out-dir", out)->required();
    ingest_cmd->callback([&] { std::exit(run_ingest(data_path, schema_path, out)); });

    auto* fit_cmd = app.add_subcommand("fit", "Fit the hierarchical gamma regression");
    fit_cmd->add_option("--data", data_path)->required();
    fit_cmd->add_option("--model", model_path)->required();
    fit_cmd->add_option("--seed", seed);
    fit_cmd->add_option("--out-prefix", out)->required();
    fit_cmd->callback([&] { std::exit(run_fit(data_path, model_path, seed, out)); });

    auto* eff_cmd = app.add_subcommand("effect", "Counterfactual one-step differences");
    eff_cmd->add_option("--meta", meta_path)->required();
    eff_cmd->add_option("--draws", draws_path)->required();
    eff_cmd->add_option("--data", data_path)->required();
    eff_cmd->add_option("--x", x_level, "treatment level; omit for the full table");
    eff_cmd->add_option("--out", out)->required();
    eff_cmd->callback([&] {
        std::optional<int> x;
        if (x_level >= 0) x = x_level;
        std::exit(run_effect(meta_path, draws_path, data_path, x, out));
    });

    auto* sens_cmd = app.add_subcommand("sensitivity", "Omitted-variable bias analysis");
    sens_cmd->add_option("--outcome-meta", meta_path)->required();
    sens_cmd->add_option("--outcome-draws", draws_path)->required();
    sens_cmd->add_option("--outcome-data", data_path)->required();
    sens_cmd->add_option("--treatment-meta", t_meta)->required();
    sens_cmd->add_option("--treatment-draws", t_draws)->required();
    sens_cmd->add_option("--treatment-data", t_data)->required();
    sens_cmd->add_option("--priors", priors_path)->required();
    sens_cmd->add_option("--seed", seed);
    sens_cmd->add_option("--out-prefix", out)->required();
    sens_cmd->callback([&] {
        std::exit(run_sensitivity(meta_path, draws_path, data_path, t_meta, t_draws, t_data,
                                  priors_path, seed, out));
    });

    auto* pipe_cmd = app.add_subcommand("pipeline", "Identify, fit, estimate and run sensitivity");
    pipe_cmd->add_option("--config", config_path)->required();
    std::string p_graph, p_out, p_m0, p_m1;
    std::uint64_t p_seed = 0;
    bool seed_set = false;
    pipe_cmd->add_option("--seed", p_seed)->each([&](const std::string&) { seed_set = true; });
    pipe_cmd->add_option("--out-dir", p_out);
    pipe_cmd->add_option("--graph", p_graph);
    pipe_cmd->add_option("--data-m0", p_m0);
    pipe_cmd->add_option("--data-m1", p_m1);
    pipe_cmd->callback([&] {
        PipelineOverrides ov;
        if (seed_set) ov.seed = p_seed;
        if (!p_out.empty()) ov.out_dir = p_out;
        if (!p_graph.empty()) ov.graph = p_graph;
        if (!p_m0.empty()) ov.data_m0 = p_m0;
        if (!p_m1.empty()) ov.data_m1 = p_m1;
        std::exit(run_pipeline(config_path, ov));
    });

    CLI11_PARSE(app, argc, argv);
    return 0;
}
