#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace ctxcausal::cli {

// Stable exit codes: 0 success, 2 input error, 3 non-identifiable,
// 4 sampler diagnostics failure.
constexpr int kOk = 0;
constexpr int kInputError = 2;
constexpr int kNotIdentified = 3;
constexpr int kDiagnosticsFailure = 4;

int run_parse_graph(const std::string& graph_path, const std::string& out_path);

int run_dsep(const std::string& graph_path, const std::string& from, const std::string& to,
             const std::string& given_csv, const std::string& context_csv);

int run_identify(const std::string& graph_path, const std::string& treatment,
                 const std::string& outcome, const std::string& context_var,
                 const std::string& out_dir);

int run_simulate(const std::string& scm_path, std::size_t n, std::uint64_t seed,
                 const std::string& out_csv, bool include_latents);

int run_ingest(const std::string& data_path, const std::string& schema_path,
               const std::string& out_dir);

int run_fit(const std::string& data_path, const std::string& model_path, std::uint64_t seed,
            const std::string& out_prefix);

int run_effect(const std::string& meta_path, const std::string& draws_path,
               const std::string& data_path, std::optional<int> x, const std::string& out_csv);

int run_sensitivity(const std::string& outcome_meta, const std::string& outcome_draws,
                    const std::string& outcome_data, const std::string& treatment_meta,
                    const std::string& treatment_draws, const std::string& treatment_data,
                    const std::string& priors_path, std::uint64_t seed,
                    const std::string& out_prefix);

struct PipelineOverrides {
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out_dir;
    std::optional<std::string> graph;
    std::optional<std::string> data_m0;
    std::optional<std::string> data_m1;
};

int run_pipeline(const std::string& config_path, const PipelineOverrides& overrides = {});

// FNV-1a hash of the canonical config text, hex-encoded; embedded into every
// output file together with the seed.
std::string config_hash(const std::string& canonical_text);

}  // namespace ctxcausal::cli
