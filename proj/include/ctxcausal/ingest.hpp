#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"

#include "ctxcausal/csv.hpp"

namespace ctxcausal {

// Canonical column identities of the visitor-survey extract. The open data's
// real headers drift between releases, so the mapping from canonical names to
// file headers lives in a config; the schema side is authoritative.
struct SurveySchema {
    // canonical name -> header in the file (defaults to the canonical name)
    std::map<std::string, std::string> columns;

    std::vector<std::string> personal_purposes;
    std::vector<std::string> work_purposes;
    std::vector<std::string> excluded_purposes;

    std::string gender_male = "Male";
    std::vector<std::string> gender_merged;  // folded into the non-male class
    std::string gender_merged_label = "Other than male";

    std::set<std::string> numeric_columns;
    int x_min = 1;
    int x_max = 15;
    int accommodation_keep = 3;

    static SurveySchema defaults();
    static SurveySchema from_json(const nlohmann::json& j);

    static const std::vector<std::string>& canonical_columns();
};

struct RawTable {
    std::vector<std::string> columns;  // canonical order
    std::vector<std::vector<std::string>> rows;
    std::size_t quarantined = 0;
    std::vector<std::string> warnings;

    int column(const std::string& name) const;
};

struct RuleCount {
    std::string rule;
    std::size_t dropped = 0;
    std::size_t rows_after = 0;
};

struct PreprocessReport {
    std::size_t rows_in = 0;
    std::size_t quarantined = 0;
    std::vector<std::string> warnings;
    std::vector<RuleCount> rules;
    std::map<std::string, std::size_t> context_rows_before_missing;
    std::map<std::string, std::size_t> context_rows_after_missing;
    std::map<std::string, std::map<std::string, std::string>> accommodation_merges;
    std::map<std::string, std::map<int, std::size_t>> los_frequency;

    nlohmann::json to_json() const;
};

struct PreprocessOutput {
    CsvTable context0;  // personal trips
    CsvTable context1;  // work-related trips
    PreprocessReport report;
};

// Typed load with header mapping; malformed rows are quarantined, unknown
// extra columns ignored with a warning, empty cells become missing markers.
RawTable load_csv(const std::string& path, const SurveySchema& schema);
RawTable load_csv_table(const CsvTable& table, const SurveySchema& schema);

PreprocessOutput preprocess(const RawTable& raw, const SurveySchema& schema);

}  // namespace ctxcausal
