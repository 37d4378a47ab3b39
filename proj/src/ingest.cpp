#include "ctxcausal/ingest.hpp"

#include <algorithm>
#include <cstdlib>
#include <stdexcept>

namespace ctxcausal {

const std::vector<std::string>& SurveySchema::canonical_columns() {
    static const std::vector<std::string> cols = {
        "purpose",       "nights",        "expenditure",
        "weight",        "destination",   "quarter",
        "age_group",     "gender",        "country",
        "transport",     "accommodation", "first_reservation_months",
        "travel_group",  "secondary_nights",
        "exp_nature",    "exp_sports",    "exp_wellbeing",
        "exp_culture",   "exp_citylife",  "exp_events",
        "exp_shopping",  "exp_roadtrip",  "over_50km"};
    return cols;
}

SurveySchema SurveySchema::defaults() {
    SurveySchema schema;
    for (const auto& c : canonical_columns()) schema.columns[c] = c;
    schema.personal_purposes = {"Vacation, leisure, or recreation", "Some other purpose?",
                                "Some other purpose"};
    schema.work_purposes = {"Study",
                            "Studying",
                            "Meeting or work trip in the service of a non-Finnish employer",
                            "Conference or congress or fair",
                            "Work performed in Finland for a Finnish employer",
                            "Some other work-related reason"};
    schema.excluded_purposes = {"Meeting friends or relatives", "Visiting friends or relatives"};
    schema.gender_merged = {"Female", "Other", "Don't want to say", "Don’t want to say"};
    schema.numeric_columns = {"nights", "expenditure", "weight", "first_reservation_months",
                              "secondary_nights"};
    return schema;
}

SurveySchema SurveySchema::from_json(const nlohmann::json& j) {
    SurveySchema schema = defaults();
    if (j.contains("columns")) {
        for (auto it = j["columns"].begin(); it != j["columns"].end(); ++it) {
            if (!schema.columns.count(it.key())) {
                throw std::runtime_error("schema maps unknown canonical column " + it.key());
            }
            schema.columns[it.key()] = it.value().get<std::string>();
        }
    }
    auto read_list = [&j](const char* key, std::vector<std::string>& out) {
        if (j.contains(key)) out = j[key].get<std::vector<std::string>>();
    };
    read_list("personal_purposes", schema.personal_purposes);
    read_list("work_purposes", schema.work_purposes);
    read_list("excluded_purposes", schema.excluded_purposes);
    read_list("gender_merged", schema.gender_merged);
    if (j.contains("gender_male")) schema.gender_male = j["gender_male"].get<std::string>();
    if (j.contains("gender_merged_label")) {
        schema.gender_merged_label = j["gender_merged_label"].get<std::string>();
    }
    schema.x_min = j.value("x_min", schema.x_min);
    schema.x_max = j.value("x_max", schema.x_max);
    schema.accommodation_keep = j.value("accommodation_keep", schema.accommodation_keep);
    return schema;
}

int RawTable::column(const std::string& name) const {
    const auto it = std::find(columns.begin(), columns.end(), name);
    return it == columns.end() ? -1 : static_cast<int>(it - columns.begin());
}

namespace {

bool parses_as_number(const std::string& cell) {
    char* end = nullptr;
    std::strtod(cell.c_str(), &end);
    return end && *end == '\0' && !cell.empty();
}

}  // namespace

RawTable load_csv_table(const CsvTable& table, const SurveySchema& schema) {
    RawTable raw;
    raw.columns = SurveySchema::canonical_columns();

    std::vector<int> source(raw.columns.size(), -1);
    std::set<int> used;
    for (std::size_t c = 0; c < raw.columns.size(); ++c) {
        const auto& header = schema.columns.at(raw.columns[c]);
        const int idx = table.column(header);
        if (idx < 0) {
            throw std::runtime_error("input is missing column '" + header + "' (canonical " +
                                     raw.columns[c] + ")");
        }
        source[c] = idx;
        used.insert(idx);
    }
    for (std::size_t c = 0; c < table.header.size(); ++c) {
        if (!used.count(static_cast<int>(c))) {
            raw.warnings.push_back("ignoring unmapped column '" + table.header[c] + "'");
        }
    }

    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        std::vector<std::string> row(raw.columns.size());
        bool ok = true;
        for (std::size_t c = 0; c < raw.columns.size(); ++c) {
            const auto idx = static_cast<std::size_t>(source[c]);
            std::string cell = idx < table.rows[r].size() ? table.rows[r][idx] : "";
            if (!cell.empty() && schema.numeric_columns.count(raw.columns[c]) &&
                !parses_as_number(cell)) {
                ok = false;
                break;
            }
            row[c] = std::move(cell);
        }
        if (ok) {
            raw.rows.push_back(std::move(row));
        } else {
            ++raw.quarantined;
        }
    }
    return raw;
}

RawTable load_csv(const std::string& path, const SurveySchema& schema) {
    return load_csv_table(read_csv(path), schema);
}

namespace {

struct Working {
    std::vector<std::vector<std::string>> rows;
    std::vector<int> context;  // 0 or 1 per row
};

bool in_list(const std::vector<std::string>& list, const std::string& v) {
    return std::find(list.begin(), list.end(), v) != list.end();
}

}  // namespace

PreprocessOutput preprocess(const RawTable& raw, const SurveySchema& schema) {
    PreprocessOutput out;
    PreprocessReport& report = out.report;
    report.rows_in = raw.rows.size() + raw.quarantined;
    report.quarantined = raw.quarantined;
    report.warnings = raw.warnings;

    const int c_purpose = raw.column("purpose");
    const int c_gender = raw.column("gender");
    const int c_secondary = raw.column("secondary_nights");
    const int c_accomm = raw.column("accommodation");
    const int c_nights = raw.column("nights");
    const int c_expend = raw.column("expenditure");

    auto record = [&report](const std::string& rule, std::size_t dropped, std::size_t after) {
        report.rules.push_back({rule, dropped, after});
    };

    // 1: drop trips made to meet friends or relatives.
    Working w;
    std::size_t dropped = 0;
    for (const auto& row : raw.rows) {
        if (in_list(schema.excluded_purposes, row[c_purpose])) {
            ++dropped;
        } else {
            w.rows.push_back(row);
        }
    }
    record("drop-friends-relatives-purpose", dropped, w.rows.size());

    // 2: map the remaining purposes onto the two contexts.
    dropped = 0;
    {
        Working next;
        for (auto& row : w.rows) {
            if (in_list(schema.personal_purposes, row[c_purpose])) {
                next.context.push_back(0);
                next.rows.push_back(std::move(row));
            } else if (in_list(schema.work_purposes, row[c_purpose])) {
                next.context.push_back(1);
                next.rows.push_back(std::move(row));
            } else {
                ++dropped;  // unknown purpose class
            }
        }
        w = std::move(next);
    }
    record("map-context", dropped, w.rows.size());

    // 3: fold the small gender classes into the non-male category.
    for (auto& row : w.rows) {
        if (in_list(schema.gender_merged, row[c_gender])) {
            row[c_gender] = schema.gender_merged_label;
        } else if (!row[c_gender].empty() && row[c_gender] != schema.gender_male) {
            row[c_gender] = schema.gender_merged_label;
        }
    }
    record("gender-merge", 0, w.rows.size());

    // 4: missing secondary-destination nights mean no secondary visits.
    for (auto& row : w.rows) {
        if (row[c_secondary].empty()) row[c_secondary] = "0";
    }
    record("secondary-nights-zero-fill", 0, w.rows.size());

    // 5: per context, keep the most common accommodation classes and fold the
    // rest into 'Other'.
    for (int ctx = 0; ctx < 2; ++ctx) {
        std::map<std::string, std::size_t> freq;
        for (std::size_t i = 0; i < w.rows.size(); ++i) {
            if (w.context[i] == ctx && !w.rows[i][c_accomm].empty()) ++freq[w.rows[i][c_accomm]];
        }
        std::vector<std::pair<std::string, std::size_t>> ranked(freq.begin(), freq.end());
        std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
            if (a.second != b.second) return a.second > b.second;
            return a.first < b.first;
        });
        std::set<std::string> keep;
        for (std::size_t i = 0; i < ranked.size() && i < static_cast<std::size_t>(schema.accommodation_keep);
             ++i) {
            keep.insert(ranked[i].first);
        }
        const std::string key = std::to_string(ctx);
        for (std::size_t i = 0; i < w.rows.size(); ++i) {
            if (w.context[i] != ctx) continue;
            auto& cell = w.rows[i][c_accomm];
            if (!cell.empty() && !keep.count(cell)) {
                report.accommodation_merges[key][cell] = "Other";
                cell = "Other";
            }
        }
    }
    record("accommodation-top-merge", 0, w.rows.size());

    // 6: keep stays inside the window with positive expenditure.
    dropped = 0;
    {
        Working next;
        for (std::size_t i = 0; i < w.rows.size(); ++i) {
            const double nights = std::strtod(w.rows[i][c_nights].c_str(), nullptr);
            const double spend = std::strtod(w.rows[i][c_expend].c_str(), nullptr);
            const bool keep = !w.rows[i][c_nights].empty() && !w.rows[i][c_expend].empty() &&
                              nights >= schema.x_min && nights <= schema.x_max && spend > 0.0;
            if (keep) {
                next.rows.push_back(std::move(w.rows[i]));
                next.context.push_back(w.context[i]);
            } else {
                ++dropped;
            }
        }
        w = std::move(next);
    }
    record("stay-window-and-positive-expenditure", dropped, w.rows.size());

    for (std::size_t i = 0; i < w.rows.size(); ++i) {
        ++report.context_rows_before_missing[std::to_string(w.context[i])];
        const int nights = static_cast<int>(std::strtod(w.rows[i][c_nights].c_str(), nullptr));
        ++report.los_frequency[std::to_string(w.context[i])][nights];
    }

    // 7: complete-case restriction.
    dropped = 0;
    {
        Working next;
        for (std::size_t i = 0; i < w.rows.size(); ++i) {
            const bool missing = std::any_of(w.rows[i].begin(), w.rows[i].end(),
                                             [](const std::string& cell) { return cell.empty(); });
            if (missing) {
                ++dropped;
            } else {
                next.rows.push_back(std::move(w.rows[i]));
                next.context.push_back(w.context[i]);
            }
        }
        w = std::move(next);
    }
    record("drop-missing-rows", dropped, w.rows.size());
    for (std::size_t i = 0; i < w.rows.size(); ++i) {
        ++report.context_rows_after_missing[std::to_string(w.context[i])];
    }
    for (const auto& key : {"0", "1"}) {
        report.context_rows_before_missing.try_emplace(key, 0);
        report.context_rows_after_missing.try_emplace(key, 0);
    }

    out.context0.header = raw.columns;
    out.context0.header.push_back("M");
    out.context1.header = out.context0.header;
    for (std::size_t i = 0; i < w.rows.size(); ++i) {
        auto row = w.rows[i];
        row.push_back(std::to_string(w.context[i]));
        (w.context[i] == 0 ? out.context0 : out.context1).rows.push_back(std::move(row));
    }
    return out;
}

nlohmann::json PreprocessReport::to_json() const {
    nlohmann::json rules_json = nlohmann::json::array();
    for (const auto& r : rules) {
        rules_json.push_back({{"rule", r.rule}, {"dropped", r.dropped}, {"rows_after", r.rows_after}});
    }
    nlohmann::json los = nlohmann::json::object();
    for (const auto& [ctx, freq] : los_frequency) {
        nlohmann::json per = nlohmann::json::object();
        for (const auto& [nights, count] : freq) per[std::to_string(nights)] = count;
        los[ctx] = per;
    }
    return {{"rows_in", rows_in},
            {"quarantined", quarantined},
            {"warnings", warnings},
            {"rules", rules_json},
            {"context_rows_before_missing", context_rows_before_missing},
            {"context_rows_after_missing", context_rows_after_missing},
            {"accommodation_merges", accommodation_merges},
            {"length_of_stay_frequency", los}};
}

}  // namespace ctxcausal
