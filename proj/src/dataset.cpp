#include "ctxcausal/dataset.hpp"

#include <algorithm>
#include <cstdlib>
#include <map>
#include <stdexcept>

namespace ctxcausal {

ModelSpec ModelSpec::from_json(const nlohmann::json& j) {
    ModelSpec spec;
    spec.context_level = j.value("context", std::string());
    spec.outcome_column = j.at("outcome").get<std::string>();
    spec.treatment_column = j.at("treatment").get<std::string>();
    spec.x_max = j.value("x_max", 15);
    spec.purpose_column = j.value("purpose_column", std::string());
    spec.group_column = j.value("group_column", std::string());
    if (j.contains("covariates")) {
        spec.covariates = j["covariates"].get<std::vector<std::string>>();
    }
    if (j.contains("numeric_covariates")) {
        for (const auto& c : j["numeric_covariates"]) {
            spec.numeric_covariates.insert(c.get<std::string>());
        }
    }
    spec.weight_column = j.value("weight_column", std::string());
    spec.monotonic = j.value("monotonic", true);
    if (j.contains("priors")) {
        const auto& p = j["priors"];
        spec.priors.coef_sd = p.value("coef_sd", spec.priors.coef_sd);
        spec.priors.intercept_sd = p.value("intercept_sd", spec.priors.intercept_sd);
        spec.priors.sd_df = p.value("sd_df", spec.priors.sd_df);
        spec.priors.sd_scale = p.value("sd_scale", spec.priors.sd_scale);
        spec.priors.simplex_conc = p.value("simplex_conc", spec.priors.simplex_conc);
        spec.priors.shape_df = p.value("shape_df", spec.priors.shape_df);
        spec.priors.shape_scale = p.value("shape_scale", spec.priors.shape_scale);
    }
    if (j.contains("sampler")) {
        const auto& s = j["sampler"];
        spec.sampler.chains = s.value("chains", spec.sampler.chains);
        spec.sampler.iterations = s.value("iterations", spec.sampler.iterations);
        spec.sampler.warmup = s.value("warmup", spec.sampler.warmup);
        spec.sampler.max_depth = s.value("max_depth", spec.sampler.max_depth);
        spec.sampler.target_accept = s.value("target_accept", spec.sampler.target_accept);
    }
    if (spec.sampler.iterations <= spec.sampler.warmup) {
        throw std::runtime_error("sampler iterations must exceed warmup");
    }
    if (spec.priors.coef_sd <= 0 || spec.priors.intercept_sd <= 0 || spec.priors.sd_scale <= 0 ||
        spec.priors.shape_scale <= 0 || spec.priors.simplex_conc <= 0) {
        throw std::runtime_error("prior scales must be positive");
    }
    return spec;
}

nlohmann::json ModelSpec::to_json() const {
    nlohmann::json j{{"context", context_level},
                     {"outcome", outcome_column},
                     {"treatment", treatment_column},
                     {"x_max", x_max},
                     {"monotonic", monotonic},
                     {"covariates", covariates}};
    if (!purpose_column.empty()) j["purpose_column"] = purpose_column;
    if (!group_column.empty()) j["group_column"] = group_column;
    if (!weight_column.empty()) j["weight_column"] = weight_column;
    if (!numeric_covariates.empty()) {
        j["numeric_covariates"] = std::vector<std::string>(numeric_covariates.begin(),
                                                           numeric_covariates.end());
    }
    j["priors"] = {{"coef_sd", priors.coef_sd},       {"intercept_sd", priors.intercept_sd},
                   {"sd_df", priors.sd_df},           {"sd_scale", priors.sd_scale},
                   {"simplex_conc", priors.simplex_conc}, {"shape_df", priors.shape_df},
                   {"shape_scale", priors.shape_scale}};
    j["sampler"] = {{"chains", sampler.chains},
                    {"iterations", sampler.iterations},
                    {"warmup", sampler.warmup},
                    {"max_depth", sampler.max_depth},
                    {"target_accept", sampler.target_accept}};
    return j;
}

namespace {

double parse_double(const std::string& cell, const std::string& column, std::size_t row) {
    char* end = nullptr;
    const double v = std::strtod(cell.c_str(), &end);
    if (!end || *end != '\0' || cell.empty()) {
        throw std::runtime_error("unparseable numeric cell in column " + column + " at data row " +
                                 std::to_string(row + 1) + ": '" + cell + "'");
    }
    return v;
}

}  // namespace

Dataset dataset_from_csv(const CsvTable& table, const ModelSpec& spec) {
    Dataset data;
    data.context_level = spec.context_level;
    const std::size_t n = table.rows.size();
    if (n == 0) throw std::runtime_error("dataset is empty");

    const int yc = table.require_column(spec.outcome_column);
    const int xc = table.require_column(spec.treatment_column);
    const int pc = spec.purpose_column.empty() ? -1 : table.require_column(spec.purpose_column);
    const int gc = spec.group_column.empty() ? -1 : table.require_column(spec.group_column);
    const int wc = spec.weight_column.empty() ? -1 : table.require_column(spec.weight_column);

    data.outcome.resize(n);
    data.treatment.resize(n);
    data.weight.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t c = 0; c < table.header.size(); ++c) {
            if (c < table.rows[i].size() && table.rows[i][c].empty()) {
                throw std::runtime_error("missing value in column " + table.header[c] +
                                         " at data row " + std::to_string(i + 1));
            }
        }
        data.outcome[i] = parse_double(table.at(i, yc), spec.outcome_column, i);
        if (data.outcome[i] <= 0) {
            throw std::runtime_error("outcome must be positive at data row " + std::to_string(i + 1));
        }
        const double x = parse_double(table.at(i, xc), spec.treatment_column, i);
        data.treatment[i] = static_cast<int>(x);
        if (data.treatment[i] != x || data.treatment[i] < 1 || data.treatment[i] > spec.x_max) {
            throw std::runtime_error("treatment outside 1.." + std::to_string(spec.x_max) +
                                     " at data row " + std::to_string(i + 1));
        }
        data.weight[i] = wc < 0 ? 1.0 : parse_double(table.at(i, wc), spec.weight_column, i);
        if (data.weight[i] <= 0) {
            throw std::runtime_error("weight must be positive at data row " + std::to_string(i + 1));
        }
    }
    if (pc >= 0) {
        data.purpose.resize(n);
        for (std::size_t i = 0; i < n; ++i) data.purpose[i] = table.at(i, pc);
    }
    if (gc >= 0) {
        data.group.resize(n);
        for (std::size_t i = 0; i < n; ++i) data.group[i] = table.at(i, gc);
    }
    for (const auto& name : spec.covariates) {
        const int c = table.require_column(name);
        Dataset::Covariate cov;
        cov.name = name;
        cov.numeric = spec.numeric_covariates.count(name) > 0;
        if (cov.numeric) {
            cov.num.resize(n);
            for (std::size_t i = 0; i < n; ++i) cov.num[i] = parse_double(table.at(i, c), name, i);
        } else {
            cov.cat.resize(n);
            for (std::size_t i = 0; i < n; ++i) cov.cat[i] = table.at(i, c);
        }
        data.covariates.push_back(std::move(cov));
    }
    return data;
}

Dataset load_dataset(const std::string& path, const ModelSpec& spec) {
    return dataset_from_csv(read_csv(path), spec);
}

namespace {

Encoding::CatColumn make_cat(const std::string& column, const std::vector<std::string>& values) {
    std::map<std::string, std::size_t> freq;
    for (const auto& v : values) ++freq[v];
    Encoding::CatColumn cat;
    cat.column = column;
    for (const auto& [level, count] : freq) cat.levels.push_back(level);
    std::size_t best = 0;
    for (std::size_t i = 0; i < cat.levels.size(); ++i) {
        if (freq[cat.levels[i]] > freq[cat.levels[best]]) best = i;
    }
    cat.reference = static_cast<int>(best);
    return cat;
}

}  // namespace

DesignMatrix build_design(const Dataset& data, const ModelSpec& spec) {
    DesignMatrix dm;
    Encoding& enc = dm.encoding;
    enc.x_max = spec.x_max;
    enc.monotonic = spec.monotonic;
    enc.has_group = !data.group.empty();

    enc.design_names.push_back("alpha");
    enc.prior_sd.push_back(spec.priors.intercept_sd);

    if (!data.purpose.empty()) {
        enc.categorical.push_back(make_cat(spec.purpose_column, data.purpose));
    }
    for (const auto& cov : data.covariates) {
        if (cov.numeric) {
            enc.numeric_columns.push_back(cov.name);
        } else {
            enc.categorical.push_back(make_cat(cov.name, cov.cat));
        }
    }
    for (const auto& cat : enc.categorical) {
        for (std::size_t l = 0; l < cat.levels.size(); ++l) {
            if (static_cast<int>(l) == cat.reference) continue;
            enc.design_names.push_back("b_" + cat.column + "=" + cat.levels[l]);
            enc.prior_sd.push_back(spec.priors.coef_sd);
        }
    }
    for (const auto& name : enc.numeric_columns) {
        enc.design_names.push_back("b_" + name);
        enc.prior_sd.push_back(spec.priors.coef_sd);
    }
    if (enc.has_group) {
        std::set<std::string> levels(data.group.begin(), data.group.end());
        enc.group_levels.assign(levels.begin(), levels.end());
    }

    std::vector<Eigen::Index> all(data.n());
    for (Eigen::Index i = 0; i < data.n(); ++i) all[i] = i;
    dm.X = encode_rows(data, enc, all, &dm.group_idx);
    dm.x = data.treatment;
    dm.y = data.outcome;
    dm.w = data.weight;
    return dm;
}

Eigen::MatrixXd encode_rows(const Dataset& data, const Encoding& enc,
                            const std::vector<Eigen::Index>& rows, Eigen::VectorXi* group_idx) {
    const Eigen::Index n = static_cast<Eigen::Index>(rows.size());
    Eigen::MatrixXd X = Eigen::MatrixXd::Zero(n, static_cast<Eigen::Index>(enc.design_names.size()));
    X.col(0).setOnes();

    Eigen::Index col = 1;
    for (const auto& cat : enc.categorical) {
        // Purpose occupies the first categorical block when present.
        const std::vector<std::string>* values = nullptr;
        const bool is_purpose = !data.purpose.empty() && (&cat - enc.categorical.data()) == 0;
        if (is_purpose) {
            values = &data.purpose;
        } else {
            for (const auto& cov : data.covariates) {
                if (!cov.numeric && cov.name == cat.column) {
                    values = &cov.cat;
                    break;
                }
            }
        }
        if (!values) throw std::runtime_error("encoding references unknown column " + cat.column);
        for (Eigen::Index r = 0; r < n; ++r) {
            const std::string& v = (*values)[rows[r]];
            const auto it = std::find(cat.levels.begin(), cat.levels.end(), v);
            if (it == cat.levels.end()) {
                throw std::runtime_error("unseen level '" + v + "' in column " + cat.column);
            }
            const int l = static_cast<int>(it - cat.levels.begin());
            if (l == cat.reference) continue;
            const int before = l < cat.reference ? l : l - 1;
            X(r, col + before) = 1.0;
        }
        col += static_cast<Eigen::Index>(cat.levels.size()) - 1;
    }
    for (const auto& name : enc.numeric_columns) {
        const Dataset::Covariate* cov = nullptr;
        for (const auto& c : data.covariates) {
            if (c.numeric && c.name == name) cov = &c;
        }
        if (!cov) throw std::runtime_error("encoding references unknown numeric column " + name);
        for (Eigen::Index r = 0; r < n; ++r) X(r, col) = cov->num[rows[r]];
        ++col;
    }

    if (group_idx) {
        group_idx->resize(n);
        for (Eigen::Index r = 0; r < n; ++r) {
            if (!enc.has_group || data.group.empty()) {
                (*group_idx)[r] = -1;
                continue;
            }
            const auto it = std::lower_bound(enc.group_levels.begin(), enc.group_levels.end(),
                                             data.group[rows[r]]);
            (*group_idx)[r] = (it != enc.group_levels.end() && *it == data.group[rows[r]])
                                  ? static_cast<int>(it - enc.group_levels.begin())
                                  : -1;
        }
    }
    return X;
}

nlohmann::json Encoding::to_json() const {
    nlohmann::json cats = nlohmann::json::array();
    for (const auto& c : categorical) {
        cats.push_back({{"column", c.column}, {"levels", c.levels}, {"reference", c.reference}});
    }
    return {{"design_names", design_names}, {"prior_sd", prior_sd},
            {"categorical", cats},          {"numeric_columns", numeric_columns},
            {"group_levels", group_levels}, {"x_max", x_max},
            {"monotonic", monotonic},       {"has_group", has_group}};
}

Encoding Encoding::from_json(const nlohmann::json& j) {
    Encoding enc;
    enc.design_names = j.at("design_names").get<std::vector<std::string>>();
    enc.prior_sd = j.at("prior_sd").get<std::vector<double>>();
    for (const auto& c : j.at("categorical")) {
        enc.categorical.push_back({c.at("column").get<std::string>(),
                                   c.at("levels").get<std::vector<std::string>>(),
                                   c.at("reference").get<int>()});
    }
    enc.numeric_columns = j.at("numeric_columns").get<std::vector<std::string>>();
    enc.group_levels = j.at("group_levels").get<std::vector<std::string>>();
    enc.x_max = j.at("x_max").get<int>();
    enc.monotonic = j.at("monotonic").get<bool>();
    enc.has_group = j.at("has_group").get<bool>();
    return enc;
}

}  // namespace ctxcausal
