#include "ctxcausal/estimate.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "ctxcausal/rng.hpp"
#include "ctxcausal/sampler.hpp"

namespace ctxcausal {

int PosteriorDraws::col(const std::string& name) const {
    for (std::size_t i = 0; i < names.size(); ++i) {
        if (names[i] == name) return static_cast<int>(i);
    }
    return -1;
}

int PosteriorDraws::require_col(const std::string& name) const {
    const int c = col(name);
    if (c < 0) throw std::runtime_error("draws have no parameter " + name);
    return c;
}

ParamView PosteriorDraws::view(Eigen::Index draw) const {
    ParamView v;
    const int p = static_cast<int>(encoding.design_names.size());
    v.coefs = draws.row(draw).head(p).transpose();
    int off = p;
    if (encoding.monotonic) {
        v.mono_coef = draws(draw, off++);
        const int J = encoding.x_max - 1;
        v.zeta = draws.row(draw).segment(off, J).transpose();
        off += J;
    }
    if (encoding.has_group) {
        const int L = static_cast<int>(encoding.group_levels.size());
        v.u = draws.row(draw).segment(off, L).transpose();
        off += L;
        v.sigma_u = draws(draw, off++);
    }
    v.shape = draws(draw, off);
    return v;
}

namespace {

Eigen::VectorXd initial_point(const GammaRegressionModel& model, Rng& rng) {
    Eigen::VectorXd q = Eigen::VectorXd::Zero(model.dim());
    auto jitter = [&rng] { return (rng.uniform01() * 2.0 - 1.0) * 0.5; };
    const int p = model.n_coefs();
    // Data-informed intercept keeps the gamma likelihood in a sane region.
    q[0] = std::log(model.design().y.mean()) + jitter();
    for (int j = 1; j < p; ++j) q[j] = jitter() * 0.2;
    int off = p;
    if (model.monotonic()) {
        q[off++] = jitter() * 0.2;
        for (int j = 0; j < model.n_zeta() - 1; ++j) q[off++] = jitter() * 0.5;
    }
    if (model.has_group()) {
        for (int l = 0; l < model.n_groups(); ++l) q[off++] = jitter() * 0.5;
        q[off++] = -1.0 + jitter();  // log sigma_u around 0.37
    }
    q[off] = std::log(2.0) + jitter();
    return q;
}

}  // namespace

FitResult fit(const ModelSpec& spec, const Dataset& data, std::uint64_t seed) {
    if (data.n() == 0) throw std::runtime_error("cannot fit an empty dataset");
    const DesignMatrix design = build_design(data, spec);
    const GammaRegressionModel model(design, spec.priors);

    const auto& ss = spec.sampler;
    LogDensityGrad target = [&model](const Eigen::VectorXd& q, Eigen::VectorXd& grad) {
        return model.log_posterior(q, &grad);
    };

    std::vector<ChainResult> chains(ss.chains);
    std::vector<std::thread> workers;
    for (int chain = 0; chain < ss.chains; ++chain) {
        workers.emplace_back([&, chain] {
            Rng init_rng(Rng::mix(seed, 0x9e1ced4aULL, static_cast<std::uint64_t>(chain)));
            NutsOptions opts;
            opts.iterations = ss.iterations;
            opts.warmup = ss.warmup;
            opts.max_depth = ss.max_depth;
            opts.target_accept = ss.target_accept;
            opts.seed = Rng::mix(seed, static_cast<std::uint64_t>(chain + 1));
            opts.init = initial_point(model, init_rng);
            chains[chain] = run_nuts(target, opts);
        });
    }
    for (auto& w : workers) w.join();

    const int keep = ss.iterations - ss.warmup;
    FitResult result;
    PosteriorDraws& out = result.draws;
    out.names = model.parameter_names();
    out.encoding = design.encoding;
    out.chains = ss.chains;
    out.draws_per_chain = keep;
    out.context_level = spec.context_level;
    out.seed = seed;
    out.draws.resize(static_cast<Eigen::Index>(ss.chains) * keep,
                     static_cast<Eigen::Index>(out.names.size()));
    out.lp.resize(out.draws.rows());
    for (int chain = 0; chain < ss.chains; ++chain) {
        for (int i = 0; i < keep; ++i) {
            const Eigen::Index row = static_cast<Eigen::Index>(chain) * keep + i;
            out.draws.row(row) = model.constrained(chains[chain].draws.row(i).transpose());
            out.lp[row] = chains[chain].logp[i];
        }
    }

    FitDiagnostics& diag = result.diagnostics;
    diag.names = out.names;
    diag.names.push_back("lp__");
    for (std::size_t param = 0; param < out.names.size() + 1; ++param) {
        std::vector<Eigen::VectorXd> per_chain;
        for (int chain = 0; chain < ss.chains; ++chain) {
            Eigen::VectorXd v(keep);
            for (int i = 0; i < keep; ++i) {
                const Eigen::Index row = static_cast<Eigen::Index>(chain) * keep + i;
                v[i] = param < out.names.size() ? out.draws(row, static_cast<Eigen::Index>(param))
                                                : out.lp[row];
            }
            per_chain.push_back(std::move(v));
        }
        diag.per_param.push_back(split_rhat_ess(per_chain));
    }
    for (const auto& c : chains) {
        diag.chains.push_back({c.divergences, c.mean_accept, c.mean_treedepth, c.step_size});
    }
    return result;
}

double quantile(Eigen::VectorXd values, double prob) {
    if (values.size() == 0) throw std::invalid_argument("quantile of empty vector");
    std::sort(values.data(), values.data() + values.size());
    const double h = prob * (static_cast<double>(values.size()) - 1.0);
    const Eigen::Index lo = static_cast<Eigen::Index>(std::floor(h));
    const Eigen::Index hi = std::min(lo + 1, values.size() - 1);
    const double frac = h - std::floor(h);
    return values[lo] * (1.0 - frac) + values[hi] * frac;
}

EffectEstimate counterfactual_difference(const PosteriorDraws& draws, const Dataset& data, int x,
                                         const std::string& context_level) {
    if (!context_level.empty() && !data.context_level.empty() &&
        context_level != data.context_level) {
        throw std::invalid_argument("dataset holds context " + data.context_level +
                                    ", requested " + context_level);
    }
    if (x + 1 > draws.encoding.x_max) {
        throw std::invalid_argument("treatment level " + std::to_string(x) +
                                    " has no next level below x_max");
    }
    std::vector<Eigen::Index> stratum;
    for (Eigen::Index i = 0; i < data.n(); ++i) {
        if (data.treatment[i] == x) stratum.push_back(i);
    }
    if (stratum.empty()) {
        throw std::runtime_error("empty stratum: no rows with treatment level " +
                                 std::to_string(x));
    }

    Eigen::VectorXi group_idx;
    const Eigen::MatrixXd X = encode_rows(data, draws.encoding, stratum, &group_idx);
    Eigen::VectorXd w(static_cast<Eigen::Index>(stratum.size()));
    for (std::size_t k = 0; k < stratum.size(); ++k) w[static_cast<Eigen::Index>(k)] = data.weight[stratum[k]];
    const double w_total = w.sum();

    EffectEstimate est;
    est.per_draw.resize(draws.b());
    for (Eigen::Index b = 0; b < draws.b(); ++b) {
        const ParamView view = draws.view(b);
        Eigen::VectorXd base = X * view.coefs;
        if (draws.encoding.has_group) {
            for (Eigen::Index r = 0; r < base.size(); ++r) {
                if (group_idx[r] >= 0) base[r] += view.u[group_idx[r]];
            }
        }
        const double mo_fact = view.zeta.size() ? view.mono_coef * mo(x, view.zeta) : 0.0;
        const double mo_cf = view.zeta.size() ? view.mono_coef * mo(x + 1, view.zeta) : 0.0;
        double acc = 0.0;
        for (Eigen::Index r = 0; r < base.size(); ++r) {
            acc += w[r] * (std::exp(base[r] + mo_cf) - std::exp(base[r] + mo_fact));
        }
        est.per_draw[b] = acc / w_total;
    }
    est.point = est.per_draw.mean();
    est.ci_lower = quantile(est.per_draw, 0.025);
    est.ci_upper = quantile(est.per_draw, 0.975);
    return est;
}

Eigen::MatrixXd posterior_means(const PosteriorDraws& draws, const Dataset& data) {
    std::vector<Eigen::Index> all(data.n());
    for (Eigen::Index i = 0; i < data.n(); ++i) all[i] = i;
    Eigen::VectorXi group_idx;
    const Eigen::MatrixXd X = encode_rows(data, draws.encoding, all, &group_idx);

    Eigen::MatrixXd mu(draws.b(), data.n());
    for (Eigen::Index b = 0; b < draws.b(); ++b) {
        const ParamView view = draws.view(b);
        Eigen::VectorXd eta = X * view.coefs;
        if (draws.encoding.has_group) {
            for (Eigen::Index r = 0; r < eta.size(); ++r) {
                if (group_idx[r] >= 0) eta[r] += view.u[group_idx[r]];
            }
        }
        if (view.zeta.size()) {
            for (Eigen::Index r = 0; r < eta.size(); ++r) {
                eta[r] += view.mono_coef * mo(data.treatment[r], view.zeta);
            }
        }
        mu.row(b) = eta.array().exp().matrix().transpose();
    }
    return mu;
}

AceTable ace_table(const std::vector<std::pair<const PosteriorDraws*, const Dataset*>>& fits,
                   const std::vector<std::string>& context_labels) {
    if (fits.size() != context_labels.size()) {
        throw std::invalid_argument("one context label per fit required");
    }
    AceTable table;
    for (std::size_t f = 0; f < fits.size(); ++f) {
        const auto& [draws, data] = fits[f];
        for (int x = 1; x + 1 <= draws->encoding.x_max; ++x) {
            AceRow row;
            row.context = context_labels[f];
            row.x = x;
            try {
                const EffectEstimate est =
                    counterfactual_difference(*draws, *data, x, data->context_level);
                row.ace = est.point;
                row.ci_lower = est.ci_lower;
                row.ci_upper = est.ci_upper;
            } catch (const std::exception& err) {
                row.note = err.what();
            }
            table.rows.push_back(std::move(row));
        }
    }
    return table;
}

namespace {

std::string format_double(double v) {
    std::ostringstream out;
    out.precision(10);
    out << v;
    return out.str();
}

}  // namespace

CsvTable AceTable::to_csv(const std::vector<std::string>& comments) const {
    CsvTable csv;
    csv.comments = comments;
    csv.header = {"context", "length_of_stay", "increase", "ace", "ci_lower", "ci_upper", "note"};
    for (const auto& row : rows) {
        csv.rows.push_back({row.context, std::to_string(row.x), "+1",
                            row.note.empty() ? format_double(row.ace) : "",
                            row.note.empty() ? format_double(row.ci_lower) : "",
                            row.note.empty() ? format_double(row.ci_upper) : "", row.note});
    }
    return csv;
}

void write_draws_csv(const std::string& path, const PosteriorDraws& draws,
                     const std::vector<std::string>& comments) {
    CsvTable csv;
    csv.comments = comments;
    csv.header = {"chain", "iteration", "lp__"};
    for (const auto& n : draws.names) csv.header.push_back(n);
    for (Eigen::Index b = 0; b < draws.b(); ++b) {
        std::vector<std::string> rec;
        const int chain = static_cast<int>(b / draws.draws_per_chain);
        const int iter = static_cast<int>(b % draws.draws_per_chain);
        rec.push_back(std::to_string(chain));
        rec.push_back(std::to_string(iter));
        std::ostringstream lp;
        lp.precision(17);
        lp << draws.lp[b];
        rec.push_back(lp.str());
        for (Eigen::Index c = 0; c < draws.draws.cols(); ++c) {
            std::ostringstream v;
            v.precision(17);
            v << draws.draws(b, c);
            rec.push_back(v.str());
        }
        csv.rows.push_back(std::move(rec));
    }
    write_csv(path, csv);
}

PosteriorDraws read_draws_csv(const std::string& path, const Encoding& encoding) {
    const CsvTable csv = read_csv(path);
    PosteriorDraws draws;
    draws.encoding = encoding;
    if (csv.header.size() < 4 || csv.header[0] != "chain" || csv.header[1] != "iteration" ||
        csv.header[2] != "lp__") {
        throw std::runtime_error("unrecognized draws file layout: " + path);
    }
    draws.names.assign(csv.header.begin() + 3, csv.header.end());
    const Eigen::Index b = static_cast<Eigen::Index>(csv.rows.size());
    draws.draws.resize(b, static_cast<Eigen::Index>(draws.names.size()));
    draws.lp.resize(b);
    int max_chain = 0;
    for (Eigen::Index r = 0; r < b; ++r) {
        const auto& rec = csv.rows[r];
        max_chain = std::max(max_chain, std::stoi(rec[0]));
        draws.lp[r] = std::stod(rec[2]);
        for (std::size_t c = 3; c < rec.size(); ++c) {
            draws.draws(r, static_cast<Eigen::Index>(c - 3)) = std::stod(rec[c]);
        }
    }
    draws.chains = max_chain + 1;
    draws.draws_per_chain = static_cast<int>(b / draws.chains);
    return draws;
}

}  // namespace ctxcausal
