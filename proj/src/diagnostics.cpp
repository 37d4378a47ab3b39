#include "ctxcausal/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "ctxcausal/special.hpp"

namespace ctxcausal {

namespace {

// Fractional-rank normalization of all draws pooled across sequences.
std::vector<Eigen::VectorXd> rank_normalize(const std::vector<Eigen::VectorXd>& seqs) {
    std::size_t total = 0;
    for (const auto& s : seqs) total += s.size();
    struct Item {
        double value;
        std::size_t seq;
        Eigen::Index pos;
    };
    std::vector<Item> items;
    items.reserve(total);
    for (std::size_t c = 0; c < seqs.size(); ++c) {
        for (Eigen::Index i = 0; i < seqs[c].size(); ++i) items.push_back({seqs[c][i], c, i});
    }
    std::sort(items.begin(), items.end(),
              [](const Item& a, const Item& b) { return a.value < b.value; });

    std::vector<Eigen::VectorXd> out(seqs.size());
    for (std::size_t c = 0; c < seqs.size(); ++c) out[c].resize(seqs[c].size());
    std::size_t i = 0;
    while (i < items.size()) {
        std::size_t j = i;
        while (j < items.size() && items[j].value == items[i].value) ++j;
        const double avg_rank = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
        const double z = norm_quantile((avg_rank - 0.375) / (static_cast<double>(total) + 0.25));
        for (std::size_t k = i; k < j; ++k) out[items[k].seq][items[k].pos] = z;
        i = j;
    }
    return out;
}

double sequence_mean(const Eigen::VectorXd& s) { return s.mean(); }

double sequence_var(const Eigen::VectorXd& s) {
    const double m = s.mean();
    return (s.array() - m).square().sum() / static_cast<double>(s.size() - 1);
}

}  // namespace

ParamDiagnostics split_rhat_ess(const std::vector<Eigen::VectorXd>& chains) {
    if (chains.empty()) throw std::invalid_argument("no chains");
    const Eigen::Index len = chains.front().size();
    for (const auto& c : chains) {
        if (c.size() != len) throw std::invalid_argument("chains of unequal length");
    }
    if (len < 4) return {1.0, static_cast<double>(len * chains.size())};

    // Split each chain in half.
    std::vector<Eigen::VectorXd> seqs;
    const Eigen::Index half = len / 2;
    for (const auto& c : chains) {
        seqs.push_back(c.head(half));
        seqs.push_back(c.segment(len - half, half));
    }

    // Constant parameter: diagnostics are vacuous.
    bool constant = true;
    const double first = seqs[0][0];
    for (const auto& s : seqs) {
        if ((s.array() != first).any()) {
            constant = false;
            break;
        }
    }
    if (constant) {
        return {1.0, static_cast<double>(half * static_cast<Eigen::Index>(seqs.size()))};
    }

    const auto z = rank_normalize(seqs);
    const std::size_t m = z.size();
    const double n = static_cast<double>(half);

    double w = 0.0;  // within-sequence variance
    double mean_of_means = 0.0;
    for (const auto& s : z) {
        w += sequence_var(s);
        mean_of_means += sequence_mean(s);
    }
    w /= static_cast<double>(m);
    mean_of_means /= static_cast<double>(m);
    double b = 0.0;  // between-sequence variance * n
    for (const auto& s : z) {
        const double d = sequence_mean(s) - mean_of_means;
        b += d * d;
    }
    b *= n / static_cast<double>(m - 1);

    const double var_plus = (n - 1.0) / n * w + b / n;
    ParamDiagnostics out;
    out.rhat = std::sqrt(var_plus / w);

    // Bulk ESS via Geyer's initial monotone sequence on combined
    // autocorrelations of the rank-normalized sequences.
    const Eigen::Index max_lag = half - 1;
    std::vector<double> rho(static_cast<std::size_t>(max_lag) + 1, 0.0);
    std::vector<Eigen::VectorXd> centered;
    for (const auto& s : z) centered.push_back(s.array() - sequence_mean(s));

    auto acov = [&](const Eigen::VectorXd& s, Eigen::Index t) {
        double acc = 0.0;
        for (Eigen::Index i = 0; i + t < s.size(); ++i) acc += s[i] * s[i + t];
        return acc / static_cast<double>(s.size());
    };

    double tau = 1.0;
    double prev_pair = std::numeric_limits<double>::max();
    for (Eigen::Index t = 1; t + 1 <= max_lag; t += 2) {
        double mean_acov_t = 0.0, mean_acov_t1 = 0.0;
        for (const auto& s : centered) {
            mean_acov_t += acov(s, t);
            mean_acov_t1 += acov(s, t + 1);
        }
        mean_acov_t /= static_cast<double>(m);
        mean_acov_t1 /= static_cast<double>(m);
        const double rho_t = 1.0 - (w - mean_acov_t) / var_plus;
        const double rho_t1 = 1.0 - (w - mean_acov_t1) / var_plus;
        double pair = rho_t + rho_t1;
        if (pair < 0.0) break;
        pair = std::min(pair, prev_pair);  // enforce monotone decrease
        prev_pair = pair;
        tau += 2.0 * pair;
    }
    out.ess_bulk = static_cast<double>(m) * n / tau;
    return out;
}

double FitDiagnostics::max_rhat() const {
    double v = 0.0;
    for (const auto& p : per_param) v = std::max(v, p.rhat);
    return v;
}

double FitDiagnostics::min_ess() const {
    double v = std::numeric_limits<double>::max();
    for (const auto& p : per_param) v = std::min(v, p.ess_bulk);
    return per_param.empty() ? 0.0 : v;
}

nlohmann::json FitDiagnostics::to_json() const {
    nlohmann::json params = nlohmann::json::object();
    for (std::size_t i = 0; i < names.size(); ++i) {
        params[names[i]] = {{"rhat", per_param[i].rhat}, {"ess_bulk", per_param[i].ess_bulk}};
    }
    nlohmann::json chain_stats = nlohmann::json::array();
    for (const auto& c : chains) {
        chain_stats.push_back({{"divergences", c.divergences},
                               {"mean_accept", c.mean_accept},
                               {"mean_treedepth", c.mean_treedepth},
                               {"step_size", c.step_size}});
    }
    return {{"sampler", sampler}, {"parameters", params}, {"chains", chain_stats}};
}

}  // namespace ctxcausal
