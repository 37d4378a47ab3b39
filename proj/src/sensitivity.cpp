#include "ctxcausal/sensitivity.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include <Eigen/Eigenvalues>

#include "ctxcausal/rng.hpp"

namespace ctxcausal {

namespace {

// Gauss-Hermite nodes/weights by the Golub-Welsch construction.
struct GaussHermite {
    Eigen::VectorXd nodes;
    Eigen::VectorXd weights;  // normalized so sum(weights) == 1
};

GaussHermite gauss_hermite(int n) {
    Eigen::MatrixXd jacobi = Eigen::MatrixXd::Zero(n, n);
    for (int k = 1; k < n; ++k) {
        const double off = std::sqrt(static_cast<double>(k) / 2.0);
        jacobi(k - 1, k) = off;
        jacobi(k, k - 1) = off;
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(jacobi);
    GaussHermite gh;
    gh.nodes = solver.eigenvalues();
    gh.weights.resize(n);
    for (int i = 0; i < n; ++i) {
        const double v0 = solver.eigenvectors()(0, i);
        gh.weights[i] = v0 * v0;  // already sums to 1 after normalizing by sqrt(pi)
    }
    return gh;
}

// Mean and sd of tanh(N(m, s^2)) by quadrature.
std::pair<double, double> tanh_moments(const GaussHermite& gh, double m, double s) {
    double mean = 0.0, second = 0.0;
    for (int i = 0; i < gh.nodes.size(); ++i) {
        const double v = std::tanh(m + std::sqrt(2.0) * s * gh.nodes[i]);
        mean += gh.weights[i] * v;
        second += gh.weights[i] * v * v;
    }
    return {mean, std::sqrt(std::max(0.0, second - mean * mean))};
}

}  // namespace

ZScaleParams match_correlation_prior(double mean, double sd) {
    if (!(mean > -1.0 && mean < 1.0)) {
        throw std::invalid_argument("correlation prior mean must lie in (-1, 1)");
    }
    if (sd < 0.0) throw std::invalid_argument("correlation prior sd must be nonnegative");
    if (sd == 0.0) return {std::atanh(mean), 0.0};

    const GaussHermite gh = gauss_hermite(80);
    double m = std::atanh(mean);
    double t = std::log(sd / std::max(1e-12, 1.0 - mean * mean));
    for (int iter = 0; iter < 100; ++iter) {
        const auto [cur_mean, cur_sd] = tanh_moments(gh, m, std::exp(t));
        const double f1 = cur_mean - mean, f2 = cur_sd - sd;
        if (std::abs(f1) < 1e-13 && std::abs(f2) < 1e-13) break;
        const double h = 1e-7;
        const auto [mh1, sh1] = tanh_moments(gh, m + h, std::exp(t));
        const auto [mh2, sh2] = tanh_moments(gh, m, std::exp(t + h));
        const double j11 = (mh1 - cur_mean) / h, j12 = (mh2 - cur_mean) / h;
        const double j21 = (sh1 - cur_sd) / h, j22 = (sh2 - cur_sd) / h;
        const double det = j11 * j22 - j12 * j21;
        if (std::abs(det) < 1e-300) break;
        m -= (j22 * f1 - j12 * f2) / det;
        t -= (-j21 * f1 + j11 * f2) / det;
    }
    return {m, std::exp(t)};
}

Eigen::VectorXd sample_correlation(const CorrelationPrior& prior, std::uint64_t seed,
                                   Eigen::Index count) {
    const ZScaleParams z = match_correlation_prior(prior.mean, prior.sd);
    Rng rng(Rng::mix(seed, 0xc0a1e5ceULL, static_cast<std::uint64_t>(prior.target)));
    Eigen::VectorXd out(count);
    for (Eigen::Index i = 0; i < count; ++i) out[i] = std::tanh(z.mean + z.sd * rng.normal());
    return out;
}

Eigen::VectorXd residual_sd(const PosteriorDraws& draws, const Dataset& data) {
    const Eigen::MatrixXd mu = posterior_means(draws, data);
    Eigen::VectorXd out(draws.b());
    const double n = static_cast<double>(data.n());
    if (n < 2) throw std::runtime_error("residual sd needs at least two observations");
    for (Eigen::Index b = 0; b < draws.b(); ++b) {
        const Eigen::ArrayXd resid = data.outcome.array() - mu.row(b).transpose().array();
        const double mean = resid.mean();
        out[b] = std::sqrt((resid - mean).square().sum() / (n - 1.0));
    }
    return out;
}

double ovb_bias(double r_outcome, double r_treatment, double sd_outcome_resid,
                double sd_treatment_resid) {
    if (!(std::abs(r_outcome) < 1.0 && std::abs(r_treatment) < 1.0)) {
        throw std::invalid_argument("residual correlations must lie strictly inside (-1, 1)");
    }
    if (sd_treatment_resid <= 0.0) {
        throw std::invalid_argument("treatment residual sd must be positive");
    }
    const double r2y = r_outcome * r_outcome;
    const double r2x = r_treatment * r_treatment;
    const double sign = (r_outcome * r_treatment > 0.0)   ? 1.0
                        : (r_outcome * r_treatment < 0.0) ? -1.0
                                                          : 0.0;
    return sign * std::sqrt(r2y * r2x / (1.0 - r2x)) * sd_outcome_resid / sd_treatment_resid;
}

BiasDraws compute_bias_draws(const PosteriorDraws& outcome_draws, const Dataset& outcome_data,
                             const PosteriorDraws& treatment_draws, const Dataset& treatment_data,
                             const CorrelationPrior& treatment_prior,
                             const CorrelationPrior& outcome_prior, std::uint64_t seed) {
    if (outcome_draws.b() != treatment_draws.b()) {
        throw std::invalid_argument("outcome and treatment fits carry different draw counts");
    }
    BiasDraws out;
    out.r_treatment = sample_correlation(treatment_prior, Rng::mix(seed, 1), outcome_draws.b());
    out.r_outcome = sample_correlation(outcome_prior, Rng::mix(seed, 2), outcome_draws.b());
    out.sd_outcome = residual_sd(outcome_draws, outcome_data);
    out.sd_treatment = residual_sd(treatment_draws, treatment_data);
    out.bias.resize(outcome_draws.b());
    for (Eigen::Index b = 0; b < outcome_draws.b(); ++b) {
        out.bias[b] = ovb_bias(out.r_outcome[b], out.r_treatment[b], out.sd_outcome[b],
                               out.sd_treatment[b]);
    }
    return out;
}

AceTable adjusted_ace(const std::vector<std::pair<const PosteriorDraws*, const Dataset*>>& fits,
                      const std::vector<const BiasDraws*>& biases,
                      const std::vector<std::string>& context_labels) {
    if (fits.size() != biases.size() || fits.size() != context_labels.size()) {
        throw std::invalid_argument("need one bias-draw block and label per fit");
    }
    AceTable table;
    for (std::size_t f = 0; f < fits.size(); ++f) {
        const auto& [draws, data] = fits[f];
        if (biases[f]->b() != draws->b()) {
            throw std::invalid_argument("bias draws are not aligned with the posterior draws");
        }
        for (int x = 1; x + 1 <= draws->encoding.x_max; ++x) {
            AceRow row;
            row.context = context_labels[f];
            row.x = x;
            try {
                EffectEstimate est = counterfactual_difference(*draws, *data, x, data->context_level);
                est.per_draw += biases[f]->bias;
                row.ace = est.per_draw.mean();
                row.ci_lower = quantile(est.per_draw, 0.025);
                row.ci_upper = quantile(est.per_draw, 0.975);
            } catch (const std::exception& err) {
                row.note = err.what();
            }
            table.rows.push_back(std::move(row));
        }
    }
    return table;
}

Histogram histogram(const Eigen::VectorXd& values, int bins) {
    if (values.size() == 0 || bins < 1) throw std::invalid_argument("histogram needs data and bins");
    Histogram h;
    const double lo = values.minCoeff(), hi = values.maxCoeff();
    const double width = hi > lo ? (hi - lo) / bins : 1.0;
    for (int i = 0; i <= bins; ++i) h.edges.push_back(lo + width * i);
    h.counts.assign(bins, 0);
    for (Eigen::Index i = 0; i < values.size(); ++i) {
        int idx = static_cast<int>((values[i] - lo) / width);
        idx = std::min(std::max(idx, 0), bins - 1);
        ++h.counts[static_cast<std::size_t>(idx)];
    }
    return h;
}

nlohmann::json Histogram::to_json() const {
    return {{"edges", edges}, {"counts", counts}};
}

CsvTable bias_draws_csv(const BiasDraws& draws, const std::vector<std::string>& comments) {
    CsvTable csv;
    csv.comments = comments;
    csv.header = {"draw", "r_treatment", "r_outcome", "sd_treatment_resid", "sd_outcome_resid",
                  "bias"};
    for (Eigen::Index b = 0; b < draws.b(); ++b) {
        std::vector<std::string> rec{std::to_string(b)};
        for (double v : {draws.r_treatment[b], draws.r_outcome[b], draws.sd_treatment[b],
                         draws.sd_outcome[b], draws.bias[b]}) {
            std::ostringstream out;
            out.precision(17);
            out << v;
            rec.push_back(out.str());
        }
        csv.rows.push_back(std::move(rec));
    }
    return csv;
}

}  // namespace ctxcausal
