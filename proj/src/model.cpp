#include "ctxcausal/model.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "ctxcausal/special.hpp"

namespace ctxcausal {

double mo(int x, const Eigen::VectorXd& zeta) {
    const int x_max = static_cast<int>(zeta.size()) + 1;
    if (x < 1 || x > x_max) {
        throw std::out_of_range("mo: level " + std::to_string(x) + " outside 1.." +
                                std::to_string(x_max));
    }
    double acc = 0.0;
    for (int k = 0; k < x - 1; ++k) acc += zeta[k];
    return acc;
}

double stick_breaking(const Eigen::VectorXd& raw, Eigen::VectorXd& zeta) {
    const int J = static_cast<int>(raw.size()) + 1;
    zeta.resize(J);
    double stick = 1.0;
    double log_jac = 0.0;
    for (int j = 0; j < J - 1; ++j) {
        const double l = raw[j] - std::log(static_cast<double>(J - 1 - j));
        const double z = 1.0 / (1.0 + std::exp(-l));
        zeta[j] = stick * z;
        log_jac += std::log(z) + std::log1p(-z) + std::log(stick);
        stick -= zeta[j];
    }
    zeta[J - 1] = stick;
    return log_jac;
}

Eigen::VectorXd stick_breaking_inverse(const Eigen::VectorXd& zeta) {
    const int J = static_cast<int>(zeta.size());
    Eigen::VectorXd raw(J - 1);
    double stick = 1.0;
    for (int j = 0; j < J - 1; ++j) {
        const double z = zeta[j] / stick;
        raw[j] = std::log(z / (1.0 - z)) + std::log(static_cast<double>(J - 1 - j));
        stick -= zeta[j];
    }
    return raw;
}

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double log_normal_pdf(double x, double sd) {
    return -0.5 * std::log(2.0 * M_PI) - std::log(sd) - 0.5 * x * x / (sd * sd);
}

double log_half_t_pdf(double x, double df, double scale) {
    return std::log(2.0) + std::lgamma((df + 1.0) / 2.0) - std::lgamma(df / 2.0) -
           0.5 * std::log(df * M_PI) - std::log(scale) -
           (df + 1.0) / 2.0 * std::log1p(x * x / (df * scale * scale));
}

double dlog_half_t_pdf(double x, double df, double scale) {
    return -(df + 1.0) * x / (df * scale * scale + x * x);
}

}  // namespace

GammaRegressionModel::GammaRegressionModel(const DesignMatrix& design, const PriorSettings& priors)
    : design_(design),
      priors_(priors),
      monotonic_(design.encoding.monotonic),
      has_group_(design.encoding.has_group) {
    const int p = n_coefs();
    prior_sd_ = Eigen::VectorXd(p);
    for (int j = 0; j < p; ++j) prior_sd_[j] = design_.encoding.prior_sd.at(j);
    dim_ = p + (monotonic_ ? 1 + (n_zeta() - 1) : 0) + (has_group_ ? n_groups() + 1 : 0) + 1;
    if (monotonic_ && design_.encoding.x_max < 2) {
        throw std::runtime_error("monotonic effect needs x_max >= 2");
    }
    for (Eigen::Index i = 0; i < design_.y.size(); ++i) {
        if (!(design_.y[i] > 0)) throw std::runtime_error("outcome must be positive");
    }
}

ParamView GammaRegressionModel::unpack(const Eigen::VectorXd& q) const {
    const int p = n_coefs();
    ParamView view;
    view.coefs = q.head(p);
    int off = p;
    if (monotonic_) {
        view.mono_coef = q[off++];
        const Eigen::VectorXd raw = q.segment(off, n_zeta() - 1);
        off += n_zeta() - 1;
        stick_breaking(raw, view.zeta);
    }
    if (has_group_) {
        const Eigen::VectorXd u_raw = q.segment(off, n_groups());
        off += n_groups();
        view.sigma_u = std::exp(q[off++]);
        view.u = view.sigma_u * u_raw;
    }
    view.shape = std::exp(q[off]);
    return view;
}

double GammaRegressionModel::log_posterior(const Eigen::VectorXd& q, Eigen::VectorXd* grad) const {
    const int p = n_coefs();
    const int J = n_zeta();
    const int L = n_groups();
    const Eigen::Index n = design_.y.size();

    int off = p;
    const Eigen::VectorXd c = q.head(p);
    double a = 0.0;
    Eigen::VectorXd raw, zeta;
    double log_jac_zeta = 0.0;
    if (monotonic_) {
        a = q[off++];
        raw = q.segment(off, J - 1);
        off += J - 1;
        log_jac_zeta = stick_breaking(raw, zeta);
    }
    Eigen::VectorXd u_raw;
    double tau = 0.0, sigma_u = 0.0;
    if (has_group_) {
        u_raw = q.segment(off, L);
        off += L;
        tau = q[off++];
        sigma_u = std::exp(tau);
    }
    const double s = q[off];
    const double shape = std::exp(s);

    if (!std::isfinite(shape) || shape <= 0.0 || (has_group_ && !std::isfinite(sigma_u))) {
        if (grad) grad->setZero(dim_);
        return kNegInf;
    }

    // Linear predictor.
    Eigen::VectorXd eta = design_.X * c;
    Eigen::VectorXd mo_vals;
    if (monotonic_) {
        Eigen::VectorXd cum(J + 1);
        cum[0] = 0.0;
        for (int j = 0; j < J; ++j) cum[j + 1] = cum[j] + zeta[j];
        mo_vals.resize(n);
        for (Eigen::Index i = 0; i < n; ++i) mo_vals[i] = cum[design_.x[i] - 1];
        eta += a * mo_vals;
    }
    if (has_group_) {
        for (Eigen::Index i = 0; i < n; ++i) {
            const int g = design_.group_idx[i];
            if (g >= 0) eta[i] += sigma_u * u_raw[g];
        }
    }

    const Eigen::ArrayXd exp_neg_eta = (-eta.array()).exp();
    const Eigen::ArrayXd ratio = design_.y.array() * exp_neg_eta;  // y_i / mu_i

    double loglik = n * (shape * std::log(shape) - std::lgamma(shape));
    loglik += (shape - 1.0) * design_.y.array().log().sum();
    loglik += -shape * eta.sum() - shape * ratio.sum();

    double logprior = 0.0;
    for (int j = 0; j < p; ++j) logprior += log_normal_pdf(c[j], prior_sd_[j]);
    if (monotonic_) {
        logprior += log_normal_pdf(a, priors_.coef_sd);
        const double conc = priors_.simplex_conc;
        logprior += std::lgamma(conc * J) - J * std::lgamma(conc);
        for (int j = 0; j < J; ++j) {
            if (!(zeta[j] > 0.0)) {
                if (grad) grad->setZero(dim_);
                return kNegInf;
            }
            logprior += (conc - 1.0) * std::log(zeta[j]);
        }
        logprior += log_jac_zeta;
    }
    if (has_group_) {
        for (int l = 0; l < L; ++l) logprior += log_normal_pdf(u_raw[l], 1.0);
        logprior += log_half_t_pdf(sigma_u, priors_.sd_df, priors_.sd_scale) + tau;
    }
    logprior += log_half_t_pdf(shape, priors_.shape_df, priors_.shape_scale) + s;

    const double total = loglik + logprior;
    if (!std::isfinite(total)) {
        if (grad) grad->setZero(dim_);
        return kNegInf;
    }
    if (!grad) return total;

    grad->setZero(dim_);
    const Eigen::VectorXd g_eta = (shape * (ratio - 1.0)).matrix();

    grad->head(p) = design_.X.transpose() * g_eta - (c.array() / prior_sd_.array().square()).matrix();

    int goff = p;
    if (monotonic_) {
        (*grad)[goff++] = g_eta.dot(mo_vals) - a / (priors_.coef_sd * priors_.coef_sd);

        // d(target)/d zeta_j: monotonic effect + Dirichlet prior.
        Eigen::VectorXd dzeta = Eigen::VectorXd::Zero(J);
        // bucket[l] = sum of g_eta over rows with x == l.
        Eigen::VectorXd bucket = Eigen::VectorXd::Zero(J + 2);
        for (Eigen::Index i = 0; i < n; ++i) bucket[design_.x[i]] += g_eta[i];
        // suffix sums: rows with x >= j + 2 include zeta_j in mo.
        double suffix = 0.0;
        for (int x = J + 1; x >= 2; --x) {
            suffix += bucket[x];
            if (x - 2 < J) dzeta[x - 2] = a * suffix;
        }
        const double conc = priors_.simplex_conc;
        for (int j = 0; j < J; ++j) dzeta[j] += (conc - 1.0) / zeta[j];

        // Chain rule through stick breaking plus the Jacobian's own gradient.
        double stick = 1.0;
        Eigen::VectorXd dstick = Eigen::VectorXd::Zero(J - 1);  // d stick_j / d raw_l
        Eigen::VectorXd graw = Eigen::VectorXd::Zero(J - 1);
        for (int j = 0; j < J - 1; ++j) {
            const double l = raw[j] - std::log(static_cast<double>(J - 1 - j));
            const double z = 1.0 / (1.0 + std::exp(-l));
            // d zeta_j / d raw_l = dstick_l * z  (l < j),  stick * z(1-z)  (l == j)
            for (int k = 0; k < j; ++k) {
                const double dz_j = dstick[k] * z;
                graw[k] += dzeta[j] * dz_j;
                graw[k] += dstick[k] / stick;  // d log(stick_j) / d raw_k
                dstick[k] -= dz_j;
            }
            const double dz_own = stick * z * (1.0 - z);
            graw[j] += dzeta[j] * dz_own;
            graw[j] += 1.0 - 2.0 * z;  // d [log z + log(1-z)] / d raw_j
            dstick[j] = -dz_own;
            stick -= stick * z;
        }
        // Last component: zeta_{J-1} = stick_{J-1}.
        for (int k = 0; k < J - 1; ++k) graw[k] += dzeta[J - 1] * dstick[k];
        grad->segment(goff, J - 1) = graw;
        goff += J - 1;
    }
    if (has_group_) {
        Eigen::VectorXd group_sum = Eigen::VectorXd::Zero(L);
        for (Eigen::Index i = 0; i < n; ++i) {
            const int g = design_.group_idx[i];
            if (g >= 0) group_sum[g] += g_eta[i];
        }
        grad->segment(goff, L) = sigma_u * group_sum - u_raw;
        goff += L;
        (*grad)[goff++] = sigma_u * u_raw.dot(group_sum) +
                          dlog_half_t_pdf(sigma_u, priors_.sd_df, priors_.sd_scale) * sigma_u + 1.0;
    }
    // d/ds with s = log(shape).
    const double dll_dshape = n * (std::log(shape) + 1.0 - digamma(shape)) +
                              design_.y.array().log().sum() - eta.sum() - ratio.sum();
    (*grad)[goff] = shape * (dll_dshape +
                             dlog_half_t_pdf(shape, priors_.shape_df, priors_.shape_scale)) +
                    1.0;
    return total;
}

std::vector<std::string> GammaRegressionModel::parameter_names() const {
    std::vector<std::string> names = design_.encoding.design_names;
    if (monotonic_) {
        names.push_back("a_mono");
        for (int j = 1; j <= n_zeta(); ++j) names.push_back("zeta[" + std::to_string(j) + "]");
    }
    if (has_group_) {
        for (const auto& level : design_.encoding.group_levels) names.push_back("u[" + level + "]");
        names.push_back("sigma_u");
    }
    names.push_back("shape");
    return names;
}

Eigen::VectorXd GammaRegressionModel::constrained(const Eigen::VectorXd& q) const {
    const ParamView view = unpack(q);
    std::size_t total = view.coefs.size() + (monotonic_ ? 1 + n_zeta() : 0) +
                        (has_group_ ? n_groups() + 1 : 0) + 1;
    Eigen::VectorXd out(static_cast<Eigen::Index>(total));
    Eigen::Index k = 0;
    out.head(view.coefs.size()) = view.coefs;
    k += view.coefs.size();
    if (monotonic_) {
        out[k++] = view.mono_coef;
        out.segment(k, n_zeta()) = view.zeta;
        k += n_zeta();
    }
    if (has_group_) {
        out.segment(k, n_groups()) = view.u;
        k += n_groups();
        out[k++] = view.sigma_u;
    }
    out[k] = view.shape;
    return out;
}

double GammaRegressionModel::linear_predictor(const ParamView& p, const Eigen::RowVectorXd& row,
                                              int x, int group_index) {
    double eta = row.dot(p.coefs);
    if (p.zeta.size() > 0) eta += p.mono_coef * mo(x, p.zeta);
    if (group_index >= 0) eta += p.u[group_index];
    return eta;
}

}  // namespace ctxcausal
