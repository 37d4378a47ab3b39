#include "ctxcausal/sampler.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "ctxcausal/rng.hpp"

namespace ctxcausal {

namespace {

constexpr double kDeltaMax = 1000.0;

struct State {
    Eigen::VectorXd q;
    Eigen::VectorXd p;
    Eigen::VectorXd grad;
    double logp = 0.0;
};

struct Workspace {
    const LogDensityGrad* target = nullptr;
    Eigen::VectorXd inv_metric;
    Rng* rng = nullptr;
    int max_depth = 10;
    long n_grad = 0;

    double eval(const Eigen::VectorXd& q, Eigen::VectorXd& grad) {
        ++n_grad;
        return (*target)(q, grad);
    }

    double kinetic(const Eigen::VectorXd& p) const {
        return 0.5 * (p.array().square() * inv_metric.array()).sum();
    }

    double joint(const State& s) const { return s.logp - kinetic(s.p); }

    void leapfrog(State& s, double eps) {
        s.p += 0.5 * eps * s.grad;
        s.q.array() += eps * inv_metric.array() * s.p.array();
        s.logp = eval(s.q, s.grad);
        s.p += 0.5 * eps * s.grad;
    }

    Eigen::VectorXd sample_momentum(int dim) {
        Eigen::VectorXd p(dim);
        for (int i = 0; i < dim; ++i) p[i] = rng->normal() / std::sqrt(inv_metric[i]);
        return p;
    }
};

bool no_u_turn(const Workspace& ws, const State& minus, const State& plus) {
    const Eigen::VectorXd dq = plus.q - minus.q;
    const double fwd = dq.dot((ws.inv_metric.array() * plus.p.array()).matrix());
    const double bwd = dq.dot((ws.inv_metric.array() * minus.p.array()).matrix());
    return fwd >= 0.0 && bwd >= 0.0;
}

struct Tree {
    State minus, plus, proposal;
    long n = 0;
    bool ok = true;
    bool divergent = false;
    double alpha = 0.0;
    long n_alpha = 0;
};

Tree build_tree(Workspace& ws, const State& z, double logu, int dir, int depth, double eps,
                double joint0) {
    Tree tree;
    if (depth == 0) {
        State next = z;
        ws.leapfrog(next, dir * eps);
        const double joint = std::isfinite(next.logp) ? ws.joint(next)
                                                      : -std::numeric_limits<double>::infinity();
        tree.minus = next;
        tree.plus = next;
        tree.proposal = next;
        tree.n = logu <= joint ? 1 : 0;
        tree.divergent = !(joint - logu > -kDeltaMax);
        tree.ok = !tree.divergent;
        tree.alpha = std::min(1.0, std::exp(joint - joint0));
        tree.n_alpha = 1;
        return tree;
    }
    tree = build_tree(ws, z, logu, dir, depth - 1, eps, joint0);
    if (!tree.ok) return tree;
    const Tree next = dir == 1 ? build_tree(ws, tree.plus, logu, dir, depth - 1, eps, joint0)
                               : build_tree(ws, tree.minus, logu, dir, depth - 1, eps, joint0);
    if (dir == 1) {
        tree.plus = next.plus;
    } else {
        tree.minus = next.minus;
    }
    if (next.ok && next.n > 0 &&
        ws.rng->uniform01() < static_cast<double>(next.n) / std::max<long>(1, tree.n + next.n)) {
        tree.proposal = next.proposal;
    }
    tree.n += next.n;
    tree.alpha += next.alpha;
    tree.n_alpha += next.n_alpha;
    tree.divergent = tree.divergent || next.divergent;
    tree.ok = next.ok && !tree.divergent && no_u_turn(ws, tree.minus, tree.plus);
    return tree;
}

double find_initial_step(Workspace& ws, const State& init) {
    double eps = 1.0;
    State z = init;
    z.p = ws.sample_momentum(static_cast<int>(init.q.size()));
    const double joint0 = ws.joint(z);
    State step = z;
    ws.leapfrog(step, eps);
    double joint1 = std::isfinite(step.logp) ? ws.joint(step)
                                             : -std::numeric_limits<double>::infinity();
    const double dir = (joint1 - joint0) > std::log(0.5) ? 1.0 : -1.0;
    for (int iter = 0; iter < 100; ++iter) {
        if (dir * (joint1 - joint0) <= dir * std::log(0.5)) break;
        eps *= std::pow(2.0, dir);
        step = z;
        ws.leapfrog(step, eps);
        joint1 = std::isfinite(step.logp) ? ws.joint(step)
                                          : -std::numeric_limits<double>::infinity();
    }
    return eps;
}

struct DualAveraging {
    double mu = 0.0;
    double log_eps_bar = 0.0;
    double h_bar = 0.0;
    long m = 0;
    double target = 0.8;

    void restart(double eps) {
        mu = std::log(10.0 * eps);
        log_eps_bar = std::log(eps);
        h_bar = 0.0;
        m = 0;
    }

    double update(double accept) {
        constexpr double gamma = 0.05, t0 = 10.0, kappa = 0.75;
        ++m;
        h_bar = (1.0 - 1.0 / (m + t0)) * h_bar + (target - accept) / (m + t0);
        const double log_eps = mu - std::sqrt(static_cast<double>(m)) / gamma * h_bar;
        const double w = std::pow(static_cast<double>(m), -kappa);
        log_eps_bar = w * log_eps + (1.0 - w) * log_eps_bar;
        return std::exp(log_eps);
    }

    double final_eps() const { return std::exp(log_eps_bar); }
};

// Welford accumulator for the diagonal metric.
struct Variance {
    Eigen::VectorXd mean, m2;
    long n = 0;

    void reset(int dim) {
        mean = Eigen::VectorXd::Zero(dim);
        m2 = Eigen::VectorXd::Zero(dim);
        n = 0;
    }

    void add(const Eigen::VectorXd& q) {
        ++n;
        const Eigen::VectorXd delta = q - mean;
        mean += delta / static_cast<double>(n);
        m2.array() += delta.array() * (q - mean).array();
    }

    Eigen::VectorXd regularized() const {
        const double nn = static_cast<double>(n);
        Eigen::VectorXd var = m2 / std::max(1.0, nn - 1.0);
        return (nn / (nn + 5.0)) * var.array() + 1e-3 * (5.0 / (nn + 5.0));
    }
};

}  // namespace

ChainResult run_nuts(const LogDensityGrad& target, const NutsOptions& options) {
    const int dim = static_cast<int>(options.init.size());
    if (dim == 0) throw std::invalid_argument("sampler needs a nonempty initial point");
    if (options.iterations <= options.warmup) {
        throw std::invalid_argument("iterations must exceed warmup");
    }

    Rng rng(Rng::mix(options.seed, 0x360c7fabULL));
    Workspace ws;
    ws.target = &target;
    ws.inv_metric = Eigen::VectorXd::Ones(dim);
    ws.rng = &rng;
    ws.max_depth = options.max_depth;

    State current;
    current.q = options.init;
    current.grad.resize(dim);
    current.logp = ws.eval(current.q, current.grad);
    if (!std::isfinite(current.logp)) {
        throw std::runtime_error("log density is not finite at the initial point");
    }

    DualAveraging da;
    da.target = options.target_accept;
    double eps = find_initial_step(ws, current);
    da.restart(eps);

    // Warmup windows in the usual fast / slow / fast arrangement.
    const int warmup = options.warmup;
    const bool adapt_metric = warmup >= 150;
    const int init_buffer = adapt_metric ? 75 : warmup;
    const int term_buffer = adapt_metric ? 50 : 0;
    int window_size = 25;
    int window_end = adapt_metric ? init_buffer + window_size : warmup;
    Variance welford;
    welford.reset(dim);

    const int keep = options.iterations - warmup;
    ChainResult result;
    result.draws.resize(keep, dim);
    result.logp.resize(keep);
    double accept_sum = 0.0;
    double depth_sum = 0.0;
    long stat_count = 0;

    for (int iter = 0; iter < options.iterations; ++iter) {
        const bool warm = iter < warmup;

        State z = current;
        z.p = ws.sample_momentum(dim);
        const double joint0 = ws.joint(z);
        const double logu = std::log(rng.uniform01() + 1e-300) + joint0;

        State minus = z, plus = z;
        State proposal = z;
        long n_states = 1;
        bool keep_going = true;
        int depth = 0;
        double alpha = 0.0;
        long n_alpha = 1;
        bool divergent = false;

        while (keep_going && depth < options.max_depth) {
            const int dir = rng.uniform01() < 0.5 ? -1 : 1;
            Tree tree = dir == 1 ? build_tree(ws, plus, logu, dir, depth, eps, joint0)
                                 : build_tree(ws, minus, logu, dir, depth, eps, joint0);
            if (dir == 1) {
                plus = tree.plus;
            } else {
                minus = tree.minus;
            }
            alpha = tree.alpha;
            n_alpha = tree.n_alpha;
            divergent = divergent || tree.divergent;
            if (tree.ok && tree.n > 0 &&
                rng.uniform01() < std::min(1.0, static_cast<double>(tree.n) /
                                                    static_cast<double>(n_states))) {
                proposal = tree.proposal;
            }
            n_states += tree.n;
            keep_going = tree.ok && no_u_turn(ws, minus, plus);
            ++depth;
        }
        current.q = proposal.q;
        current.grad = proposal.grad;
        current.logp = proposal.logp;

        const double accept_stat = n_alpha > 0 ? alpha / static_cast<double>(n_alpha) : 0.0;
        if (warm) {
            eps = da.update(accept_stat);
            if (adapt_metric && iter >= init_buffer && iter < warmup - term_buffer) {
                welford.add(current.q);
                if (iter + 1 == window_end) {
                    ws.inv_metric = welford.regularized();
                    welford.reset(dim);
                    eps = find_initial_step(ws, current);
                    da.restart(eps);
                    window_size *= 2;
                    window_end = std::min(warmup - term_buffer, window_end + window_size);
                    // Absorb a too-small trailing window into this one.
                    if (warmup - term_buffer - window_end < window_size * 2) {
                        window_end = warmup - term_buffer;
                    }
                }
            }
            if (iter + 1 == warmup) eps = da.final_eps();
        } else {
            result.draws.row(iter - warmup) = current.q;
            result.logp[iter - warmup] = current.logp;
            if (divergent) ++result.divergences;
            accept_sum += accept_stat;
            depth_sum += depth;
            ++stat_count;
        }
    }

    result.mean_accept = stat_count ? accept_sum / static_cast<double>(stat_count) : 0.0;
    result.mean_treedepth = stat_count ? depth_sum / static_cast<double>(stat_count) : 0.0;
    result.step_size = eps;
    result.inv_metric = ws.inv_metric;
    return result;
}

}  // namespace ctxcausal
