#pragma once

// Monte Carlo evaluation of a constant-gain filter on the plant: transient,
// steady-state and full-horizon mean squared error, log-MSE curve, critical
// time, and elementwise gain accuracy against a reference.

#include "aof/env.hpp"
#include "aof/parallel.hpp"

#include <cmath>
#include <numbers>
#include <vector>

namespace aof {

struct EvalConfig {
    long n_traj = 10000;
    long t_test = 1000;
    long t_critical = 195;
    std::uint64_t seed = 0;
    InitialErrorMode init_mode = InitialErrorMode::uniform_box;
    unsigned threads = 0;  // 0: hardware concurrency

    void validate() const {
        if (n_traj <= 0) throw ArgumentError("eval: n_traj must be positive");
        if (!(t_critical > 0 && t_critical < t_test)) throw ArgumentError("eval: need 0 < t_critical < t_test");
    }
};

struct EvalReport {
    double loss_tran = 0;
    double loss_ss = 0;
    double loss_full = 0;
    std::vector<double> logmse_curve;  // log of the per-step MSE, steps 1..T
};

/// Multi-sine steering excitation in radians at step t:
///   7 pi / 1800 [sin(t / 3pi) + sin(t / 10pi) + sin(t / 20pi)].
inline double control_signal(double t) {
    constexpr double pi = std::numbers::pi;
    return 7.0 * pi / 1800.0 * (std::sin(t / (3.0 * pi)) + std::sin(t / (10.0 * pi)) + std::sin(t / (20.0 * pi)));
}

/// Independent generator for trajectory `index` of a run seeded with `seed`.
inline Rng trajectory_rng(std::uint64_t seed, std::uint64_t index) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
    return Rng(seq);
}

/// Simulates plant and constant-gain estimator for cfg.t_test steps and returns
/// |x_t - x_hat_t|^2 for t = 1..t_test. The true state starts at 0 and the
/// estimate at -e0.
template <typename Scalar>
std::vector<Scalar> run_trajectory(const LinearGaussianModel<Scalar>& model, const FilterGain<Scalar>& gain,
                                   const EvalConfig& cfg, Rng& rng, const NoiseSampler<Scalar>& sampler,
                                   const InitialErrorSpec& init = {}) {
    if (gain.rows() != model.n() || gain.cols() != model.r()) throw DimensionError("run_trajectory: gain must be n x r");
    const auto n = model.n();
    const auto m = model.m();
    Vec<Scalar> x = Vec<Scalar>::Zero(n);
    Vec<Scalar> xhat = -sample_initial_error<Scalar>(cfg.init_mode, n, rng, init);
    std::vector<Scalar> out;
    out.reserve(static_cast<std::size_t>(cfg.t_test));
    Vec<Scalar> u_prev = Vec<Scalar>::Constant(m, Scalar(control_signal(0.0)));
    for (long t = 1; t <= cfg.t_test; ++t) {
        const Vec<Scalar> u = Vec<Scalar>::Constant(m, Scalar(control_signal(double(t))));
        const auto noise = sampler.draw(rng);
        x = model.A * x + model.B * u_prev + model.E * noise.xi;
        const Vec<Scalar> y = model.C * x + model.D * u + noise.zeta;
        const Vec<Scalar> prior = model.A * xhat + model.B * u_prev;
        xhat = prior + gain * (y - model.C * prior - model.D * u);
        const Scalar se = (x - xhat).squaredNorm();
        if (!std::isfinite(double(se)))
            throw DivergenceError("run_trajectory: non-finite error at step " + std::to_string(t), double(t));
        out.push_back(se);
        u_prev = u;
    }
    return out;
}

template <typename Scalar>
std::vector<Scalar> run_trajectory(const LinearGaussianModel<Scalar>& model, const FilterGain<Scalar>& gain,
                                   const EvalConfig& cfg, std::uint64_t traj_seed, const InitialErrorSpec& init = {}) {
    Rng rng = trajectory_rng(cfg.seed, traj_seed);
    return run_trajectory(model, gain, cfg, rng, NoiseSampler<Scalar>(model), init);
}

/// Losses from an n_traj x t_test matrix of squared errors (column t-1 is step t).
template <typename Derived>
EvalReport losses(const Eigen::MatrixBase<Derived>& sq, long t_critical) {
    const long N = sq.rows();
    const long T = sq.cols();
    if (N == 0 || T == 0) throw ArgumentError("losses: empty squared-error matrix");
    if (!(t_critical > 0 && t_critical < T)) throw ArgumentError("losses: t_critical out of range");
    EvalReport rep;
    const Eigen::ArrayXd tran = sq.leftCols(t_critical).template cast<double>().rowwise().sum().array() / double(t_critical);
    const Eigen::ArrayXd ss =
        sq.rightCols(T - t_critical).template cast<double>().rowwise().sum().array() / double(T - t_critical);
    const Eigen::ArrayXd full = sq.template cast<double>().rowwise().sum().array() / double(T);
    rep.loss_tran = tran.mean();
    rep.loss_ss = ss.mean();
    rep.loss_full = full.mean();
    const Eigen::VectorXd mse = sq.template cast<double>().colwise().mean().transpose();
    rep.logmse_curve.resize(static_cast<std::size_t>(T));
    for (long t = 0; t < T; ++t) rep.logmse_curve[static_cast<std::size_t>(t)] = std::log(mse(t));
    return rep;
}

/// Evaluates a gain over cfg.n_traj trajectories. Trajectory i always uses the
/// generator trajectory_rng(cfg.seed, i), so different gains see identical noise.
template <typename Scalar>
EvalReport evaluate(const LinearGaussianModel<Scalar>& model, const FilterGain<Scalar>& gain, const EvalConfig& cfg,
                    const InitialErrorSpec& init = {}) {
    model.validate();
    cfg.validate();
    const NoiseSampler<Scalar> sampler(model);
    constexpr long chunk = 64;
    const long chunks = (cfg.n_traj + chunk - 1) / chunk;
    const auto T = static_cast<std::size_t>(cfg.t_test);

    struct Partial {
        std::vector<double> step_sum;
        double tran = 0, ss = 0, full = 0;
    };
    std::vector<Partial> parts(static_cast<std::size_t>(chunks));
    parallel_for(parts.size(), cfg.threads ? cfg.threads : default_threads(), [&](std::size_t c) {
        Partial& p = parts[c];
        p.step_sum.assign(T, 0.0);
        const long lo = static_cast<long>(c) * chunk;
        const long hi = std::min(cfg.n_traj, lo + chunk);
        for (long i = lo; i < hi; ++i) {
            Rng rng = trajectory_rng(cfg.seed, static_cast<std::uint64_t>(i));
            const auto se = run_trajectory(model, gain, cfg, rng, sampler, init);
            double tran = 0, ss = 0;
            for (std::size_t t = 0; t < T; ++t) {
                const double v = double(se[t]);
                p.step_sum[t] += v;
                (static_cast<long>(t) < cfg.t_critical ? tran : ss) += v;
            }
            p.tran += tran / double(cfg.t_critical);
            p.ss += ss / double(cfg.t_test - cfg.t_critical);
            p.full += (tran + ss) / double(cfg.t_test);
        }
    });

    EvalReport rep;
    std::vector<double> step_sum(T, 0.0);
    for (const auto& p : parts) {
        rep.loss_tran += p.tran;
        rep.loss_ss += p.ss;
        rep.loss_full += p.full;
        for (std::size_t t = 0; t < T; ++t) step_sum[t] += p.step_sum[t];
    }
    const double N = double(cfg.n_traj);
    rep.loss_tran /= N;
    rep.loss_ss /= N;
    rep.loss_full /= N;
    rep.logmse_curve.resize(T);
    for (std::size_t t = 0; t < T; ++t) rep.logmse_curve[t] = std::log(step_sum[t] / N);
    return rep;
}

struct CriticalTimeRule {
    long window = 50;
    double slope_tol = 1e-4;
    long fallback = 195;
};

/// First step t at which the least-squares slope of the log-MSE curve over the
/// trailing window ending at t is below slope_tol in magnitude; the curve's
/// first entry is step 1. Returns rule.fallback if that never happens.
inline long detect_critical_time(const std::vector<double>& curve, const CriticalTimeRule& rule = {}) {
    const long w = rule.window;
    const long len = static_cast<long>(curve.size());
    if (w < 2 || len < w) return rule.fallback;
    // Centered abscissa: slope = sum (k - kbar) y_k / sum (k - kbar)^2.
    const double kbar = double(w - 1) / 2.0;
    double denom = 0;
    for (long k = 0; k < w; ++k) denom += (k - kbar) * (k - kbar);
    for (long end = w - 1; end < len; ++end) {
        double num = 0;
        for (long k = 0; k < w; ++k) num += (k - kbar) * curve[static_cast<std::size_t>(end - w + 1 + k)];
        if (std::abs(num / denom) < rule.slope_tol) return end + 1;
    }
    return rule.fallback;
}

struct GainMetrics {
    MatrixXd difference;  // pi - K_inf
    MatrixXd accuracy_pct;  // difference / |K_inf|max * 100
};

template <typename Scalar>
GainMetrics gain_metrics(const FilterGain<Scalar>& pi, const FilterGain<Scalar>& k_inf) {
    if (pi.rows() != k_inf.rows() || pi.cols() != k_inf.cols()) throw DimensionError("gain_metrics: shape mismatch");
    const double kmax = k_inf.size() ? double(k_inf.cwiseAbs().maxCoeff()) : 0.0;
    if (!(kmax > 0)) throw ArgumentError("gain_metrics: reference gain is all zero");
    GainMetrics g;
    g.difference = (pi - k_inf).template cast<double>();
    g.accuracy_pct = g.difference / kmax * 100.0;
    return g;
}

}  // namespace aof
