#pragma once

// Actor-critic policy iteration for the steady-state filtering MDP.
//
// Critic: V(s; w) = -s^T w s, w symmetric, initialised to I.
// Actor:  a constant gain theta (n x r), initialised to 0.
// Each iteration: one rollout of the error pool, one semi-gradient TD step on
// the critic (Adam, descend), one pathwise policy-gradient step on the actor
// (Adam, ascend).

#include "aof/env.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace aof {

template <typename Scalar>
using CriticWeights = Mat<Scalar>;

template <typename Scalar>
Scalar critic_value(const CriticWeights<Scalar>& w, const ErrorState<Scalar>& s) {
    if (w.rows() != s.size() || w.cols() != s.size()) throw DimensionError("critic_value: shape mismatch");
    return -s.dot(w * s);
}

template <typename Scalar>
struct LossAndGrad {
    Scalar loss = 0;
    Mat<Scalar> grad;
};

namespace detail {

template <typename Scalar>
void check_batch(const Mat<Scalar>& states, const NoiseBatch<Scalar>& noise) {
    if (states.cols() == 0) throw ArgumentError("empty batch");
    if (noise.size() != states.cols()) throw DimensionError("one noise draw per batch element required");
}

// -s^T w s for every column.
template <typename Scalar>
Vec<Scalar> batch_value(const CriticWeights<Scalar>& w, const Mat<Scalar>& states) {
    return -(states.cwiseProduct(w * states)).colwise().sum().transpose();
}

}  // namespace detail

/// Critic TD loss mean(0.5 delta^2), delta = r' + gamma V(s') - V(s), and its
/// semi-gradient mean(delta * s s^T) (bootstrap target held constant).
template <typename Scalar>
LossAndGrad<Scalar> critic_loss_and_grad(const CriticWeights<Scalar>& w, const Mat<Scalar>& states,
                                         const BatchTransition<Scalar>& tr, Scalar gamma) {
    const auto M = states.cols();
    const Vec<Scalar> td = tr.reward + gamma * detail::batch_value(w, tr.next) - detail::batch_value(w, states);
    LossAndGrad<Scalar> out;
    out.loss = Scalar(0.5) * td.squaredNorm() / Scalar(M);
    out.grad = symmetrized(states * td.asDiagonal() * states.transpose() / Scalar(M));
    return out;
}

template <typename Scalar>
LossAndGrad<Scalar> critic_loss_and_grad(const LinearGaussianModel<Scalar>& model, const CriticWeights<Scalar>& w,
                                         const FilterGain<Scalar>& theta, const Mat<Scalar>& states,
                                         const NoiseBatch<Scalar>& noise, Scalar gamma) {
    detail::check_batch(states, noise);
    if (w.rows() != model.n() || w.cols() != model.n()) throw DimensionError("critic weights must be n x n");
    return critic_loss_and_grad(w, states, step_batch(model, states, theta, noise), gamma);
}

/// Actor objective mean(r' + gamma V(s'; w)) and its exact derivative with
/// respect to theta through s' = x - theta y (noise and w fixed):
///   dJ/dtheta = mean((Mw + Mw^T) s' y^T),  Mw = I + gamma w.
template <typename Scalar>
LossAndGrad<Scalar> actor_loss_and_grad(const CriticWeights<Scalar>& w, const BatchTransition<Scalar>& tr,
                                        Scalar gamma) {
    const auto n = w.rows();
    const auto M = tr.next.cols();
    const Mat<Scalar> weight = Mat<Scalar>::Identity(n, n) + gamma * w;
    LossAndGrad<Scalar> out;
    out.loss = (tr.reward + gamma * detail::batch_value(w, tr.next)).sum() / Scalar(M);
    out.grad = (weight + weight.transpose()) * tr.next * tr.measurement.transpose() / Scalar(M);
    return out;
}

template <typename Scalar>
LossAndGrad<Scalar> actor_loss_and_grad(const LinearGaussianModel<Scalar>& model, const CriticWeights<Scalar>& w,
                                        const FilterGain<Scalar>& theta, const Mat<Scalar>& states,
                                        const NoiseBatch<Scalar>& noise, Scalar gamma) {
    detail::check_batch(states, noise);
    if (w.rows() != model.n() || w.cols() != model.n()) throw DimensionError("critic weights must be n x n");
    return actor_loss_and_grad(w, step_batch(model, states, theta, noise), gamma);
}

template <typename Scalar>
struct AdamState {
    Mat<Scalar> m;
    Mat<Scalar> v;
    long t = 0;
    Scalar beta1 = Scalar(0.9);
    Scalar beta2 = Scalar(0.999);
    Scalar eps = Scalar(1e-8);

    AdamState() = default;
    AdamState(Eigen::Index rows, Eigen::Index cols)
        : m(Mat<Scalar>::Zero(rows, cols)), v(Mat<Scalar>::Zero(rows, cols)) {}
};

enum class Direction { ascend, descend };

/// Bias-corrected Adam step applied in place.
template <typename Scalar>
void adam_update(Mat<Scalar>& params, const Mat<Scalar>& grad, AdamState<Scalar>& state, Scalar lr,
                 Direction direction) {
    if (grad.rows() != params.rows() || grad.cols() != params.cols())
        throw DimensionError("adam_update: gradient shape differs from parameters");
    if (state.m.size() != params.size()) {
        state.m = Mat<Scalar>::Zero(params.rows(), params.cols());
        state.v = Mat<Scalar>::Zero(params.rows(), params.cols());
    }
    ++state.t;
    state.m = state.beta1 * state.m + (Scalar(1) - state.beta1) * grad;
    state.v = state.beta2 * state.v + (Scalar(1) - state.beta2) * grad.cwiseAbs2();
    const Scalar c1 = Scalar(1) - std::pow(state.beta1, Scalar(state.t));
    const Scalar c2 = Scalar(1) - std::pow(state.beta2, Scalar(state.t));
    const Mat<Scalar> delta =
        lr * (state.m / c1).cwiseQuotient(((state.v / c2).cwiseSqrt().array() + state.eps).matrix());
    if (direction == Direction::ascend)
        params += delta;
    else
        params -= delta;
}

struct TrainerConfig {
    long batch_size = 256;
    double lr_actor = 0.003;
    double lr_critic = 0.01;
    double gamma = 0.99;
    long max_iters = 200000;
    double convergence_tol = 1e-6;
    long convergence_window = 100;
    std::uint64_t seed = 0;
    InitialErrorMode init_mode = InitialErrorMode::uniform_box;
    long burn_in = 400;
    // Rate of the moving average that drives the pool (behavior gain).
    double behavior_rate = 1e-3;
    // Trailing fraction of iterations averaged into the reported gain.
    double average_fraction = 0.5;
    // Record every k-th iteration in the history (the last one is always kept).
    long history_stride = 100;
    // Divergence guard: |theta|max > factor * |K_inf|max when a reference is given.
    double divergence_factor = 1e3;
    double divergence_bound = 1e6;  // guard without a reference

    void validate() const {
        if (batch_size <= 0) throw ArgumentError("trainer: batch_size must be positive");
        if (!(lr_actor > 0 && lr_critic > 0)) throw ArgumentError("trainer: learning rates must be positive");
        if (!(gamma >= 0 && gamma < 1)) throw ArgumentError("trainer: gamma must lie in [0, 1)");
        if (max_iters < 0) throw ArgumentError("trainer: max_iters must be >= 0");
        if (!(convergence_tol >= 0)) throw ArgumentError("trainer: convergence_tol must be >= 0");
        if (convergence_window <= 0) throw ArgumentError("trainer: convergence_window must be positive");
        if (burn_in < 0) throw ArgumentError("trainer: burn_in must be >= 0");
        if (!(behavior_rate > 0 && behavior_rate <= 1)) throw ArgumentError("trainer: behavior_rate must lie in (0, 1]");
        if (!(average_fraction > 0 && average_fraction <= 1))
            throw ArgumentError("trainer: average_fraction must lie in (0, 1]");
        if (history_stride <= 0) throw ArgumentError("trainer: history_stride must be positive");
        if (!(divergence_factor > 0 && divergence_bound > 0)) throw ArgumentError("trainer: divergence guard must be positive");
    }
};

template <typename Scalar>
struct TrainingRecord {
    long iter = 0;
    FilterGain<Scalar> theta;  // actor iterate after this iteration
    Mat<Scalar> d;             // theta - reference (empty without a reference)
    Scalar critic_loss = 0;
    Scalar actor_loss = 0;
};

template <typename Scalar>
struct TrainResult {
    FilterGain<Scalar> theta;     // reported gain: average of actor iterates over the trailing window
    FilterGain<Scalar> actor;     // last actor iterate
    FilterGain<Scalar> behavior;  // gain that drove the pool
    CriticWeights<Scalar> critic;
    std::vector<TrainingRecord<Scalar>> history;
    long iterations = 0;
    bool converged = false;
    Scalar critic_min_eigenvalue = 0;
    std::vector<std::string> warnings;
};

template <typename Scalar>
class TrainingDivergence : public DivergenceError {
public:
    TrainingDivergence(const std::string& what, double residual, TrainResult<Scalar> partial)
        : DivergenceError(what, residual), partial_(std::move(partial)) {}
    const TrainResult<Scalar>& partial() const noexcept { return partial_; }

private:
    TrainResult<Scalar> partial_;
};

template <typename Scalar>
TrainResult<Scalar> train(const LinearGaussianModel<Scalar>& model, const TrainerConfig& cfg,
                          const std::optional<FilterGain<Scalar>>& reference = std::nullopt,
                          const InitialErrorSpec& init = {}) {
    model.validate();
    cfg.validate();
    const auto n = model.n();
    const auto r = model.r();
    if (reference && (reference->rows() != n || reference->cols() != r))
        throw DimensionError("train: reference gain must be n x r");

    const Scalar gamma = Scalar(cfg.gamma);
    const Scalar guard = reference && reference->size() && reference->cwiseAbs().maxCoeff() > Scalar(0)
                             ? Scalar(cfg.divergence_factor) * reference->cwiseAbs().maxCoeff()
                             : Scalar(cfg.divergence_bound);

    Rng rng(cfg.seed);
    const NoiseSampler<Scalar> sampler(model);

    TrainResult<Scalar> res;
    res.critic = CriticWeights<Scalar>::Identity(n, n);
    res.actor = FilterGain<Scalar>::Zero(n, r);
    res.behavior = res.actor;
    res.theta = res.actor;

    auto fail = [&](const std::string& why, double residual) -> TrainingDivergence<Scalar> {
        return TrainingDivergence<Scalar>("train: " + why + " at iteration " + std::to_string(res.iterations), residual,
                                          res);
    };

    ErrorPool<Scalar> pool = ErrorPool<Scalar>::seeded(cfg.init_mode, n, cfg.batch_size, rng, init);
    try {
        for (long k = 0; k < cfg.burn_in; ++k) refresh_pool(model, pool, res.behavior, sampler, rng);
    } catch (const DivergenceError& e) {
        throw fail(std::string("burn-in ") + e.what(), e.residual());
    }

    AdamState<Scalar> critic_opt(n, n);
    AdamState<Scalar> actor_opt(n, r);
    const long average_start = cfg.max_iters - static_cast<long>(cfg.average_fraction * double(cfg.max_iters));
    FilterGain<Scalar> average_sum = FilterGain<Scalar>::Zero(n, r);
    long average_count = 0;
    // Averaged gain at the last convergence_window + 1 iterations.
    std::vector<FilterGain<Scalar>> window(static_cast<std::size_t>(cfg.convergence_window + 1));
    bool warned_eig = false;
    res.critic_min_eigenvalue = Scalar(1);

    auto record = [&](long iter, Scalar closs, Scalar aloss) {
        TrainingRecord<Scalar> rec;
        rec.iter = iter;
        rec.theta = res.actor;
        if (reference) rec.d = res.actor - *reference;
        rec.critic_loss = closs;
        rec.actor_loss = aloss;
        res.history.push_back(std::move(rec));
    };

    for (long k = 0; k < cfg.max_iters; ++k) {
        const auto noise = sampler.draw_batch(pool.size(), rng);
        const auto tr = step_batch(model, pool.states(), res.actor, noise);

        // Policy evaluation.
        const auto critic = critic_loss_and_grad(res.critic, pool.states(), tr, gamma);
        adam_update(res.critic, critic.grad, critic_opt, Scalar(cfg.lr_critic), Direction::descend);
        res.critic = symmetrized(res.critic);

        // Policy improvement.
        const auto actor = actor_loss_and_grad(res.critic, tr, gamma);
        adam_update(res.actor, actor.grad, actor_opt, Scalar(cfg.lr_actor), Direction::ascend);
        res.behavior += Scalar(cfg.behavior_rate) * (res.actor - res.behavior);
        res.iterations = k + 1;

        if (!(std::isfinite(double(critic.loss)) && std::isfinite(double(actor.loss)) && res.actor.allFinite() &&
              res.critic.allFinite())) {
            throw fail("non-finite parameters", std::numeric_limits<double>::infinity());
        }
        const Scalar peak = res.actor.size() ? res.actor.cwiseAbs().maxCoeff() : Scalar(0);
        if (peak > guard) throw fail("gain magnitude " + std::to_string(double(peak)) + " exceeds guard", double(peak));

        try {
            pool.assign(tr.predicted - res.behavior * tr.measurement, kPoolDivergenceBound<Scalar>);
        } catch (const DivergenceError& e) {
            throw fail(e.what(), e.residual());
        }

        const bool last = k + 1 == cfg.max_iters;
        if (k % cfg.history_stride == 0 || last) {
            record(k + 1, critic.loss, actor.loss);
            Eigen::SelfAdjointEigenSolver<Mat<Scalar>> es(res.critic, Eigen::EigenvaluesOnly);
            const Scalar lo = es.eigenvalues().minCoeff();
            res.critic_min_eigenvalue = std::min(res.critic_min_eigenvalue, lo);
            if (lo < Scalar(-1e-8) && !warned_eig) {
                warned_eig = true;
                res.warnings.push_back("critic weights lost positive semidefiniteness at iteration " +
                                       std::to_string(k + 1) + " (min eigenvalue " + std::to_string(double(lo)) + ")");
            }
        }

        if (k >= average_start) {
            average_sum += res.actor;
            ++average_count;
            res.theta = average_sum / Scalar(average_count);
            window[static_cast<std::size_t>(average_count % (cfg.convergence_window + 1))] = res.theta;
            if (average_count > cfg.convergence_window) {
                const auto& oldest =
                    window[static_cast<std::size_t>((average_count + 1) % (cfg.convergence_window + 1))];
                if (max_abs_diff(res.theta, oldest) < Scalar(cfg.convergence_tol)) {
                    res.converged = true;
                    if (res.history.empty() || res.history.back().iter != k + 1)
                        record(k + 1, critic.loss, actor.loss);
                    break;
                }
            }
        }
    }
    return res;
}

}  // namespace aof
