#pragma once

// Estimation-error dynamics viewed as a Markov decision process: the state is
// the error e = x - x_hat, the action is the filter gain, the reward is -|e'|^2.

#include "aof/kalman.hpp"

#include <numbers>
#include <ostream>
#include <random>

namespace aof {

using Rng = std::mt19937_64;

template <typename Scalar>
using ErrorState = Vec<Scalar>;

template <typename Scalar>
ErrorState<Scalar> make_error_state(Vec<Scalar> e) {
    if (!e.allFinite()) throw ArgumentError("error state has non-finite entries");
    return e;
}

template <typename Scalar>
struct NoiseDraw {
    Vec<Scalar> xi;    // p, process noise in force units
    Vec<Scalar> zeta;  // r, measurement noise
};

/// Column j of xi / zeta is the draw for pool member j.
template <typename Scalar>
struct NoiseBatch {
    Mat<Scalar> xi;    // p x M
    Mat<Scalar> zeta;  // r x M

    Eigen::Index size() const { return xi.cols(); }
    NoiseDraw<Scalar> draw(Eigen::Index j) const { return {xi.col(j), zeta.col(j)}; }
};

/// Zero-mean Gaussian draws with covariances Q and R.
template <typename Scalar>
class NoiseSampler {
public:
    explicit NoiseSampler(const LinearGaussianModel<Scalar>& model)
        : q_root_(psd_sqrt(model.Q)), r_root_(psd_sqrt(model.R)) {}

    NoiseBatch<Scalar> draw_batch(Eigen::Index count, Rng& rng) const {
        return {q_root_ * standard(q_root_.rows(), count, rng), r_root_ * standard(r_root_.rows(), count, rng)};
    }

    NoiseDraw<Scalar> draw(Rng& rng) const {
        auto b = draw_batch(1, rng);
        return {b.xi.col(0), b.zeta.col(0)};
    }

private:
    static Mat<Scalar> standard(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
        std::normal_distribution<Scalar> normal(Scalar(0), Scalar(1));
        Mat<Scalar> z(rows, cols);
        // Column-major fill keeps draw order stable per pool member.
        for (Eigen::Index j = 0; j < cols; ++j)
            for (Eigen::Index i = 0; i < rows; ++i) z(i, j) = normal(rng);
        return z;
    }

    Mat<Scalar> q_root_;
    Mat<Scalar> r_root_;
};

template <typename Scalar>
struct Transition {
    ErrorState<Scalar> next;
    Scalar reward;
};

namespace detail {

template <typename Scalar>
void check_step_shapes(const LinearGaussianModel<Scalar>& model, Eigen::Index states, const FilterGain<Scalar>& a,
                       Eigen::Index xi_rows, Eigen::Index zeta_rows) {
    if (states != model.n()) throw DimensionError("step: error state dimension differs from model");
    if (a.rows() != model.n() || a.cols() != model.r()) throw DimensionError("step: gain must be n x r");
    if (xi_rows != model.p()) throw DimensionError("step: process noise dimension differs from E columns");
    if (zeta_rows != model.r()) throw DimensionError("step: measurement noise dimension differs from R");
}

}  // namespace detail

/// next = (I - aC)(A s + E xi) - a zeta, reward = -next^T next.
template <typename Scalar>
Transition<Scalar> step(const LinearGaussianModel<Scalar>& model, const ErrorState<Scalar>& s,
                        const FilterGain<Scalar>& a, const NoiseDraw<Scalar>& noise) {
    detail::check_step_shapes(model, s.size(), a, noise.xi.size(), noise.zeta.size());
    const Vec<Scalar> x = model.A * s + model.E * noise.xi;
    Vec<Scalar> next = x - a * (model.C * x + noise.zeta);
    const Scalar reward = -next.squaredNorm();
    return {std::move(next), reward};
}

/// Batched transition. States are columns.
template <typename Scalar>
struct BatchTransition {
    Mat<Scalar> predicted;    // A s + E xi
    Mat<Scalar> measurement;  // C (A s + E xi) + zeta, the innovation seen by the gain
    Mat<Scalar> next;         // predicted - a * measurement
    Vec<Scalar> reward;       // -|next|^2 per column
};

template <typename Scalar>
BatchTransition<Scalar> step_batch(const LinearGaussianModel<Scalar>& model, const Mat<Scalar>& states,
                                   const FilterGain<Scalar>& a, const NoiseBatch<Scalar>& noise) {
    detail::check_step_shapes(model, states.rows(), a, noise.xi.rows(), noise.zeta.rows());
    if (noise.size() != states.cols() || noise.zeta.cols() != states.cols())
        throw DimensionError("step_batch: one noise draw per state required");
    BatchTransition<Scalar> t;
    t.predicted = model.A * states + model.E * noise.xi;
    t.measurement = model.C * t.predicted + noise.zeta;
    t.next = t.predicted - a * t.measurement;
    t.reward = -t.next.colwise().squaredNorm().transpose();
    return t;
}

enum class InitialErrorMode { uniform_box, fixed };

/// Initial estimation-error law for the two-state vehicle problem.
struct InitialErrorSpec {
    // Half widths of the uniform box: 5 deg sideslip, 10 deg/s yaw rate.
    double half_width_1 = 5.0 * std::numbers::pi / 180.0;
    double half_width_2 = 10.0 * std::numbers::pi / 180.0;
    // Fixed initial error [pi/36, pi/18].
    double fixed_1 = std::numbers::pi / 36.0;
    double fixed_2 = std::numbers::pi / 18.0;
};

template <typename Scalar>
ErrorState<Scalar> sample_initial_error(InitialErrorMode mode, Eigen::Index n, Rng& rng,
                                        const InitialErrorSpec& spec = {}) {
    if (n != 2) throw DimensionError("sample_initial_error: the vehicle error law is two-dimensional");
    ErrorState<Scalar> e(2);
    if (mode == InitialErrorMode::fixed) {
        e << Scalar(spec.fixed_1), Scalar(spec.fixed_2);
        return e;
    }
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    const double first = u(rng);
    const double second = u(rng);
    e << Scalar(spec.half_width_1 * first), Scalar(spec.half_width_2 * second);
    return e;
}

/// Persistent batch of error states (columns), evolved under a filter gain.
template <typename Scalar>
class ErrorPool {
public:
    ErrorPool() = default;
    explicit ErrorPool(Mat<Scalar> states) : states_(std::move(states)) {
        if (states_.cols() == 0) throw ArgumentError("ErrorPool: pool must be non-empty");
        if (!states_.allFinite()) throw ArgumentError("ErrorPool: non-finite state");
    }

    static ErrorPool seeded(InitialErrorMode mode, Eigen::Index n, Eigen::Index size, Rng& rng,
                            const InitialErrorSpec& spec = {}) {
        if (size <= 0) throw ArgumentError("ErrorPool: pool must be non-empty");
        Mat<Scalar> s(n, size);
        for (Eigen::Index j = 0; j < size; ++j) s.col(j) = sample_initial_error<Scalar>(mode, n, rng, spec);
        return ErrorPool(std::move(s));
    }

    const Mat<Scalar>& states() const { return states_; }
    Eigen::Index size() const { return states_.cols(); }
    Eigen::Index dim() const { return states_.rows(); }

    /// E[s s^T] over the pool.
    Mat<Scalar> second_moment() const { return states_ * states_.transpose() / Scalar(size()); }

    /// Replaces the states, rejecting non-finite or runaway values.
    void assign(Mat<Scalar> next, Scalar bound) {
        if (next.cols() != states_.cols() || next.rows() != states_.rows())
            throw DimensionError("ErrorPool: shape change");
        const Scalar peak = next.allFinite() ? next.cwiseAbs().maxCoeff() : std::numeric_limits<Scalar>::infinity();
        if (!(peak <= bound))
            throw DivergenceError("error pool diverged (max |e| = " + std::to_string(double(peak)) + ")", double(peak));
        states_ = std::move(next);
    }

    void write_csv(std::ostream& os) const {
        os.precision(17);
        for (Eigen::Index i = 0; i < dim(); ++i) os << (i ? "," : "") << "e" << (i + 1);
        os << '\n';
        for (Eigen::Index j = 0; j < size(); ++j) {
            for (Eigen::Index i = 0; i < dim(); ++i) os << (i ? "," : "") << double(states_(i, j));
            os << '\n';
        }
    }

private:
    Mat<Scalar> states_;
};

/// Default runaway bound for pool states.
template <typename Scalar>
inline constexpr Scalar kPoolDivergenceBound = Scalar(1e12);

/// Advances every pool member one step under gain a with fresh independent noise.
template <typename Scalar>
void refresh_pool(const LinearGaussianModel<Scalar>& model, ErrorPool<Scalar>& pool, const FilterGain<Scalar>& a,
                  const NoiseSampler<Scalar>& sampler, Rng& rng, Scalar bound = kPoolDivergenceBound<Scalar>) {
    const auto noise = sampler.draw_batch(pool.size(), rng);
    pool.assign(step_batch(model, pool.states(), a, noise).next, bound);
}

}  // namespace aof
