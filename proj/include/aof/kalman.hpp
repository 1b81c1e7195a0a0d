#pragma once

// Classical Kalman machinery: filter-form gain, Riccati map, steady-state
// solution by fixed-point iteration, and the closed-form optimal gains of the
// n-step error-minimization problem.

#include "aof/system.hpp"

#include <type_traits>
#include <vector>

namespace aof {

template <typename Scalar>
using FilterGain = Mat<Scalar>;

template <typename Scalar>
struct SteadyStateSolution {
    Mat<Scalar> sigma;       // predicted-error covariance at the fixed point
    FilterGain<Scalar> gain;  // K_inf, filter form
    long iterations = 0;
    Scalar residual = 0;     // last max elementwise change, relative to max|sigma|

    /// Filtered-error covariance (I - K C) sigma.
    Mat<Scalar> filtered_cov(const Mat<Scalar>& C) const {
        const auto n = sigma.rows();
        return symmetrized((Mat<Scalar>::Identity(n, n) - gain * C) * sigma);
    }
};

template <typename Scalar>
struct KalmanStep {
    FilterGain<Scalar> gain;
    Mat<Scalar> predicted;  // Sigma_{t|t-1}
    Mat<Scalar> filtered;   // Sigma_{t|t}
};

/// Throws ArgumentError unless P is symmetric PSD within 1e-10.
template <typename Scalar>
void check_covariance(const Mat<Scalar>& P, Scalar tol = Scalar(1e-10)) {
    if (P.rows() != P.cols()) throw DimensionError("covariance is not square");
    if (P.size() == 0) return;
    if (!P.allFinite()) throw ArgumentError("covariance has non-finite entries");
    if (max_abs_diff(P, P.transpose()) > tol) throw ArgumentError("covariance is not symmetric");
    Eigen::SelfAdjointEigenSolver<Mat<Scalar>> es(symmetrized(P), Eigen::EigenvaluesOnly);
    if (es.eigenvalues().minCoeff() < -tol) throw ArgumentError("covariance is not positive semidefinite");
}

namespace detail {

/// Solves S X = rhs for symmetric S, throwing NumericalError when S is singular.
template <typename Scalar>
Mat<Scalar> solve_symmetric(const Mat<Scalar>& S, const Mat<Scalar>& rhs, const char* what) {
    Eigen::LDLT<Mat<Scalar>> ldlt(symmetrized(S));
    const Scalar rc = ldlt.info() == Eigen::Success ? ldlt.rcond() : Scalar(0);
    if (!(rc > std::numeric_limits<Scalar>::epsilon())) {
        throw NumericalError(std::string(what) + ": singular matrix (rcond " + std::to_string(double(rc)) + ")",
                             double(rc));
    }
    return ldlt.solve(rhs);
}

template <typename Scalar>
void check_square_cov(const LinearGaussianModel<Scalar>& model, const Mat<Scalar>& P, const char* what) {
    if (P.rows() != model.n() || P.cols() != model.n())
        throw DimensionError(std::string(what) + ": covariance shape does not match state dimension");
}

}  // namespace detail

/// K = Sigma C^T (C Sigma C^T + R)^{-1}.
template <typename Scalar>
FilterGain<Scalar> gain_from_predicted_cov(const LinearGaussianModel<Scalar>& model,
                                           const Mat<std::type_identity_t<Scalar>>& sigma_pred) {
    detail::check_square_cov(model, sigma_pred, "gain_from_predicted_cov");
    const Mat<Scalar> innovation = model.C * sigma_pred * model.C.transpose() + model.R;
    const Mat<Scalar> cs = model.C * sigma_pred.transpose();
    return detail::solve_symmetric(innovation, cs, "innovation covariance").transpose();
}

/// One application of the Riccati map
///   Sigma <- A Sigma A^T - A Sigma C^T (C Sigma C^T + R)^{-1} C Sigma A^T + E Q E^T.
template <typename Scalar>
Mat<Scalar> riccati_iterate(const LinearGaussianModel<Scalar>& model,
                            const Mat<std::type_identity_t<Scalar>>& sigma_pred) {
    const FilterGain<Scalar> K = gain_from_predicted_cov(model, sigma_pred);
    const Mat<Scalar> filtered = sigma_pred - K * model.C * sigma_pred;
    return symmetrized(model.A * filtered * model.A.transpose() + model.process_cov());
}

/// Steady-state predicted covariance and gain. Iterates the Riccati map from
/// E Q E^T until the max elementwise change, relative to max|Sigma|, drops
/// below tol.
template <typename Scalar>
SteadyStateSolution<Scalar> solve_dare(const LinearGaussianModel<Scalar>& model, Scalar tol = Scalar(1e-12),
                                       long max_iter = 100000) {
    model.validate();
    if (!(tol > Scalar(0))) throw ArgumentError("solve_dare: tolerance must be positive");
    Mat<Scalar> sigma = model.process_cov();
    Scalar residual = std::numeric_limits<Scalar>::infinity();
    for (long it = 1; it <= max_iter; ++it) {
        Mat<Scalar> next = riccati_iterate(model, sigma);
        if (!next.allFinite()) throw DivergenceError("solve_dare: Riccati iterate became non-finite", double(residual));
        const Scalar scale = next.cwiseAbs().maxCoeff();
        const Scalar change = max_abs_diff(next, sigma);
        residual = scale > Scalar(0) ? change / scale : change;
        sigma = std::move(next);
        if (residual < tol || change == Scalar(0)) {
            SteadyStateSolution<Scalar> sol;
            sol.gain = gain_from_predicted_cov(model, sigma);
            sol.sigma = std::move(sigma);
            sol.iterations = it;
            sol.residual = residual;
            return sol;
        }
    }
    throw DivergenceError("solve_dare: no convergence after " + std::to_string(max_iter) +
                              " iterations (residual " + std::to_string(double(residual)) + ")",
                          double(residual));
}

/// Time-varying Kalman recursion started from the predicted covariance sigma0.
template <typename Scalar>
std::vector<KalmanStep<Scalar>> kalman_recursion(const LinearGaussianModel<Scalar>& model,
                                                 const Mat<std::type_identity_t<Scalar>>& sigma0,
                                                 long steps) {
    if (steps < 1) throw ArgumentError("kalman_recursion: steps must be >= 1");
    detail::check_square_cov(model, sigma0, "kalman_recursion");
    const auto n = model.n();
    const Mat<Scalar> I = Mat<Scalar>::Identity(n, n);
    const Mat<Scalar> W = model.process_cov();

    std::vector<KalmanStep<Scalar>> out;
    out.reserve(static_cast<std::size_t>(steps));
    Mat<Scalar> predicted = symmetrized(sigma0);
    for (long t = 0; t < steps; ++t) {
        KalmanStep<Scalar> s;
        s.gain = gain_from_predicted_cov(model, predicted);
        s.filtered = symmetrized((I - s.gain * model.C) * predicted);
        s.predicted = predicted;
        predicted = symmetrized(model.A * s.filtered * model.A.transpose() + W);
        out.push_back(std::move(s));
    }
    return out;
}

/// Expected one-step reward J1(a) = -tr[(I - aC)(A P0 A^T + EQE^T)(I - aC)^T + a R a^T]
/// for an error with second moment P0.
template <typename Scalar>
Scalar one_step_objective(const LinearGaussianModel<Scalar>& model,
                          const Mat<std::type_identity_t<Scalar>>& P0,
                          const FilterGain<std::type_identity_t<Scalar>>& a) {
    const auto n = model.n();
    const Mat<Scalar> F = Mat<Scalar>::Identity(n, n) - a * model.C;
    const Mat<Scalar> pred = model.A * P0 * model.A.transpose() + model.process_cov();
    return -(F * pred * F.transpose() + a * model.R * a.transpose()).trace();
}

/// Minimizer of the one-step error objective:
///   a* = (C A P0 A^T + C EQE^T)^T (C A P0 A^T C^T + C EQE^T C^T + R)^{-1}.
template <typename Scalar>
FilterGain<Scalar> closed_form_one_step_gain(const LinearGaussianModel<Scalar>& model,
                                             const Mat<std::type_identity_t<Scalar>>& P0) {
    detail::check_square_cov(model, P0, "closed_form_one_step_gain");
    const Mat<Scalar>& A = model.A;
    const Mat<Scalar>& C = model.C;
    const Mat<Scalar> W = model.process_cov();
    const Mat<Scalar> numer = C * A * P0 * A.transpose() + C * W;  // r x n
    const Mat<Scalar> denom = C * A * P0 * A.transpose() * C.transpose() + C * W * C.transpose() + model.R;
    // a* = numer^T denom^{-1}  <=>  denom^T a*^T = numer
    return detail::solve_symmetric<Scalar>(denom.transpose(), numer, "one-step gain denominator").transpose();
}

/// Optimal gains a_0*, ..., a_{n-1}* of the n-step problem, alternating the
/// closed-form gain with the error-covariance propagation
///   P_{i+1} = (I - a_i C)(A P_i A^T + EQE^T)(I - a_i C)^T + a_i R a_i^T.
/// The discount factor does not enter.
template <typename Scalar>
std::vector<FilterGain<Scalar>> finite_horizon_gains(const LinearGaussianModel<Scalar>& model,
                                                     const Mat<std::type_identity_t<Scalar>>& P0,
                                                     long horizon) {
    if (horizon < 1) throw ArgumentError("finite_horizon_gains: horizon must be >= 1");
    detail::check_square_cov(model, P0, "finite_horizon_gains");
    const auto n = model.n();
    const Mat<Scalar> I = Mat<Scalar>::Identity(n, n);
    const Mat<Scalar> W = model.process_cov();

    std::vector<FilterGain<Scalar>> gains;
    gains.reserve(static_cast<std::size_t>(horizon));
    Mat<Scalar> P = P0;
    for (long i = 0; i < horizon; ++i) {
        FilterGain<Scalar> a = closed_form_one_step_gain(model, P);
        const Mat<Scalar> F = I - a * model.C;
        P = symmetrized(F * (model.A * P * model.A.transpose() + W) * F.transpose() + a * model.R * a.transpose());
        gains.push_back(std::move(a));
    }
    return gains;
}

/// Spectral radius of the error dynamics (I - L C) A under a constant gain.
template <typename Scalar>
Scalar error_spectral_radius(const LinearGaussianModel<Scalar>& model,
                             const FilterGain<std::type_identity_t<Scalar>>& L) {
    const auto n = model.n();
    return spectral_radius(((Mat<Scalar>::Identity(n, n) - L * model.C) * model.A).eval());
}

}  // namespace aof
