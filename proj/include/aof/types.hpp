#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace aof {

template <typename Scalar>
using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

template <typename Scalar>
using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using MatrixXd = Mat<double>;
using VectorXd = Vec<double>;

/// Shapes of operands do not agree.
class DimensionError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A precondition on argument values is violated (negative bound, bad range, ...).
class ArgumentError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A matrix that must be inverted is singular to working precision.
class NumericalError : public std::runtime_error {
public:
    NumericalError(const std::string& what, double condition)
        : std::runtime_error(what), condition_(condition) {}

    /// Reciprocal-condition estimate of the offending matrix (0 when exactly singular).
    double condition() const noexcept { return condition_; }

private:
    double condition_;
};

/// An iteration failed to settle or blew up.
class DivergenceError : public std::runtime_error {
public:
    DivergenceError(const std::string& what, double residual)
        : std::runtime_error(what), residual_(residual) {}

    double residual() const noexcept { return residual_; }

private:
    double residual_;
};

/// Configuration documents that cannot be parsed or validated.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

template <typename Derived>
bool all_finite(const Eigen::MatrixBase<Derived>& m) {
    return m.allFinite();
}

template <typename Derived>
Mat<typename Derived::Scalar> symmetrized(const Eigen::MatrixBase<Derived>& m) {
    return (m + m.transpose()) / typename Derived::Scalar(2);
}

/// Largest absolute eigenvalue of a square matrix.
template <typename Derived>
typename Derived::Scalar spectral_radius(const Eigen::MatrixBase<Derived>& m) {
    using Scalar = typename Derived::Scalar;
    if (m.rows() != m.cols()) throw DimensionError("spectral_radius: matrix is not square");
    if (m.size() == 0) return Scalar(0);
    Eigen::EigenSolver<Mat<Scalar>> es(m.eval(), false);
    return es.eigenvalues().cwiseAbs().maxCoeff();
}

/// Max elementwise absolute difference.
template <typename A, typename B>
typename A::Scalar max_abs_diff(const Eigen::MatrixBase<A>& a, const Eigen::MatrixBase<B>& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols())
        throw DimensionError("max_abs_diff: shape mismatch");
    if (a.size() == 0) return typename A::Scalar(0);
    return (a - b).cwiseAbs().maxCoeff();
}

/// Symmetric square root of a PSD matrix (negative eigenvalues from rounding clipped to 0).
template <typename Derived>
Mat<typename Derived::Scalar> psd_sqrt(const Eigen::MatrixBase<Derived>& m) {
    using Scalar = typename Derived::Scalar;
    Eigen::SelfAdjointEigenSolver<Mat<Scalar>> es(symmetrized(m));
    Vec<Scalar> d = es.eigenvalues().cwiseMax(Scalar(0)).cwiseSqrt();
    return es.eigenvectors() * d.asDiagonal() * es.eigenvectors().transpose();
}

}  // namespace aof
