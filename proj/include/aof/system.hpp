#pragma once

// Linear Gaussian time-invariant plants and the 2-DOF bicycle model used for
// sideslip-angle estimation.
//
//   x_{t+1} = A x_t + B u_t + E xi_t,      xi_t   ~ N(0, Q)
//   y_t     = C x_t + D u_t + zeta_t,      zeta_t ~ N(0, R)

#include "aof/types.hpp"

#include <unsupported/Eigen/MatrixFunctions>

#include <numbers>
#include <string>
#include <utility>

namespace aof {

enum class Discretization {
    none,   // model was supplied directly in discrete time
    euler,  // A_d = I + A_c dt, B_d = B_c dt
    zoh,    // A_d = exp(A_c dt), B_d = int_0^dt exp(A_c s) ds B_c
};

inline std::string to_string(Discretization d) {
    switch (d) {
        case Discretization::euler: return "euler";
        case Discretization::zoh: return "zoh";
        case Discretization::none: break;
    }
    return "none";
}

inline Discretization discretization_from_string(const std::string& s) {
    if (s == "euler") return Discretization::euler;
    if (s == "zoh" || s == "exact") return Discretization::zoh;
    if (s == "none") return Discretization::none;
    throw ArgumentError("unknown discretization rule '" + s + "'");
}

template <typename Scalar>
struct LinearGaussianModel {
    Mat<Scalar> A;  // n x n
    Mat<Scalar> B;  // n x m
    Mat<Scalar> C;  // r x n
    Mat<Scalar> D;  // r x m
    Mat<Scalar> E;  // n x p
    Mat<Scalar> Q;  // p x p, covariance of xi
    Mat<Scalar> R;  // r x r, covariance of zeta
    Scalar dt = Scalar(0);
    Discretization rule = Discretization::none;

    Eigen::Index n() const { return A.rows(); }
    Eigen::Index m() const { return B.cols(); }
    Eigen::Index r() const { return C.rows(); }
    Eigen::Index p() const { return E.cols(); }

    /// Process covariance in state coordinates, E Q E^T.
    Mat<Scalar> process_cov() const { return symmetrized(E * Q * E.transpose()); }

    /// Throws DimensionError / ArgumentError when the model is malformed.
    void validate() const;
};

namespace detail {

template <typename Scalar>
Scalar sym_tol(const Mat<Scalar>& m) {
    const Scalar scale = m.size() ? std::max(Scalar(1), m.cwiseAbs().maxCoeff()) : Scalar(1);
    return Scalar(1e-10) * scale;
}

template <typename Scalar>
void require_shape(const Mat<Scalar>& m, Eigen::Index rows, Eigen::Index cols, const char* name) {
    if (m.rows() != rows || m.cols() != cols) {
        throw DimensionError(std::string("model: ") + name + " is " + std::to_string(m.rows()) + "x" +
                             std::to_string(m.cols()) + ", expected " + std::to_string(rows) + "x" +
                             std::to_string(cols));
    }
}

}  // namespace detail

template <typename Scalar>
void LinearGaussianModel<Scalar>::validate() const {
    const auto nn = A.rows();
    if (A.cols() != nn) throw DimensionError("model: A is not square");
    if (nn == 0) throw DimensionError("model: empty state");
    const auto mm = B.cols();
    const auto rr = C.rows();
    const auto pp = E.cols();
    detail::require_shape(B, nn, mm, "B");
    detail::require_shape(C, rr, nn, "C");
    detail::require_shape(D, rr, mm, "D");
    detail::require_shape(E, nn, pp, "E");
    detail::require_shape(Q, pp, pp, "Q");
    detail::require_shape(R, rr, rr, "R");
    if (!(A.allFinite() && B.allFinite() && C.allFinite() && D.allFinite() && E.allFinite() &&
          Q.allFinite() && R.allFinite()))
        throw ArgumentError("model: non-finite matrix entry");

    if (pp > 0) {
        if (max_abs_diff(Q, Q.transpose()) > detail::sym_tol(Q))
            throw ArgumentError("model: Q is not symmetric");
        Eigen::SelfAdjointEigenSolver<Mat<Scalar>> es(symmetrized(Q), Eigen::EigenvaluesOnly);
        if (es.eigenvalues().minCoeff() < -detail::sym_tol(Q))
            throw ArgumentError("model: Q is not positive semidefinite");
    }
    if (rr > 0) {
        if (max_abs_diff(R, R.transpose()) > detail::sym_tol(R))
            throw ArgumentError("model: R is not symmetric");
        Eigen::SelfAdjointEigenSolver<Mat<Scalar>> es(symmetrized(R), Eigen::EigenvaluesOnly);
        if (!(es.eigenvalues().minCoeff() > Scalar(0)))
            throw ArgumentError("model: R is not positive definite");
    }
    if (!(dt >= Scalar(0))) throw ArgumentError("model: negative sample time");
}

template <typename Scalar>
struct DiscreteMatrices {
    Mat<Scalar> A;
    Mat<Scalar> B;
};

namespace detail {

template <typename Scalar>
void check_continuous(const Mat<Scalar>& A_c, const Mat<Scalar>& B_c, Scalar dt) {
    if (A_c.rows() != A_c.cols()) throw DimensionError("discretize: A_c is not square");
    if (B_c.rows() != A_c.rows()) throw DimensionError("discretize: B_c row count differs from A_c");
    if (!(dt > Scalar(0))) throw ArgumentError("discretize: dt must be positive");
}

}  // namespace detail

/// Forward-Euler discretization.
template <typename Scalar>
DiscreteMatrices<Scalar> discretize_euler(const Mat<Scalar>& A_c, const Mat<Scalar>& B_c, Scalar dt) {
    detail::check_continuous(A_c, B_c, dt);
    const auto n = A_c.rows();
    return {Mat<Scalar>::Identity(n, n) + A_c * dt, B_c * dt};
}

/// Zero-order-hold discretization via the exponential of the augmented matrix
/// [[A_c, B_c], [0, 0]] dt.
template <typename Scalar>
DiscreteMatrices<Scalar> discretize_zoh(const Mat<Scalar>& A_c, const Mat<Scalar>& B_c, Scalar dt) {
    detail::check_continuous(A_c, B_c, dt);
    const auto n = A_c.rows();
    const auto m = B_c.cols();
    Mat<Scalar> aug = Mat<Scalar>::Zero(n + m, n + m);
    aug.topLeftCorner(n, n) = A_c * dt;
    aug.topRightCorner(n, m) = B_c * dt;
    Mat<Scalar> ex = aug.exp();
    return {ex.topLeftCorner(n, n), ex.topRightCorner(n, m)};
}

template <typename Scalar>
DiscreteMatrices<Scalar> discretize(const Mat<Scalar>& A_c, const Mat<Scalar>& B_c, Scalar dt,
                                    Discretization rule = Discretization::euler) {
    switch (rule) {
        case Discretization::zoh: return discretize_zoh(A_c, B_c, dt);
        case Discretization::euler: return discretize_euler(A_c, B_c, dt);
        case Discretization::none: break;
    }
    throw ArgumentError("discretize: rule 'none' is not a discretization");
}

/// Moment arm of a lateral force spread uniformly over the wheelbase [-b, a]:
/// (a + b)/2 - b.
inline double equivalent_moment_arm(double a, double b) {
    if (a + b == 0.0) throw ArgumentError("equivalent_moment_arm: zero wheelbase");
    return (a + b) / 2.0 - b;
}

/// Standard deviation of a Gaussian whose +-3 sigma range is the given bound.
inline double sigma_from_bound(double force_bound) {
    if (force_bound < 0.0) throw ArgumentError("sigma_from_bound: negative bound");
    return force_bound / 3.0;
}

struct VehicleParams {
    double m = 1500.0;        // kg
    double v_long = 20.0;     // m/s
    double a = 1.14;          // front axle to c.g., m
    double b = 1.4;           // rear axle to c.g., m
    double C_f = -44000.0 * 2;  // N/rad
    double C_r = -47000.0 * 2;  // N/rad
    double I_zz = 2420.0;     // kg m^2
    // 2.5% cross slope on a 1500 kg car, +-3 sigma.
    double sigma_side_slope = sigma_from_bound(1500.0 * 9.81 * 0.025);
    double sigma_side_wind = sigma_from_bound(300.0);
    double sigma_lat_acc = 0.05886;     // m/s^2
    double sigma_yaw_rate = 0.0005814;  // rad/s
    double l_arm = equivalent_moment_arm(1.14, 1.4);
    double dt = 0.01;

    void validate() const {
        if (!(m > 0 && v_long > 0 && I_zz > 0 && a > 0 && b > 0 && dt > 0))
            throw ArgumentError("vehicle: m, v_long, I_zz, a, b, dt must be positive");
        if (!(sigma_side_slope >= 0 && sigma_side_wind >= 0 && sigma_lat_acc >= 0 && sigma_yaw_rate >= 0))
            throw ArgumentError("vehicle: standard deviations must be non-negative");
    }
};

template <typename Scalar>
struct ContinuousBicycle {
    Mat<Scalar> A, B, C, D;
};

/// Continuous-time 2-DOF bicycle matrices, state [sideslip, yaw rate],
/// input front-wheel angle, output [lateral acceleration, yaw rate].
template <typename Scalar = double>
ContinuousBicycle<Scalar> bicycle_continuous(const VehicleParams& p) {
    p.validate();
    const double mv = p.m * p.v_long;
    const double cross = p.a * p.C_f - p.b * p.C_r;
    ContinuousBicycle<double> c;
    c.A.resize(2, 2);
    c.A << (p.C_f + p.C_r) / mv, cross / (mv * p.v_long) - 1.0,
        cross / p.I_zz, (p.a * p.a * p.C_f + p.b * p.b * p.C_r) / (p.v_long * p.I_zz);
    c.B.resize(2, 1);
    c.B << -p.C_f / mv, -p.a * p.C_f / p.I_zz;
    c.C.resize(2, 2);
    c.C << (p.C_f + p.C_r) / p.m, cross / mv, 0.0, 1.0;
    c.D.resize(2, 1);
    c.D << -p.C_f / p.m, 0.0;
    return {c.A.cast<Scalar>(), c.B.cast<Scalar>(), c.C.cast<Scalar>(), c.D.cast<Scalar>()};
}

/// Discrete bicycle plant with side-slope and side-wind force noise.
/// E is the per-step force-to-state map, so Q is in N^2.
template <typename Scalar = double>
LinearGaussianModel<Scalar> build_bicycle_model(const VehicleParams& p,
                                                Discretization rule = Discretization::zoh) {
    const auto cont = bicycle_continuous<Scalar>(p);
    const auto disc = discretize(cont.A, cont.B, Scalar(p.dt), rule);

    LinearGaussianModel<Scalar> model;
    model.A = disc.A;
    model.B = disc.B;
    model.C = cont.C;
    model.D = cont.D;
    const double mv = p.m * p.v_long;
    Mat<double> E(2, 2);
    E << p.dt / mv, p.dt / mv, 0.0, p.l_arm * p.dt / p.I_zz;
    model.E = E.cast<Scalar>();
    model.Q = Vec<double>(Eigen::Vector2d(p.sigma_side_slope * p.sigma_side_slope,
                                          p.sigma_side_wind * p.sigma_side_wind))
                  .cast<Scalar>()
                  .asDiagonal();
    model.R = Vec<double>(Eigen::Vector2d(p.sigma_lat_acc * p.sigma_lat_acc,
                                          p.sigma_yaw_rate * p.sigma_yaw_rate))
                  .cast<Scalar>()
                  .asDiagonal();
    model.dt = Scalar(p.dt);
    model.rule = rule;
    model.validate();
    return model;
}

inline constexpr double deg_to_rad(double deg) { return deg * std::numbers::pi / 180.0; }

}  // namespace aof
