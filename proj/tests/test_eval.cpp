#include "aof/eval.hpp"
#include "oracles.hpp"

#include <doctest.h>

using namespace aof;

namespace {

const LinearGaussianModel<double>& bicycle() {
    static const auto m = build_bicycle_model(VehicleParams{});
    return m;
}

LinearGaussianModel<double> quiet_bicycle() {
    auto m = bicycle();
    m.Q.setZero();
    m.R = 1e-300 * MatrixXd::Identity(2, 2);
    return m;
}

// log tr E[e_t e_t^T] for t = 1..T by covariance propagation from the uniform box.
std::vector<double> log_mse_oracle(const LinearGaussianModel<double>& m, const MatrixXd& L, long T) {
    const double w1 = deg_to_rad(5.0), w2 = deg_to_rad(10.0);
    MatrixXd P = MatrixXd::Zero(2, 2);
    P(0, 0) = w1 * w1 / 3.0;
    P(1, 1) = w2 * w2 / 3.0;
    const MatrixXd F = MatrixXd::Identity(2, 2) - L * m.C;
    const MatrixXd W = m.E * m.Q * m.E.transpose();
    std::vector<double> out;
    for (long t = 0; t < T; ++t) {
        P = F * (m.A * P * m.A.transpose() + W) * F.transpose() + L * m.R * L.transpose();
        out.push_back(std::log(P.trace()));
    }
    return out;
}

}  // namespace

TEST_CASE("control signal") {
    CHECK(control_signal(0.0) == 0.0);
    const double bound = 3 * 7 * std::numbers::pi / 1800;
    CHECK(bound == doctest::Approx(0.03665).epsilon(1e-3));
    for (int t = 0; t <= 20000; ++t) CHECK(std::abs(control_signal(t)) <= bound);
    const double pi = std::numbers::pi;
    const double t = 3 * pi * pi;
    const double rest = 7 * pi / 1800 * (std::sin(0.3 * pi) + std::sin(0.15 * pi));
    CHECK(control_signal(t) == doctest::Approx(rest).epsilon(1e-12));
}

TEST_CASE("loss arithmetic") {
    SUBCASE("constant") {
        const MatrixXd sq = MatrixXd::Constant(3, 10, 2.5);
        const auto rep = losses(sq, 4);
        CHECK(rep.loss_tran == doctest::Approx(2.5));
        CHECK(rep.loss_ss == doctest::Approx(2.5));
        CHECK(rep.loss_full == doctest::Approx(2.5));
        for (double v : rep.logmse_curve) CHECK(v == doctest::Approx(std::log(2.5)));
    }
    SUBCASE("by hand") {
        const MatrixXd sq = (MatrixXd(1, 4) << 1, 3, 5, 7).finished();
        const auto rep = losses(sq, 2);
        CHECK(rep.loss_tran == 2.0);
        CHECK(rep.loss_ss == 6.0);
        CHECK(rep.loss_full == 4.0);
    }
    SUBCASE("weighted identity") {
        std::mt19937_64 rng(8);
        for (int trial = 0; trial < 50; ++trial) {
            const MatrixXd sq = oracle::random_matrix(rng, 1 + trial % 7, 20 + trial).cwiseAbs2();
            const long T = sq.cols();
            const long tc = 1 + trial % (T - 1);
            const auto rep = losses(sq, tc);
            const double lhs = tc * rep.loss_tran + (T - tc) * rep.loss_ss;
            CHECK(lhs == doctest::Approx(T * rep.loss_full).epsilon(1e-12));
        }
    }
    SUBCASE("range") {
        const MatrixXd sq = MatrixXd::Ones(2, 5);
        CHECK_THROWS_AS(losses(sq, 0), ArgumentError);
        CHECK_THROWS_AS(losses(sq, 5), ArgumentError);
        CHECK_THROWS_AS(losses(MatrixXd(0, 5), 2), ArgumentError);
    }
}

TEST_CASE("noiseless trajectory under the steady gain from zero error") {
    const auto m = quiet_bicycle();
    const MatrixXd K = solve_dare(bicycle()).gain;
    EvalConfig cfg;
    InitialErrorSpec none;
    none.half_width_1 = none.half_width_2 = 0.0;
    for (std::uint64_t i = 0; i < 5; ++i) {
        const auto se = run_trajectory(m, K, cfg, i, none);
        REQUIRE(se.size() == 1000);
        // Only round-off from the shared input term remains.
        for (double v : se) CHECK(v < 1e-30);
    }
}

TEST_CASE("noiseless open-loop error follows the plant") {
    const auto m = quiet_bicycle();
    const MatrixXd zero = MatrixXd::Zero(2, 2);
    EvalConfig cfg;
    cfg.init_mode = InitialErrorMode::fixed;
    cfg.t_test = 300;
    cfg.t_critical = 100;
    const auto se = run_trajectory(m, zero, cfg, 0);
    VectorXd e = (VectorXd(2) << std::numbers::pi / 36, std::numbers::pi / 18).finished();
    for (long t = 0; t < cfg.t_test; ++t) {
        e = m.A * e;
        CHECK(se[static_cast<std::size_t>(t)] == doctest::Approx(e.squaredNorm()).epsilon(1e-12));
    }
}

TEST_CASE("steady squared error matches the filtered covariance") {
    const auto sol = solve_dare(bicycle());
    const double trace = sol.filtered_cov(bicycle().C).trace();
    EvalConfig cfg;
    cfg.n_traj = 1000;
    const auto rep = evaluate(bicycle(), sol.gain, cfg);
    CHECK(oracle::rel_err(rep.loss_ss, trace) < 0.05);
    CHECK(rep.loss_tran > rep.loss_ss);
    CHECK(rep.logmse_curve.size() == 1000);
}

TEST_CASE("evaluation is reproducible") {
    const MatrixXd K = solve_dare(bicycle()).gain;
    EvalConfig cfg;
    cfg.n_traj = 200;
    cfg.t_test = 400;
    const auto a = run_trajectory(bicycle(), K, cfg, 17);
    const auto b = run_trajectory(bicycle(), K, cfg, 17);
    CHECK(a == b);
    const auto c = run_trajectory(bicycle(), K, cfg, 18);
    CHECK(a != c);

    cfg.threads = 1;
    const auto one = evaluate(bicycle(), K, cfg);
    cfg.threads = 4;
    const auto four = evaluate(bicycle(), K, cfg);
    CHECK(one.loss_tran == four.loss_tran);
    CHECK(one.loss_ss == four.loss_ss);
    CHECK(one.loss_full == four.loss_full);
    CHECK(one.logmse_curve == four.logmse_curve);

    // Evaluated by hand from per-trajectory sequences.
    MatrixXd sq(cfg.n_traj, cfg.t_test);
    for (long i = 0; i < cfg.n_traj; ++i) {
        const auto se = run_trajectory(bicycle(), K, cfg, static_cast<std::uint64_t>(i));
        for (long t = 0; t < cfg.t_test; ++t) sq(i, t) = se[static_cast<std::size_t>(t)];
    }
    const auto ref = losses(sq, cfg.t_critical);
    CHECK(one.loss_full == doctest::Approx(ref.loss_full).epsilon(1e-12));
    CHECK(one.loss_ss == doctest::Approx(ref.loss_ss).epsilon(1e-12));
    CHECK(one.logmse_curve.back() == doctest::Approx(ref.logmse_curve.back()).epsilon(1e-12));
}

TEST_CASE("paired seeds give a paired comparison") {
    const MatrixXd K = solve_dare(bicycle()).gain;
    EvalConfig cfg;
    cfg.n_traj = 100;
    const auto a = evaluate(bicycle(), K, cfg);
    const auto b = evaluate(bicycle(), K, cfg);
    CHECK(a.loss_full == b.loss_full);
    // A perturbed gain sees the same noise, so the sign of the gap is reliable.
    const auto worse = evaluate(bicycle(), MatrixXd(1.5 * K), cfg);
    CHECK(worse.loss_ss > a.loss_ss);
}

TEST_CASE("unstable gain is reported") {
    MatrixXd gain = MatrixXd::Zero(2, 2);
    gain(1, 1) = 30.0;
    EvalConfig cfg;
    cfg.n_traj = 2;
    CHECK_THROWS_AS(evaluate(bicycle(), gain, cfg), DivergenceError);
}

TEST_CASE("critical time detection") {
    SUBCASE("flat") { CHECK(detect_critical_time(std::vector<double>(200, -3.0)) == 50); }
    SUBCASE("steep ramp never settles") {
        std::vector<double> ramp;
        for (int t = 0; t < 1000; ++t) ramp.push_back(-0.1 * t);
        CHECK(detect_critical_time(ramp) == 195);
        CHECK(detect_critical_time(ramp, {50, 1e-4, 321}) == 321);
    }
    SUBCASE("knee") {
        std::vector<double> knee;
        for (int t = 0; t < 1000; ++t) knee.push_back(t < 300 ? -0.05 * t : -15.0);
        const long t = detect_critical_time(knee);
        CHECK(t > 300);
        CHECK(t <= 350);
    }
    SUBCASE("steady-gain curve agrees with covariance propagation") {
        const auto sol = solve_dare(bicycle());
        const auto exact = log_mse_oracle(bicycle(), sol.gain, 1000);
        const long t_exact = detect_critical_time(exact);
        EvalConfig cfg;
        cfg.n_traj = 1000;
        const long t_mc = detect_critical_time(evaluate(bicycle(), sol.gain, cfg).logmse_curve);
        MESSAGE("critical time: covariance curve " << t_exact << ", Monte Carlo " << t_mc);
        CHECK(t_exact > 50);
        CHECK(t_exact < 250);
        CHECK(std::abs(t_mc - t_exact) <= 20);
    }
}

TEST_CASE("gain metrics") {
    MatrixXd K(2, 2);
    K << -5.31e-4, -2.31e-3, 3.25e-5, 5.07e-2;
    const auto same = gain_metrics(K, K);
    CHECK(same.difference.cwiseAbs().maxCoeff() == 0.0);
    CHECK(same.accuracy_pct.cwiseAbs().maxCoeff() == 0.0);

    MatrixXd D(2, 2);
    D << -2.5e-7, 1.54e-4, 1.32e-7, 4.66e-4;
    const auto g = gain_metrics(MatrixXd(K + D), K);
    CHECK(max_abs_diff(g.difference, D) < 1e-15);
    MatrixXd table(2, 2);
    table << -5e-4, 0.303, 3e-4, 0.917;
    // Reference entries are rounded to one or three significant figures.
    CHECK(g.accuracy_pct(0, 0) == doctest::Approx(table(0, 0)).epsilon(0.1));
    CHECK(g.accuracy_pct(0, 1) == doctest::Approx(table(0, 1)).epsilon(0.01));
    CHECK(g.accuracy_pct(1, 0) == doctest::Approx(table(1, 0)).epsilon(0.15));
    CHECK(g.accuracy_pct(1, 1) == doctest::Approx(table(1, 1)).epsilon(0.01));

    CHECK_THROWS_AS(gain_metrics(K, MatrixXd(MatrixXd::Zero(2, 2))), ArgumentError);
    CHECK_THROWS_AS(gain_metrics(K, MatrixXd(MatrixXd::Zero(2, 1))), DimensionError);
}

TEST_CASE("evaluation config checks") {
    EvalConfig cfg;
    CHECK_NOTHROW(cfg.validate());
    cfg.t_critical = 1000;
    CHECK_THROWS_AS(cfg.validate(), ArgumentError);
    cfg = {};
    cfg.n_traj = 0;
    CHECK_THROWS_AS(cfg.validate(), ArgumentError);
}
