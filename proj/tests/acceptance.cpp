// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include "aof/commands.hpp"
#include "oracles.hpp"

#include <unistd.h>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <sstream>

using namespace aof;
namespace fs = std::filesystem;

namespace {

int failures = 0;

void report(bool ok, const std::string& name, const std::string& detail) {
    std::printf("%s  %-28s %s\n", ok ? "PASS" : "FAIL", name.c_str(), detail.c_str());
    std::fflush(stdout);
    if (!ok) ++failures;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

double max_abs(const MatrixXd& m) { return m.cwiseAbs().maxCoeff(); }

fs::path scratch(const std::string& name) {
    const auto p = fs::temp_directory_path() / ("aof_accept_" + name + "_" + std::to_string(::getpid()));
    fs::remove_all(p);
    return p;
}

MatrixXd reference_gain() { return (MatrixXd(2, 2) << -5.31e-4, -2.31e-3, 3.25e-5, 5.07e-2).finished(); }

// Largest |dJ/dg| / curvature over the entries of g, by central differences.
double stationarity(const std::function<double(const MatrixXd&)>& J, const MatrixXd& g, double h = 1e-3) {
    const MatrixXd grad = oracle::fd_gradient(J, g, h);
    double worst = 0;
    for (Eigen::Index i = 0; i < g.rows(); ++i) {
        for (Eigen::Index j = 0; j < g.cols(); ++j) {
            MatrixXd plus = g, minus = g;
            plus(i, j) += h;
            minus(i, j) -= h;
            const double curvature = std::abs(J(plus) - 2 * J(g) + J(minus)) / (h * h);
            worst = std::max(worst, std::abs(grad(i, j)) / curvature);
        }
    }
    return worst;
}

void dare_oracle() {
    RunConfig cfg;
    cfg.output_dir = scratch("solve");
    std::ostringstream sink;
    const auto t0 = std::chrono::steady_clock::now();
    const auto oc = cmd_solve(cfg, sink);
    const double secs = seconds_since(t0);
    fs::remove_all(cfg.output_dir);
    if (oc.exit_code != kExitOk) {
        report(false, "dare-oracle", oc.message);
        return;
    }
    const MatrixXd K = oc.solution.gain;
    const double rel = (K - reference_gain()).cwiseQuotient(reference_gain()).cwiseAbs().maxCoeff();
    const auto model = cfg.model.build();
    const auto seq = kalman_recursion(model, model.process_cov(), 2000);
    const double limit = max_abs(seq.back().gain - K);
    report(rel <= 0.05 && limit < 1e-10 && secs < 1.0, "dare-oracle",
           "max rel err vs reference " + fmt("%.3g", rel) + " (<= 0.05), recursion limit " + fmt("%.2e", limit) +
               " (< 1e-10), " + fmt("%.3f", secs) + " s (< 1)");
}

struct Learned {
    MatrixXd theta;
    MatrixXd reference;
    bool ok = false;
};

Learned learned_gain() {
    RunConfig cfg;
    cfg.output_dir = scratch("train");
    std::ostringstream sink;
    const auto t0 = std::chrono::steady_clock::now();
    const auto oc = cmd_train(cfg, sink);
    const double secs = seconds_since(t0);
    fs::remove_all(cfg.output_dir);
    Learned out;
    if (oc.exit_code != kExitOk) {
        report(false, "learned-gain", oc.message);
        return out;
    }
    const double worst = max_abs(gain_metrics(oc.theta, oc.reference).accuracy_pct);
    report(worst <= 2.0 && secs <= 600 && oc.per_seed.size() >= 3, "learned-gain",
           std::to_string(oc.per_seed.size()) + " seeds, max |E| " + fmt("%.3f", worst) + " % (<= 2), " +
               fmt("%.1f", secs) + " s (<= 600)");
    out.theta = oc.theta;
    out.reference = oc.reference;
    out.ok = true;
    return out;
}

void discount_insensitivity() {
    RunConfig cfg;
    cfg.output_dir = scratch("sweep");
    std::ostringstream sink;
    const auto t0 = std::chrono::steady_clock::now();
    const auto oc = cmd_sweep_gamma(cfg, sink);
    const double secs = seconds_since(t0);
    fs::remove_all(cfg.output_dir);
    if (oc.exit_code != kExitOk) {
        report(false, "discount-insensitivity", oc.message);
        return;
    }
    double worst = 0, lo = 1e300, hi = -1e300, rho = 0;
    const auto model = cfg.model.build();
    for (const auto& row : oc.rows) {
        worst = std::max(worst, max_abs(row.accuracy_pct));
        lo = std::min(lo, row.theta(1, 1));
        hi = std::max(hi, row.theta(1, 1));
        rho = std::max(rho, error_spectral_radius(model, row.theta));
    }

    // Horizon gains computed once stay stationary for the discounted objective at every discount.
    std::mt19937_64 rng(31);
    double flat = 0;
    for (int trial = 0; trial < 8; ++trial) {
        const auto sys = oracle::random_system(rng, 3, 2);
        const MatrixXd P = oracle::random_psd(rng, sys.n());
        const auto gains = finite_horizon_gains(sys, P, 4);
        for (double gamma : cfg.gamma_sweep) {
            for (std::size_t k = 0; k < gains.size(); ++k) {
                const auto J = [&](const MatrixXd& g) {
                    auto seq = gains;
                    seq[k] = g;
                    return oracle::discounted_objective(sys, P, seq, gamma);
                };
                flat = std::max(flat, stationarity(J, gains[k]));
            }
        }
    }
    report(worst <= 2.0 && hi - lo < 1e-3 && rho < 1 && flat < 1e-6, "discount-insensitivity",
           std::to_string(oc.rows.size()) + " discounts, max |E| " + fmt("%.3f", worst) + " % (<= 2), theta22 spread " +
               fmt("%.2e", hi - lo) + " (< 1e-3), horizon-gain stationarity " + fmt("%.1e", flat) +
               " (< 1e-6), " + fmt("%.0f", secs) + " s");
}

void evaluation_parity(const Learned& learned) {
    if (!learned.ok) {
        report(false, "evaluation-parity", "no learned gain");
        return;
    }
    const auto model = build_bicycle_model(VehicleParams{});
    const auto sol = solve_dare(model);
    EvalConfig cfg;
    cfg.n_traj = 1000;
    cfg.t_test = 1000;
    const auto ref = evaluate(model, sol.gain, cfg);
    const auto got = evaluate(model, learned.theta, cfg);
    const double gap = oracle::rel_err(got.loss_full, ref.loss_full);
    const double trace = sol.filtered_cov(model.C).trace();
    const double ss = oracle::rel_err(ref.loss_ss, trace);
    report(gap < 0.01 && ss < 0.05, "evaluation-parity",
           "Loss_full learned " + fmt("%.4e", got.loss_full) + " vs K_inf " + fmt("%.4e", ref.loss_full) + " (gap " +
               fmt("%.3f", 100 * gap) + " % < 1 %), Loss_ss(K_inf) vs trace " + fmt("%.2f", 100 * ss) + " % (< 5 %)");
}

void horizon_equivalence() {
    std::mt19937_64 rng(41);
    const auto t0 = std::chrono::steady_clock::now();
    double worst = 0;
    for (int trial = 0; trial < 20; ++trial) {
        const auto sys = oracle::random_system(rng);
        const MatrixXd P = oracle::random_psd(rng, sys.n());
        const auto gains = finite_horizon_gains(sys, P, 10);
        const MatrixXd pred = sys.A * P * sys.A.transpose() + sys.E * sys.Q * sys.E.transpose();
        const auto rec = kalman_recursion(sys, pred, 10);
        for (std::size_t i = 0; i < gains.size(); ++i) worst = std::max(worst, max_abs(gains[i] - rec[i].gain));
    }
    const double secs = seconds_since(t0);
    report(worst < 1e-8 && secs < 1.0, "horizon-equivalence",
           "20 systems, horizon 10, max diff " + fmt("%.2e", worst) + " (< 1e-8), " + fmt("%.3f", secs) +
               " s (< 1)");
}

void gradient_suites() {
    std::mt19937_64 rng(51);
    double critic = 0, actor = 0;
    for (int trial = 0; trial < 50; ++trial) {
        const auto model = oracle::random_system(rng);
        const auto n = model.n();
        const MatrixXd w = oracle::random_psd(rng, n, 0.1);
        const MatrixXd theta = oracle::random_matrix(rng, n, model.r(), 0.5);
        const int M = std::uniform_int_distribution<int>(1, 32)(rng);
        const MatrixXd states = oracle::random_matrix(rng, n, M);
        Rng nrng(rng());
        const auto noise = NoiseSampler<double>(model).draw_batch(M, nrng);
        const double gamma = std::uniform_real_distribution<double>(0.0, 0.99)(rng);

        const auto tr = step_batch(model, states, theta, noise);
        VectorXd target(M);
        for (int j = 0; j < M; ++j) target(j) = tr.reward(j) - gamma * tr.next.col(j).dot(w * tr.next.col(j));
        const auto frozen = [&](const MatrixXd& wp) {
            double sum = 0;
            for (int j = 0; j < M; ++j) {
                const double v = -states.col(j).dot(wp * states.col(j));
                sum += 0.5 * (target(j) - v) * (target(j) - v);
            }
            return sum / M;
        };
        const auto cg = critic_loss_and_grad(model, w, theta, states, noise, gamma);
        const MatrixXd cfd = oracle::fd_gradient(frozen, w, 1e-6);
        critic = std::max(critic, (cg.grad - cfd).norm() / std::max(cfd.norm(), 1e-12));

        const auto J = [&](const MatrixXd& th) {
            double sum = 0;
            for (int j = 0; j < M; ++j) {
                const VectorXd x = model.A * states.col(j) + model.E * noise.xi.col(j);
                const VectorXd next = x - th * (model.C * x + noise.zeta.col(j));
                sum += -next.squaredNorm() - gamma * next.dot(w * next);
            }
            return sum / M;
        };
        const auto ag = actor_loss_and_grad(model, w, theta, states, noise, gamma);
        const MatrixXd afd = oracle::fd_gradient(J, theta, 1e-6);
        actor = std::max(actor, (ag.grad - afd).norm() / std::max(afd.norm(), 1e-12));
    }
    report(critic < 1e-5 && actor < 1e-5, "gradient-suites",
           "50 instances, critic rel err " + fmt("%.2e", critic) + ", actor rel err " + fmt("%.2e", actor) +
               " (< 1e-5)");
}

void stationarity_property() {
    std::mt19937_64 rng(61);
    double fd = 0;
    for (int trial = 0; trial < 20; ++trial) {
        const auto sys = oracle::random_system(rng);
        const MatrixXd P = oracle::random_psd(rng, sys.n());
        const MatrixXd a = closed_form_one_step_gain(sys, P);
        fd = std::max(fd, stationarity([&](const MatrixXd& g) { return one_step_objective(sys, P, g); }, a));
    }

    // gamma = 0 actor gradient on a batch whose second moment is exactly P0.
    const auto m = oracle::benign_system();
    const MatrixXd P0 = (MatrixXd(2, 2) << 1.0, 0.3, 0.3, 0.5).finished();
    const MatrixXd a = closed_form_one_step_gain(m, P0);
    const MatrixXd w = MatrixXd::Zero(2, 2);
    const long batch = 256;
    const NoiseSampler<double> sampler(m);
    Rng prng(7);
    std::normal_distribution<double> normal;
    MatrixXd raw(2, batch);
    for (long j = 0; j < batch; ++j) raw.col(j) << normal(prng), normal(prng);
    const MatrixXd pool = oracle::moment_matched(raw, P0);
    double at_a = 0, at_zero = 0;
    const int draws = 20;
    for (int d = 0; d < draws; ++d) {
        const auto noise = sampler.draw_batch(batch, prng);
        at_a += actor_loss_and_grad(m, w, a, pool, noise, 0.0).grad.norm() / draws;
        at_zero += actor_loss_and_grad(m, w, MatrixXd(MatrixXd::Zero(2, 2)), pool, noise, 0.0).grad.norm() / draws;
    }
    const double ratio = at_a / at_zero;
    const double bound = 3.0 / std::sqrt(double(batch));
    report(fd < 1e-6 && ratio < bound, "stationarity",
           "one-step gain fd stationarity " + fmt("%.1e", fd) + " (< 1e-6), actor gradient ratio " +
               fmt("%.4f", ratio) + " (< 3/sqrt(256) = " + fmt("%.4f", bound) + ")");
}

void stability(const Learned& learned) {
    if (!learned.ok) {
        report(false, "stability", "no learned gain");
        return;
    }
    const double rho = error_spectral_radius(build_bicycle_model(VehicleParams{}), learned.theta);
    report(rho < 1.0, "stability", "rho[(I - theta C) A] = " + fmt("%.6f", rho) + " (< 1)");
}

}  // namespace

int main() {
    try {
        dare_oracle();
        const auto learned = learned_gain();
        discount_insensitivity();
        evaluation_parity(learned);
        horizon_equivalence();
        gradient_suites();
        stationarity_property();
        stability(learned);
    } catch (const std::exception& e) {
        report(false, "harness", e.what());
    }
    std::printf("%s: %d failed\n", failures ? "FAIL" : "PASS", failures);
    return failures ? 1 : 0;
}
