// aof: steady-state Kalman gain by Riccati iteration and by actor-critic
// policy iteration on the estimation-error MDP.
//
//   aof solve       [--config PATH] [--out DIR]
//   aof train       [--config PATH] [--seed N] [--seeds K] [--gamma G] [--out DIR]
//   aof eval        [--config PATH] [--gain SRC]... [--n-traj N] [--out DIR]
//   aof sweep-gamma [--config PATH] [--gamma G]... [--seeds K] [--out DIR]

#include "aof/commands.hpp"

#include <CLI11.hpp>

#include <iostream>

namespace {

struct Overrides {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<long> seeds;
    std::optional<std::string> out;
    std::vector<double> gamma;
    std::optional<long> n_traj;
    std::optional<long> max_iters;
    std::optional<unsigned> threads;
    std::vector<std::string> gains;
};

void add_common(CLI::App* sub, Overrides& o) {
    sub->add_option("--config", o.config, "JSON run configuration");
    sub->add_option("--out", o.out, "Output directory");
    sub->add_option("--threads", o.threads, "Worker threads (0: all cores)");
}

aof::RunConfig resolve(const Overrides& o, bool sweep) {
    aof::RunConfig cfg = o.config.empty() ? aof::RunConfig{} : aof::load_config(o.config);
    if (o.seed) {
        cfg.trainer.seed = *o.seed;
        cfg.eval.seed = *o.seed;
    }
    if (o.seeds) cfg.seeds = *o.seeds;
    if (o.out) cfg.output_dir = *o.out;
    if (!o.gamma.empty()) {
        if (sweep)
            cfg.gamma_sweep = o.gamma;
        else
            cfg.trainer.gamma = o.gamma.front();
    }
    if (o.n_traj) cfg.eval.n_traj = *o.n_traj;
    if (o.max_iters) cfg.trainer.max_iters = *o.max_iters;
    if (o.threads) cfg.threads = *o.threads;
    cfg.validate();
    return cfg;
}

int finish(int code, const std::string& message) {
    if (code != aof::kExitOk) std::cerr << "error: " << message << '\n';
    return code;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Steady-state optimal filter gains: Riccati oracle and actor-critic policy iteration"};
    app.require_subcommand(1);

    Overrides o;
    auto* solve = app.add_subcommand("solve", "Steady-state Kalman gain from the Riccati fixed point");
    add_common(solve, o);

    auto* train = app.add_subcommand("train", "Learn a constant filter gain by policy iteration");
    add_common(train, o);
    train->add_option("--seed", o.seed, "Base seed");
    train->add_option("--seeds", o.seeds, "Number of independent runs to average");
    train->add_option("--gamma", o.gamma, "Discount factor")->expected(1);
    train->add_option("--max-iters", o.max_iters, "Training iterations per run");

    auto* eval = app.add_subcommand("eval", "Monte Carlo losses of one or more gains");
    add_common(eval, o);
    eval->add_option("--seed", o.seed, "Trajectory seed");
    eval->add_option("--n-traj", o.n_traj, "Number of trajectories");
    eval->add_option("--gain", o.gains, "kinf | zero | NAME=PATH | PATH (repeatable)");

    auto* sweep = app.add_subcommand("sweep-gamma", "Train once per discount factor from a fixed initial error");
    add_common(sweep, o);
    sweep->add_option("--seed", o.seed, "Base seed");
    sweep->add_option("--seeds", o.seeds, "Runs averaged per discount factor");
    sweep->add_option("--gamma", o.gamma, "Discount factors (repeatable)");
    sweep->add_option("--max-iters", o.max_iters, "Training iterations per run");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : aof::kExitConfig;
    }

    try {
        if (solve->parsed()) {
            const auto oc = aof::cmd_solve(resolve(o, false), std::cout);
            return finish(oc.exit_code, oc.message);
        }
        if (train->parsed()) {
            const auto oc = aof::cmd_train(resolve(o, false), std::cout);
            return finish(oc.exit_code, oc.message);
        }
        if (eval->parsed()) {
            const auto oc = aof::cmd_eval(resolve(o, false), o.gains, std::cout);
            return finish(oc.exit_code, oc.message);
        }
        if (sweep->parsed()) {
            const auto oc = aof::cmd_sweep_gamma(resolve(o, true), std::cout);
            return finish(oc.exit_code, oc.message);
        }
    } catch (const aof::ConfigError& e) {
        return finish(aof::kExitConfig, e.what());
    } catch (const aof::DivergenceError& e) {
        return finish(aof::kExitDivergence, e.what());
    }
    return aof::kExitConfig;
}
