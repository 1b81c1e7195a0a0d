#pragma once

// Subcommands behind the `aof` executable. Each writes its files into
// cfg.output_dir and reports an exit code: 0 success, 1 numerical
// divergence, 2 configuration error.

#include "aof/config.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace aof {

enum ExitCode : int { kExitOk = 0, kExitDivergence = 1, kExitConfig = 2 };

struct SolveOutcome {
    int exit_code = kExitOk;
    std::string message;
    SteadyStateSolution<double> solution;
};

struct TrainOutcome {
    int exit_code = kExitOk;
    std::string message;
    MatrixXd theta;                 // mean over seeds of each run's reported gain
    std::vector<MatrixXd> per_seed;
    std::vector<TrainingRecord<double>> history;  // mean over seeds
    MatrixXd reference;             // K_inf used for D / accuracy (empty if unavailable)
};

struct EvalOutcome {
    int exit_code = kExitOk;
    std::string message;
    std::vector<io::EvalRow> rows;
};

struct SweepOutcome {
    int exit_code = kExitOk;
    std::string message;
    MatrixXd reference;
    std::vector<io::SweepRow> rows;
};

SolveOutcome cmd_solve(const RunConfig& cfg, std::ostream& out);
TrainOutcome cmd_train(const RunConfig& cfg, std::ostream& out);

/// Gain sources: "kinf" (steady-state Kalman gain), "zero", "NAME=PATH" or
/// "PATH" (a JSON file with a "theta" or "gain" entry).
EvalOutcome cmd_eval(const RunConfig& cfg, const std::vector<std::string>& gains, std::ostream& out);
SweepOutcome cmd_sweep_gamma(const RunConfig& cfg, std::ostream& out);

/// Element-wise mean of equally sampled histories (truncated to the shortest).
std::vector<TrainingRecord<double>> average_histories(const std::vector<std::vector<TrainingRecord<double>>>& runs);

/// Matrix printed with the given number of significant figures.
std::string format_matrix(const MatrixXd& m, int significant = 4);

}  // namespace aof
