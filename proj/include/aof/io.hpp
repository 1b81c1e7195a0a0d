#pragma once

// JSON and CSV surfaces: model documents, steady-state solutions, gains,
// training histories, evaluation summaries and log-MSE curves.

#include "aof/adp.hpp"
#include "aof/eval.hpp"

#include <json.hpp>

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace aof::io {

using json = nlohmann::json;

json matrix_to_json(const MatrixXd& m);
/// Row-major nested array -> matrix. A scalar is read as 1x1, a flat array as one row.
MatrixXd matrix_from_json(const json& j, const std::string& what = "matrix");

json model_to_json(const LinearGaussianModel<double>& model);
LinearGaussianModel<double> model_from_json(const json& j);

json dare_to_json(const SteadyStateSolution<double>& sol);

/// Reads a gain from {"gain": ...}, {"theta": ...} or a bare nested array.
MatrixXd gain_from_json(const json& j);

json read_json_file(const std::filesystem::path& path);
void write_json_file(const std::filesystem::path& path, const json& j);

/// Header: iter, theta11.., d11.., critic_loss, actor_loss (row-major element order).
void write_history_csv(std::ostream& os, const std::vector<TrainingRecord<double>>& history);

struct EvalRow {
    std::string name;
    EvalReport report;
    bool diverged = false;
};

void write_eval_csv(std::ostream& os, const std::vector<EvalRow>& rows);
void write_logmse_csv(std::ostream& os, const std::vector<double>& curve);

struct SweepRow {
    double gamma = 0;
    MatrixXd theta;
    MatrixXd accuracy_pct;
    bool diverged = false;
};

void write_sweep_csv(std::ostream& os, const std::vector<SweepRow>& rows);

/// Shortest round-trippable decimal text for a double ('.' separator).
std::string format_number(double v);

}  // namespace aof::io
