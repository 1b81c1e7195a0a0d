#pragma once

#include "aof/adp.hpp"
#include "aof/eval.hpp"
#include "aof/io.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace aof {

struct ModelSource {
    enum class Kind { bicycle, inline_model };
    Kind kind = Kind::bicycle;
    VehicleParams vehicle;
    Discretization discretization = Discretization::zoh;
    std::optional<LinearGaussianModel<double>> model;  // set when kind == inline_model

    LinearGaussianModel<double> build() const;
};

struct RunConfig {
    ModelSource model;
    double dare_tol = 1e-12;
    long dare_max_iter = 100000;
    TrainerConfig trainer;
    EvalConfig eval;
    InitialErrorSpec initial_error;  // shared by train, eval and sweep-gamma
    std::vector<double> gamma_sweep{0.01, 0.25, 0.5, 0.75, 0.99};
    long seeds = 10;       // independent training runs averaged by train / sweep-gamma
    unsigned threads = 0;  // 0: hardware concurrency
    std::filesystem::path output_dir = "out";

    /// Throws ConfigError when a nested invariant is violated.
    void validate() const;
};

io::json config_to_json(const RunConfig& cfg);
/// Missing keys keep their defaults; unknown keys are rejected.
RunConfig config_from_json(const io::json& j);
RunConfig load_config(const std::filesystem::path& path);

}  // namespace aof
