#include "aof/commands.hpp"

#include <cstdio>
#include <fstream>
#include <ostream>
#include <sstream>

namespace aof {

namespace fs = std::filesystem;
using io::json;

std::string format_matrix(const MatrixXd& m, int significant) {
    std::ostringstream os;
    os << '[';
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        os << (i ? ", [" : "[");
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            char buf[32];
            std::snprintf(buf, sizeof buf, "%.*g", significant, m(i, j));
            os << (j ? ", " : "") << buf;
        }
        os << ']';
    }
    os << ']';
    return os.str();
}

std::vector<TrainingRecord<double>> average_histories(const std::vector<std::vector<TrainingRecord<double>>>& runs) {
    std::vector<TrainingRecord<double>> out;
    if (runs.empty()) return out;
    std::size_t len = runs.front().size();
    for (const auto& r : runs) len = std::min(len, r.size());
    out.reserve(len);
    const double k = double(runs.size());
    for (std::size_t i = 0; i < len; ++i) {
        TrainingRecord<double> rec = runs.front()[i];
        for (std::size_t s = 1; s < runs.size(); ++s) {
            const auto& o = runs[s][i];
            rec.theta += o.theta;
            if (rec.d.size() && o.d.size()) rec.d += o.d;
            rec.critic_loss += o.critic_loss;
            rec.actor_loss += o.actor_loss;
        }
        rec.theta /= k;
        if (rec.d.size()) rec.d /= k;
        rec.critic_loss /= k;
        rec.actor_loss /= k;
        out.push_back(std::move(rec));
    }
    return out;
}

namespace {

void ensure_dir(const fs::path& p) {
    std::error_code ec;
    fs::create_directories(p, ec);
    if (ec) throw ConfigError("cannot create output directory " + p.string() + ": " + ec.message());
}

std::ofstream open_out(const fs::path& p) {
    std::ofstream os(p);
    if (!os) throw ConfigError("cannot write " + p.string());
    os.imbue(std::locale::classic());
    return os;
}

unsigned thread_count(const RunConfig& cfg) { return cfg.threads ? cfg.threads : default_threads(); }

std::optional<MatrixXd> try_reference(const LinearGaussianModel<double>& model, const RunConfig& cfg) {
    try {
        return solve_dare(model, cfg.dare_tol, cfg.dare_max_iter).gain;
    } catch (const std::runtime_error&) {
        return std::nullopt;
    }
}

struct RunSlot {
    std::optional<TrainResult<double>> result;
    std::optional<TrainResult<double>> partial;
    std::string error;
};

// Trains each config independently; results land in slot order.
std::vector<RunSlot> run_many(const LinearGaussianModel<double>& model, const std::vector<TrainerConfig>& configs,
                              const std::optional<MatrixXd>& reference, const InitialErrorSpec& init,
                              unsigned threads) {
    std::vector<RunSlot> slots(configs.size());
    parallel_for(configs.size(), threads, [&](std::size_t i) {
        try {
            slots[i].result = train(model, configs[i], reference, init);
        } catch (const TrainingDivergence<double>& e) {
            slots[i].partial = e.partial();
            slots[i].error = e.what();
        }
    });
    return slots;
}

MatrixXd mean_of(const std::vector<MatrixXd>& ms) {
    MatrixXd sum = MatrixXd::Zero(ms.front().rows(), ms.front().cols());
    for (const auto& m : ms) sum += m;
    return sum / double(ms.size());
}

}  // namespace

SolveOutcome cmd_solve(const RunConfig& cfg, std::ostream& out) {
    SolveOutcome oc;
    try {
        const auto model = cfg.model.build();
        ensure_dir(cfg.output_dir);
        oc.solution = solve_dare(model, cfg.dare_tol, cfg.dare_max_iter);
        io::write_json_file(cfg.output_dir / "dare.json", io::dare_to_json(oc.solution));
        out << "K_inf = " << format_matrix(oc.solution.gain, 4) << '\n'
            << "iterations = " << oc.solution.iterations << ", residual = " << oc.solution.residual << '\n';
    } catch (const DivergenceError& e) {
        oc.exit_code = kExitDivergence;
        oc.message = e.what();
    } catch (const NumericalError& e) {
        oc.exit_code = kExitDivergence;
        oc.message = e.what();
    } catch (const ConfigError& e) {
        oc.exit_code = kExitConfig;
        oc.message = e.what();
    } catch (const std::invalid_argument& e) {
        oc.exit_code = kExitConfig;
        oc.message = e.what();
    }
    return oc;
}

TrainOutcome cmd_train(const RunConfig& cfg, std::ostream& out) {
    TrainOutcome oc;
    try {
        const auto model = cfg.model.build();
        ensure_dir(cfg.output_dir);
        const auto reference = try_reference(model, cfg);
        if (reference) oc.reference = *reference;

        std::vector<TrainerConfig> configs;
        for (long s = 0; s < cfg.seeds; ++s) {
            TrainerConfig t = cfg.trainer;
            t.seed = cfg.trainer.seed + static_cast<std::uint64_t>(s);
            configs.push_back(t);
        }
        const auto slots = run_many(model, configs, reference, cfg.initial_error, thread_count(cfg));

        std::vector<std::vector<TrainingRecord<double>>> histories;
        std::vector<std::string> errors;
        for (const auto& slot : slots) {
            if (slot.result) {
                oc.per_seed.push_back(slot.result->theta);
                histories.push_back(slot.result->history);
                for (const auto& w : slot.result->warnings) out << "warning: " << w << '\n';
            } else {
                histories.push_back(slot.partial->history);
                errors.push_back(slot.error);
            }
        }
        oc.history = average_histories(histories);
        {
            auto csv = open_out(cfg.output_dir / "train_history.csv");
            io::write_history_csv(csv, oc.history);
        }
        if (!errors.empty()) {
            oc.exit_code = kExitDivergence;
            oc.message = errors.front();
            return oc;
        }

        oc.theta = mean_of(oc.per_seed);
        json doc{{"theta", io::matrix_to_json(oc.theta)}};
        json runs = json::array();
        for (std::size_t i = 0; i < oc.per_seed.size(); ++i)
            runs.push_back({{"seed", configs[i].seed}, {"theta", io::matrix_to_json(oc.per_seed[i])}});
        doc["runs"] = runs;
        doc["spectral_radius"] = error_spectral_radius(model, oc.theta);
        out << "theta = " << format_matrix(oc.theta, 4) << '\n';
        if (reference) {
            const auto gm = gain_metrics(oc.theta, *reference);
            doc["reference"] = io::matrix_to_json(*reference);
            doc["difference"] = io::matrix_to_json(gm.difference);
            doc["accuracy_pct"] = io::matrix_to_json(gm.accuracy_pct);
            out << "K_inf = " << format_matrix(*reference, 4) << '\n'
                << "accuracy % = " << format_matrix(gm.accuracy_pct, 3) << '\n';
        }
        io::write_json_file(cfg.output_dir / "theta.json", doc);
    } catch (const ConfigError& e) {
        oc.exit_code = kExitConfig;
        oc.message = e.what();
    } catch (const std::invalid_argument& e) {
        oc.exit_code = kExitConfig;
        oc.message = e.what();
    }
    return oc;
}

EvalOutcome cmd_eval(const RunConfig& cfg, const std::vector<std::string>& gains, std::ostream& out) {
    EvalOutcome oc;
    try {
        const auto model = cfg.model.build();
        ensure_dir(cfg.output_dir);
        std::vector<std::pair<std::string, MatrixXd>> sources;
        for (const auto& spec : gains.empty() ? std::vector<std::string>{"kinf"} : gains) {
            if (spec == "kinf") {
                sources.emplace_back("kinf", solve_dare(model, cfg.dare_tol, cfg.dare_max_iter).gain);
            } else if (spec == "zero") {
                sources.emplace_back("zero", MatrixXd::Zero(model.n(), model.r()));
            } else {
                const auto eq = spec.find('=');
                const std::string name = eq == std::string::npos ? fs::path(spec).stem().string() : spec.substr(0, eq);
                const fs::path path = eq == std::string::npos ? fs::path(spec) : fs::path(spec.substr(eq + 1));
                MatrixXd g = io::gain_from_json(io::read_json_file(path));
                if (g.rows() != model.n() || g.cols() != model.r())
                    throw ConfigError("gain " + name + " does not match the model's n x r shape");
                sources.emplace_back(name, std::move(g));
            }
        }

        EvalConfig ecfg = cfg.eval;
        ecfg.threads = thread_count(cfg);
        for (const auto& [name, gain] : sources) {
            io::EvalRow row;
            row.name = name;
            row.diverged = !(error_spectral_radius(model, gain) < 1.0);
            try {
                row.report = evaluate(model, gain, ecfg, cfg.initial_error);
            } catch (const DivergenceError&) {
                row.diverged = true;
                row.report.loss_tran = row.report.loss_ss = row.report.loss_full = std::nan("");
            }
            if (!row.report.logmse_curve.empty()) {
                auto csv = open_out(cfg.output_dir / ("logmse_" + name + ".csv"));
                io::write_logmse_csv(csv, row.report.logmse_curve);
            }
            out << name << ": loss_tran=" << row.report.loss_tran << " loss_ss=" << row.report.loss_ss
                << " loss_full=" << row.report.loss_full << (row.diverged ? " (diverged)" : "") << '\n';
            oc.rows.push_back(std::move(row));
        }
        auto csv = open_out(cfg.output_dir / "eval.csv");
        io::write_eval_csv(csv, oc.rows);
    } catch (const DivergenceError& e) {
        oc.exit_code = kExitDivergence;
        oc.message = e.what();
    } catch (const ConfigError& e) {
        oc.exit_code = kExitConfig;
        oc.message = e.what();
    } catch (const std::invalid_argument& e) {
        oc.exit_code = kExitConfig;
        oc.message = e.what();
    }
    return oc;
}

SweepOutcome cmd_sweep_gamma(const RunConfig& cfg, std::ostream& out) {
    SweepOutcome oc;
    try {
        if (cfg.gamma_sweep.empty()) throw ConfigError("gamma_sweep is empty");
        const auto model = cfg.model.build();
        ensure_dir(cfg.output_dir);
        const auto reference = try_reference(model, cfg);
        if (reference) oc.reference = *reference;

        std::vector<TrainerConfig> configs;
        for (double g : cfg.gamma_sweep) {
            for (long s = 0; s < cfg.seeds; ++s) {
                TrainerConfig t = cfg.trainer;
                t.gamma = g;
                t.init_mode = InitialErrorMode::fixed;
                t.seed = cfg.trainer.seed + static_cast<std::uint64_t>(s);
                configs.push_back(t);
            }
        }
        const auto slots = run_many(model, configs, reference, cfg.initial_error, thread_count(cfg));

        for (std::size_t gi = 0; gi < cfg.gamma_sweep.size(); ++gi) {
            io::SweepRow row;
            row.gamma = cfg.gamma_sweep[gi];
            std::vector<MatrixXd> thetas;
            for (long s = 0; s < cfg.seeds; ++s) {
                const auto& slot = slots[gi * static_cast<std::size_t>(cfg.seeds) + static_cast<std::size_t>(s)];
                if (slot.result)
                    thetas.push_back(slot.result->theta);
                else
                    row.diverged = true;
            }
            if (!row.diverged) {
                row.theta = mean_of(thetas);
                if (reference) row.accuracy_pct = gain_metrics(row.theta, *reference).accuracy_pct;
            }
            out << "gamma=" << row.gamma << ": "
                << (row.diverged ? std::string("diverged") : "theta=" + format_matrix(row.theta, 4)) << '\n';
            oc.rows.push_back(std::move(row));
        }
        auto csv = open_out(cfg.output_dir / "sweep.csv");
        io::write_sweep_csv(csv, oc.rows);
        for (const auto& row : oc.rows) {
            if (row.diverged) {
                oc.exit_code = kExitDivergence;
                oc.message = "training diverged for gamma = " + io::format_number(row.gamma);
                break;
            }
        }
    } catch (const ConfigError& e) {
        oc.exit_code = kExitConfig;
        oc.message = e.what();
    } catch (const std::invalid_argument& e) {
        oc.exit_code = kExitConfig;
        oc.message = e.what();
    }
    return oc;
}

}  // namespace aof
