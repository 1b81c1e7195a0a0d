#include "aof/config.hpp"

#include <set>

namespace aof {

using io::json;

LinearGaussianModel<double> ModelSource::build() const {
    if (kind == Kind::inline_model) {
        if (!model) throw ConfigError("inline model missing");
        return *model;
    }
    return build_bicycle_model<double>(vehicle, discretization);
}

void RunConfig::validate() const {
    try {
        const auto m = model.build();
        m.validate();
        trainer.validate();
        eval.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    if (!(dare_tol > 0) || dare_max_iter <= 0) throw ConfigError("dare: tol and max_iter must be positive");
    if (seeds <= 0) throw ConfigError("seeds must be positive");
    for (double g : gamma_sweep)
        if (!(g >= 0 && g < 1)) throw ConfigError("gamma_sweep: every discount must lie in [0, 1)");
}

namespace {

const char* mode_name(InitialErrorMode m) { return m == InitialErrorMode::fixed ? "fixed" : "uniform_box"; }

InitialErrorMode mode_from(const std::string& s) {
    if (s == "fixed") return InitialErrorMode::fixed;
    if (s == "uniform_box") return InitialErrorMode::uniform_box;
    throw ConfigError("unknown initial error mode '" + s + "'");
}

void reject_unknown(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
    const std::set<std::string> keys(allowed.begin(), allowed.end());
    for (const auto& [k, _] : j.items())
        if (!keys.count(k)) throw ConfigError(where + ": unknown key '" + k + "'");
}

template <typename T>
void read(const json& j, const char* key, T& out, const std::string& where) {
    if (!j.contains(key)) return;
    try {
        out = j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError(where + "." + key + ": " + e.what());
    }
}

json vehicle_to_json(const VehicleParams& p) {
    return json{{"m", p.m},
                {"v_long", p.v_long},
                {"a", p.a},
                {"b", p.b},
                {"C_f", p.C_f},
                {"C_r", p.C_r},
                {"I_zz", p.I_zz},
                {"sigma_side_slope", p.sigma_side_slope},
                {"sigma_side_wind", p.sigma_side_wind},
                {"sigma_lat_acc", p.sigma_lat_acc},
                {"sigma_yaw_rate", p.sigma_yaw_rate},
                {"l_arm", p.l_arm},
                {"dt", p.dt}};
}

VehicleParams vehicle_from_json(const json& j) {
    const std::string w = "model.params";
    if (!j.is_object()) throw ConfigError(w + ": expected an object");
    reject_unknown(j,
                   {"m", "v_long", "a", "b", "C_f", "C_r", "I_zz", "sigma_side_slope", "sigma_side_wind",
                    "sigma_lat_acc", "sigma_yaw_rate", "l_arm", "dt"},
                   w);
    VehicleParams p;
    read(j, "m", p.m, w);
    read(j, "v_long", p.v_long, w);
    read(j, "a", p.a, w);
    read(j, "b", p.b, w);
    read(j, "C_f", p.C_f, w);
    read(j, "C_r", p.C_r, w);
    read(j, "I_zz", p.I_zz, w);
    read(j, "sigma_side_slope", p.sigma_side_slope, w);
    read(j, "sigma_side_wind", p.sigma_side_wind, w);
    read(j, "sigma_lat_acc", p.sigma_lat_acc, w);
    read(j, "sigma_yaw_rate", p.sigma_yaw_rate, w);
    // The arm follows the geometry unless given explicitly.
    if (!j.contains("l_arm") && (j.contains("a") || j.contains("b"))) p.l_arm = equivalent_moment_arm(p.a, p.b);
    read(j, "l_arm", p.l_arm, w);
    read(j, "dt", p.dt, w);
    return p;
}

json trainer_to_json(const TrainerConfig& t) {
    return json{{"batch_size", t.batch_size},
                {"lr_actor", t.lr_actor},
                {"lr_critic", t.lr_critic},
                {"gamma", t.gamma},
                {"max_iters", t.max_iters},
                {"convergence_tol", t.convergence_tol},
                {"convergence_window", t.convergence_window},
                {"seed", t.seed},
                {"init_mode", mode_name(t.init_mode)},
                {"burn_in", t.burn_in},
                {"behavior_rate", t.behavior_rate},
                {"average_fraction", t.average_fraction},
                {"history_stride", t.history_stride},
                {"divergence_factor", t.divergence_factor},
                {"divergence_bound", t.divergence_bound}};
}

TrainerConfig trainer_from_json(const json& j) {
    const std::string w = "trainer";
    if (!j.is_object()) throw ConfigError(w + ": expected an object");
    reject_unknown(j,
                   {"batch_size", "lr_actor", "lr_critic", "gamma", "max_iters", "convergence_tol",
                    "convergence_window", "seed", "init_mode", "burn_in", "behavior_rate", "average_fraction",
                    "history_stride", "divergence_factor", "divergence_bound"},
                   w);
    TrainerConfig t;
    read(j, "batch_size", t.batch_size, w);
    read(j, "lr_actor", t.lr_actor, w);
    read(j, "lr_critic", t.lr_critic, w);
    read(j, "gamma", t.gamma, w);
    read(j, "max_iters", t.max_iters, w);
    read(j, "convergence_tol", t.convergence_tol, w);
    read(j, "convergence_window", t.convergence_window, w);
    read(j, "seed", t.seed, w);
    std::string mode = mode_name(t.init_mode);
    read(j, "init_mode", mode, w);
    t.init_mode = mode_from(mode);
    read(j, "burn_in", t.burn_in, w);
    read(j, "behavior_rate", t.behavior_rate, w);
    read(j, "average_fraction", t.average_fraction, w);
    read(j, "history_stride", t.history_stride, w);
    read(j, "divergence_factor", t.divergence_factor, w);
    read(j, "divergence_bound", t.divergence_bound, w);
    return t;
}

json eval_to_json(const EvalConfig& e) {
    return json{{"n_traj", e.n_traj},
                {"t_test", e.t_test},
                {"t_critical", e.t_critical},
                {"seed", e.seed},
                {"init_mode", mode_name(e.init_mode)}};
}

EvalConfig eval_from_json(const json& j) {
    const std::string w = "eval";
    if (!j.is_object()) throw ConfigError(w + ": expected an object");
    reject_unknown(j, {"n_traj", "t_test", "t_critical", "seed", "init_mode"}, w);
    EvalConfig e;
    read(j, "n_traj", e.n_traj, w);
    read(j, "t_test", e.t_test, w);
    read(j, "t_critical", e.t_critical, w);
    read(j, "seed", e.seed, w);
    std::string mode = mode_name(e.init_mode);
    read(j, "init_mode", mode, w);
    e.init_mode = mode_from(mode);
    return e;
}

json init_to_json(const InitialErrorSpec& s) {
    return json{{"half_width_1", s.half_width_1},
                {"half_width_2", s.half_width_2},
                {"fixed_1", s.fixed_1},
                {"fixed_2", s.fixed_2}};
}

InitialErrorSpec init_from_json(const json& j) {
    const std::string w = "initial_error";
    if (!j.is_object()) throw ConfigError(w + ": expected an object");
    reject_unknown(j, {"half_width_1", "half_width_2", "fixed_1", "fixed_2"}, w);
    InitialErrorSpec s;
    read(j, "half_width_1", s.half_width_1, w);
    read(j, "half_width_2", s.half_width_2, w);
    read(j, "fixed_1", s.fixed_1, w);
    read(j, "fixed_2", s.fixed_2, w);
    if (!(s.half_width_1 >= 0 && s.half_width_2 >= 0)) throw ConfigError(w + ": half widths must be non-negative");
    return s;
}

}  // namespace

json config_to_json(const RunConfig& cfg) {
    json model;
    if (cfg.model.kind == ModelSource::Kind::inline_model) {
        model = io::model_to_json(cfg.model.build());
        model["type"] = "inline";
    } else {
        model = json{{"type", "bicycle"},
                     {"params", vehicle_to_json(cfg.model.vehicle)},
                     {"discretization", to_string(cfg.model.discretization)}};
    }
    return json{{"model", model},
                {"dare", {{"tol", cfg.dare_tol}, {"max_iter", cfg.dare_max_iter}}},
                {"trainer", trainer_to_json(cfg.trainer)},
                {"eval", eval_to_json(cfg.eval)},
                {"initial_error", init_to_json(cfg.initial_error)},
                {"gamma_sweep", cfg.gamma_sweep},
                {"seeds", cfg.seeds},
                {"threads", cfg.threads},
                {"output_dir", cfg.output_dir.string()}};
}

RunConfig config_from_json(const json& j) {
    if (!j.is_object()) throw ConfigError("config: expected an object");
    reject_unknown(j,
                   {"model", "dare", "trainer", "eval", "initial_error", "gamma_sweep", "seeds", "threads",
                    "output_dir"},
                   "config");
    RunConfig cfg;
    if (j.contains("model")) {
        const auto& m = j["model"];
        if (!m.is_object()) throw ConfigError("model: expected an object");
        const std::string type = m.value("type", std::string("bicycle"));
        if (type == "bicycle") {
            reject_unknown(m, {"type", "params", "discretization"}, "model");
            cfg.model.kind = ModelSource::Kind::bicycle;
            if (m.contains("params")) cfg.model.vehicle = vehicle_from_json(m["params"]);
            std::string rule = to_string(cfg.model.discretization);
            read(m, "discretization", rule, "model");
            try {
                cfg.model.discretization = discretization_from_string(rule);
            } catch (const std::invalid_argument& e) {
                throw ConfigError(e.what());
            }
            if (cfg.model.discretization == Discretization::none)
                throw ConfigError("model: bicycle model needs a discretization rule");
        } else if (type == "inline") {
            reject_unknown(m, {"type", "A", "B", "C", "D", "E", "Q", "R", "dt"}, "model");
            cfg.model.kind = ModelSource::Kind::inline_model;
            json doc = m;
            doc.erase("type");
            cfg.model.model = io::model_from_json(doc);
        } else {
            throw ConfigError("model: unknown type '" + type + "'");
        }
    }
    if (j.contains("dare")) {
        const auto& d = j["dare"];
        reject_unknown(d, {"tol", "max_iter"}, "dare");
        read(d, "tol", cfg.dare_tol, "dare");
        read(d, "max_iter", cfg.dare_max_iter, "dare");
    }
    if (j.contains("trainer")) cfg.trainer = trainer_from_json(j["trainer"]);
    if (j.contains("eval")) cfg.eval = eval_from_json(j["eval"]);
    if (j.contains("initial_error")) cfg.initial_error = init_from_json(j["initial_error"]);
    read(j, "gamma_sweep", cfg.gamma_sweep, "config");
    read(j, "seeds", cfg.seeds, "config");
    read(j, "threads", cfg.threads, "config");
    std::string out = cfg.output_dir.string();
    read(j, "output_dir", out, "config");
    cfg.output_dir = out;
    cfg.validate();
    return cfg;
}

RunConfig load_config(const std::filesystem::path& path) { return config_from_json(io::read_json_file(path)); }

}  // namespace aof
