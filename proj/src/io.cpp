#include "aof/io.hpp"

#include <charconv>
#include <fstream>
#include <ostream>

namespace aof::io {

std::string format_number(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

json matrix_to_json(const MatrixXd& m) {
    json rows = json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        json row = json::array();
        for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
        rows.push_back(std::move(row));
    }
    return rows;
}

MatrixXd matrix_from_json(const json& j, const std::string& what) {
    if (j.is_number()) return MatrixXd::Constant(1, 1, j.get<double>());
    if (!j.is_array()) throw ConfigError(what + ": expected a nested array of numbers");
    if (j.empty()) return MatrixXd(0, 0);
    if (j.front().is_number()) {
        MatrixXd m(1, static_cast<Eigen::Index>(j.size()));
        for (std::size_t k = 0; k < j.size(); ++k) {
            if (!j[k].is_number()) throw ConfigError(what + ": non-numeric entry");
            m(0, static_cast<Eigen::Index>(k)) = j[k].get<double>();
        }
        return m;
    }
    const auto rows = static_cast<Eigen::Index>(j.size());
    if (!j.front().is_array()) throw ConfigError(what + ": expected rows as arrays");
    const auto cols = static_cast<Eigen::Index>(j.front().size());
    MatrixXd m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
        const auto& row = j[static_cast<std::size_t>(r)];
        if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols)
            throw ConfigError(what + ": ragged rows");
        for (Eigen::Index c = 0; c < cols; ++c) {
            const auto& v = row[static_cast<std::size_t>(c)];
            if (!v.is_number()) throw ConfigError(what + ": non-numeric entry");
            m(r, c) = v.get<double>();
        }
    }
    return m;
}

json model_to_json(const LinearGaussianModel<double>& model) {
    return json{{"A", matrix_to_json(model.A)}, {"B", matrix_to_json(model.B)}, {"C", matrix_to_json(model.C)},
                {"D", matrix_to_json(model.D)}, {"E", matrix_to_json(model.E)}, {"Q", matrix_to_json(model.Q)},
                {"R", matrix_to_json(model.R)}, {"dt", model.dt}};
}

LinearGaussianModel<double> model_from_json(const json& j) {
    if (!j.is_object()) throw ConfigError("model: expected an object");
    for (const char* key : {"A", "B", "C", "D", "E", "Q", "R", "dt"})
        if (!j.contains(key)) throw ConfigError(std::string("model: missing key '") + key + "'");
    LinearGaussianModel<double> m;
    m.A = matrix_from_json(j["A"], "A");
    m.C = matrix_from_json(j["C"], "C");
    m.E = matrix_from_json(j["E"], "E");
    m.Q = matrix_from_json(j["Q"], "Q");
    m.R = matrix_from_json(j["R"], "R");
    m.B = matrix_from_json(j["B"], "B");
    m.D = matrix_from_json(j["D"], "D");
    // An input-free model may give B and D as [].
    if (m.B.size() == 0) m.B = MatrixXd::Zero(m.A.rows(), 0);
    if (m.D.size() == 0) m.D = MatrixXd::Zero(m.C.rows(), m.B.cols());
    if (!j["dt"].is_number()) throw ConfigError("model: dt must be a number");
    m.dt = j["dt"].get<double>();
    try {
        m.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    return m;
}

json dare_to_json(const SteadyStateSolution<double>& sol) {
    return json{{"sigma", matrix_to_json(sol.sigma)},
                {"gain", matrix_to_json(sol.gain)},
                {"iterations", sol.iterations},
                {"residual", sol.residual}};
}

MatrixXd gain_from_json(const json& j) {
    if (j.is_object()) {
        if (j.contains("theta")) return matrix_from_json(j["theta"], "theta");
        if (j.contains("gain")) return matrix_from_json(j["gain"], "gain");
        throw ConfigError("gain document needs a 'theta' or 'gain' key");
    }
    return matrix_from_json(j, "gain");
}

json read_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open " + path.string());
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
}

void write_json_file(const std::filesystem::path& path, const json& j) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write " + path.string());
    out << j.dump(2) << '\n';
}

namespace {

void element_header(std::ostream& os, const char* prefix, Eigen::Index rows, Eigen::Index cols) {
    for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index j = 0; j < cols; ++j) os << ',' << prefix << (i + 1) << (j + 1);
}

void element_values(std::ostream& os, const MatrixXd& m, Eigen::Index rows, Eigen::Index cols) {
    for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index j = 0; j < cols; ++j)
            os << ',' << (m.size() ? format_number(m(i, j)) : std::string("nan"));
}

}  // namespace

void write_history_csv(std::ostream& os, const std::vector<TrainingRecord<double>>& history) {
    const Eigen::Index rows = history.empty() ? 2 : history.front().theta.rows();
    const Eigen::Index cols = history.empty() ? 2 : history.front().theta.cols();
    os << "iter";
    element_header(os, "theta", rows, cols);
    element_header(os, "d", rows, cols);
    os << ",critic_loss,actor_loss\n";
    for (const auto& rec : history) {
        os << rec.iter;
        element_values(os, rec.theta, rows, cols);
        element_values(os, rec.d, rows, cols);
        os << ',' << format_number(rec.critic_loss) << ',' << format_number(rec.actor_loss) << '\n';
    }
}

void write_eval_csv(std::ostream& os, const std::vector<EvalRow>& rows) {
    os << "gain,loss_tran,loss_ss,loss_full,status\n";
    for (const auto& r : rows) {
        os << r.name << ',' << format_number(r.report.loss_tran) << ',' << format_number(r.report.loss_ss) << ','
           << format_number(r.report.loss_full) << ',' << (r.diverged ? "diverged" : "ok") << '\n';
    }
}

void write_logmse_csv(std::ostream& os, const std::vector<double>& curve) {
    os << "step,logmse\n";
    for (std::size_t t = 0; t < curve.size(); ++t) os << (t + 1) << ',' << format_number(curve[t]) << '\n';
}

void write_sweep_csv(std::ostream& os, const std::vector<SweepRow>& rows) {
    const Eigen::Index r = rows.empty() || rows.front().theta.size() == 0 ? 2 : rows.front().theta.rows();
    const Eigen::Index c = rows.empty() || rows.front().theta.size() == 0 ? 2 : rows.front().theta.cols();
    os << "gamma";
    element_header(os, "theta", r, c);
    element_header(os, "e", r, c);
    os << ",status\n";
    for (const auto& row : rows) {
        os << format_number(row.gamma);
        element_values(os, row.theta, r, c);
        element_values(os, row.accuracy_pct, r, c);
        os << ',' << (row.diverged ? "diverged" : "ok") << '\n';
    }
}

}  // namespace aof::io
