#include "pdmp/report.hpp"

#include <json.hpp>

#include <cstdio>
#include <fstream>

namespace pdmp {

std::string fmt12(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

void write_value_csv(std::ostream& os, const GridValueFunction& v) {
    const int d = v.grid.dim();
    for (int k = 0; k < d; ++k) os << 'x' << k << ',';
    os << "action,value\n";
    for (std::size_t i = 0; i < v.grid.size(); ++i) {
        const State x = v.grid.node(i);
        for (Eigen::Index a = 0; a < v.layers(); ++a) {
            for (int k = 0; k < d; ++k) os << fmt12(x[k]) << ',';
            os << a << ',' << fmt12(v.values(static_cast<Eigen::Index>(i), a)) << '\n';
        }
    }
}

void write_policy_csv(std::ostream& os, const TensorGrid& grid, const std::vector<ActionIndex>& policy) {
    const int d = grid.dim();
    for (int k = 0; k < d; ++k) os << 'x' << k << ',';
    os << "action\n";
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const State x = grid.node(i);
        for (int k = 0; k < d; ++k) os << fmt12(x[k]) << ',';
        os << policy[i] << '\n';
    }
}

void write_trace_json(std::ostream& os, const SolveDiagnostics& diag) {
    nlohmann::json j = nlohmann::json::array();
    for (const auto& r : diag.trace)
        j.push_back({{"iteration", r.iteration}, {"residual", r.residual}, {"policy_changes", r.policy_changes}});
    os << j.dump(1) << '\n';
}

void write_limit_json(std::ostream& os, const MaximalLimit& limit, const std::vector<double>& g) {
    nlohmann::json j = nlohmann::json::array();
    for (std::size_t k = 0; k < limit.solutions.size(); ++k) {
        const auto& s = limit.solutions[k];
        nlohmann::json r = {{"n", s.n},
                            {"iteration", s.diag.iterations},
                            {"residual", s.diag.residual},
                            {"spread", s.values.spread().maxCoeff()}};
        r["G"] = k < g.size() ? nlohmann::json(g[k]) : nlohmann::json(nullptr);
        r["sup_change"] = k > 0 ? nlohmann::json(limit.sup_change[k - 1]) : nlohmann::json(nullptr);
        j.push_back(r);
    }
    os << j.dump(1) << '\n';
}

std::ofstream open_output(const std::filesystem::path& dir, const std::string& name) {
    std::filesystem::create_directories(dir);
    std::ofstream f(dir / name);
    if (!f) throw Error("cannot write " + (dir / name).string());
    return f;
}

} // namespace pdmp
