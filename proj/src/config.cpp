#include "pdmp/config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <cmath>
#include <fstream>
#include <functional>
#include <iomanip>
#include <map>
#include <set>
#include <sstream>

namespace pdmp {

namespace {

namespace pt = boost::property_tree;

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t");
    const auto e = s.find_last_not_of(" \t");
    return b == std::string::npos ? "" : s.substr(b, e - b + 1);
}

double to_double(const std::string& key, const std::string& v) {
    try {
        std::size_t used = 0;
        const double d = std::stod(trim(v), &used);
        if (used != trim(v).size()) throw std::invalid_argument(v);
        return d;
    } catch (const std::exception&) {
        throw Error("config key '" + key + "': expected a number, got '" + v + "'");
    }
}

long to_int(const std::string& key, const std::string& v) {
    const double d = to_double(key, v);
    if (d != std::floor(d)) throw Error("config key '" + key + "': expected an integer, got '" + v + "'");
    return static_cast<long>(d);
}

std::size_t to_count(const std::string& key, const std::string& v) {
    const long i = to_int(key, v);
    if (i < 0) throw Error("config key '" + key + "': must be nonnegative");
    return static_cast<std::size_t>(i);
}

bool to_bool(const std::string& key, const std::string& v) {
    const std::string t = trim(v);
    if (t == "true" || t == "1" || t == "yes") return true;
    if (t == "false" || t == "0" || t == "no") return false;
    throw Error("config key '" + key + "': expected true or false, got '" + v + "'");
}

std::vector<double> to_list(const std::string& key, const std::string& v) {
    std::vector<double> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(to_double(key, item));
    if (out.empty()) throw Error("config key '" + key + "': empty list");
    return out;
}

using Setter = std::function<void(RunConfig&, const std::string& key, const std::string& value)>;

const std::map<std::string, Setter>& setters() {
    static const std::map<std::string, Setter> table = {
        {"problem.name", [](RunConfig& c, const std::string&, const std::string& v) { c.problem = trim(v); }},
        {"problem.discount",
         [](RunConfig& c, const std::string& k, const std::string& v) { c.discount = to_double(k, v); }},
        {"problem.lambda0", [](RunConfig& c, const std::string& k, const std::string& v) { c.lambda0 = to_list(k, v); }},
        {"problem.horizon", [](RunConfig& c, const std::string& k, const std::string& v) { c.horizon = to_double(k, v); }},
        {"problem.x", [](RunConfig& c, const std::string& k, const std::string& v) { c.x = to_list(k, v); }},
        {"problem.action", [](RunConfig& c, const std::string& k, const std::string& v) { c.action = to_count(k, v); }},
        {"grid.dx", [](RunConfig& c, const std::string& k, const std::string& v) { c.grid.dx = to_double(k, v); }},
        {"grid.dt_max", [](RunConfig& c, const std::string& k, const std::string& v) { c.grid.dt_max = to_double(k, v); }},
        {"grid.tol", [](RunConfig& c, const std::string& k, const std::string& v) { c.grid.tol = to_double(k, v); }},
        {"grid.max_iter",
         [](RunConfig& c, const std::string& k, const std::string& v) { c.grid.max_iter = static_cast<int>(to_int(k, v)); }},
        {"grid.nu_levels",
         [](RunConfig& c, const std::string& k, const std::string& v) { c.grid.nu_levels = static_cast<int>(to_int(k, v)); }},
        {"grid.n_schedule",
         [](RunConfig& c, const std::string& k, const std::string& v) { c.n_schedule = to_list(k, v); }},
        {"grid.limit_tol", [](RunConfig& c, const std::string& k, const std::string& v) { c.limit_tol = to_double(k, v); }},
        {"grid.extrapolate",
         [](RunConfig& c, const std::string& k, const std::string& v) { c.extrapolate = to_bool(k, v); }},
        {"bsde.n", [](RunConfig& c, const std::string& k, const std::string& v) { c.n = to_double(k, v); }},
        {"bsde.T", [](RunConfig& c, const std::string& k, const std::string& v) { c.picard.T = to_double(k, v); }},
        {"bsde.train_paths",
         [](RunConfig& c, const std::string& k, const std::string& v) { c.picard.train_paths = to_count(k, v); }},
        {"bsde.eval_paths",
         [](RunConfig& c, const std::string& k, const std::string& v) { c.picard.eval_paths = to_count(k, v); }},
        {"bsde.k_max",
         [](RunConfig& c, const std::string& k, const std::string& v) { c.picard.k_max = static_cast<int>(to_int(k, v)); }},
        {"bsde.degree",
         [](RunConfig& c, const std::string& k, const std::string& v) { c.picard.degree = static_cast<int>(to_int(k, v)); }},
        {"bsde.basis",
         [](RunConfig& c, const std::string& k, const std::string& v) {
             if (v == "bspline") c.picard.basis = BasisKind::bspline;
             else if (v == "legendre") c.picard.basis = BasisKind::legendre;
             else throw Error("config key '" + k + "': expected bspline or legendre, got '" + v + "'");
         }},
        {"bsde.cells",
         [](RunConfig& c, const std::string& k, const std::string& v) { c.picard.cells = static_cast<int>(to_int(k, v)); }},
        {"bsde.ridge", [](RunConfig& c, const std::string& k, const std::string& v) { c.picard.ridge = to_double(k, v); }},
        {"bsde.dt_max", [](RunConfig& c, const std::string& k, const std::string& v) { c.picard.dt_max = to_double(k, v); }},
        {"bsde.train_spread",
         [](RunConfig& c, const std::string& k, const std::string& v) { c.picard.train_spread = to_double(k, v); }},
        {"bsde.bootstrap",
         [](RunConfig& c, const std::string& k, const std::string& v) { c.picard.bootstrap = static_cast<int>(to_int(k, v)); }},
        {"bsde.replicates",
         [](RunConfig& c, const std::string& k, const std::string& v) { c.picard.replicates = static_cast<int>(to_int(k, v)); }},
        {"bsde.picard", [](RunConfig& c, const std::string& k, const std::string& v) { c.run_picard = to_bool(k, v); }},
        {"mc.paths", [](RunConfig& c, const std::string& k, const std::string& v) { c.paths = to_count(k, v); }},
        {"mc.flow_step", [](RunConfig& c, const std::string& k, const std::string& v) { c.flow_step = to_double(k, v); }},
        {"mc.seed", [](RunConfig& c, const std::string& k, const std::string& v) { c.seed = to_count(k, v); }},
        {"mc.threads",
         [](RunConfig& c, const std::string& k, const std::string& v) { c.threads = static_cast<int>(to_int(k, v)); }},
        {"dual.nu", [](RunConfig& c, const std::string&, const std::string& v) { c.nu = trim(v); }},
        {"dual.eps", [](RunConfig& c, const std::string& k, const std::string& v) { c.eps = to_list(k, v); }},
        {"dual.a_prime", [](RunConfig& c, const std::string& k, const std::string& v) { c.a_prime = to_count(k, v); }},
        {"output.dir", [](RunConfig& c, const std::string&, const std::string& v) { c.out = trim(v); }},
    };
    return table;
}

const std::vector<std::string> kRequired = {"problem.name"};

std::string join(const std::vector<double>& v) {
    std::ostringstream os;
    os << std::setprecision(12);
    for (std::size_t i = 0; i < v.size(); ++i) os << (i ? "," : "") << v[i];
    return os.str();
}

} // namespace

Benchmark RunConfig::benchmark() const {
    Benchmark b = builtin_benchmark(problem);
    if (discount) b.chars.discount = *discount;
    if (!lambda0.empty()) b.lambda0.weights = lambda0;
    return b;
}

SimulationConfig RunConfig::simulation() const {
    SimulationConfig s;
    s.seed = seed;
    s.horizon = horizon;
    s.threads = threads;
    s.flow.step = flow_step;
    return s;
}

State RunConfig::start() const {
    State s(static_cast<Eigen::Index>(x.size()));
    for (std::size_t i = 0; i < x.size(); ++i) s[static_cast<Eigen::Index>(i)] = x[i];
    return s;
}

RunConfig parse_config(const std::string& text) {
    pt::ptree tree;
    std::istringstream is(text);
    try {
        pt::read_ini(is, tree);
    } catch (const pt::ini_parser_error& e) {
        throw Error(std::string("config parse error: ") + e.message() + " (line " + std::to_string(e.line()) + ")");
    }
    RunConfig cfg;
    std::set<std::string> seen;
    for (const auto& [section, body] : tree) {
        if (body.empty() && !body.data().empty())
            throw Error("config key '" + section + "' is outside any section");
        for (const auto& [key, value] : body) {
            const std::string path = section + "." + key;
            const auto it = setters().find(path);
            if (it == setters().end()) throw Error("unknown config key '" + path + "'");
            it->second(cfg, path, value.data());
            seen.insert(path);
        }
    }
    std::vector<std::string> missing;
    for (const auto& k : kRequired)
        if (!seen.count(k)) missing.push_back(k);
    if (!missing.empty()) {
        std::string msg = "missing required config keys:";
        for (const auto& k : missing) msg += " '" + k + "'";
        throw Error(msg);
    }
    validate_config(cfg);
    return cfg;
}

RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open config file '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

RunConfig default_config(const std::string& problem) {
    RunConfig cfg;
    cfg.problem = problem;
    validate_config(cfg);
    return cfg;
}

void validate_config(const RunConfig& cfg) {
    if (cfg.discount && !(*cfg.discount > 0)) throw Error("config key 'problem.discount': discount must be positive");
    const Benchmark b = cfg.benchmark();
    const std::size_t m = b.chars.num_actions();
    if (!cfg.lambda0.empty()) {
        if (cfg.lambda0.size() != m)
            throw Error("config key 'problem.lambda0': expected " + std::to_string(m) + " weights");
        for (double w : cfg.lambda0)
            if (!(w > 0)) throw Error("config key 'problem.lambda0': every action weight must be positive");
    }
    if (cfg.x.size() != static_cast<std::size_t>(b.chars.dim))
        throw Error("config key 'problem.x': dimension mismatch");
    if (!b.chars.domain.contains_closed(cfg.start())) throw Error("config key 'problem.x': outside the domain");
    if (cfg.action >= m) throw Error("config key 'problem.action': out of range");
    if (cfg.a_prime >= m) throw Error("config key 'dual.a_prime': out of range");
    if (!(cfg.horizon > 0)) throw Error("config key 'problem.horizon': must be positive");
    if (!(cfg.grid.dx > 0)) throw Error("config key 'grid.dx': must be positive");
    if (!(cfg.flow_step > 0)) throw Error("config key 'mc.flow_step': must be positive");
    if (cfg.threads < 1) throw Error("config key 'mc.threads': must be at least 1");
    for (std::size_t i = 0; i < cfg.n_schedule.size(); ++i) {
        if (!(cfg.n_schedule[i] >= 1)) throw Error("config key 'grid.n_schedule': entries must be >= 1");
        if (i && !(cfg.n_schedule[i] > cfg.n_schedule[i - 1]))
            throw Error("config key 'grid.n_schedule': must be increasing");
    }
    if (cfg.picard.cells < 1) throw Error("config key 'bsde.cells': must be at least 1");
    if (cfg.picard.replicates < 1) throw Error("config key 'bsde.replicates': must be at least 1");
    if (!(cfg.picard.ridge >= 0)) throw Error("config key 'bsde.ridge': must be nonnegative");
    for (double e : cfg.eps)
        if (!(e > 0)) throw Error("config key 'dual.eps': entries must be positive");
}

void write_config(std::ostream& os, const RunConfig& c) {
    os << std::setprecision(12) << std::boolalpha;
    os << "[problem]\nname = " << c.problem << '\n';
    if (c.discount) os << "discount = " << *c.discount << '\n';
    if (!c.lambda0.empty()) os << "lambda0 = " << join(c.lambda0) << '\n';
    os << "horizon = " << c.horizon << "\nx = " << join(c.x) << "\naction = " << c.action << "\n\n";
    os << "[grid]\ndx = " << c.grid.dx << "\ndt_max = " << c.grid.dt_max << "\ntol = " << c.grid.tol
       << "\nmax_iter = " << c.grid.max_iter << "\nnu_levels = " << c.grid.nu_levels
       << "\nn_schedule = " << join(c.n_schedule) << "\nlimit_tol = " << c.limit_tol
       << "\nextrapolate = " << c.extrapolate << "\n\n";
    os << "[bsde]\nn = " << c.n << "\nT = " << c.picard.T << "\ntrain_paths = " << c.picard.train_paths
       << "\neval_paths = " << c.picard.eval_paths << "\nk_max = " << c.picard.k_max
       << "\nbasis = " << (c.picard.basis == BasisKind::bspline ? "bspline" : "legendre")
       << "\ndegree = " << c.picard.degree << "\ncells = " << c.picard.cells << "\nridge = " << c.picard.ridge
       << "\ndt_max = " << c.picard.dt_max << "\ntrain_spread = " << c.picard.train_spread
       << "\nbootstrap = " << c.picard.bootstrap
       << "\nreplicates = " << c.picard.replicates << "\npicard = " << c.run_picard << "\n\n";
    os << "[mc]\npaths = " << c.paths << "\nflow_step = " << c.flow_step << "\nseed = " << c.seed
       << "\nthreads = " << c.threads << "\n\n";
    os << "[dual]\nnu = " << c.nu << "\neps = " << join(c.eps) << "\na_prime = " << c.a_prime << "\n\n";
    os << "[output]\ndir = " << c.out << '\n';
}

} // namespace pdmp
