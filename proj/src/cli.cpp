#include "pdmp/cli.hpp"
#include "pdmp/acceptance.hpp"
#include "pdmp/bsde.hpp"
#include "pdmp/config.hpp"
#include "pdmp/girsanov.hpp"
#include "pdmp/hjb.hpp"
#include "pdmp/report.hpp"
#include "pdmp/simulate.hpp"

#include "oracles.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <functional>
#include <optional>
#include <sstream>

namespace pdmp {

namespace {

constexpr double kZsignEps = 1e-3;

struct Flags {
    std::string config;
    std::string problem;
    std::optional<std::uint64_t> seed;
    std::optional<int> threads;
    std::string out;
    std::optional<std::size_t> paths;
    std::string nu;
    std::vector<double> eps;
    std::vector<int> only;
};

void shared_flags(CLI::App* sub, Flags& f) {
    sub->add_option("--config", f.config, "INI run description");
    sub->add_option("--problem", f.problem, "benchmark name (B1..B4 or full name)");
    sub->add_option("--seed", f.seed, "master seed");
    sub->add_option("--threads", f.threads, "worker threads");
    sub->add_option("--out", f.out, "run directory");
    sub->add_option("--paths", f.paths, "Monte Carlo paths");
}

RunConfig resolve(const Flags& f) {
    if (f.config.empty() && f.problem.empty()) throw Error("either --config or --problem is required");
    RunConfig cfg = f.config.empty() ? default_config(f.problem) : load_config(f.config);
    if (!f.problem.empty()) cfg.problem = f.problem;
    cfg.problem = canonical_benchmark_name(cfg.problem);
    if (f.seed) cfg.seed = *f.seed;
    if (f.threads) cfg.threads = *f.threads;
    if (!f.out.empty()) cfg.out = f.out;
    if (f.paths) cfg.paths = *f.paths;
    if (!f.nu.empty()) cfg.nu = f.nu;
    if (!f.eps.empty()) cfg.eps = f.eps;
    validate_config(cfg);
    auto echo = open_output(cfg.out, "config.ini");
    write_config(echo, cfg);
    return cfg;
}

std::string g(double v) {
    std::ostringstream os;
    os.precision(6);
    os << v;
    return os.str();
}

std::string estimate(const Estimate& e) { return g(e.mean) + " +- " + g(e.se); }

std::optional<double> oracle_at(const Benchmark& b, double x) {
    switch (b.oracle) {
    case OracleKind::constant:
        return b.chars.value_bound();
    case OracleKind::finite_mdp: {
        const auto o = oracle::jump_only_value();
        const auto d = jump_only_data();
        for (std::size_t i = 0; i < d.support.size(); ++i)
            if (std::abs(d.support[i] - x) < 1e-12) return o.value[i];
        return std::nullopt;
    }
    case OracleKind::deterministic:
        return oracle::deterministic_value(x);
    default:
        return std::nullopt;
    }
}

IntensityControl control_for(const RunConfig& cfg, const Benchmark& b) {
    if (cfg.nu == "zsign") {
        const auto sol = penalized_grid_solve(b.chars, b.lambda0, cfg.n, cfg.grid);
        return penalized_feedback_control(sol, kZsignEps);
    }
    return battery_control(cfg.nu, b.chars);
}

int cmd_validate(const RunConfig& cfg, std::ostream& out) {
    const Benchmark b = cfg.benchmark();
    const auto rep = validate_hypotheses(b.chars, 1000, cfg.seed);
    for (const auto& c : rep.checks)
        out << (c.pass ? "ok   " : "FAIL ") << c.name << ": measured " << g(c.measured) << ", bound " << g(c.bound)
            << '\n';
    out << "validate " << b.chars.name << ": " << (rep.all_pass() ? "all hypotheses hold" : "hypothesis violated")
        << '\n';
    return rep.all_pass() ? 0 : 1;
}

int cmd_simulate(const RunConfig& cfg, std::ostream& out) {
    const Benchmark b = cfg.benchmark();
    const auto paths = sample_randomized_paths(b.chars, b.lambda0, cfg.start(), cfg.action, cfg.simulation(), cfg.paths);
    auto f = open_output(cfg.out, "paths.csv");
    write_paths_csv(f, paths);
    std::size_t jumps = 0;
    for (const auto& p : paths) jumps += p.records.size();
    const auto cost = randomized_cost_mc(b.chars, b.lambda0, cfg.start(), cfg.action, cfg.simulation(), cfg.paths);
    out << "simulate " << b.chars.name << ": " << paths.size() << " paths, mean jumps "
        << g(double(jumps) / double(paths.size())) << ", randomized cost " << estimate(cost) << '\n';
    return 0;
}

int cmd_solve_hjb(const RunConfig& cfg, std::ostream& out) {
    const Benchmark b = cfg.benchmark();
    const auto sol = solve_hjb(b.chars, cfg.grid);
    auto v = open_output(cfg.out, "hjb_value.csv");
    write_value_csv(v, sol.value);
    auto p = open_output(cfg.out, "hjb_policy.csv");
    write_policy_csv(p, sol.value.grid, sol.policy);
    auto t = open_output(cfg.out, "hjb_trace.json");
    write_trace_json(t, sol.diag);
    out << "solve-hjb " << b.chars.name << ": V(x) = " << g(sol.value(cfg.start())) << ", " << sol.diag.iterations
        << " sweeps, residual " << g(sol.diag.residual) << '\n';
    return 0;
}

int cmd_solve_bsde(const RunConfig& cfg, std::ostream& out) {
    const Benchmark b = cfg.benchmark();
    LimitOptions lo;
    lo.extrapolate = cfg.extrapolate;
    lo.require_convergence = false;
    const auto lim = maximal_limit(b.chars, b.lambda0, cfg.grid, cfg.n_schedule, cfg.limit_tol, lo);
    auto v = open_output(cfg.out, "limit_value.csv");
    write_value_csv(v, lim.value);
    auto t = open_output(cfg.out, "limit_trace.json");
    write_limit_json(t, lim, {});
    out << "solve-bsde " << b.chars.name << ": v(x, a) = " << g(lim.value(cfg.start(), Eigen::Index(cfg.action)))
        << ", n up to " << g(lim.solutions.back().n) << (lim.converged ? ", converged" : ", not converged")
        << ", spread " << g(lim.max_spread()) << ", " << lim.monotone_violations << " monotonicity violations\n";
    if (cfg.run_picard) {
        const auto run = picard_mc_solve(b.chars, b.lambda0, cfg.n, cfg.start(), cfg.action, cfg.picard,
                                         cfg.simulation());
        auto pt = open_output(cfg.out, "picard_table.csv");
        write_value_csv(pt, run.sweep_tables.back());
        const auto sol = penalized_grid_solve(b.chars, b.lambda0, cfg.n, cfg.grid);
        out << "picard n = " << g(cfg.n) << ", T = " << g(cfg.picard.T) << ": Y0 = " << estimate(run.y0)
            << ", grid v^n = " << g(sol.values(cfg.start(), Eigen::Index(cfg.action)))
            << ", E[K_T]/n = " << estimate(run.k_over_n) << '\n';
    }
    return 0;
}

int cmd_dual_eval(const RunConfig& cfg, std::ostream& out) {
    const Benchmark b = cfg.benchmark();
    const auto nu = control_for(cfg, b);
    const auto sim = cfg.simulation();
    const auto dir = dual_cost_direct(b.chars, b.lambda0, cfg.start(), cfg.action, nu, sim, cfg.paths);
    const auto rw = dual_cost_reweighted(b.chars, b.lambda0, cfg.start(), cfg.action, nu, sim, cfg.paths);
    auto f = open_output(cfg.out, "dual.csv");
    f << "nu,direct,direct_se,reweighted,reweighted_se,weight,weight_se\n"
      << nu.label << ',' << fmt12(dir.mean) << ',' << fmt12(dir.se) << ',' << fmt12(rw.cost.mean) << ','
      << fmt12(rw.cost.se) << ',' << fmt12(rw.weight.mean) << ',' << fmt12(rw.weight.se) << '\n';
    out << "dual-eval " << b.chars.name << " nu = " << nu.label << ": J = " << estimate(dir) << ", reweighted "
        << estimate(rw.cost) << ", E[L] = " << estimate(rw.weight) << '\n';
    return 0;
}

int cmd_a_shift(const RunConfig& cfg, std::ostream& out) {
    const Benchmark b = cfg.benchmark();
    const auto nu = control_for(cfg, b);
    const auto ex = a_shift_experiment(b.chars, b.lambda0, cfg.start(), cfg.action, cfg.a_prime, nu, cfg.eps,
                                       cfg.simulation(), cfg.paths);
    auto f = open_output(cfg.out, "a_shift.csv");
    write_shift_csv(f, ex);
    out << "a-shift " << b.chars.name << " nu = " << nu.label << ": J(x, a, nu) = " << estimate(ex.target);
    for (const auto& r : ex.rows) out << "; eps " << g(r.eps) << ": " << estimate(r.cost);
    out << "; extrapolated " << g(ex.richardson) << '\n';
    return 0;
}

int cmd_compare(const RunConfig& cfg, std::ostream& out) {
    const Benchmark b = cfg.benchmark();
    const auto hjb = solve_hjb(b.chars, cfg.grid);
    LimitOptions lo;
    lo.extrapolate = cfg.extrapolate;
    lo.require_convergence = false;
    const auto lim = maximal_limit(b.chars, b.lambda0, cfg.grid, cfg.n_schedule, cfg.limit_tol, lo);
    std::vector<State> points = b.oracle_points;
    if (points.empty()) {
        const Box& box = hjb.value.grid.box();
        for (int k = 0; k <= 8; ++k) {
            State x(1);
            x << box.lower[0] + (box.upper[0] - box.lower[0]) * (0.1 + 0.1 * k);
            points.push_back(x);
        }
    }
    auto f = open_output(cfg.out, "compare.csv");
    f << "x,V_grid,v_limit_min,v_limit_max,gap,oracle\n";
    double worst = 0;
    for (const auto& x : points) {
        double lo_v = INFINITY, hi_v = -INFINITY;
        for (Eigen::Index a = 0; a < lim.value.layers(); ++a) {
            lo_v = std::min(lo_v, lim.value(x, a));
            hi_v = std::max(hi_v, lim.value(x, a));
        }
        const double V = hjb.value(x);
        const double gap = std::max(std::abs(V - lo_v), std::abs(V - hi_v));
        worst = std::max(worst, gap);
        const auto o = oracle_at(b, x[0]);
        f << fmt12(x[0]) << ',' << fmt12(V) << ',' << fmt12(lo_v) << ',' << fmt12(hi_v) << ',' << fmt12(gap) << ','
          << (o ? fmt12(*o) : "") << '\n';
        out << "x = " << g(x[0]) << ": V = " << g(V) << ", v in [" << g(lo_v) << ", " << g(hi_v) << "], |V - v| = "
            << g(gap);
        if (o) out << ", oracle " << g(*o);
        out << '\n';
    }
    auto d = open_output(cfg.out, "compare_dual.csv");
    d << "nu,J,se\n";
    double best = INFINITY;
    for (const auto& nu : intensity_battery(b.chars)) {
        const auto e = dual_cost_direct(b.chars, b.lambda0, cfg.start(), cfg.action, nu, cfg.simulation(), cfg.paths);
        d << nu.label << ',' << fmt12(e.mean) << ',' << fmt12(e.se) << '\n';
        best = std::min(best, e.mean);
    }
    out << "compare " << b.chars.name << ": max |V - v| = " << g(worst) << " (n up to "
        << g(lim.solutions.back().n) << "), V(x) = " << g(hjb.value(cfg.start())) << ", best battery J = " << g(best)
        << '\n';
    return 0;
}

int cmd_all(const Flags& f, std::ostream& out) {
    AcceptanceOptions opt;
    if (f.seed) opt.seed = *f.seed;
    if (f.threads) opt.threads = *f.threads;
    if (f.paths) opt.paths = *f.paths;
    opt.out = f.out.empty() ? "out" : f.out;
    opt.only = f.only;
    const auto res = run_acceptance(opt, out);
    std::size_t passed = 0;
    for (const auto& r : res) passed += r.pass;
    out << "all: " << passed << "/" << res.size() << " criteria passed\n";
    return passed == res.size() ? 0 : 1;
}

} // namespace

int cli_main(int argc, char** argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Optimal control of piecewise deterministic Markov processes"};
    app.require_subcommand(1);
    Flags f;
    using Handler = std::function<int(const RunConfig&, std::ostream&)>;
    const std::vector<std::tuple<std::string, std::string, Handler>> commands = {
        {"validate", "check the benchmark hypotheses", cmd_validate},
        {"simulate", "sample randomized paths", cmd_simulate},
        {"solve-hjb", "primal grid solve", cmd_solve_hjb},
        {"solve-bsde", "penalized schedule and optional Picard regression", cmd_solve_bsde},
        {"dual-eval", "dual cost of one intensity control", cmd_dual_eval},
        {"a-shift", "epsilon-shift experiment", cmd_a_shift},
        {"compare", "primal grid vs penalized limit vs dual battery", cmd_compare},
    };
    std::vector<std::pair<CLI::App*, Handler>> subs;
    for (const auto& [name, help, handler] : commands) {
        auto* sub = app.add_subcommand(name, help);
        shared_flags(sub, f);
        if (name == "dual-eval" || name == "a-shift") sub->add_option("--nu", f.nu, "intensity control label or zsign");
        if (name == "a-shift") sub->add_option("--eps", f.eps, "shift sizes")->delimiter(',');
        subs.emplace_back(sub, handler);
    }
    auto* all = app.add_subcommand("all", "run every acceptance criterion");
    shared_flags(all, f);
    all->add_option("--only", f.only, "criteria to run")->delimiter(',');
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e, out, err);
    }
    try {
        if (all->parsed()) return cmd_all(f, out);
        for (const auto& [sub, handler] : subs)
            if (sub->parsed()) return handler(resolve(f), out);
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return 2;
    }
    return 1;
}

} // namespace pdmp
