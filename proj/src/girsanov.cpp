#include "pdmp/girsanov.hpp"
#include "pdmp/parallel.hpp"
#include "pdmp/random.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>

namespace pdmp {

namespace {

/// Cuts [t0, t1] at the control's breakpoints.
std::vector<double> cut_points(const IntensityControl& nu, double t0, double t1) {
    std::vector<double> pts{t0};
    for (double b : nu.breakpoints)
        if (b > t0 && b < t1) pts.push_back(b);
    std::sort(pts.begin() + 1, pts.end());
    pts.push_back(t1);
    return pts;
}

} // namespace

double density_along_path(const MarkedPointPath& path, const IntensityControl& nu, const ActionMeasure& lambda0,
                          const LocalCharacteristics& chars, double t, const FlowSolverConfig& flow_cfg) {
    double log_l = 0;
    double factor = 1;
    const std::span<const JumpRecord> recs(path.records);
    for_each_segment(path, t, [&](std::size_t n, double t0, const State& x0, ActionIndex a, double t1) {
        const auto hist = recs.first(n);
        const auto pts = cut_points(nu, t0, t1);
        State y = x0;
        for (std::size_t k = 0; k + 1 < pts.size(); ++k) {
            const double s0 = pts[k];
            State end;
            log_l += integrate_along_flow(
                chars, y, a, pts[k + 1] - s0, flow_cfg,
                [&](double r, const State& z) {
                    // the right limit inside the piece: evaluate just after s0 at r = 0
                    const double s = r > 0 ? s0 + r : std::nextafter(s0, INFINITY);
                    const IntensityContext ctx{std::min(s, pts[k + 1]), z, a, hist};
                    double v = 0;
                    for (std::size_t b = 0; b < lambda0.size(); ++b) v += (1 - nu(ctx, b)) * lambda0.weights[b];
                    return v;
                },
                &end);
            y = end;
        }
        if (n < path.records.size() && path.records[n].time <= t && path.records[n].kind == JumpKind::action) {
            const auto& rec = path.records[n];
            const IntensityContext ctx{rec.time, rec.state, a, hist};
            factor *= nu(ctx, rec.action);
        }
    });
    return std::exp(log_l) * factor;
}

ReweightedEstimate dual_cost_reweighted(const LocalCharacteristics& chars, const ActionMeasure& lambda0,
                                        const State& x, ActionIndex a, const IntensityControl& nu,
                                        const SimulationConfig& cfg, std::size_t n_paths) {
    if (n_paths < 2) throw Error("dual_cost_reweighted: need at least two paths");
    std::vector<double> c(n_paths), w(n_paths);
    parallel_for(n_paths, cfg.threads, [&](std::size_t i) {
        const auto path = sample_randomized_path(chars, lambda0, x, a, cfg, i);
        const double l = density_along_path(path, nu, lambda0, chars, cfg.horizon, cfg.flow);
        w[i] = l;
        c[i] = l * discounted_cost(path, chars, CostMode::randomized(), cfg.flow).value;
    });
    return {mean_se(c), mean_se(w)};
}

MarkedPointPath sample_dual_path(const LocalCharacteristics& chars, const ActionMeasure& lambda0, const State& x,
                                 ActionIndex a, const IntensityControl& nu, const SimulationConfig& cfg,
                                 std::uint64_t path_index) {
    if (!chars.domain.contains_closed(x)) throw Error("sample_dual_path: start outside the domain");
    const double mass = lambda0.total();
    const std::size_t m = lambda0.size();
    Rng rng = path_rng(cfg.seed, path_index, cfg.stream);
    MarkedPointPath path;
    path.start = x;
    path.start_action = a;
    path.horizon = cfg.horizon;
    const std::size_t cap = cfg.jump_cap(chars.bounds.rate + nu.nu_max * mass);
    auto bound_for = [&](std::size_t piece) {
        return cfg.thinning_bound > 0 ? cfg.thinning_bound : chars.bounds.rate + nu.mass_bound(piece, mass);
    };
    double t = 0, s = 0;
    State y = x;
    ActionIndex as = a;
    double bound = bound_for(0);
    std::vector<double> w(m);
    for (;;) {
        const double cand = t + exponential1(rng) / bound;
        if (cand >= cfg.horizon) break;
        y = flow(chars, y, as, cand - s, cfg.flow);
        s = cand;
        t = cand;
        const IntensityContext ctx{cand, y, as, std::span<const JumpRecord>(path.records)};
        const double lam = chars.rate(y, as);
        double switch_mass = 0;
        for (std::size_t b = 0; b < m; ++b) {
            w[b] = nu(ctx, b) * lambda0.weights[b];
            switch_mass += w[b];
        }
        const double total = lam + switch_mass;
        if (total > bound * (1 + 1e-9)) {
            std::ostringstream msg;
            msg << "thinning bound violated: intensity " << total << " > " << bound << " at t = " << cand;
            throw Error(msg.str());
        }
        if (uniform01(rng) * bound >= total) continue;
        if (path.records.size() >= cap) throw Error("sample_dual_path: max_jumps cap reached");
        if (uniform01(rng) * total < lam) {
            y = chars.kernel.sample(y, as, rng);
            path.records.push_back({cand, y, as, JumpKind::state});
        } else {
            as = categorical(rng, w, switch_mass);
            path.records.push_back({cand, y, as, JumpKind::action});
        }
        bound = bound_for(path.records.size());
    }
    return path;
}

Estimate dual_cost_direct(const LocalCharacteristics& chars, const ActionMeasure& lambda0, const State& x,
                          ActionIndex a, const IntensityControl& nu, const SimulationConfig& cfg,
                          std::size_t n_paths) {
    std::vector<double> c(n_paths);
    parallel_for(n_paths, cfg.threads, [&](std::size_t i) {
        const auto path = sample_dual_path(chars, lambda0, x, a, nu, cfg, i);
        c[i] = discounted_cost(path, chars, CostMode::randomized(), cfg.flow).value;
    });
    return mean_se(c);
}

IntensityControl epsilon_shift_control(const IntensityControl& nu, ActionIndex a, double eps,
                                       const ActionMeasure& lambda0) {
    if (!(eps > 0)) throw Error("epsilon_shift_control: eps must be positive");
    if (a >= lambda0.size()) throw Error("epsilon_shift_control: action out of range");
    const double first = 1.0 / (eps * lambda0.weights[a]);
    IntensityControl out;
    std::ostringstream label;
    label << nu.label << "_shift" << eps;
    out.label = label.str();
    out.rate = [nu, a, first](const IntensityContext& c, ActionIndex b) {
        if (c.history.empty()) return b == a ? first : 0.0;
        const IntensityContext shifted{c.t, c.state, c.action, c.history.subspan(1)};
        return nu(shifted, b);
    };
    out.nu_min = 0;
    out.nu_max = std::max(first, nu.nu_max);
    out.breakpoints = nu.breakpoints;
    const double total = lambda0.total();
    out.piece_mass_bound = [nu, eps, total](std::size_t piece) {
        return piece == 0 ? 1.0 / eps : nu.mass_bound(piece - 1, total);
    };
    return out;
}

IntensityControl battery_control(const std::string& label, const LocalCharacteristics&) {
    IntensityControl nu;
    nu.label = label;
    if (label.rfind("const", 0) == 0) {
        double c = 0;
        try {
            c = std::stod(label.substr(5));
        } catch (const std::exception&) {
            throw Error("unknown intensity control '" + label + "'");
        }
        if (!(c > 0)) throw Error("intensity control '" + label + "' must be positive");
        nu = IntensityControl::constant(c);
        nu.label = label;
        return nu;
    }
    if (label == "half_t1" || label == "double_t1") {
        const double c = label == "half_t1" ? 0.5 : 2.0;
        nu.rate = [c](const IntensityContext& ctx, ActionIndex) { return ctx.t <= 1.0 ? c : 1.0; };
        nu.nu_min = std::min(c, 1.0);
        nu.nu_max = std::max(c, 1.0);
        nu.breakpoints = {1.0};
        return nu;
    }
    if (label == "history") {
        nu.rate = [](const IntensityContext& ctx, ActionIndex) {
            return ctx.history.empty() ? 2.0 : (ctx.history.size() == 1 ? 0.5 : 1.0);
        };
        nu.nu_min = 0.5;
        nu.nu_max = 2.0;
        return nu;
    }
    if (label == "action_t2") {
        nu.rate = [](const IntensityContext& ctx, ActionIndex b) {
            if (ctx.t > 2.0) return 1.0;
            return b == ctx.action ? 1.5 : 0.75;
        };
        nu.nu_min = 0.75;
        nu.nu_max = 1.5;
        nu.breakpoints = {2.0};
        return nu;
    }
    if (label == "state_t1.5") {
        nu.rate = [](const IntensityContext& ctx, ActionIndex) {
            return ctx.t <= 1.5 ? 1.0 + 0.5 * std::tanh(ctx.state[0]) : 1.0;
        };
        nu.nu_min = 0.5;
        nu.nu_max = 1.5;
        nu.breakpoints = {1.5};
        return nu;
    }
    throw Error("unknown intensity control '" + label + "'");
}

std::vector<IntensityControl> intensity_battery(const LocalCharacteristics& chars) {
    std::vector<IntensityControl> out;
    for (const char* l : {"const1", "half_t1", "double_t1", "history", "action_t2", "state_t1.5"})
        out.push_back(battery_control(l, chars));
    return out;
}

ShiftExperiment a_shift_experiment(const LocalCharacteristics& chars, const ActionMeasure& lambda0, const State& x,
                                   ActionIndex a, ActionIndex a_prime, const IntensityControl& nu,
                                   const std::vector<double>& eps_grid, const SimulationConfig& cfg,
                                   std::size_t n_paths) {
    if (eps_grid.empty()) throw Error("a_shift_experiment: empty eps grid");
    ShiftExperiment ex;
    ex.x = x;
    ex.a = a;
    ex.a_prime = a_prime;
    SimulationConfig c0 = cfg;
    c0.stream = cfg.stream + 7000;
    ex.target = dual_cost_direct(chars, lambda0, x, a, nu, c0, n_paths);
    std::vector<double> eps_v, t1_v;
    for (std::size_t k = 0; k < eps_grid.size(); ++k) {
        const double eps = eps_grid[k];
        const IntensityControl shifted = epsilon_shift_control(nu, a, eps, lambda0);
        SimulationConfig ck = cfg;
        ck.stream = cfg.stream + 7001 + k;
        std::vector<double> cost(n_paths), t1(n_paths);
        parallel_for(n_paths, cfg.threads, [&](std::size_t i) {
            const auto path = sample_dual_path(chars, lambda0, x, a_prime, shifted, ck, i);
            cost[i] = discounted_cost(path, chars, CostMode::randomized(), ck.flow).value;
            t1[i] = path.records.empty() ? ck.horizon : path.records.front().time;
        });
        ShiftRow row;
        row.eps = eps;
        row.cost = mean_se(cost);
        row.first_jump = mean_se(t1);
        ex.rows.push_back(row);
        eps_v.push_back(eps);
        t1_v.push_back(row.first_jump.mean);
    }
    ex.first_jump_fit = fit_line(eps_v, t1_v);
    std::vector<ShiftRow> sorted = ex.rows;
    std::sort(sorted.begin(), sorted.end(), [](const ShiftRow& l, const ShiftRow& r) { return l.eps < r.eps; });
    if (sorted.size() >= 2) {
        const auto& s = sorted[0];
        const auto& b = sorted[1];
        const double den = b.eps - s.eps;
        ex.richardson = (b.eps * s.cost.mean - s.eps * b.cost.mean) / den;
        ex.richardson_se = std::hypot(b.eps * s.cost.se, s.eps * b.cost.se) / den;
    } else {
        ex.richardson = sorted[0].cost.mean;
        ex.richardson_se = sorted[0].cost.se;
    }
    return ex;
}

void write_shift_csv(std::ostream& os, const ShiftExperiment& ex) {
    os << "kind,eps,J,se,mean_T1,se_T1\n" << std::setprecision(12);
    for (const auto& r : ex.rows)
        os << "shift," << r.eps << ',' << r.cost.mean << ',' << r.cost.se << ',' << r.first_jump.mean << ','
           << r.first_jump.se << '\n';
    os << "richardson,0," << ex.richardson << ',' << ex.richardson_se << ",,\n";
    os << "target,0," << ex.target.mean << ',' << ex.target.se << ",,\n";
}

} // namespace pdmp
