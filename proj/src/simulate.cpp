#include "pdmp/simulate.hpp"
#include "pdmp/parallel.hpp"
#include "pdmp/random.hpp"

#include <cmath>
#include <iomanip>
#include <sstream>
#include <type_traits>

namespace pdmp {

std::size_t SimulationConfig::jump_cap(double total_rate) const {
    if (max_jumps > 0) return max_jumps;
    return std::max<std::size_t>(100, static_cast<std::size_t>(std::ceil(50.0 * total_rate * horizon)));
}

namespace {

/// Follows the primal flow of one inter-jump segment under alpha_n(., E_n).
class PolicyWalker {
public:
    PolicyWalker(const LocalCharacteristics& c, const PiecewiseOpenLoopPolicy& p, std::size_t n, const State& e,
                 const FlowSolverConfig& f)
        : c_(&c), p_(&p), n_(n), e_(e), step_(f.step), x_(e) {
        if (p_->is_feedback()) {
            a_ = p_->feedback(e_);
            next_switch_ = p_->resample;
        }
    }

    const State& state() const { return x_; }
    double elapsed() const { return s_; }
    ActionIndex action_at(double s) const { return p_->is_feedback() ? a_ : p_->rule(n_, s, e_); }

    /// visit(s0, x0, a0, xm, am, s1, x1, a1) once per RK4 step.
    template <typename Visit>
    void advance(double to, Visit&& visit) {
        while (s_ < to) {
            double end = to;
            if (p_->is_feedback()) end = std::min(end, next_switch_);
            const double dt = std::min(step_, end - s_);
            const double s0 = s_, s1 = (dt == end - s_) ? end : s_ + dt;
            const ActionIndex a0 = action_at(s0), am = action_at(s0 + dt / 2), a1 = action_at(s1);
            const State x0 = x_;
            const State k1 = c_->drift(x0, a0);
            const State k2 = c_->drift(x0 + (dt / 2) * k1, am);
            const State k3 = c_->drift(x0 + (dt / 2) * k2, am);
            const State k4 = c_->drift(x0 + dt * k3, a1);
            x_ = x0 + (dt / 6) * (k1 + 2 * k2 + 2 * k3 + k4);
            s_ = s1;
            if constexpr (!std::is_same_v<std::decay_t<Visit>, std::nullptr_t>) {
                const State xm = detail::hermite<double>(x0, k1, x_, c_->drift(x_, a1), dt, 0.5);
                visit(s0, x0, a0, xm, am, s1, x_, a1);
            }
            if (p_->is_feedback() && s_ >= next_switch_) {
                a_ = p_->feedback(x_);
                next_switch_ += p_->resample;
            }
        }
    }
    void advance(double to) { advance(to, nullptr); }

private:
    const LocalCharacteristics* c_;
    const PiecewiseOpenLoopPolicy* p_;
    std::size_t n_;
    State e_;
    double step_;
    State x_;
    double s_ = 0;
    ActionIndex a_ = 0;
    double next_switch_ = 0;
};

} // namespace

MarkedPointPath sample_primal_path(const LocalCharacteristics& chars, const PiecewiseOpenLoopPolicy& policy,
                                   const State& x, const SimulationConfig& cfg, std::uint64_t path_index) {
    if (!chars.domain.contains_closed(x)) throw Error("sample_primal_path: start outside the domain");
    MarkedPointPath path;
    path.start = x;
    path.horizon = cfg.horizon;
    const double bound = cfg.thinning_bound > 0 ? cfg.thinning_bound : chars.bounds.rate;
    if (!(bound > 0)) return path;
    const std::size_t cap = cfg.jump_cap(bound);
    Rng rng = path_rng(cfg.seed, path_index, cfg.stream);

    double t = 0, seg_start = 0;
    std::size_t n = 0;
    PolicyWalker walker(chars, policy, n, x, cfg.flow);
    for (;;) {
        const double cand = t + exponential1(rng) / bound;
        if (cand >= cfg.horizon) break;
        walker.advance(cand - seg_start);
        const ActionIndex a = walker.action_at(cand - seg_start);
        const double lam = chars.rate(walker.state(), a);
        if (lam > bound * (1 + 1e-12)) {
            std::ostringstream msg;
            msg << "thinning bound violated: rate " << lam << " > " << bound << " at t = " << cand;
            throw Error(msg.str());
        }
        t = cand;
        if (uniform01(rng) * bound >= lam) continue;
        if (path.records.size() >= cap) throw Error("sample_primal_path: max_jumps cap reached");
        const State y = chars.kernel.sample(walker.state(), a, rng);
        path.records.push_back({t, y, a, JumpKind::state});
        ++n;
        seg_start = t;
        walker = PolicyWalker(chars, policy, n, y, cfg.flow);
    }
    return path;
}

MarkedPointPath sample_randomized_path(const LocalCharacteristics& chars, const ActionMeasure& lambda0, const State& x,
                                       ActionIndex a, const SimulationConfig& cfg, std::uint64_t path_index) {
    if (!chars.domain.contains_closed(x)) throw Error("sample_randomized_path: start outside the domain");
    if (a >= chars.num_actions()) throw Error("sample_randomized_path: action out of range");
    const double mass = lambda0.total();
    const std::size_t cap = cfg.jump_cap(chars.bounds.rate + mass);
    Rng rng = path_rng(cfg.seed, path_index, cfg.stream);

    MarkedPointPath path;
    path.start = x;
    path.start_action = a;
    path.horizon = cfg.horizon;
    const double h = cfg.flow.step;
    double t = 0;
    State xs = x;
    ActionIndex as = a;
    auto total_rate = [&](const State& y) { return chars.rate(y, as) + mass; };

    for (;;) {
        const double target = exponential1(rng);
        double acc = 0;
        State x0 = xs;
        State f0 = chars.drift(x0, as);
        double g0 = total_rate(x0);
        double r0 = 0;
        bool jumped = false;
        double tau_rel = 0;
        State pre;
        const double room = cfg.horizon - t;
        for (long k = 0; r0 < room; ++k) {
            const double dt = std::min(h, room - r0);
            const State x1 = rk4_step(chars, x0, as, dt);
            const State f1 = chars.drift(x1, as);
            const double g1 = total_rate(x1);
            const double inc = dt / 6 * (g0 + 4 * total_rate(detail::hermite<double>(x0, f0, x1, f1, dt, 0.5)) + g1);
            if (acc + inc >= target) {
                // bisection for the crossing inside this step
                auto partial = [&](double tau) {
                    if (tau <= 0) return 0.0;
                    const double th = tau / dt;
                    const State xm = detail::hermite<double>(x0, f0, x1, f1, dt, th / 2);
                    const State xe = detail::hermite<double>(x0, f0, x1, f1, dt, th);
                    return tau / 6 * (g0 + 4 * total_rate(xm) + total_rate(xe));
                };
                double lo = 0, hi = dt;
                while (hi - lo > 1e-10) {
                    const double mid = 0.5 * (lo + hi);
                    if (acc + partial(mid) >= target) hi = mid;
                    else lo = mid;
                }
                tau_rel = r0 + hi;
                pre = rk4_step(chars, x0, as, hi);
                jumped = true;
                break;
            }
            acc += inc;
            x0 = x1;
            f0 = f1;
            g0 = g1;
            r0 = (k + 1) * h;
            if (dt < h) r0 = room;
        }
        if (!jumped) break;
        const double tj = t + tau_rel;
        if (tj >= cfg.horizon) break;
        if (path.records.size() >= cap) throw Error("sample_randomized_path: max_jumps cap reached");
        const double lam = chars.rate(pre, as);
        if (uniform01(rng) * (lam + mass) < lam) {
            const State y = chars.kernel.sample(pre, as, rng);
            path.records.push_back({tj, y, as, JumpKind::state});
            xs = y;
        } else {
            const ActionIndex b = categorical(rng, lambda0.weights, mass);
            path.records.push_back({tj, pre, b, JumpKind::action});
            xs = pre;
            as = b;
        }
        t = tj;
    }
    return path;
}

std::vector<MarkedPointPath> sample_randomized_paths(const LocalCharacteristics& chars, const ActionMeasure& lambda0,
                                                     const State& x, ActionIndex a, const SimulationConfig& cfg,
                                                     std::size_t n_paths) {
    std::vector<MarkedPointPath> out(n_paths);
    parallel_for(n_paths, cfg.threads,
                 [&](std::size_t i) { out[i] = sample_randomized_path(chars, lambda0, x, a, cfg, i); });
    return out;
}

State randomized_state_at(const MarkedPointPath& path, const LocalCharacteristics& chars, double t,
                          const FlowSolverConfig& flow_cfg) {
    std::size_t n = 0;
    while (n < path.records.size() && path.records[n].time < t) ++n;
    return flow(chars, path.state_after(n), path.action_after(n), t - path.time_of(n), flow_cfg);
}

Estimate compensator_residual(std::span<const MarkedPointPath> paths, const LocalCharacteristics& chars,
                              const ActionMeasure& lambda0, const TestFunction& test_fn, double t,
                              const FlowSolverConfig& flow_cfg) {
    if (paths.empty()) throw Error("compensator_residual: empty path set");
    std::vector<double> r(paths.size());
    for (std::size_t i = 0; i < paths.size(); ++i) {
        const auto& path = paths[i];
        double counted = 0, compensator = 0;
        for (const auto& rec : path.records) {
            if (rec.time > t) break;
            counted += test_fn(rec.time, rec.state, rec.action);
        }
        for_each_segment(path, t, [&](std::size_t, double t0, const State& x0, ActionIndex a, double t1) {
            compensator += integrate_along_flow(chars, x0, a, t1 - t0, flow_cfg, [&](double r, const State& y) {
                const double s = t0 + r;
                double v = 0;
                const double lam = chars.rate(y, a);
                if (lam > 0) {
                    double q = 0;
                    for (const auto& atom : chars.kernel.quadrature(y, a)) q += atom.weight * test_fn(s, atom.point, a);
                    v += lam * q;
                }
                for (std::size_t b = 0; b < lambda0.size(); ++b) v += lambda0.weights[b] * test_fn(s, y, b);
                return v;
            });
        });
        r[i] = counted - compensator;
    }
    return mean_se(r);
}

CostValue discounted_cost(const MarkedPointPath& path, const LocalCharacteristics& chars, CostMode mode,
                          const FlowSolverConfig& flow_cfg) {
    const double delta = chars.discount;
    const double T = path.horizon;
    CostValue out;
    out.tail_bound = chars.value_bound() * std::exp(-delta * T);
    if (!mode.policy) {
        for_each_segment(path, T, [&](std::size_t, double t0, const State& x0, ActionIndex a, double t1) {
            out.value += integrate_along_flow(chars, x0, a, t1 - t0, flow_cfg, [&](double r, const State& y) {
                return std::exp(-delta * (t0 + r)) * chars.cost(y, a);
            });
        });
        return out;
    }
    const auto& policy = *mode.policy;
    for (std::size_t n = 0; n <= path.records.size(); ++n) {
        const double t0 = path.time_of(n);
        if (t0 >= T) break;
        const double t1 = n < path.records.size() ? std::min(path.records[n].time, T) : T;
        PolicyWalker walker(chars, policy, n, path.state_after(n), flow_cfg);
        walker.advance(t1 - t0, [&](double s0, const State& x0, ActionIndex a0, const State& xm, ActionIndex am,
                                    double s1, const State& x1, ActionIndex a1) {
            const double dt = s1 - s0;
            const double g0 = std::exp(-delta * (t0 + s0)) * chars.cost(x0, a0);
            const double gm = std::exp(-delta * (t0 + s0 + dt / 2)) * chars.cost(xm, am);
            const double g1 = std::exp(-delta * (t0 + s1)) * chars.cost(x1, a1);
            out.value += dt / 6 * (g0 + 4 * gm + g1);
        });
    }
    return out;
}

Estimate primal_cost_mc(const LocalCharacteristics& chars, const PiecewiseOpenLoopPolicy& policy, const State& x,
                        const SimulationConfig& cfg, std::size_t n_paths) {
    std::vector<double> v(n_paths);
    parallel_for(n_paths, cfg.threads, [&](std::size_t i) {
        const auto path = sample_primal_path(chars, policy, x, cfg, i);
        v[i] = discounted_cost(path, chars, CostMode::primal(policy), cfg.flow).value;
    });
    return mean_se(v);
}

Estimate randomized_cost_mc(const LocalCharacteristics& chars, const ActionMeasure& lambda0, const State& x,
                            ActionIndex a, const SimulationConfig& cfg, std::size_t n_paths) {
    std::vector<double> v(n_paths);
    parallel_for(n_paths, cfg.threads, [&](std::size_t i) {
        const auto path = sample_randomized_path(chars, lambda0, x, a, cfg, i);
        v[i] = discounted_cost(path, chars, CostMode::randomized(), cfg.flow).value;
    });
    return mean_se(v);
}

void write_paths_csv(std::ostream& os, std::span<const MarkedPointPath> paths) {
    const int d = paths.empty() ? 1 : static_cast<int>(paths.front().start.size());
    os << "path_id,n,T_n";
    for (int k = 0; k < d; ++k) os << ",E_n_" << k;
    os << ",A_n,kind\n";
    os << std::setprecision(12);
    for (std::size_t p = 0; p < paths.size(); ++p) {
        const auto& path = paths[p];
        os << p << ",0,0";
        for (int k = 0; k < d; ++k) os << ',' << path.start[k];
        os << ',' << path.start_action << ",start\n";
        for (std::size_t n = 0; n < path.records.size(); ++n) {
            const auto& r = path.records[n];
            os << p << ',' << n + 1 << ',' << r.time;
            for (int k = 0; k < d; ++k) os << ',' << r.state[k];
            os << ',' << r.action << ',' << (r.kind == JumpKind::state ? "state" : "action") << '\n';
        }
    }
}

} // namespace pdmp
