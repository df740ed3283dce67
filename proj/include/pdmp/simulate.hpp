#pragma once

#include "pdmp/flow.hpp"
#include "pdmp/model.hpp"
#include "pdmp/stats.hpp"

#include <cstdint>
#include <functional>
#include <ostream>
#include <span>
#include <vector>

namespace pdmp {

struct SimulationConfig {
    std::uint64_t seed = 1;
    std::uint64_t stream = 0;     // separates experiments that share a seed
    double horizon = 20;          // T*
    std::size_t max_jumps = 0;    // 0: 50 * thinning bound * T*
    double thinning_bound = 0;    // 0: derived from the characteristics
    FlowSolverConfig flow;
    int threads = 1;

    std::size_t jump_cap(double total_rate) const;
};

MarkedPointPath sample_primal_path(const LocalCharacteristics& chars, const PiecewiseOpenLoopPolicy& policy,
                                   const State& x, const SimulationConfig& cfg, std::uint64_t path_index);

MarkedPointPath sample_randomized_path(const LocalCharacteristics& chars, const ActionMeasure& lambda0, const State& x,
                                       ActionIndex a, const SimulationConfig& cfg, std::uint64_t path_index);

std::vector<MarkedPointPath> sample_randomized_paths(const LocalCharacteristics& chars, const ActionMeasure& lambda0,
                                                     const State& x, ActionIndex a, const SimulationConfig& cfg,
                                                     std::size_t n_paths);

using TestFunction = std::function<double(double t, const State& y, ActionIndex b)>;

/// Mean over paths of int_0^t int test d(p - p~) for randomized paths.
Estimate compensator_residual(std::span<const MarkedPointPath> paths, const LocalCharacteristics& chars,
                              const ActionMeasure& lambda0, const TestFunction& test_fn, double t,
                              const FlowSolverConfig& flow = {});

struct CostValue {
    double value = 0;       // truncated integral over [0, T*]
    double tail_bound = 0;  // (M_f / delta) e^{-delta T*}
};

struct CostMode {
    const PiecewiseOpenLoopPolicy* policy = nullptr;  // null: randomized path, action read from the records

    static CostMode primal(const PiecewiseOpenLoopPolicy& p) { return CostMode{&p}; }
    static CostMode randomized() { return CostMode{}; }
};

CostValue discounted_cost(const MarkedPointPath& path, const LocalCharacteristics& chars, CostMode mode,
                          const FlowSolverConfig& flow = {});

/// Pre-jump state X_{t-} of a randomized path (flow from the last record before t).
State randomized_state_at(const MarkedPointPath& path, const LocalCharacteristics& chars, double t,
                          const FlowSolverConfig& flow = {});

/// Visits the action-frozen segments of a randomized path up to `until`:
/// seg(n, t0, x0, action, t1) with t1 the segment end time.
template <typename F>
void for_each_segment(const MarkedPointPath& path, double until, F&& seg) {
    double t0 = 0;
    State x0 = path.start;
    ActionIndex a = path.start_action;
    std::size_t n = 0;
    while (t0 < until) {
        const double t1 = n < path.records.size() ? std::min(path.records[n].time, until) : until;
        seg(n, t0, x0, a, t1);
        if (n >= path.records.size() || path.records[n].time > until) break;
        x0 = path.records[n].state;
        a = path.records[n].action;
        t0 = path.records[n].time;
        ++n;
    }
}

Estimate primal_cost_mc(const LocalCharacteristics& chars, const PiecewiseOpenLoopPolicy& policy, const State& x,
                        const SimulationConfig& cfg, std::size_t n_paths);

Estimate randomized_cost_mc(const LocalCharacteristics& chars, const ActionMeasure& lambda0, const State& x,
                            ActionIndex a, const SimulationConfig& cfg, std::size_t n_paths);

/// One row per jump: path_id, n, T_n, E_n coordinates, A_n, kind.
void write_paths_csv(std::ostream& os, std::span<const MarkedPointPath> paths);

} // namespace pdmp
