#pragma once

#include "pdmp/model.hpp"
#include "pdmp/simulate.hpp"
#include "pdmp/stats.hpp"

#include <ostream>
#include <vector>

namespace pdmp {

/// L^nu_t = exp(int_0^t int (1 - nu_r(b)) lambda0(db) dr) * prod over action jumps of nu_{T_n}(A_n).
double density_along_path(const MarkedPointPath& path, const IntensityControl& nu, const ActionMeasure& lambda0,
                          const LocalCharacteristics& chars, double t, const FlowSolverConfig& flow = {});

struct ReweightedEstimate {
    Estimate cost;    // E[L_{T*} * cost]
    Estimate weight;  // E[L_{T*}]
};

ReweightedEstimate dual_cost_reweighted(const LocalCharacteristics& chars, const ActionMeasure& lambda0,
                                        const State& x, ActionIndex a, const IntensityControl& nu,
                                        const SimulationConfig& cfg, std::size_t n_paths);

/// Path under P^{x,a}_nu: action jumps at intensity nu_t(b) lambda0(db), by thinning.
MarkedPointPath sample_dual_path(const LocalCharacteristics& chars, const ActionMeasure& lambda0, const State& x,
                                 ActionIndex a, const IntensityControl& nu, const SimulationConfig& cfg,
                                 std::uint64_t path_index);

Estimate dual_cost_direct(const LocalCharacteristics& chars, const ActionMeasure& lambda0, const State& x,
                          ActionIndex a, const IntensityControl& nu, const SimulationConfig& cfg,
                          std::size_t n_paths);

/// nu^eps: intensity 1/(eps lambda0({a})) on {a} before the first jump, then nu shifted by one jump.
IntensityControl epsilon_shift_control(const IntensityControl& nu, ActionIndex a, double eps,
                                       const ActionMeasure& lambda0);

/// Test battery: constant 1, time-limited 0.5 and 2, history-, action- and state-dependent fields.
std::vector<IntensityControl> intensity_battery(const LocalCharacteristics& chars);

IntensityControl battery_control(const std::string& label, const LocalCharacteristics& chars);

struct ShiftRow {
    double eps = 0;
    Estimate cost;
    Estimate first_jump;  // mean T_1 under P^{x,a'}_{nu^eps}
};

struct ShiftExperiment {
    State x;
    ActionIndex a = 0, a_prime = 1;
    Estimate target;  // J(x, a, nu)
    std::vector<ShiftRow> rows;
    double richardson = 0;  // linear extrapolation in eps to 0 from the two smallest eps
    double richardson_se = 0;
    LineFit first_jump_fit;
};

ShiftExperiment a_shift_experiment(const LocalCharacteristics& chars, const ActionMeasure& lambda0, const State& x,
                                   ActionIndex a, ActionIndex a_prime, const IntensityControl& nu,
                                   const std::vector<double>& eps_grid, const SimulationConfig& cfg,
                                   std::size_t n_paths);

void write_shift_csv(std::ostream& os, const ShiftExperiment& exp);

} // namespace pdmp
