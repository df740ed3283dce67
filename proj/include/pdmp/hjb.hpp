#pragma once

#include "pdmp/grid.hpp"
#include "pdmp/model.hpp"
#include "pdmp/semi_lagrangian.hpp"
#include "pdmp/simulate.hpp"
#include "pdmp/stats.hpp"

#include <vector>

namespace pdmp {

/// sup_a { delta v(x) - h(x,a).p - lambda(x,a) int (v(y) - v(x)) Q(x,a,dy) - f(x,a) }.
/// Atoms outside the box are clamped; the count is added to `clamps` when given.
double hamiltonian(const LocalCharacteristics& chars, const State& x, const GridValueFunction& v, const State& grad,
                   std::size_t* clamps = nullptr);

/// Same bracket with the gradient taken upwind per action from the grid values at node i.
double hamiltonian_upwind(const LocalCharacteristics& chars, const GridValueFunction& v, std::size_t node);

struct HjbSolution {
    GridValueFunction value;
    std::vector<ActionIndex> policy;  // per node
    SolveDiagnostics diag;
    double max_hamiltonian = 0;       // over interior nodes
    GridConfig cfg;
};

HjbSolution solve_hjb(const LocalCharacteristics& chars, const GridConfig& cfg);

struct GreedyPolicy {
    std::vector<ActionIndex> table;  // argmin per node, ties to the lowest index
    PiecewiseOpenLoopPolicy policy;  // feedback on the nearest node, re-read every dt_sl
};

GreedyPolicy policy_extract(const LocalCharacteristics& chars, const GridValueFunction& V, const GridConfig& cfg);

struct PolicyCheck {
    Estimate cost;   // J(x, alpha_greedy)
    double value = 0;  // V(x)
    double gap() const { return cost.mean - value; }
};

PolicyCheck greedy_policy_check(const LocalCharacteristics& chars, const GridValueFunction& V,
                                const GreedyPolicy& greedy, const State& x, const SimulationConfig& sim,
                                std::size_t n_paths);

} // namespace pdmp
