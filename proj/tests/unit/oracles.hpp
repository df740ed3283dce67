#pragma once

#include "pdmp/model.hpp"

#include <vector>

namespace oracle {

/// Value of the finite jump-only problem on its support, by value iteration.
struct FiniteMdp {
    std::vector<double> value;                // per support point
    std::vector<pdmp::ActionIndex> argmin;    // ties to the lowest index
    int iterations = 0;
};
FiniteMdp jump_only_value(double tol = 1e-12);

/// Penalized value v^n(x, a) of the same finite problem with uniform lambda0 of the given mass per action.
std::vector<std::vector<double>> jump_only_penalized(double n, double lambda0_mass = 1.0, double tol = 1e-12);

/// Deterministic benchmark: bang-bang towards 0, value by adaptive quadrature of the closed-form path.
double deterministic_value(double x0);

/// Same value by a crude time-stepping dynamic programme on a fine grid, as a second check.
double deterministic_value_dp(double x0, double dx, double dt);

} // namespace oracle
