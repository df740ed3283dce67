#pragma once

#include "pdmp/flow.hpp"
#include "pdmp/grid.hpp"
#include "pdmp/model.hpp"

#include <Eigen/Core>

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

namespace pdmp {

struct GridConfig {
    double dx = 0.05;
    double dt_max = 0.1;              // cap on the characteristic step
    bool characteristic_step = true;  // step chosen so the foot lands on a neighbouring node
    double dt_sl = 0;                 // fixed step when characteristic_step is off (0: dx / M_h)
    double tol = 1e-10;
    int max_iter = 100;               // policy-iteration sweeps
    int nu_levels = 0;                // extra geometric levels n/2, n/4, ... for the penalty intensity
    FlowSolverConfig flow{1e-3, 1e6};
};

struct IterationRecord {
    int iteration = 0;
    double residual = 0;
    int policy_changes = 0;
};

struct SolveDiagnostics {
    double residual = 0;  // sup |T v - v| at exit
    int iterations = 0;
    bool converged = false;
    std::size_t atom_clamps = 0;   // quadrature atoms outside the box
    std::size_t atom_evals = 0;
    std::size_t foot_clamps = 0;   // characteristic feet outside the box
    std::size_t value_clamps = 0;  // values outside [0, M_f/delta]
    std::size_t monotone_violations = 0;
    std::vector<IterationRecord> trace;
};

namespace detail {

struct Term {
    std::size_t node;
    double weight;
};

/// Discretization data for one (node, action) pair.
struct Characteristic {
    double dt = 0;
    Stencil foot;
    double f0 = 0, f1 = 0;
    double lam0 = 0, lam1 = 0;
    std::vector<Term> q0, q1;  // kernel quadrature composed with interpolation, at x and at the foot
};

/// Exponential-integrator weights for total rate c over a step dt.
struct StepWeights {
    double decay = 0;   // e^{-c dt}
    double i0 = 0;      // int_0^dt e^{-c s} ds
    double alpha = 0;   // share of the linear interpolant carried by the start point
};
StepWeights step_weights(double c, double dt);

/// Affine row: constant + sum weight * v[node].
struct Affine {
    double constant = 0;
    std::vector<Term> terms;
    void clear() {
        constant = 0;
        terms.clear();
    }
};

/// Appends the one-step exponential-integrator row for one (node, action) pair.
/// Values are addressed through `index(node, layer)`; `nu_mass[b]` is nu_b lambda0_b for
/// action switches (all zero for the primal scheme); `self` is the layer of the flow.
template <typename Index>
void append_step(const Characteristic& ch, double delta, std::size_t node, std::size_t self,
                 const std::vector<double>& nu_mass, Index&& index, Affine& out) {
    double switch_mass = 0;
    for (double w : nu_mass) switch_mass += w;
    const double r0 = ch.lam0 + switch_mass, r1 = ch.lam1 + switch_mass;
    const double rbar = 0.5 * (r0 + r1);
    const StepWeights w = step_weights(delta + rbar, ch.dt);
    const double a0 = w.alpha, a1 = 1 - w.alpha;
    out.constant += w.i0 * (a0 * ch.f0 + a1 * ch.f1);
    const double p = a0 * r0 + a1 * r1;
    const double scale = p > 0 ? rbar * w.i0 / p : 0.0;
    if (scale > 0) {
        for (const Term& q : ch.q0) out.terms.push_back({index(q.node, self), scale * a0 * ch.lam0 * q.weight});
        for (const Term& q : ch.q1) out.terms.push_back({index(q.node, self), scale * a1 * ch.lam1 * q.weight});
        for (std::size_t b = 0; b < nu_mass.size(); ++b) {
            if (nu_mass[b] <= 0) continue;
            out.terms.push_back({index(node, b), scale * a0 * nu_mass[b]});
            for (int c = 0; c < ch.foot.size; ++c)
                out.terms.push_back({index(ch.foot.index[c], b), scale * a1 * nu_mass[b] * ch.foot.weight[c]});
        }
    }
    for (int c = 0; c < ch.foot.size; ++c)
        out.terms.push_back({index(ch.foot.index[c], self), w.decay * ch.foot.weight[c]});
}

/// Howard policy iteration on rows v[r] = min_d Affine(r, d)(v).
struct PolicyProblem {
    std::size_t rows = 0;
    std::function<int(std::size_t row)> decisions;
    std::function<void(std::size_t row, int decision, Affine& out)> affine;
};

Eigen::VectorXd howard_solve(const PolicyProblem& problem, const Eigen::VectorXd& v0, const GridConfig& cfg,
                             SolveDiagnostics& diag, std::vector<int>& policy);

class SemiLagrangian {
public:
    SemiLagrangian(const LocalCharacteristics& chars, const GridConfig& cfg);

    const TensorGrid& grid() const { return grid_; }
    const Characteristic& at(std::size_t node, ActionIndex a) const { return data_[node * m_ + a]; }
    std::size_t num_actions() const { return m_; }
    const SolveDiagnostics& counters() const { return counters_; }

private:
    TensorGrid grid_;
    std::size_t m_;
    std::vector<Characteristic> data_;
    SolveDiagnostics counters_;
};

} // namespace detail
} // namespace pdmp
