#include "pdmp/hjb.hpp"

#include <algorithm>
#include <cmath>

namespace pdmp {

double hamiltonian(const LocalCharacteristics& chars, const State& x, const GridValueFunction& v, const State& grad,
                   std::size_t* clamps) {
    const double vx = v(x);
    double best = -INFINITY;
    for (ActionIndex a = 0; a < chars.num_actions(); ++a) {
        const double lam = chars.rate(x, a);
        double jump = 0;
        if (lam > 0) {
            for (const auto& atom : chars.kernel.quadrature(x, a)) {
                const Stencil s = v.grid.locate(atom.point);
                if (s.clamped && clamps) ++*clamps;
                jump += atom.weight * (v.at(s) - vx);
            }
        }
        const double bracket = chars.discount * vx - chars.drift(x, a).dot(grad) - lam * jump - chars.cost(x, a);
        best = std::max(best, bracket);
    }
    return best;
}

double hamiltonian_upwind(const LocalCharacteristics& chars, const GridValueFunction& v, std::size_t node) {
    const auto& g = v.grid;
    const State x = g.node(node);
    const double vx = v.values(static_cast<Eigen::Index>(node), 0);
    double best = -INFINITY;
    for (ActionIndex a = 0; a < chars.num_actions(); ++a) {
        const State h = chars.drift(x, a);
        State grad(g.dim());
        for (int k = 0; k < g.dim(); ++k) {
            State e = State::Zero(g.dim());
            e[k] = g.spacing(k);
            const bool forward = h[k] > 0 ? (x[k] + e[k] <= g.box().upper[k] + 1e-12)
                                          : (x[k] - e[k] < g.box().lower[k] - 1e-12);
            grad[k] = forward ? (v(x + e) - vx) / e[k] : (vx - v(x - e)) / e[k];
        }
        const double lam = chars.rate(x, a);
        double jump = 0;
        if (lam > 0)
            for (const auto& atom : chars.kernel.quadrature(x, a)) jump += atom.weight * (v(atom.point) - vx);
        best = std::max(best, chars.discount * vx - h.dot(grad) - lam * jump - chars.cost(x, a));
    }
    return best;
}

namespace {

detail::PolicyProblem primal_problem(const LocalCharacteristics& chars, const detail::SemiLagrangian& sl) {
    detail::PolicyProblem p;
    p.rows = sl.grid().size();
    const int m = static_cast<int>(sl.num_actions());
    p.decisions = [m](std::size_t) { return m; };
    const double delta = chars.discount;
    p.affine = [&sl, delta](std::size_t r, int a, detail::Affine& out) {
        static const std::vector<double> none;
        detail::append_step(sl.at(r, static_cast<ActionIndex>(a)), delta, r, 0, none,
                            [](std::size_t node, std::size_t) { return node; }, out);
    };
    return p;
}

std::vector<ActionIndex> greedy_table(const detail::PolicyProblem& p, const Eigen::VectorXd& v) {
    std::vector<ActionIndex> table(p.rows, 0);
    detail::Affine row;
    for (std::size_t r = 0; r < p.rows; ++r) {
        double best = INFINITY;
        for (int a = 0; a < p.decisions(r); ++a) {
            row.clear();
            p.affine(r, a, row);
            double s = row.constant;
            for (const auto& t : row.terms) s += t.weight * v[static_cast<Eigen::Index>(t.node)];
            if (a == 0 || s < best - 1e-12 * std::max(1.0, std::abs(best))) {
                best = s;
                table[r] = static_cast<ActionIndex>(a);
            }
        }
    }
    return table;
}

} // namespace

HjbSolution solve_hjb(const LocalCharacteristics& chars, const GridConfig& cfg) {
    detail::SemiLagrangian sl(chars, cfg);
    const auto problem = primal_problem(chars, sl);
    HjbSolution sol;
    sol.cfg = cfg;
    sol.diag = sl.counters();
    std::vector<int> policy;
    const double bound = chars.value_bound();
    Eigen::VectorXd v0 = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(problem.rows), bound);
    Eigen::VectorXd v = detail::howard_solve(problem, v0, cfg, sol.diag, policy);
    if (!sol.diag.converged)
        throw Error("solve_hjb: no convergence after " + std::to_string(cfg.max_iter) +
                    " sweeps, residual " + std::to_string(sol.diag.residual));
    // the exact scheme stays in [0, M_f/delta]; roundoff from the linear solves is projected back,
    // anything larger is counted and left alone
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        if (v[i] < -1e-12 || v[i] > bound * (1 + 1e-12)) ++sol.diag.value_clamps;
        else v[i] = std::clamp(v[i], 0.0, bound);
    }
    sol.value = GridValueFunction(sl.grid(), 1);
    sol.value.values.col(0) = v;
    sol.policy = greedy_table(problem, v);
    for (std::size_t i = 0; i < sl.grid().size(); ++i)
        if (!sl.grid().on_boundary(i))
            sol.max_hamiltonian = std::max(sol.max_hamiltonian, std::abs(hamiltonian_upwind(chars, sol.value, i)));
    return sol;
}

GreedyPolicy policy_extract(const LocalCharacteristics& chars, const GridValueFunction& V, const GridConfig& cfg) {
    GridConfig c = cfg;
    c.dx = V.grid.min_spacing();
    detail::SemiLagrangian sl(chars, c);
    if (sl.grid().size() != V.grid.size()) throw Error("policy_extract: grid mismatch");
    const auto problem = primal_problem(chars, sl);
    GreedyPolicy g;
    g.table = greedy_table(problem, V.values.col(0));
    const TensorGrid grid = V.grid;
    const std::vector<ActionIndex> table = g.table;
    const double period = chars.bounds.drift > 0 ? grid.min_spacing() / chars.bounds.drift : cfg.dt_max;
    g.policy = PiecewiseOpenLoopPolicy::from_feedback(
        [grid, table](const State& x) {
            const Stencil s = grid.locate(x);
            int best = 0;
            for (int c = 1; c < s.size; ++c)
                if (s.weight[c] > s.weight[best]) best = c;
            return table[s.index[best]];
        },
        period);
    return g;
}

PolicyCheck greedy_policy_check(const LocalCharacteristics& chars, const GridValueFunction& V,
                                const GreedyPolicy& greedy, const State& x, const SimulationConfig& sim,
                                std::size_t n_paths) {
    PolicyCheck out;
    out.cost = primal_cost_mc(chars, greedy.policy, x, sim, n_paths);
    out.value = V(x);
    return out;
}

} // namespace pdmp
