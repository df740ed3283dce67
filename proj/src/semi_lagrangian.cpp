#include "pdmp/semi_lagrangian.hpp"

#include <Eigen/SparseCore>
#include <Eigen/SparseLU>

#include <cmath>
#include <limits>

namespace pdmp::detail {

StepWeights step_weights(double c, double dt) {
    StepWeights w;
    const double x = c * dt;
    w.decay = std::exp(-x);
    if (c <= 0) {
        w.i0 = dt;
        w.alpha = 0.5;
        return w;
    }
    w.i0 = -std::expm1(-x) / c;
    // I1 / dt = (1 - e^{-x}(1 + x)) / x^2, the weight of the end point
    double i1_over_dt;
    if (x < 1e-3) i1_over_dt = 0.5 - x / 3 + x * x / 8 - x * x * x / 30;
    else i1_over_dt = (-std::expm1(-x) - x * w.decay) / (x * x);
    w.alpha = 1 - i1_over_dt * dt / w.i0;
    return w;
}

namespace {

double characteristic_dt(const LocalCharacteristics& chars, const TensorGrid& grid, const State& x, ActionIndex a,
                         const GridConfig& cfg) {
    if (!cfg.characteristic_step) {
        if (cfg.dt_sl > 0) return cfg.dt_sl;
        return chars.bounds.drift > 0 ? grid.min_spacing() / chars.bounds.drift : cfg.dt_max;
    }
    const State h = chars.drift(x, a);
    int k = 0;
    double speed = 0;
    for (int j = 0; j < grid.dim(); ++j) {
        const double s = std::abs(h[j]) / grid.spacing(j);
        if (s > speed) {
            speed = s;
            k = j;
        }
    }
    if (speed * cfg.dt_max <= 1) return cfg.dt_max;
    const double dt0 = 1 / speed;
    const double target = x[k] + (h[k] > 0 ? 1 : -1) * grid.spacing(k);
    FlowSolverConfig fc = cfg.flow;
    double tau = dt0;
    for (int it = 0; it < 8; ++it) {
        fc.step = std::min(cfg.flow.step, tau / 4);
        const State y = flow(chars, x, a, tau, fc);
        const double g = y[k] - target;
        if (std::abs(g) < 1e-13 * grid.spacing(k)) return tau;
        const double slope = chars.drift(y, a)[k];
        if (std::abs(slope) < 1e-12) break;
        const double next = tau - g / slope;
        if (!(next > 0) || next > cfg.dt_max) break;
        tau = next;
    }
    return dt0;
}

} // namespace

SemiLagrangian::SemiLagrangian(const LocalCharacteristics& chars, const GridConfig& cfg)
    : grid_(chars.domain, cfg.dx), m_(chars.num_actions()) {
    if (!cfg.characteristic_step && chars.bounds.drift > 0) {
        const double dt = cfg.dt_sl > 0 ? cfg.dt_sl : grid_.min_spacing() / chars.bounds.drift;
        if (dt > grid_.min_spacing() / chars.bounds.drift * (1 + 1e-12))
            throw Error("grid: CFL violated, dt_sl must be <= dx / M_h");
    }
    data_.resize(grid_.size() * m_);
    auto compose = [&](const State& x, ActionIndex a, std::vector<Term>& out) {
        for (const auto& atom : chars.kernel.quadrature(x, a)) {
            const Stencil s = grid_.locate(atom.point);
            ++counters_.atom_evals;
            if (s.clamped) ++counters_.atom_clamps;
            for (int c = 0; c < s.size; ++c)
                if (s.weight[c] != 0) out.push_back({s.index[c], atom.weight * s.weight[c]});
        }
    };
    for (std::size_t i = 0; i < grid_.size(); ++i) {
        const State x = grid_.node(i);
        for (ActionIndex a = 0; a < m_; ++a) {
            Characteristic& ch = data_[i * m_ + a];
            ch.dt = characteristic_dt(chars, grid_, x, a, cfg);
            FlowSolverConfig fc = cfg.flow;
            fc.step = std::min(cfg.flow.step, ch.dt / 4);
            const State y = flow(chars, x, a, ch.dt, fc);
            ch.foot = grid_.locate(y);
            if (ch.foot.clamped) ++counters_.foot_clamps;
            const State yc = grid_.box().clamp(y);
            ch.f0 = chars.cost(x, a);
            ch.f1 = chars.cost(yc, a);
            ch.lam0 = chars.rate(x, a);
            ch.lam1 = chars.rate(yc, a);
            if (ch.lam0 > 0) compose(x, a, ch.q0);
            if (ch.lam1 > 0) compose(yc, a, ch.q1);
        }
    }
}

Eigen::VectorXd howard_solve(const PolicyProblem& problem, const Eigen::VectorXd& v0, const GridConfig& cfg,
                             SolveDiagnostics& diag, std::vector<int>& policy) {
    const std::size_t R = problem.rows;
    Eigen::VectorXd v = v0;
    policy.assign(R, 0);
    Affine row;
    auto evaluate = [&](const Affine& a, const Eigen::VectorXd& u) {
        double s = a.constant;
        for (const Term& t : a.terms) s += t.weight * u[static_cast<Eigen::Index>(t.node)];
        return s;
    };
    diag.converged = false;
    diag.trace.clear();
    for (int it = 1; it <= cfg.max_iter; ++it) {
        double residual = 0;
        int changes = 0;
        for (std::size_t r = 0; r < R; ++r) {
            const int nd = problem.decisions(r);
            row.clear();
            problem.affine(r, policy[r], row);
            const double current = evaluate(row, v);
            double best = current;
            int arg = policy[r];
            for (int d = 0; d < nd; ++d) {
                if (d == policy[r]) continue;
                row.clear();
                problem.affine(r, d, row);
                const double val = evaluate(row, v);
                // a strict improvement is required to move; ties keep the lower index on the first sweep
                const bool better = val < best - 1e-13 * std::max(1.0, std::abs(best)) ||
                                    (it == 1 && d < arg && val <= best);
                if (better) {
                    best = val;
                    arg = d;
                }
            }
            if (arg != policy[r]) ++changes;
            policy[r] = arg;
            residual = std::max(residual, std::abs(best - v[static_cast<Eigen::Index>(r)]));
        }
        diag.trace.push_back({it, residual, changes});
        diag.iterations = it;
        diag.residual = residual;
        if (residual < cfg.tol) {
            diag.converged = true;
            break;
        }
        std::vector<Eigen::Triplet<double>> trip;
        trip.reserve(R * 24);
        Eigen::VectorXd rhs(static_cast<Eigen::Index>(R));
        for (std::size_t r = 0; r < R; ++r) {
            row.clear();
            problem.affine(r, policy[r], row);
            rhs[static_cast<Eigen::Index>(r)] = row.constant;
            trip.emplace_back(r, r, 1.0);
            for (const Term& t : row.terms) trip.emplace_back(r, t.node, -t.weight);
        }
        Eigen::SparseMatrix<double> A(static_cast<Eigen::Index>(R), static_cast<Eigen::Index>(R));
        A.setFromTriplets(trip.begin(), trip.end());
        Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
        lu.analyzePattern(A);
        lu.factorize(A);
        if (lu.info() != Eigen::Success) throw Error("policy evaluation: singular system");
        Eigen::VectorXd next = lu.solve(rhs);
        for (Eigen::Index r = 0; r < next.size(); ++r)
            if (next[r] > v[r] + 1e-10 * std::max(1.0, std::abs(v[r]))) ++diag.monotone_violations;
        v = std::move(next);
    }
    return v;
}

} // namespace pdmp::detail
