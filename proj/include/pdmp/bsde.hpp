#pragma once

#include "pdmp/grid.hpp"
#include "pdmp/model.hpp"
#include "pdmp/semi_lagrangian.hpp"
#include "pdmp/simulate.hpp"
#include "pdmp/stats.hpp"

#include <Eigen/Core>

#include <vector>

namespace pdmp {

/// v^n on grid x actions: delta v = h.grad v + lambda int (v(y,a) - v(x,a)) Q + f - n int [v(x,b) - v(x,a)]^- lambda0(db).
struct PenalizedGridSolution {
    double n = 1;
    GridValueFunction values;  // one layer per action
    SolveDiagnostics diag;
    GridConfig cfg;
};

PenalizedGridSolution penalized_grid_solve(const LocalCharacteristics& chars, const ActionMeasure& lambda0, double n,
                                           const GridConfig& cfg);

struct LimitOptions {
    bool extrapolate = false;          // Richardson in 1/n from the last two doubling entries
    bool require_convergence = true;   // throw when the schedule runs out
};

struct MaximalLimit {
    GridValueFunction value;                      // limit estimate, one layer per action
    std::vector<PenalizedGridSolution> solutions;  // along the schedule
    std::vector<double> sup_change;               // ||v^{n_k} - v^{n_{k-1}}||_inf, k >= 1
    Eigen::VectorXd spread;                       // per node, of `value`
    bool converged = false;
    double converged_at = 0;
    bool extrapolated = false;
    std::size_t monotone_violations = 0;          // nodes with v^{n_k} > v^{n_{k-1}} + 1e-8

    double max_spread() const { return spread.size() ? spread.maxCoeff() : 0.0; }
};

MaximalLimit maximal_limit(const LocalCharacteristics& chars, const ActionMeasure& lambda0, const GridConfig& cfg,
                           const std::vector<double>& n_schedule, double tol, const LimitOptions& opt = {});

/// Lemma-4.5 style control from a penalized solution: n where v(x,b) <= v(x,a), small elsewhere.
IntensityControl penalized_feedback_control(const PenalizedGridSolution& sol, double eps);

enum class BasisKind { legendre, bspline };

struct PicardConfig {
    double T = 6;
    std::size_t train_paths = 40000;
    std::size_t eval_paths = 100000;
    int k_max = 3;           // Picard iterations per mesh time
    BasisKind basis = BasisKind::bspline;
    int degree = 5;          // total degree of the Legendre basis
    int cells = 24;          // cubic B-spline cells per axis
    double ridge = 1e-4;     // relative to trace / basis size, centred on the previous coefficients
    double dt_max = 0.05;
    double train_spread = 1.5;  // half-width of the initial state law for training paths
    int bootstrap = 200;
    int replicates = 1;      // independent training and evaluation sets; above 1 the SE is taken across them
};

/// Nonzero basis functions at one point.
struct BasisTerms {
    std::vector<Eigen::Index> index;
    std::vector<double> weight;
};

/// Per-action regression table over the box, one coefficient matrix per mesh time.
struct RegressionTable {
    Box box;
    BasisKind kind = BasisKind::bspline;
    std::vector<std::vector<int>> exponents;   // Legendre multi-indices
    int cells = 0;                             // B-spline cells per axis
    std::vector<Eigen::MatrixXd> coef;         // per mesh time: basis x actions

    void configure(const Box& b, const PicardConfig& cfg);
    std::size_t basis_size() const;
    void terms(const State& x, BasisTerms& out) const;
    void basis(const State& x, Eigen::VectorXd& out) const;  // dense
    double value(std::size_t step, const BasisTerms& t, ActionIndex a) const {
        double v = 0;
        const auto col = static_cast<Eigen::Index>(a);
        for (std::size_t k = 0; k < t.index.size(); ++k) v += t.weight[k] * coef[step](t.index[k], col);
        return v;
    }
    void values(std::size_t step, const BasisTerms& t, Eigen::VectorXd& out) const {
        out.setZero(coef[step].cols());
        for (std::size_t k = 0; k < t.index.size(); ++k) out += t.weight[k] * coef[step].row(t.index[k]).transpose();
    }
};

struct PicardRun {
    double n = 1;
    double T = 0;
    int k_max = 0;
    double dt = 0;
    std::size_t steps = 0;
    State x;
    ActionIndex a = 0;
    Estimate y0;                                // mean with bootstrap standard error, or the replicate SE
    std::vector<double> replicate_y0;           // per-replicate means when replicates > 1
    Estimate k_over_n;                          // E[K_T] / n on the evaluation paths
    std::vector<GridValueFunction> sweep_tables;  // Y^{n,T,k} at t = 0 on the grid, k = 1..k_max
    std::vector<double> sweep_change;           // sup change at t = 0 between consecutive iterates
    std::vector<double> k_increment_mean;       // mean K increment per mesh step
    std::size_t bound_violations = 0;           // table values outside [-tol, M_f/delta + tol] on visited nodes
    std::size_t ridge_bumps = 0;
    RegressionTable table;
    LocalCharacteristics chars;
    ActionMeasure lambda0;
};

PicardRun picard_mc_solve(const LocalCharacteristics& chars, const ActionMeasure& lambda0, double n, const State& x,
                          ActionIndex a, const PicardConfig& cfg, const SimulationConfig& sim);

/// X at the mesh times t_i = i * dt, i = 0..steps-1, of a randomized path.
void sample_on_mesh(const MarkedPointPath& path, const LocalCharacteristics& chars, double dt, std::size_t steps,
                    std::vector<State>& xs, std::vector<ActionIndex>& as);

/// G = E[int_0^T int [Z_s(X_s, b)]^- lambda0(db) ds] on fresh reference paths from the run's start.
Estimate constraint_violation(const PicardRun& run, const SimulationConfig& sim, std::size_t n_paths);

/// Same functional for a grid solution, along reference paths from (x, a) up to T.
Estimate constraint_violation(const PenalizedGridSolution& sol, const LocalCharacteristics& chars,
                              const ActionMeasure& lambda0, const State& x, ActionIndex a, double T,
                              const SimulationConfig& sim, std::size_t n_paths);

} // namespace pdmp
