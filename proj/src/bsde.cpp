#include "pdmp/bsde.hpp"
#include "pdmp/parallel.hpp"
#include "pdmp/random.hpp"

#include <algorithm>
#include <Eigen/Cholesky>

#include <cmath>
#include <cstdint>
#include <iostream>

namespace pdmp {

namespace {

std::vector<double> penalty_levels(double n, int extra) {
    std::vector<double> lv{0.0, n};
    for (int k = 1; k <= extra; ++k) lv.push_back(n / std::ldexp(1.0, k));
    return lv;
}

} // namespace

PenalizedGridSolution penalized_grid_solve(const LocalCharacteristics& chars, const ActionMeasure& lambda0, double n,
                                           const GridConfig& cfg) {
    if (!(n >= 1)) throw Error("penalized_grid_solve: n must be >= 1");
    const std::size_t m = chars.num_actions();
    lambda0.validate(m);
    detail::SemiLagrangian sl(chars, cfg);
    const std::vector<double> levels = penalty_levels(n, cfg.nu_levels);
    const std::size_t L = levels.size();
    std::size_t combos = 1;
    for (std::size_t k = 0; k + 1 < m; ++k) combos *= L;
    if (combos > 1u << 16) throw Error("penalized_grid_solve: too many penalty combinations");

    detail::PolicyProblem p;
    p.rows = sl.grid().size() * m;
    p.decisions = [combos](std::size_t) { return static_cast<int>(combos); };
    const double delta = chars.discount;
    p.affine = [&, m, L](std::size_t r, int d, detail::Affine& out) {
        const std::size_t node = r / m, a = r % m;
        thread_local std::vector<double> nu_mass;
        nu_mass.assign(m, 0.0);
        std::size_t code = static_cast<std::size_t>(d);
        for (std::size_t b = 0; b < m; ++b) {
            if (b == a) continue;
            nu_mass[b] = levels[code % L] * lambda0.weights[b];
            code /= L;
        }
        detail::append_step(sl.at(node, a), delta, node, a, nu_mass,
                            [m](std::size_t nd, std::size_t layer) { return nd * m + layer; }, out);
    };

    PenalizedGridSolution sol;
    sol.n = n;
    sol.cfg = cfg;
    sol.diag = sl.counters();
    const double bound = chars.value_bound();
    std::vector<int> policy;
    Eigen::VectorXd v = detail::howard_solve(p, Eigen::VectorXd::Constant(static_cast<Eigen::Index>(p.rows), bound),
                                             cfg, sol.diag, policy);
    if (!sol.diag.converged)
        throw Error("penalized_grid_solve: no convergence for n = " + std::to_string(n) + ", residual " +
                    std::to_string(sol.diag.residual));
    // the exact scheme stays in [0, M_f/delta]; roundoff from the linear solves is projected back,
    // anything larger is counted and left alone
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        if (v[i] < -1e-12 || v[i] > bound * (1 + 1e-12)) ++sol.diag.value_clamps;
        else v[i] = std::clamp(v[i], 0.0, bound);
    }
    sol.values = GridValueFunction(sl.grid(), static_cast<Eigen::Index>(m));
    for (std::size_t node = 0; node < sl.grid().size(); ++node)
        for (std::size_t a = 0; a < m; ++a)
            sol.values.values(static_cast<Eigen::Index>(node), static_cast<Eigen::Index>(a)) =
                v[static_cast<Eigen::Index>(node * m + a)];
    return sol;
}

MaximalLimit maximal_limit(const LocalCharacteristics& chars, const ActionMeasure& lambda0, const GridConfig& cfg,
                           const std::vector<double>& n_schedule, double tol, const LimitOptions& opt) {
    if (n_schedule.empty()) throw Error("maximal_limit: empty schedule");
    for (std::size_t k = 1; k < n_schedule.size(); ++k)
        if (!(n_schedule[k] > n_schedule[k - 1])) throw Error("maximal_limit: schedule must be increasing");
    MaximalLimit out;
    GridValueFunction::Values prev_limit;
    for (std::size_t k = 0; k < n_schedule.size(); ++k) {
        out.solutions.push_back(penalized_grid_solve(chars, lambda0, n_schedule[k], cfg));
        const auto& cur = out.solutions.back().values.values;
        GridValueFunction::Values limit = cur;
        bool extrapolated = false;
        if (k > 0) {
            const auto& prev = out.solutions[k - 1].values.values;
            out.monotone_violations += static_cast<std::size_t>(((cur.array() - prev.array()) > 1e-8).count());
            if (opt.extrapolate) {
                const double r = n_schedule[k] / n_schedule[k - 1];
                limit = (r * cur - prev) / (r - 1);
                extrapolated = true;
            }
        }
        if (k > 0 && (!opt.extrapolate || k > 1)) {
            const double change = (limit - prev_limit).cwiseAbs().maxCoeff();
            out.sup_change.push_back(change);
            if (change < tol && !out.converged) {
                out.converged = true;
                out.converged_at = n_schedule[k];
            }
        } else if (k > 0) {
            out.sup_change.push_back((cur - out.solutions[k - 1].values.values).cwiseAbs().maxCoeff());
        }
        prev_limit = limit;
        out.value = out.solutions.back().values;
        out.value.values = limit;
        out.extrapolated = extrapolated;
        if (out.converged) break;
    }
    // constant problems converge at the first entry
    if (!out.converged && n_schedule.size() == 1) out.converged = true;
    if (!out.converged && out.solutions.size() == 1) out.converged = true;
    if (!out.converged && opt.require_convergence)
        throw Error("maximal_limit: schedule exhausted before convergence (last change " +
                    std::to_string(out.sup_change.empty() ? 0.0 : out.sup_change.back()) + ")");
    out.spread = out.value.spread();
    return out;
}

IntensityControl penalized_feedback_control(const PenalizedGridSolution& sol, double eps) {
    if (!(eps > 0)) throw Error("penalized_feedback_control: eps must be positive");
    const GridValueFunction v = sol.values;
    const double n = sol.n;
    IntensityControl nu;
    nu.label = "zsign_n" + std::to_string(static_cast<int>(n));
    nu.rate = [v, n, eps](const IntensityContext& c, ActionIndex b) {
        const Stencil s = v.grid.locate(c.state);
        const double z = v.at(s, static_cast<Eigen::Index>(b)) - v.at(s, static_cast<Eigen::Index>(c.action));
        if (z <= 0) return n;
        if (z < 1) return eps;
        return eps / z;
    };
    nu.nu_min = eps / std::max(1.0, v.values.maxCoeff());
    nu.nu_max = n;
    return nu;
}

namespace {

std::vector<std::vector<int>> total_degree(int d, int degree) {
    std::vector<std::vector<int>> out;
    std::vector<int> e(d, 0);
    std::function<void(int, int)> rec = [&](int k, int left) {
        if (k == d) {
            out.push_back(e);
            return;
        }
        for (int p = 0; p <= left; ++p) {
            e[k] = p;
            rec(k + 1, left - p);
        }
        e[k] = 0;
    };
    rec(0, degree);
    return out;
}

/// Per-action normal equations of a least-squares fit.
struct Normal {
    std::vector<Eigen::MatrixXd> gram;
    std::vector<Eigen::VectorXd> rhs;
    std::vector<std::size_t> count;
    Normal(std::size_t m, Eigen::Index K)
        : gram(m, Eigen::MatrixXd::Zero(K, K)), rhs(m, Eigen::VectorXd::Zero(K)), count(m, 0) {}
    void add(const Normal& o) {
        for (std::size_t a = 0; a < gram.size(); ++a) {
            gram[a] += o.gram[a];
            rhs[a] += o.rhs[a];
            count[a] += o.count[a];
        }
    }
};

constexpr std::size_t kChunks = 64;

void eval_all(const Eigen::MatrixXd& C, const BasisTerms& t, Eigen::VectorXd& out) {
    out.setZero(C.cols());
    for (std::size_t k = 0; k < t.index.size(); ++k) out += t.weight[k] * C.row(t.index[k]).transpose();
}

struct Driver {
    const LocalCharacteristics& chars;
    const ActionMeasure& lambda0;
    double n;

    /// f - sum_b lambda0_b (n [psi_b]^- + psi_b), the driver without its linear -delta v part;
    /// also returns sum lambda0_b [psi_b]^-. Differences at roundoff level count as zero.
    double operator()(const State& x, ActionIndex a, const Eigen::VectorXd& vhat, double& neg) const {
        const double eps = 1e-12 * chars.value_bound();
        neg = 0;
        double lin = 0;
        for (std::size_t b = 0; b < lambda0.size(); ++b) {
            double psi = vhat[static_cast<Eigen::Index>(b)] - vhat[static_cast<Eigen::Index>(a)];
            if (std::abs(psi) <= eps) psi = 0;
            if (psi < 0) neg -= lambda0.weights[b] * psi;
            lin += lambda0.weights[b] * psi;
        }
        return chars.cost(x, a) - n * neg - lin;
    }
};

} // namespace

void RegressionTable::configure(const Box& b, const PicardConfig& cfg) {
    box = b;
    kind = cfg.basis;
    exponents.clear();
    cells = 0;
    if (kind == BasisKind::legendre) {
        exponents = total_degree(b.dim(), cfg.degree);
    } else {
        if (cfg.cells < 1) throw Error("picard_mc_solve: B-spline cells must be positive");
        cells = cfg.cells;
    }
}

std::size_t RegressionTable::basis_size() const {
    if (kind == BasisKind::legendre) return exponents.size();
    std::size_t k = 1;
    for (int i = 0; i < box.dim(); ++i) k *= static_cast<std::size_t>(cells + 3);
    return k;
}

void RegressionTable::terms(const State& x, BasisTerms& out) const {
    const int d = box.dim();
    out.index.clear();
    out.weight.clear();
    if (kind == BasisKind::legendre) {
        int pmax = 0;
        for (const auto& e : exponents)
            for (int p : e) pmax = std::max(pmax, p);
        thread_local std::vector<double> leg;
        leg.assign(static_cast<std::size_t>(d * (pmax + 1)), 0.0);
        for (int k = 0; k < d; ++k) {
            double z = (2 * x[k] - box.lower[k] - box.upper[k]) / (box.upper[k] - box.lower[k]);
            z = std::clamp(z, -1.0, 1.0);
            double* P = &leg[static_cast<std::size_t>(k * (pmax + 1))];
            P[0] = 1;
            if (pmax >= 1) P[1] = z;
            for (int p = 2; p <= pmax; ++p) P[p] = ((2 * p - 1) * z * P[p - 1] - (p - 1) * P[p - 2]) / p;
        }
        for (std::size_t j = 0; j < exponents.size(); ++j) {
            double v = 1;
            for (int k = 0; k < d; ++k) v *= leg[static_cast<std::size_t>(k * (pmax + 1) + exponents[j][k])];
            out.index.push_back(static_cast<Eigen::Index>(j));
            out.weight.push_back(v);
        }
        return;
    }
    // uniform cubic B-splines, 4 per axis, tensor product
    const Eigen::Index stride_base = cells + 3;
    Eigen::Index first[kMaxDim];
    double w[kMaxDim][4];
    for (int k = 0; k < d; ++k) {
        const double h = (box.upper[k] - box.lower[k]) / cells;
        const double u = std::clamp((x[k] - box.lower[k]) / h, 0.0, double(cells));
        const int c = std::min(cells - 1, static_cast<int>(std::floor(u)));
        const double t = u - c, t2 = t * t, t3 = t2 * t;
        first[k] = c;
        w[k][0] = (1 - t) * (1 - t) * (1 - t) / 6;
        w[k][1] = (3 * t3 - 6 * t2 + 4) / 6;
        w[k][2] = (-3 * t3 + 3 * t2 + 3 * t + 1) / 6;
        w[k][3] = t3 / 6;
    }
    int combos = 1;
    for (int k = 0; k < d; ++k) combos *= 4;
    for (int c = 0; c < combos; ++c) {
        Eigen::Index idx = 0, stride = 1;
        double v = 1;
        int r = c;
        for (int k = 0; k < d; ++k) {
            const int o = r % 4;
            r /= 4;
            idx += (first[k] + o) * stride;
            stride *= stride_base;
            v *= w[k][o];
        }
        out.index.push_back(idx);
        out.weight.push_back(v);
    }
}

void RegressionTable::basis(const State& x, Eigen::VectorXd& out) const {
    BasisTerms t;
    terms(x, t);
    out.setZero(static_cast<Eigen::Index>(basis_size()));
    for (std::size_t k = 0; k < t.index.size(); ++k) out[t.index[k]] += t.weight[k];
}

void sample_on_mesh(const MarkedPointPath& path, const LocalCharacteristics& chars, double dt, std::size_t steps,
                    std::vector<State>& xs, std::vector<ActionIndex>& as) {
    xs.resize(steps);
    as.resize(steps);
    std::size_t i = 0;
    FlowSolverConfig fc;
    fc.step = dt;
    for_each_segment(path, double(steps) * dt, [&](std::size_t, double t0, const State& x0, ActionIndex a, double t1) {
        State y = x0;
        double s = t0;
        while (i < steps && double(i) * dt < t1) {
            const double ti = double(i) * dt;
            if (ti > s) {
                y = flow(chars, y, a, ti - s, fc);
                s = ti;
            }
            xs[i] = y;
            as[i] = a;
            ++i;
        }
    });
    // segments end exactly at the horizon; fill any rounding gap from the last state
    for (; i < steps; ++i) {
        xs[i] = xs[i > 0 ? i - 1 : 0];
        as[i] = as[i > 0 ? i - 1 : 0];
    }
}

namespace {

PicardRun picard_single(const LocalCharacteristics& chars, const ActionMeasure& lambda0, double n, const State& x,
                        ActionIndex a, const PicardConfig& cfg, const SimulationConfig& sim) {
    const std::size_t m = chars.num_actions();
    lambda0.validate(m);
    if (!(cfg.T > 0)) throw Error("picard_mc_solve: horizon must be positive");
    PicardRun run;
    run.n = n;
    run.T = cfg.T;
    run.k_max = cfg.k_max;
    run.x = x;
    run.a = a;
    run.chars = chars;
    run.lambda0 = lambda0;
    const double mass = lambda0.total();
    const double dt_target = std::min(cfg.dt_max, 0.1 / (chars.bounds.rate + n * mass));
    const std::size_t N = static_cast<std::size_t>(std::ceil(cfg.T / dt_target - 1e-9));
    const double dt = cfg.T / double(N);
    run.dt = dt;
    // exponential integrator for the linear -delta Y part: constants are carried exactly
    const double decay = std::exp(-chars.discount * dt);
    const double phi = -std::expm1(-chars.discount * dt) / chars.discount;
    run.steps = N;

    RegressionTable& table = run.table;
    table.configure(chars.domain, cfg);
    const Eigen::Index K = static_cast<Eigen::Index>(table.basis_size());
    if (cfg.train_paths < static_cast<std::size_t>(K) * m * 20)
        throw Error("picard_mc_solve: too few training paths for the basis");
    table.coef.assign(N + 1, Eigen::MatrixXd::Zero(K, static_cast<Eigen::Index>(m)));

    // training paths from a spread initial law
    const std::size_t M = cfg.train_paths;
    const int d = chars.dim;
    std::vector<float> X(M * N * static_cast<std::size_t>(d));
    std::vector<std::uint8_t> I(M * N);
    SimulationConfig tr = sim;
    tr.horizon = cfg.T;
    tr.stream = sim.stream + 1000;
    parallel_for(M, sim.threads, [&](std::size_t j) {
        Rng rng = path_rng(sim.seed, j, sim.stream + 2000);
        State x0(d);
        for (int k = 0; k < d; ++k) {
            const double lo = std::max(chars.domain.lower[k], x[k] - cfg.train_spread);
            const double hi = std::min(chars.domain.upper[k], x[k] + cfg.train_spread);
            x0[k] = lo + uniform01(rng) * (hi - lo);
        }
        const ActionIndex a0 = static_cast<ActionIndex>(rng() % m);
        const auto path = sample_randomized_path(chars, lambda0, x0, a0, tr, j);
        std::vector<State> xs;
        std::vector<ActionIndex> as;
        sample_on_mesh(path, chars, dt, N, xs, as);
        for (std::size_t i = 0; i < N; ++i) {
            for (int k = 0; k < d; ++k) X[(j * N + i) * d + k] = static_cast<float>(xs[i][k]);
            I[j * N + i] = static_cast<std::uint8_t>(as[i]);
        }
    });

    const Driver driver{chars, lambda0, n};
    std::vector<double> next(M, 0.0);  // v-hat_{i+1}(X_{i+1}, I_{i+1}), zero at the horizon
    TensorGrid report_grid(chars.domain, std::min(0.05, (chars.domain.upper - chars.domain.lower).minCoeff() / 20));
    const double bound = chars.value_bound();
    auto load = [&](std::size_t j, std::size_t i, State& y) {
        y.resize(d);
        for (int k = 0; k < d; ++k) y[k] = X[(j * N + i) * d + k];
    };
    // coefficients of the constant function; the same vector picks the sum of all basis functions
    Eigen::VectorXd constant = Eigen::VectorXd::Zero(K);
    if (cfg.basis == BasisKind::bspline) {
        constant.setOnes();
    } else {
        for (std::size_t j = 0; j < table.exponents.size(); ++j)
            if (std::all_of(table.exponents[j].begin(), table.exponents[j].end(), [](int p) { return p == 0; }))
                constant[static_cast<Eigen::Index>(j)] = 1;
    }
    auto solve_normal = [&](const Normal& ne, const Eigen::MatrixXd& fallback) {
        Eigen::MatrixXd c = fallback;
        for (std::size_t b = 0; b < m; ++b) {
            if (ne.count[b] == 0) continue;
            const Eigen::MatrixXd& G = ne.gram[b];
            double ridge = cfg.ridge * G.trace() / double(K);
            for (int attempt = 0; attempt < 6; ++attempt) {
                Eigen::LDLT<Eigen::MatrixXd> ldlt(G + ridge * Eigen::MatrixXd::Identity(K, K));
                // ridge centred on the previous coefficients moved by the mean residual, so unvisited
                // functions keep their shape and a constant target is fitted exactly
                const auto col = static_cast<Eigen::Index>(b);
                const double shift =
                    constant.dot(ne.rhs[b] - G * fallback.col(col)) / double(ne.count[b]);
                const Eigen::VectorXd prior = fallback.col(col) + shift * constant;
                const Eigen::VectorXd sol = ldlt.solve(ne.rhs[b] + ridge * prior);
                if (ldlt.info() == Eigen::Success && ldlt.isPositive() && sol.allFinite()) {
                    c.col(static_cast<Eigen::Index>(b)) = sol;
                    break;
                }
                ridge *= 100;
                ++run.ridge_bumps;
                std::cerr << "warning: regression ill-conditioned, ridge raised to " << ridge << '\n';
            }
        }
        return c;
    };

    run.sweep_tables.clear();
    for (std::size_t i = N; i-- > 0;) {
        Eigen::MatrixXd cur = table.coef[i + 1];
        for (int k = 1; k <= cfg.k_max; ++k) {
            std::vector<Normal> parts(kChunks, Normal(m, K));
            parallel_for(kChunks, sim.threads, [&](std::size_t c) {
                Normal& ne = parts[c];
                BasisTerms bt;
                Eigen::VectorXd vhat;
                State y;
                for (std::size_t j = M * c / kChunks; j < M * (c + 1) / kChunks; ++j) {
                    load(j, i, y);
                    const ActionIndex aj = I[j * N + i];
                    table.terms(y, bt);
                    eval_all(cur, bt, vhat);
                    double neg;
                    const double target = decay * next[j] + phi * driver(y, aj, vhat, neg);
                    Eigen::MatrixXd& G = ne.gram[aj];
                    Eigen::VectorXd& r = ne.rhs[aj];
                    for (std::size_t p = 0; p < bt.index.size(); ++p) {
                        const double wp = bt.weight[p];
                        r[bt.index[p]] += target * wp;
                        for (std::size_t q = 0; q < bt.index.size(); ++q) {
                            // lower triangle only
                            if (bt.index[q] > bt.index[p]) continue;
                            G(bt.index[p], bt.index[q]) += wp * bt.weight[q];
                        }
                    }
                    ++ne.count[aj];
                }
            });
            Normal total(m, K);
            for (const auto& part : parts) total.add(part);
            for (auto& G : total.gram) {
                const Eigen::MatrixXd full = G.selfadjointView<Eigen::Lower>();
                G = full;
            }
            cur = solve_normal(total, cur);
            if (i == 0) {
                GridValueFunction g(report_grid, static_cast<Eigen::Index>(m));
                BasisTerms bt;
                Eigen::VectorXd vals;
                for (std::size_t node = 0; node < report_grid.size(); ++node) {
                    table.terms(report_grid.node(node), bt);
                    eval_all(cur, bt, vals);
                    g.values.row(static_cast<Eigen::Index>(node)) = vals.transpose();
                }
                // change and bound check on the nodes covered by the initial law
                double change = 0;
                for (std::size_t node = 0; node < report_grid.size(); ++node) {
                    const State z = report_grid.node(node);
                    if (((z - x).cwiseAbs().array() > cfg.train_spread).any()) continue;
                    for (std::size_t b = 0; b < m; ++b) {
                        const auto r = static_cast<Eigen::Index>(node), col = static_cast<Eigen::Index>(b);
                        const double val = g.values(r, col);
                        if (val < -1e-6 * bound || val > bound * (1 + 1e-6)) ++run.bound_violations;
                        if (!run.sweep_tables.empty())
                            change = std::max(change, std::abs(val - run.sweep_tables.back().values(r, col)));
                    }
                }
                if (!run.sweep_tables.empty()) run.sweep_change.push_back(change);
                run.sweep_tables.push_back(std::move(g));
            }
        }
        table.coef[i] = cur;
        parallel_for(kChunks, sim.threads, [&](std::size_t c) {
            BasisTerms bt;
            State y;
            for (std::size_t j = M * c / kChunks; j < M * (c + 1) / kChunks; ++j) {
                load(j, i, y);
                table.terms(y, bt);
                next[j] = table.value(i, bt, I[j * N + i]);
            }
        });
    }

    // evaluation on fresh paths from (x, a) with the tables frozen
    const std::size_t E = cfg.eval_paths;
    std::vector<double> y0(E), kn(E);
    std::vector<Eigen::VectorXd> kinc(kChunks, Eigen::VectorXd::Zero(static_cast<Eigen::Index>(N)));
    SimulationConfig ev = sim;
    ev.horizon = cfg.T;
    ev.stream = sim.stream + 3000;
    parallel_for(kChunks, sim.threads, [&](std::size_t c) {
        std::vector<State> xs;
        std::vector<ActionIndex> as;
        BasisTerms bt;
        Eigen::VectorXd vhat;
        for (std::size_t j = E * c / kChunks; j < E * (c + 1) / kChunks; ++j) {
            const auto path = sample_randomized_path(chars, lambda0, x, a, ev, j);
            sample_on_mesh(path, chars, dt, N, xs, as);
            double s = 0, kk = 0;
            for (std::size_t i = 0; i < N; ++i) {
                table.terms(xs[i], bt);
                table.values(i, bt, vhat);
                double neg;
                s += std::exp(-chars.discount * dt * double(i)) * phi * driver(xs[i], as[i], vhat, neg);
                kk += dt * neg;
                kinc[c][static_cast<Eigen::Index>(i)] += n * dt * neg;
            }
            y0[j] = s;
            kn[j] = kk;
        }
    });
    run.y0 = mean_se(y0);
    run.y0.se = bootstrap_se(y0, cfg.bootstrap, sim.seed ^ 0x9e37ULL);
    run.k_over_n = mean_se(kn);
    Eigen::VectorXd ksum = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(N));
    for (const auto& part : kinc) ksum += part;
    ksum /= double(E);
    run.k_increment_mean.assign(ksum.data(), ksum.data() + ksum.size());
    return run;
}

} // namespace

PicardRun picard_mc_solve(const LocalCharacteristics& chars, const ActionMeasure& lambda0, double n, const State& x,
                          ActionIndex a, const PicardConfig& cfg, const SimulationConfig& sim) {
    if (cfg.replicates <= 1) return picard_single(chars, lambda0, n, x, a, cfg, sim);
    // the bootstrap over evaluation paths holds the regression tables fixed; their training noise only shows up
    // across independent replicates
    const auto R = static_cast<std::size_t>(cfg.replicates);
    PicardConfig each = cfg;
    each.eval_paths = (cfg.eval_paths + R - 1) / R;
    PicardRun run;
    std::vector<double> kn;
    for (std::size_t r = 0; r < R; ++r) {
        SimulationConfig s = sim;
        s.stream = sim.stream + 10000 * r;
        PicardRun one = picard_single(chars, lambda0, n, x, a, each, s);
        run.replicate_y0.push_back(one.y0.mean);
        kn.push_back(one.k_over_n.mean);
        if (r == 0) {
            run = std::move(one);
            run.replicate_y0 = {run.y0.mean};
            for (auto& k : run.k_increment_mean) k /= double(R);
            continue;
        }
        run.bound_violations += one.bound_violations;
        run.ridge_bumps += one.ridge_bumps;
        for (std::size_t i = 0; i < run.k_increment_mean.size(); ++i)
            run.k_increment_mean[i] += one.k_increment_mean[i] / double(R);
    }
    run.y0 = mean_se(run.replicate_y0);
    run.k_over_n = mean_se(kn);
    return run;
}

Estimate constraint_violation(const PicardRun& run, const SimulationConfig& sim, std::size_t n_paths) {
    const Driver driver{run.chars, run.lambda0, run.n};
    SimulationConfig ev = sim;
    ev.horizon = run.T;
    ev.stream = sim.stream + 4000;
    std::vector<double> g(n_paths);
    parallel_for(kChunks, sim.threads, [&](std::size_t c) {
        std::vector<State> xs;
        std::vector<ActionIndex> as;
        BasisTerms bt;
        Eigen::VectorXd vhat;
        for (std::size_t j = n_paths * c / kChunks; j < n_paths * (c + 1) / kChunks; ++j) {
            const auto path = sample_randomized_path(run.chars, run.lambda0, run.x, run.a, ev, j);
            sample_on_mesh(path, run.chars, run.dt, run.steps, xs, as);
            double acc = 0;
            for (std::size_t i = 0; i < run.steps; ++i) {
                run.table.terms(xs[i], bt);
                run.table.values(i, bt, vhat);
                double neg;
                driver(xs[i], as[i], vhat, neg);
                acc += run.dt * neg;
            }
            g[j] = acc;
        }
    });
    return mean_se(g);
}

Estimate constraint_violation(const PenalizedGridSolution& sol, const LocalCharacteristics& chars,
                              const ActionMeasure& lambda0, const State& x, ActionIndex a, double T,
                              const SimulationConfig& sim, std::size_t n_paths) {
    SimulationConfig ev = sim;
    ev.horizon = T;
    ev.stream = sim.stream + 5000;
    const auto& v = sol.values;
    std::vector<double> g(n_paths);
    parallel_for(n_paths, sim.threads, [&](std::size_t j) {
        const auto path = sample_randomized_path(chars, lambda0, x, a, ev, j);
        double acc = 0;
        for_each_segment(path, T, [&](std::size_t, double t0, const State& x0, ActionIndex ai, double t1) {
            acc += integrate_along_flow(chars, x0, ai, t1 - t0, ev.flow, [&](double, const State& y) {
                const Stencil s = v.grid.locate(y);
                const double own = v.at(s, static_cast<Eigen::Index>(ai));
                double neg = 0;
                for (std::size_t b = 0; b < lambda0.size(); ++b) {
                    const double z = v.at(s, static_cast<Eigen::Index>(b)) - own;
                    if (z < 0) neg -= lambda0.weights[b] * z;
                }
                return neg;
            });
        });
        g[j] = acc;
    });
    return mean_se(g);
}

} // namespace pdmp
