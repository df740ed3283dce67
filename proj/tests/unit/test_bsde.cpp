#include "fixtures.hpp"
#include "oracles.hpp"

#include "pdmp/bsde.hpp"
#include "pdmp/hjb.hpp"

#include <doctest.h>

#include <cmath>

using namespace pdmp;
using fixture::pt;

TEST_CASE("penalized grid solution of the jump-only benchmark") {
    const Benchmark b = builtin_benchmark("B2");
    GridConfig g;
    for (double n : {1.0, 4.0, 32.0}) {
        CAPTURE(n);
        const auto sol = penalized_grid_solve(b.chars, b.lambda0, n, g);
        const auto ref = oracle::jump_only_penalized(n, 1.0);
        for (std::size_t i = 0; i < 3; ++i)
            for (std::size_t a = 0; a < 2; ++a)
                CHECK(std::abs(sol.values(b.oracle_points[i], Eigen::Index(a)) - ref[a][i]) < 1e-8);
    }
    const auto o = oracle::jump_only_value();
    const auto big = penalized_grid_solve(b.chars, b.lambda0, 1024, g);
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t a = 0; a < 2; ++a) CHECK(std::abs(big.values(b.oracle_points[i], Eigen::Index(a)) - o.value[i]) < 1e-3);
}

TEST_CASE("maximal limit") {
    GridConfig g;
    SUBCASE("constant cost converges at once") {
        const Benchmark b = builtin_benchmark("B1");
        const auto lim = maximal_limit(b.chars, b.lambda0, g, {1, 2, 4}, 1e-3);
        CHECK(lim.converged);
        CHECK((lim.solutions.front().values.values.array() - 1.0).abs().maxCoeff() < 1e-10);
        CHECK(lim.max_spread() < 1e-10);
    }
    SUBCASE("jump only matches the oracle") {
        const Benchmark b = builtin_benchmark("B2");
        std::vector<double> sched;
        for (double n = 1; n <= 4096; n *= 2) sched.push_back(n);
        const auto lim = maximal_limit(b.chars, b.lambda0, g, sched, 1e-3);
        const auto o = oracle::jump_only_value();
        for (std::size_t i = 0; i < 3; ++i)
            for (Eigen::Index a = 0; a < 2; ++a) CHECK(std::abs(lim.value(b.oracle_points[i], a) - o.value[i]) < 5e-3);
        CHECK(lim.max_spread() < 5e-3);
        CHECK(lim.monotone_violations == 0);
    }
    SUBCASE("full benchmark agrees with the primal grid") {
        const Benchmark b = builtin_benchmark("B4");
        LimitOptions lo;
        lo.extrapolate = true;
        lo.require_convergence = false;
        const auto lim = maximal_limit(b.chars, b.lambda0, g, {1, 2, 4, 8, 16, 32}, 1e-3, lo);
        const auto h = solve_hjb(b.chars, g);
        for (double x = -2.4; x <= 2.4; x += 0.3)
            for (Eigen::Index a = 0; a < 3; ++a) CHECK(std::abs(lim.value(pt(x), a) - h.value(pt(x))) < 1e-2);
    }
    SUBCASE("unconverged schedule is an error when convergence is required") {
        const Benchmark b = builtin_benchmark("B4");
        CHECK_THROWS_AS(maximal_limit(b.chars, b.lambda0, g, {1, 2}, 1e-6), Error);
    }
}

TEST_CASE("regression bases") {
    const Benchmark b = builtin_benchmark("B4");
    PicardConfig pc;
    RegressionTable t;
    t.configure(b.chars.domain, pc);
    CHECK(t.basis_size() == std::size_t(pc.cells + 3));
    BasisTerms bt;
    for (double x : {-3.0, -1.234, 0.0, 2.999, 3.0}) {
        t.terms(pt(x), bt);
        double s = 0;
        for (double w : bt.weight) s += w;
        CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(bt.index.size() == 4);
    }
    pc.basis = BasisKind::legendre;
    pc.degree = 5;
    t.configure(b.chars.domain, pc);
    CHECK(t.basis_size() == 6);
}

TEST_CASE("Picard regression with constant cost") {
    const Benchmark b = builtin_benchmark("B1");
    PicardConfig pc;
    pc.T = 2;
    pc.train_paths = 2000;
    pc.eval_paths = 2000;
    pc.bootstrap = 50;
    SimulationConfig sim;
    const auto run = picard_mc_solve(b.chars, b.lambda0, 2, pt(0), 0, pc, sim);
    const double exact = 1 - std::exp(-2.0);
    CHECK(std::abs(run.y0.mean - exact) <= 3 * run.y0.se + 1e-9);
    CHECK(run.k_over_n.mean == 0.0);
    CHECK(constraint_violation(run, sim, 500).mean == 0.0);
    CHECK(run.bound_violations == 0);

    SUBCASE("replicates average independent runs") {
        pc.replicates = 3;
        const auto rep = picard_mc_solve(b.chars, b.lambda0, 2, pt(0), 0, pc, sim);
        REQUIRE(rep.replicate_y0.size() == 3);
        double mean = 0;
        for (double y : rep.replicate_y0) mean += y / 3;
        CHECK(rep.y0.mean == doctest::Approx(mean).epsilon(1e-12));
        CHECK(std::abs(rep.y0.mean - exact) <= 3 * rep.y0.se + 1e-9);
        CHECK(rep.y0.samples == 3);
    }
}

TEST_CASE("constraint violation") {
    SimulationConfig sim;
    GridConfig g;
    SUBCASE("constant cost") {
        const Benchmark b = builtin_benchmark("B1");
        const auto sol = penalized_grid_solve(b.chars, b.lambda0, 3, g);
        CHECK(constraint_violation(sol, b.chars, b.lambda0, pt(0), 1, 1.0, sim, 500).mean == 0.0);
    }
    SUBCASE("nonnegative Z-field") {
        const Benchmark b = builtin_benchmark("B4");
        auto sol = penalized_grid_solve(b.chars, b.lambda0, 3, g);
        for (Eigen::Index i = 0; i < sol.values.values.rows(); ++i) sol.values.values.row(i).setConstant(0.5);
        CHECK(constraint_violation(sol, b.chars, b.lambda0, pt(0), 1, 1.0, sim, 500).mean == 0.0);
    }
    SUBCASE("decreasing in n with n G bounded") {
        const Benchmark b = builtin_benchmark("B4");
        const double T = 1;
        // E[K_T] <= sup Y + T sup |delta Y - f| <= M_f / delta + T M_f
        const double C = b.chars.bounds.cost / b.chars.discount + T * b.chars.bounds.cost;
        double prev = INFINITY;
        for (double n : {1.0, 2.0, 4.0, 8.0, 16.0}) {
            CAPTURE(n);
            const auto sol = penalized_grid_solve(b.chars, b.lambda0, n, g);
            const double G = constraint_violation(sol, b.chars, b.lambda0, pt(0), 0, T, sim, 4000).mean;
            CHECK(G < prev);
            CHECK(n * G <= C);
            prev = G;
        }
    }
}

TEST_CASE("Picard regression on the full benchmark") {
    const Benchmark b = builtin_benchmark("B4");
    PicardConfig pc;
    pc.T = 4;
    pc.train_paths = 10000;
    pc.eval_paths = 10000;
    pc.bootstrap = 50;
    SimulationConfig sim;
    sim.flow.step = 0.05;
    sim.seed = 6;
    const auto run = picard_mc_solve(b.chars, b.lambda0, 4, pt(0), 0, pc, sim);
    GridConfig g;
    const auto sol = penalized_grid_solve(b.chars, b.lambda0, 4, g);
    // truncation at T = 4 moves the value by at most e^{-4} M_f / delta; 0.01 covers the regression error at this size
    const double trunc = std::exp(-4.0) * b.chars.value_bound();
    CHECK(std::abs(run.y0.mean - sol.values(pt(0), 0)) < trunc + 0.01 + 3 * run.y0.se);
    CHECK(run.sweep_tables.size() == std::size_t(pc.k_max));
    CHECK(run.bound_violations == 0);
}

TEST_CASE("doubling the penalty lowers the full-benchmark solution") {
    const Benchmark b = builtin_benchmark("B4");
    GridConfig g;
    const auto v1 = penalized_grid_solve(b.chars, b.lambda0, 1, g);
    const auto v2 = penalized_grid_solve(b.chars, b.lambda0, 2, g);
    CHECK((v2.values.values - v1.values.values).maxCoeff() <= 1e-8);
}
