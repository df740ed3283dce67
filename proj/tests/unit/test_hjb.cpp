#include "fixtures.hpp"
#include "oracles.hpp"

#include "pdmp/hjb.hpp"

#include <doctest.h>

#include <cmath>

using namespace pdmp;
using fixture::pt;

namespace {

GridValueFunction constant_values(const LocalCharacteristics& c, double dx, double v) {
    GridValueFunction f(TensorGrid(c.domain, dx), 1);
    f.values.setConstant(v);
    return f;
}

} // namespace

TEST_CASE("Hamiltonian vanishes on exact solutions") {
    SUBCASE("constant cost") {
        const auto c = fixture::custom([](double x, ActionIndex) { return -x; }, [](double, ActionIndex) { return 0.7; },
                                       [](double, ActionIndex) { return 2.0; }, 0.5);
        const auto v = constant_values(c, 0.1, 2.0 / 0.5);
        for (double x : {-2.0, 0.0, 1.3}) CHECK(hamiltonian(c, pt(x), v, pt(0.0)) == 0.0);
    }
    SUBCASE("nothing happens") {
        const auto c = fixture::custom([](double, ActionIndex) { return 1.0; }, [](double, ActionIndex) { return 0.0; },
                                       [](double, ActionIndex) { return 0.0; });
        const auto v = constant_values(c, 0.1, 0.0);
        CHECK(hamiltonian(c, pt(0.5), v, pt(0.0)) == 0.0);
    }
    SUBCASE("jump-only oracle") {
        const Benchmark b = builtin_benchmark("B2");
        const auto o = oracle::jump_only_value();
        GridValueFunction v(TensorGrid(b.chars.domain, 0.05), 1);
        for (std::size_t i = 0; i < v.grid.size(); ++i) {
            const double x = v.grid.node(i)[0];
            // piecewise linear through the support values; only the support is ever read
            const double y = x <= 0 ? o.value[1] + (o.value[1] - o.value[0]) * x : o.value[1] + (o.value[2] - o.value[1]) * x;
            v.values(Eigen::Index(i), 0) = y;
        }
        for (double x : {-1.0, 0.0, 1.0}) CHECK(std::abs(hamiltonian(b.chars, pt(x), v, pt(0.0))) < 1e-8);
    }
}

TEST_CASE("grid solver against the oracles") {
    GridConfig g;
    SUBCASE("constant cost") {
        const auto s = solve_hjb(builtin_benchmark("B1").chars, g);
        CHECK((s.value.values.array() - 1.0).abs().maxCoeff() < 1e-8);
        CHECK(s.diag.converged);
    }
    SUBCASE("jump only") {
        const Benchmark b = builtin_benchmark("B2");
        const auto s = solve_hjb(b.chars, g);
        const auto o = oracle::jump_only_value();
        for (std::size_t i = 0; i < 3; ++i) CHECK(std::abs(s.value(b.oracle_points[i]) - o.value[i]) < 1e-8);
    }
    SUBCASE("deterministic") {
        const Benchmark b = builtin_benchmark("B3");
        const auto s = solve_hjb(b.chars, g);
        for (const auto& x : b.oracle_points) {
            CAPTURE(x[0]);
            CHECK(std::abs(s.value(x) - oracle::deterministic_value(x[0])) < 5e-3);
        }
        // first order in dx
        GridConfig fine = g;
        fine.dx = g.dx / 2;
        const auto sf = solve_hjb(b.chars, fine);
        double ec = 0, ef = 0;
        for (const auto& x : b.oracle_points) {
            ec = std::max(ec, std::abs(s.value(x) - oracle::deterministic_value(x[0])));
            ef = std::max(ef, std::abs(sf.value(x) - oracle::deterministic_value(x[0])));
        }
        CHECK(ef < ec);
    }
}

TEST_CASE("greedy policy") {
    GridConfig g;
    SUBCASE("ties go to the first action") {
        const auto c = fixture::custom([](double x, ActionIndex) { return -x; }, [](double, ActionIndex) { return 1.0; },
                                       [](double x, ActionIndex) { return x * x / 9; });
        const auto s = solve_hjb(c, g);
        const auto gp = policy_extract(c, s.value, g);
        for (auto a : gp.table) CHECK(a == 0);
    }
    SUBCASE("jump-only argmin") {
        const Benchmark b = builtin_benchmark("B2");
        const auto s = solve_hjb(b.chars, g);
        const auto gp = policy_extract(b.chars, s.value, g);
        const auto o = oracle::jump_only_value();
        for (std::size_t i = 0; i < 3; ++i) {
            const auto st = s.value.grid.locate(b.oracle_points[i]);
            std::size_t node = st.index[0];
            for (int c = 0; c < st.size; ++c)
                if (st.weight[c] > 0.5) node = st.index[c];
            CHECK(gp.table[node] == o.argmin[i]);
        }
    }
    SUBCASE("simulated cost of the greedy policy on the full benchmark") {
        const Benchmark b = builtin_benchmark("B4");
        const auto s = solve_hjb(b.chars, g);
        GridConfig fine = g;
        fine.dx = g.dx / 2;
        const auto sf = solve_hjb(b.chars, fine);
        const double grid_err = std::abs(s.value(pt(0)) - sf.value(pt(0)));
        const auto gp = policy_extract(b.chars, sf.value, fine);
        SimulationConfig sim;
        sim.seed = 14;
        sim.flow.step = 0.02;
        const auto chk = greedy_policy_check(b.chars, sf.value, gp, pt(0), sim, 20000);
        const double tail = b.chars.value_bound() * std::exp(-sim.horizon);
        CHECK(chk.cost.mean <= chk.value + grid_err + 3 * chk.cost.se + tail);
        CHECK(chk.cost.mean >= chk.value - 3 * chk.cost.se);
    }
}

TEST_CASE("HJB residual shrinks under refinement") {
    const Benchmark b = builtin_benchmark("B4");
    GridConfig g;
    g.dx = 0.1;
    const auto coarse = solve_hjb(b.chars, g);
    g.dx = 0.05;
    const auto fine = solve_hjb(b.chars, g);
    CHECK(fine.max_hamiltonian < coarse.max_hamiltonian);
}
