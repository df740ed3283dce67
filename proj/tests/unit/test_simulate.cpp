#include "fixtures.hpp"
#include "oracles.hpp"

#include "pdmp/simulate.hpp"
#include "pdmp/stats.hpp"

#include <doctest.h>

#include <cmath>

using namespace pdmp;
using fixture::pt;

namespace {

std::vector<double> first_jumps(const std::vector<MarkedPointPath>& paths) {
    std::vector<double> t;
    for (const auto& p : paths) t.push_back(p.records.empty() ? p.horizon : p.records.front().time);
    return t;
}

auto exp_cdf(double rate) {
    return [rate](double s) { return 1 - std::exp(-rate * s); };
}

const auto zero = [](double, ActionIndex) { return 0.0; };
const auto one = [](double, ActionIndex) { return 1.0; };

} // namespace

TEST_CASE("no rate, no jumps") {
    const Benchmark b = builtin_benchmark("B3");
    SimulationConfig sim;
    const auto p = sample_primal_path(b.chars, PiecewiseOpenLoopPolicy::constant(0), pt(0.5), sim, 0);
    CHECK(p.records.empty());
    CHECK(p.horizon == sim.horizon);
}

TEST_CASE("constant rate gives exponential first jumps") {
    const auto c = fixture::custom([](double x, ActionIndex) { return -x; }, [](double, ActionIndex) { return 2.0; }, one);
    SimulationConfig sim;
    sim.seed = 17;
    std::vector<double> t;
    for (std::size_t i = 0; i < 100000; ++i) {
        const auto p = sample_primal_path(c, PiecewiseOpenLoopPolicy::constant(1), pt(0), sim, i);
        t.push_back(p.records.empty() ? sim.horizon : p.records.front().time);
    }
    CHECK(ks_test(t, exp_cdf(2.0)).p_value > 0.01);
}

TEST_CASE("jump-only benchmark under the oracle policy") {
    const Benchmark b = builtin_benchmark("B2");
    const auto o = oracle::jump_only_value();
    const auto d = jump_only_data();
    const auto table = o.argmin;
    const auto pol = PiecewiseOpenLoopPolicy::from_feedback(
        [d, table](const State& x) {
            for (std::size_t i = 0; i < d.support.size(); ++i)
                if (std::abs(d.support[i] - x[0]) < 1e-9) return table[i];
            throw Error("off support");
        },
        1.0);
    SimulationConfig sim;
    sim.seed = 5;
    sim.horizon = 30;
    const auto e = primal_cost_mc(b.chars, pol, pt(d.support[2]), sim, 100000);
    CHECK(std::abs(e.mean - o.value[2]) < 3 * e.se + b.chars.value_bound() * std::exp(-0.5 * sim.horizon));
}

TEST_CASE("randomized sampler") {
    SUBCASE("pure action resampling") {
        const auto c = fixture::custom([](double, ActionIndex a) { return a ? 0.5 : -0.5; }, zero, one);
        const ActionMeasure l0{{1.0, 2.0}};
        SimulationConfig sim;
        sim.seed = 3;
        const auto paths = sample_randomized_paths(c, l0, pt(0), 0, sim, 100000);
        CHECK(ks_test(first_jumps(paths), exp_cdf(3.0)).p_value > 0.01);
        for (std::size_t i = 0; i < 200; ++i) {
            const auto& p = paths[i];
            REQUIRE(!p.records.empty());
            const auto& r = p.records.front();
            CHECK(r.kind == JumpKind::action);
            CHECK(std::abs(r.state[0] - (-0.5 * r.time)) < 1e-12);
        }
    }
    SUBCASE("state and action jumps split evenly at equal rates") {
        const auto c = fixture::custom(zero, one, one);
        const ActionMeasure l0{{0.5, 0.5}};
        SimulationConfig sim;
        sim.seed = 9;
        sim.horizon = 10;
        std::size_t state = 0, total = 0;
        for (std::size_t i = 0; total < 100000; ++i)
            for (const auto& r : sample_randomized_path(c, l0, pt(0), 0, sim, i).records) {
                state += r.kind == JumpKind::state;
                ++total;
            }
        const double share = double(state) / double(total);
        CHECK(share > 0.497);
        CHECK(share < 0.503);
    }
    SUBCASE("action jumps keep the flowed state") {
        const Benchmark b = builtin_benchmark("B4");
        SimulationConfig sim;
        for (std::size_t i = 0; i < 300; ++i) {
            const auto p = sample_randomized_path(b.chars, b.lambda0, pt(0.3), 2, sim, i);
            if (p.records.empty() || p.records.front().kind != JumpKind::action) continue;
            const State y = flow(b.chars, pt(0.3), 2, p.records.front().time, sim.flow);
            CHECK(std::abs(p.records.front().state[0] - y[0]) < 1e-12);
        }
    }
    SUBCASE("bad start") {
        const Benchmark b = builtin_benchmark("B4");
        CHECK_THROWS_AS(sample_randomized_path(b.chars, b.lambda0, pt(5), 0, {}, 0), Error);
        CHECK_THROWS_AS(sample_randomized_path(b.chars, b.lambda0, pt(0), 7, {}, 0), Error);
    }
}

TEST_CASE("thinning bound below the true rate aborts") {
    const Benchmark b = builtin_benchmark("B4");
    SimulationConfig sim;
    sim.thinning_bound = 0.1;
    CHECK_THROWS_AS(
        for (std::size_t i = 0; i < 100; ++i) sample_primal_path(b.chars, PiecewiseOpenLoopPolicy::constant(2), pt(0),
                                                                 sim, i),
        Error);
}

TEST_CASE("compensator residual") {
    const TestFunction unit = [](double, const State&, ActionIndex) { return 1.0; };
    SUBCASE("Poisson count minus intensity") {
        const auto c = fixture::custom(zero, zero, one);
        const ActionMeasure l0{{1.5, 1.5}};
        SimulationConfig sim;
        sim.horizon = 1;
        const auto paths = sample_randomized_paths(c, l0, pt(0), 0, sim, 20000);
        const auto r = compensator_residual(paths, c, l0, unit, 1.0);
        CHECK(std::abs(r.mean) < 3 * r.se);
    }
    SUBCASE("full benchmark") {
        const Benchmark b = builtin_benchmark("B4");
        SimulationConfig sim;
        sim.horizon = 2;
        sim.seed = 21;
        const auto paths = sample_randomized_paths(b.chars, b.lambda0, pt(0), 0, sim, 100000);
        const auto r = compensator_residual(paths, b.chars, b.lambda0, unit, 2.0, sim.flow);
        CHECK(std::abs(r.mean) < 3 * r.se);
    }
    SUBCASE("empty set") {
        const Benchmark b = builtin_benchmark("B4");
        CHECK_THROWS_AS(compensator_residual({}, b.chars, b.lambda0, unit, 1.0), Error);
    }
}

TEST_CASE("discounted cost") {
    SimulationConfig sim;
    SUBCASE("unit cost") {
        const Benchmark b = builtin_benchmark("B1");
        const auto pol = PiecewiseOpenLoopPolicy::constant(0);
        const auto p = sample_primal_path(b.chars, pol, pt(0), sim, 0);
        const auto v = discounted_cost(p, b.chars, CostMode::primal(pol), sim.flow);
        CHECK(std::abs(v.value - (1 - std::exp(-20.0))) < 1e-9);
        CHECK(v.tail_bound == doctest::Approx(std::exp(-20.0)));
    }
    SUBCASE("zero cost") {
        const auto c = fixture::custom(zero, one, zero);
        const auto pol = PiecewiseOpenLoopPolicy::constant(1);
        CHECK(discounted_cost(sample_primal_path(c, pol, pt(0), sim, 0), c, CostMode::primal(pol)).value == 0.0);
    }
    SUBCASE("deterministic benchmark under the bang-bang policy") {
        const Benchmark b = builtin_benchmark("B3");
        FlowSolverConfig fc;
        fc.step = 1e-3;
        for (double x0 : {1.0, -1.5}) {
            CAPTURE(x0);
            // head for the origin at full speed, then stay; the hitting time is 2 artanh(|x0| / 2)
            const double hit = 2 * std::atanh(std::abs(x0) / 2);
            const ActionIndex towards = x0 > 0 ? 0 : 2;
            PiecewiseOpenLoopPolicy pol;
            pol.rule = [hit, towards](std::size_t, double t, const State&) -> ActionIndex {
                return t < hit ? towards : 1;
            };
            SimulationConfig s2 = sim;
            s2.flow = fc;
            const auto p = sample_primal_path(b.chars, pol, pt(x0), s2, 0);
            const auto v = discounted_cost(p, b.chars, CostMode::primal(pol), fc);
            CHECK(std::abs(v.value - oracle::deterministic_value(x0)) < 1e-6);
        }
    }
}

TEST_CASE("paths CSV is reproducible") {
    const Benchmark b = builtin_benchmark("B4");
    SimulationConfig sim;
    sim.seed = 99;
    auto run = [&](int threads) {
        sim.threads = threads;
        std::ostringstream os;
        write_paths_csv(os, sample_randomized_paths(b.chars, b.lambda0, pt(0.1), 1, sim, 500));
        return os.str();
    };
    const std::string one_thread = run(1);
    CHECK(one_thread == run(1));
    CHECK(one_thread == run(3));
    sim.seed = 100;
    CHECK(one_thread != run(1));
}
