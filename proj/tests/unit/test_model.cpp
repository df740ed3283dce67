#include "fixtures.hpp"
#include "oracles.hpp"

#include "pdmp/model.hpp"

#include <doctest.h>

#include <cmath>

using namespace pdmp;
using fixture::pt;

TEST_CASE("constant-cost benchmark satisfies every hypothesis") {
    const Benchmark b = builtin_benchmark("B1_constant_cost");
    const auto rep = validate_hypotheses(b.chars, 500, 3);
    CHECK(rep.all_pass());
    CHECK(rep.get("Hf_upper").measured == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(b.chars.discount == 1.0);
}

TEST_CASE("clipped drift respects its bound") {
    const auto c = fixture::custom([](double x, ActionIndex a) { return std::clamp((a ? 1.0 : -1.0) - x, -2.0, 2.0); },
                                   [](double, ActionIndex) { return 1.0; }, [](double, ActionIndex) { return 1.0; });
    const auto rep = validate_hypotheses(c, 500, 5);
    CHECK(rep.get("HhlQ_drift_bound").measured <= 2.0);
    CHECK(rep.all_pass());
}

TEST_CASE("kernel weights must sum to one") {
    auto c = builtin_benchmark("B1").chars;
    c.kernel.quadrature = [](const State& x, ActionIndex) {
        return std::vector<QuadratureAtom>{{x, 0.5}, {x, 0.6}};
    };
    CHECK_THROWS_AS(validate_hypotheses(c, 10, 1), Error);
}

TEST_CASE("every benchmark passes its hypotheses") {
    for (const auto& name : benchmark_names()) {
        CAPTURE(name);
        CHECK(validate_hypotheses(builtin_benchmark(name).chars, 300, 11).all_pass());
    }
}

TEST_CASE("action measure needs full support") {
    ActionMeasure m{{1.0, 0.0}};
    CHECK_THROWS_AS(m.validate(2), Error);
    CHECK_THROWS_AS(ActionMeasure{{1.0}}.validate(2), Error);
    CHECK_NOTHROW(ActionMeasure::uniform(3).validate(3));
    CHECK(ActionMeasure::uniform(3, 0.5).total() == doctest::Approx(1.5));
}

TEST_CASE("short names resolve to the benchmarks") {
    CHECK(canonical_benchmark_name("B4") == "B4_full_1d");
    CHECK_THROWS_AS(builtin_benchmark("B9"), Error);
}

TEST_CASE("jump-only oracle solves the finite system") {
    const auto o = oracle::jump_only_value(1e-13);
    const auto d = jump_only_data();
    for (std::size_t i = 0; i < 3; ++i) {
        double best = INFINITY;
        for (std::size_t a = 0; a < d.action_value.size(); ++a) {
            double jump = 0;
            for (std::size_t j = 0; j < 3; ++j) jump += d.transition[a](i, j) * (o.value[j] - o.value[i]);
            best = std::min(best, d.rate(d.support[i], a) * jump + d.cost(d.support[i], a));
        }
        CHECK(std::abs(d.discount * o.value[i] - best) < 1e-10);
    }
}

TEST_CASE("deterministic oracle agrees with its time-stepping check") {
    for (double x0 : {-1.5, 0.7}) {
        CAPTURE(x0);
        const double q = oracle::deterministic_value(x0);
        const double dp1 = oracle::deterministic_value_dp(x0, 2e-3, 2e-3);
        const double dp2 = oracle::deterministic_value_dp(x0, 1e-3, 1e-3);
        // first-order scheme: the halved run sits about half as far from the quadrature value
        CHECK(std::abs(dp2 - q) < 2e-3);
        CHECK(std::abs(dp2 - q) <= std::abs(dp1 - q) + 1e-6);
    }
    CHECK(oracle::deterministic_value(0.0) == 0.0);
}
