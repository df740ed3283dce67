#pragma once

#include "pdmp/model.hpp"

#include <functional>

namespace fixture {

inline pdmp::State pt(double x) {
    pdmp::State s(1);
    s << x;
    return s;
}

/// B1's box, actions and kernel with the given drift, rate and cost.
inline pdmp::LocalCharacteristics custom(std::function<double(double, pdmp::ActionIndex)> drift,
                                         std::function<double(double, pdmp::ActionIndex)> rate,
                                         std::function<double(double, pdmp::ActionIndex)> cost,
                                         double discount = 1.0) {
    auto c = pdmp::builtin_benchmark("B1").chars;
    c.name = "custom";
    c.drift = [drift](const pdmp::State& x, pdmp::ActionIndex a) { return pt(drift(x[0], a)); };
    c.rate = [rate](const pdmp::State& x, pdmp::ActionIndex a) { return rate(x[0], a); };
    c.cost = [cost](const pdmp::State& x, pdmp::ActionIndex a) { return cost(x[0], a); };
    c.discount = discount;
    c.bounds = {2.0, 1.0, 0.0, 0.0};
    for (double x = -3; x <= 3; x += 0.01)
        for (pdmp::ActionIndex a = 0; a < c.num_actions(); ++a) {
            c.bounds.drift = std::max(c.bounds.drift, std::abs(drift(x, a)));
            c.bounds.rate = std::max(c.bounds.rate, rate(x, a));
            c.bounds.cost = std::max(c.bounds.cost, cost(x, a));
        }
    return c;
}

} // namespace fixture
