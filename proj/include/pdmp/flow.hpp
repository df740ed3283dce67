#pragma once

#include "pdmp/model.hpp"

#include <cmath>
#include <functional>

namespace pdmp {

struct FlowSolverConfig {
    double step = 1e-2;         // Delta t_flow
    double max_elapsed = 1e6;   // guard against runaway integrations
};

namespace detail {

/// Splits [0, t] into full steps plus one shortened final step.
inline void split_steps(double t, double step, long& full, double& rest) {
    full = static_cast<long>(std::floor(t / step));
    rest = t - double(full) * step;
    if (rest < 1e-13 * step) rest = 0;
}

template <typename Scalar>
StateT<Scalar> hermite(const StateT<Scalar>& x0, const StateT<Scalar>& f0, const StateT<Scalar>& x1,
                       const StateT<Scalar>& f1, Scalar dt, Scalar theta) {
    const Scalar t2 = theta * theta, t3 = t2 * theta;
    return (2 * t3 - 3 * t2 + 1) * x0 + (t3 - 2 * t2 + theta) * dt * f0 + (-2 * t3 + 3 * t2) * x1 +
           (t3 - t2) * dt * f1;
}

} // namespace detail

template <typename Scalar>
StateT<Scalar> rk4_step(const LocalCharacteristicsT<Scalar>& c, const StateT<Scalar>& x, ActionIndex a, Scalar dt) {
    const StateT<Scalar> k1 = c.drift(x, a);
    const StateT<Scalar> k2 = c.drift(x + (dt / 2) * k1, a);
    const StateT<Scalar> k3 = c.drift(x + (dt / 2) * k2, a);
    const StateT<Scalar> k4 = c.drift(x + dt * k3, a);
    return x + (dt / 6) * (k1 + 2 * k2 + 2 * k3 + k4);
}

/// phi(t, x, a): action-frozen flow.
template <typename Scalar>
StateT<Scalar> flow(const LocalCharacteristicsT<Scalar>& c, const StateT<Scalar>& x, ActionIndex a, Scalar t,
                    const FlowSolverConfig& cfg = {}) {
    if (t < 0) throw Error("flow: negative time");
    long full;
    double rest;
    detail::split_steps(double(t), cfg.step, full, rest);
    StateT<Scalar> y = x;
    for (long k = 0; k < full; ++k) y = rk4_step(c, y, a, Scalar(cfg.step));
    if (rest > 0) y = rk4_step(c, y, a, Scalar(rest));
    return y;
}

/// phi^beta(t, x) with beta re-read at every RK4 stage time. The last stage reads beta just
/// inside the step, so a switch on a step boundary belongs to the next step.
template <typename Scalar>
StateT<Scalar> flow_policy(const LocalCharacteristicsT<Scalar>& c, const StateT<Scalar>& x,
                           const std::function<ActionIndex(Scalar)>& beta, Scalar t,
                           const FlowSolverConfig& cfg = {}) {
    if (t < 0) throw Error("flow_policy: negative time");
    long full;
    double rest;
    detail::split_steps(double(t), cfg.step, full, rest);
    StateT<Scalar> y = x;
    Scalar s = 0;
    auto step = [&](Scalar dt) {
        const StateT<Scalar> k1 = c.drift(y, beta(s));
        const StateT<Scalar> k2 = c.drift(y + (dt / 2) * k1, beta(s + dt / 2));
        const StateT<Scalar> k3 = c.drift(y + (dt / 2) * k2, beta(s + dt / 2));
        const StateT<Scalar> k4 = c.drift(y + dt * k3, beta(std::nextafter(s + dt, s)));
        y += (dt / 6) * (k1 + 2 * k2 + 2 * k3 + k4);
    };
    for (long k = 0; k < full; ++k) {
        s = Scalar(double(k) * cfg.step);
        step(Scalar(cfg.step));
    }
    if (rest > 0) {
        s = Scalar(double(full) * cfg.step);
        step(Scalar(rest));
    }
    return y;
}

/// Integral of g(r, phi(r,x,a)) over r in [0, s]: Simpson per RK4 step, midpoints from the
/// cubic Hermite interpolant of the step. Writes phi(s,x,a) to `end` when given.
template <typename Scalar, typename G>
Scalar integrate_along_flow(const LocalCharacteristicsT<Scalar>& c, const StateT<Scalar>& x, ActionIndex a, Scalar s,
                            const FlowSolverConfig& cfg, G&& g, StateT<Scalar>* end = nullptr) {
    long full;
    double rest;
    detail::split_steps(double(s), cfg.step, full, rest);
    StateT<Scalar> x0 = x;
    StateT<Scalar> f0 = c.drift(x0, a);
    Scalar g0 = g(Scalar(0), x0);
    Scalar acc = 0;
    auto step = [&](Scalar t0, Scalar dt) {
        const StateT<Scalar> x1 = rk4_step(c, x0, a, dt);
        const StateT<Scalar> f1 = c.drift(x1, a);
        const StateT<Scalar> xm = detail::hermite<Scalar>(x0, f0, x1, f1, dt, Scalar(0.5));
        const Scalar g1 = g(t0 + dt, x1);
        acc += dt / 6 * (g0 + 4 * g(t0 + dt / 2, xm) + g1);
        x0 = x1;
        f0 = f1;
        g0 = g1;
    };
    for (long k = 0; k < full; ++k) step(Scalar(double(k) * cfg.step), Scalar(cfg.step));
    if (rest > 0) step(Scalar(double(full) * cfg.step), Scalar(rest));
    if (end) *end = x0;
    return acc;
}

/// int_0^s [lambda(phi(r,x,a),a) + lambda0_mass] dr.
template <typename Scalar>
Scalar integrated_hazard(const LocalCharacteristicsT<Scalar>& c, Scalar lambda0_mass, const StateT<Scalar>& x,
                         ActionIndex a, Scalar s, const FlowSolverConfig& cfg = {}) {
    if (s < 0) throw Error("integrated_hazard: negative time");
    return integrate_along_flow(c, x, a, s, cfg,
                                [&](Scalar, const StateT<Scalar>& y) { return c.rate(y, a) + lambda0_mass; });
}

} // namespace pdmp
