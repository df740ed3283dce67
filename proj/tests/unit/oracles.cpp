#include "oracles.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <algorithm>
#include <cmath>
#include <limits>

namespace oracle {

using pdmp::ActionIndex;

FiniteMdp jump_only_value(double tol) {
    const auto d = pdmp::jump_only_data();
    const std::size_t k = d.support.size(), m = d.transition.size();
    FiniteMdp out;
    out.value.assign(k, 0.0);
    out.argmin.assign(k, 0);
    for (int it = 0; it < 100000; ++it) {
        std::vector<double> next(k);
        double change = 0;
        for (std::size_t i = 0; i < k; ++i) {
            double best = std::numeric_limits<double>::infinity();
            for (std::size_t a = 0; a < m; ++a) {
                const double x = d.support[i];
                double ev = 0;
                for (std::size_t j = 0; j < k; ++j) ev += d.transition[a](i, j) * out.value[j];
                const double lam = d.rate(x, a);
                const double q = (d.cost(x, a) + lam * ev) / (d.discount + lam);
                if (q < best - 1e-15) {
                    best = q;
                    out.argmin[i] = a;
                }
            }
            next[i] = best;
            change = std::max(change, std::abs(best - out.value[i]));
        }
        out.value = next;
        out.iterations = it + 1;
        if (change < tol) break;
    }
    return out;
}

std::vector<std::vector<double>> jump_only_penalized(double n, double lambda0_mass, double tol) {
    const auto d = pdmp::jump_only_data();
    const std::size_t k = d.support.size(), m = d.transition.size();
    std::vector<std::vector<double>> v(m, std::vector<double>(k, 0.0));
    for (int it = 0; it < 1000000; ++it) {
        auto next = v;
        double change = 0;
        for (std::size_t a = 0; a < m; ++a) {
            for (std::size_t i = 0; i < k; ++i) {
                const double x = d.support[i];
                double ev = 0;
                for (std::size_t j = 0; j < k; ++j) ev += d.transition[a](i, j) * v[a][j];
                const double lam = d.rate(x, a);
                // switching to b at rate n lambda0 is used exactly when it lowers the value
                double num = d.cost(x, a) + lam * ev, den = d.discount + lam;
                for (std::size_t b = 0; b < m; ++b) {
                    if (b == a || v[b][i] >= v[a][i]) continue;
                    num += n * lambda0_mass * v[b][i];
                    den += n * lambda0_mass;
                }
                next[a][i] = num / den;
                change = std::max(change, std::abs(next[a][i] - v[a][i]));
            }
        }
        v = next;
        if (change < tol) break;
    }
    return v;
}

double deterministic_value(double x0) {
    if (x0 == 0) return 0;
    const double u0 = std::atanh(std::abs(x0) / 2);
    const double t_hit = 2 * u0;
    auto integrand = [&](double t) {
        const double x = 2 * std::tanh(u0 - t / 2);
        return std::exp(-t) * x * x;
    };
    return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(integrand, 0.0, t_hit, 15, 1e-14);
}

double deterministic_value_dp(double x0, double dx, double dt) {
    const double lo = -2, hi = 2;
    const std::size_t nodes = static_cast<std::size_t>(std::lround((hi - lo) / dx)) + 1;
    std::vector<double> v(nodes, 0.0), next(nodes);
    auto interp = [&](double x) {
        x = std::clamp(x, lo, hi);
        const double r = (x - lo) / dx;
        const std::size_t i = std::min(nodes - 2, static_cast<std::size_t>(std::floor(r)));
        const double w = r - double(i);
        return (1 - w) * v[i] + w * v[i + 1];
    };
    const double disc = std::exp(-dt);
    for (int it = 0; it < 200000; ++it) {
        double change = 0;
        for (std::size_t i = 0; i < nodes; ++i) {
            const double x = lo + dx * double(i);
            double best = std::numeric_limits<double>::infinity();
            for (double a : {-1.0, 0.0, 1.0}) {
                // midpoint rule for the running cost, explicit Heun step for the flow
                const double k1 = a * (1 - x * x / 4);
                const double xp = x + dt * k1;
                const double k2 = a * (1 - xp * xp / 4);
                const double y = x + dt * (k1 + k2) / 2;
                const double xm = (x + y) / 2;
                best = std::min(best, dt * xm * xm * std::exp(-dt / 2) + disc * interp(y));
            }
            next[i] = best;
            change = std::max(change, std::abs(best - v[i]));
        }
        v.swap(next);
        if (change < 1e-12) break;
    }
    return interp(x0);
}

} // namespace oracle
