#include "pdmp/stats.hpp"
#include "pdmp/model.hpp"
#include "pdmp/random.hpp"

#include <boost/math/distributions/chi_squared.hpp>

#include <cmath>

namespace pdmp {

Estimate mean_se(std::span<const double> xs) {
    Estimate e;
    e.samples = xs.size();
    if (xs.empty()) return e;
    double s = 0;
    for (double x : xs) s += x;
    e.mean = s / double(xs.size());
    if (xs.size() < 2) return e;
    double q = 0;
    for (double x : xs) q += (x - e.mean) * (x - e.mean);
    e.se = std::sqrt(q / double(xs.size() - 1) / double(xs.size()));
    return e;
}

double z_score(const Estimate& a, const Estimate& b) {
    const double s = std::sqrt(a.se * a.se + b.se * b.se);
    const double diff = std::abs(a.mean - b.mean);
    if (s == 0) return diff == 0 ? 0.0 : INFINITY;
    return diff / s;
}

double kolmogorov_tail(double lambda) {
    if (lambda < 0.2) return 1.0;
    double sum = 0, sign = 1;
    for (int k = 1; k <= 100; ++k) {
        const double term = sign * std::exp(-2.0 * k * k * lambda * lambda);
        sum += term;
        if (std::abs(term) < 1e-16) break;
        sign = -sign;
    }
    return std::clamp(2.0 * sum, 0.0, 1.0);
}

TestResult ks_test_two_sample(std::vector<double> a, std::vector<double> b) {
    if (a.empty() || b.empty()) throw Error("ks_test_two_sample: empty sample");
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    const double na = double(a.size()), nb = double(b.size());
    std::size_t i = 0, j = 0;
    double d = 0;
    while (i < a.size() && j < b.size()) {
        const double x = std::min(a[i], b[j]);
        while (i < a.size() && a[i] <= x) ++i;
        while (j < b.size() && b[j] <= x) ++j;
        d = std::max(d, std::abs(double(i) / na - double(j) / nb));
    }
    const double ne = std::sqrt(na * nb / (na + nb));
    return {d, kolmogorov_tail((ne + 0.12 + 0.11 / ne) * d)};
}

TestResult chi_square_test(std::span<const std::size_t> counts, std::span<const double> probs) {
    if (counts.size() != probs.size() || counts.size() < 2) throw Error("chi_square_test: bad sizes");
    double n = 0;
    for (auto c : counts) n += double(c);
    if (n == 0) throw Error("chi_square_test: no observations");
    double stat = 0;
    for (std::size_t i = 0; i < counts.size(); ++i) {
        const double e = n * probs[i];
        stat += (double(counts[i]) - e) * (double(counts[i]) - e) / e;
    }
    boost::math::chi_squared dist(double(counts.size() - 1));
    return {stat, boost::math::cdf(boost::math::complement(dist, stat))};
}

double bootstrap_se(std::span<const double> xs, int resamples, std::uint64_t seed) {
    if (xs.size() < 2) return 0;
    const std::size_t n = xs.size();
    std::vector<double> means(resamples);
    for (int r = 0; r < resamples; ++r) {
        Rng rng = path_rng(seed, std::uint64_t(r), 91);
        double s = 0;
        for (std::size_t i = 0; i < n; ++i) s += xs[rng() % n];
        means[r] = s / double(n);
    }
    return mean_se(means).se * std::sqrt(double(resamples));
}

LineFit fit_line(std::span<const double> x, std::span<const double> y) {
    const double n = double(x.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sx += x[i];
        sy += y[i];
        sxx += x[i] * x[i];
        sxy += x[i] * y[i];
    }
    LineFit f;
    f.slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    f.intercept = (sy - f.slope * sx) / n;
    return f;
}

} // namespace pdmp
