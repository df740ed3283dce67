#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace pdmp {

struct Estimate {
    double mean = 0;
    double se = 0;
    std::size_t samples = 0;
};

Estimate mean_se(std::span<const double> xs);

/// |a - b| measured in units of the combined standard error.
double z_score(const Estimate& a, const Estimate& b);

struct TestResult {
    double statistic = 0;
    double p_value = 1;
};

/// Asymptotic Kolmogorov distribution tail, Q(l) = 2 sum (-1)^{k-1} exp(-2 k^2 l^2).
double kolmogorov_tail(double lambda);

/// One-sample KS test of xs against a continuous cdf.
template <typename Cdf>
TestResult ks_test(std::vector<double> xs, Cdf&& cdf);

TestResult ks_test_two_sample(std::vector<double> a, std::vector<double> b);

/// Pearson chi-square goodness of fit of counts against probabilities.
TestResult chi_square_test(std::span<const std::size_t> counts, std::span<const double> probs);

/// Bootstrap standard error of the mean.
double bootstrap_se(std::span<const double> xs, int resamples, std::uint64_t seed);

/// Least-squares slope and intercept of y on x.
struct LineFit {
    double slope = 0;
    double intercept = 0;
};
LineFit fit_line(std::span<const double> x, std::span<const double> y);

} // namespace pdmp

#include <algorithm>
#include <cmath>

namespace pdmp {

template <typename Cdf>
TestResult ks_test(std::vector<double> xs, Cdf&& cdf) {
    std::sort(xs.begin(), xs.end());
    const double n = double(xs.size());
    double d = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double f = cdf(xs[i]);
        d = std::max({d, f - double(i) / n, double(i + 1) / n - f});
    }
    const double sn = std::sqrt(n);
    return {d, kolmogorov_tail((sn + 0.12 + 0.11 / sn) * d)};
}

} // namespace pdmp
