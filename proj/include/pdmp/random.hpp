#pragma once

#include "pdmp/model.hpp"

#include <cmath>
#include <cstdint>

namespace pdmp {

inline std::uint64_t splitmix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Independent stream per (seed, stream, index); the result never depends on scheduling.
inline Rng path_rng(std::uint64_t seed, std::uint64_t index, std::uint64_t stream = 0) {
    const std::uint64_t s = splitmix64(splitmix64(seed ^ splitmix64(stream + 0x5851f42d4c957f2dULL)) + index);
    return Rng(s);
}

/// Uniform on [0,1) with 53 random bits; portable unlike std::uniform_real_distribution.
inline double uniform01(Rng& rng) { return double(rng() >> 11) * 0x1.0p-53; }

inline double exponential1(Rng& rng) { return -std::log1p(-uniform01(rng)); }

/// Index drawn from unnormalized nonnegative weights.
template <typename Weights>
std::size_t categorical(Rng& rng, const Weights& w, double total) {
    const double u = uniform01(rng) * total;
    double acc = 0;
    const std::size_t n = static_cast<std::size_t>(w.size());
    std::size_t last = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (!(w[i] > 0)) continue;
        acc += w[i];
        last = i;
        if (u < acc) return i;
    }
    return last;
}

} // namespace pdmp
