#pragma once
// Deterministic sampling helpers. std::mt19937_64 is fully specified by
// the standard; the std distributions are not, so the mappings from raw
// engine output to indices/doubles are spelled out here. Two runs with
// the same seed produce the same draws on any platform.

#include <cmath>
#include <cstdint>
#include <random>

namespace ptod {

// Unbiased index in [0, n) via rejection sampling.
inline size_t uniform_index(std::mt19937_64& rng, size_t n) {
    if (n == 0) return 0;
    uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    uint64_t x;
    do {
        x = rng();
    } while (x >= limit);
    return static_cast<size_t>(x % n);
}

// Uniform double in [0, 1) with 53 bits of precision.
inline double uniform01(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// Standard normal via Box-Muller. Draws two uniforms per call.
inline double gaussian(std::mt19937_64& rng) {
    double u1 = uniform01(rng);
    double u2 = uniform01(rng);
    if (u1 <= 0.0) u1 = 0x1.0p-53;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

}  // namespace ptod
