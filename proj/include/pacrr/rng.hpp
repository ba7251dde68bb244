#pragma once

#include <cstdint>
#include <random>

namespace pacrr {

// std::uniform_*_distribution differ between standard libraries; these helpers
// keep seeded runs identical everywhere mt19937_64 is.
using Rng = std::mt19937_64;

/// Uniform integer in [0, n). Requires n > 0.
inline std::uint64_t uniform_index(Rng& rng, std::uint64_t n) {
    const std::uint64_t limit = Rng::max() - (Rng::max() % n + 1) % n;
    std::uint64_t draw = rng();
    while (draw > limit) {
        draw = rng();
    }
    return draw % n;
}

/// Uniform real in [0, 1) with 53 random bits.
inline double uniform_unit(Rng& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline double uniform_real(Rng& rng, double lo, double hi) {
    return lo + (hi - lo) * uniform_unit(rng);
}

}  // namespace pacrr
