#pragma once

#include <cstdint>
#include <random>

namespace tlab {

using Rng = std::mt19937_64;

/// Independent deterministic stream for (seed, worker, step).
inline Rng make_rng(std::uint64_t seed, std::uint64_t worker = 0, std::uint64_t step = 0) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(worker), static_cast<std::uint32_t>(step),
                      static_cast<std::uint32_t>(step >> 32)};
    return Rng(seq);
}

inline std::size_t uniform_index(Rng& rng, std::size_t n) {
    return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
}

inline double uniform_unit(Rng& rng) { return std::uniform_real_distribution<double>(0.0, 1.0)(rng); }

}  // namespace tlab
