#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace gmpc {

using Rng = std::mt19937_64;

/// Derives an independent stream seed from a root seed, a purpose tag and an
/// index. Every random consumer in the project gets its own stream so that
/// adding draws in one place never shifts another.
std::uint64_t derive_seed(std::uint64_t root, std::string_view tag, std::uint64_t index = 0);

inline Rng make_rng(std::uint64_t root, std::string_view tag, std::uint64_t index = 0) {
    return Rng(derive_seed(root, tag, index));
}

inline double uniform(Rng& rng, double lo, double hi) {
    if (lo == hi) return lo;
    return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline double standard_normal(Rng& rng) { return std::normal_distribution<double>(0.0, 1.0)(rng); }

inline int uniform_int(Rng& rng, int lo, int hi) {
    return std::uniform_int_distribution<int>(lo, hi)(rng);
}

}  // namespace gmpc
