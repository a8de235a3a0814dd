#pragma once

#include <cstdint>

namespace mfd {

/// Independent child seed for stream `k` of a run seeded with `base`
/// (splitmix64 finalizer over base + k * golden gamma).
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t k) {
    std::uint64_t z = base + (k + 1) * 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

}  // namespace mfd
