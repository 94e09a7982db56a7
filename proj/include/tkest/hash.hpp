#pragma once

#include <cstdint>
#include <span>

namespace tkest {

[[nodiscard]] constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept
{
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

/// Stateless keyed hash; the same (seed, value) always maps to the same word.
[[nodiscard]] constexpr std::uint64_t hash64(std::uint64_t seed, std::uint64_t value) noexcept
{
    return splitmix64(seed ^ splitmix64(value));
}

/// FNV-1a over a byte range. Used as the trailing checksum of binary files.
[[nodiscard]] constexpr std::uint64_t fnv1a64(std::span<std::uint8_t const> bytes,
                                              std::uint64_t state = 0xCBF29CE484222325ULL) noexcept
{
    for (auto b : bytes) {
        state ^= b;
        state *= 0x100000001B3ULL;
    }
    return state;
}

}  // namespace tkest
