#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace textaug {

inline constexpr std::uint64_t kFnvOffset = 0xcbf29ce484222325ull;
inline constexpr std::uint64_t kFnvPrime = 0x100000001b3ull;

constexpr std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t state = kFnvOffset) {
    for (unsigned char c : bytes) {
        state ^= c;
        state *= kFnvPrime;
    }
    return state;
}

constexpr std::uint64_t fnv1a64_u64(std::uint64_t value, std::uint64_t state = kFnvOffset) {
    for (int i = 0; i < 8; ++i) {
        state ^= (value >> (8 * i)) & 0xffu;
        state *= kFnvPrime;
    }
    return state;
}

// Finalizer with full avalanche; FNV alone is too weak for sampling decisions.
constexpr std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

inline std::string hex_digest(std::uint64_t value) {
    static constexpr char kDigits[] = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i) {
        out[static_cast<std::size_t>(i)] = kDigits[value & 0xfu];
        value >>= 4;
    }
    return out;
}

// Maps a hash to the open interval (0,1): the half-step lattice never hits
// either endpoint, so threshold comparisons at 0 and 1 are exact.
constexpr double unit_open(std::uint64_t h) {
    return (static_cast<double>(h >> 11) + 0.5) * 0x1p-53;
}

} // namespace textaug
