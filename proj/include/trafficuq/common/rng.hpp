#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace tuq {

using Rng = std::mt19937_64;

/// SplitMix64 finalizer; used to decorrelate derived seeds.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Seed for a named subsystem stream, so that e.g. arrivals and sensor noise
/// draw from independent generators regardless of call order.
constexpr std::uint64_t stream_seed(std::uint64_t seed, std::string_view stream) noexcept {
    std::uint64_t h = 1469598103934665603ULL;
    for (char c : stream) {
        h ^= static_cast<unsigned char>(c);
        h *= 1099511628211ULL;
    }
    return mix64(seed ^ mix64(h));
}

inline Rng make_rng(std::uint64_t seed, std::string_view stream) { return Rng{stream_seed(seed, stream)}; }

}  // namespace tuq
