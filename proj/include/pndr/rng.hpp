#pragma once

#include <cstdint>

namespace pndr {

// Counter-based random numbers: every draw is a pure function of
// (seed, stream, index), so parallel consumers never share state.

constexpr std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

constexpr std::uint64_t hash_counter(std::uint64_t seed, std::uint64_t stream, std::uint64_t index) {
    return splitmix64(splitmix64(splitmix64(seed) ^ stream) ^ index);
}

/// Uniform double in [0, 1) with 53 random bits.
constexpr double uniform01(std::uint64_t seed, std::uint64_t stream, std::uint64_t index) {
    return static_cast<double>(hash_counter(seed, stream, index) >> 11) * 0x1.0p-53;
}

enum class Stream : std::uint64_t {
    Light = 0x4c49,
    Material = 0x4d41,
    Placement = 0x504c,
    Camera = 0x4341,
    IndirectDiffuse = 0x4944,
    IndirectGlossy = 0x4947,
    Shuffle = 0x5348,
    Init = 0x494e,
};

/// Sequential view over one counter stream.
class CounterRng {
public:
    CounterRng(std::uint64_t seed, std::uint64_t stream, std::uint64_t start = 0)
        : seed_(seed), stream_(stream), counter_(start) {}
    CounterRng(std::uint64_t seed, Stream stream, std::uint64_t start = 0)
        : CounterRng(seed, static_cast<std::uint64_t>(stream), start) {}

    double uniform() { return uniform01(seed_, stream_, counter_++); }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    std::uint64_t next_u64() { return hash_counter(seed_, stream_, counter_++); }
    /// Uniform integer in [0, n).
    std::uint64_t below(std::uint64_t n) { return static_cast<std::uint64_t>(uniform() * static_cast<double>(n)); }
    /// Standard normal via Box-Muller (consumes two draws).
    double normal();

private:
    std::uint64_t seed_;
    std::uint64_t stream_;
    std::uint64_t counter_;
};

}  // namespace pndr
