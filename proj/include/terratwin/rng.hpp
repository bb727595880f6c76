#pragma once
// Deterministic randomness: splitmix64 seed mixing plus PCG32 streams.
// Every stochastic stage derives its own stream from (seed, tags...), so
// results are independent of scheduling and call order elsewhere.

#include <cstdint>
#include <initializer_list>

namespace terratwin {

inline constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Chain a seed with any number of tag values.
inline constexpr std::uint64_t mix_seed(std::uint64_t seed,
                                        std::initializer_list<std::uint64_t> tags) noexcept {
    std::uint64_t h = splitmix64(seed);
    for (std::uint64_t t : tags)
        h = splitmix64(h ^ splitmix64(t + 0x9e3779b97f4a7c15ULL));
    return h;
}

// Minimal PCG32 (O'Neill): 64-bit state, 32-bit output.
class Pcg32 {
public:
    Pcg32() : Pcg32(0x853c49e6748fea9bULL) {}
    explicit Pcg32(std::uint64_t seed, std::uint64_t seq = 0xda3e39cb94b95bdbULL) {
        state_ = 0;
        inc_ = (seq << 1u) | 1u;
        next_u32();
        state_ += seed;
        next_u32();
    }

    std::uint32_t next_u32() noexcept {
        std::uint64_t old = state_;
        state_ = old * 6364136223846793005ULL + inc_;
        std::uint32_t xorshifted = static_cast<std::uint32_t>(((old >> 18u) ^ old) >> 27u);
        std::uint32_t rot = static_cast<std::uint32_t>(old >> 59u);
        return (xorshifted >> rot) | (xorshifted << ((32u - rot) & 31u));
    }

    // Uniform in [0, n) without modulo bias for n << 2^32.
    std::uint32_t next_below(std::uint32_t n) noexcept {
        return static_cast<std::uint32_t>(
            (static_cast<std::uint64_t>(next_u32()) * n) >> 32);
    }

    // Uniform double in [0, 1) with 32-bit resolution.
    double uniform01() noexcept { return next_u32() * 0x1p-32; }
    double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform01(); }

private:
    std::uint64_t state_ = 0;
    std::uint64_t inc_ = 0;
};

inline Pcg32 make_stream(std::uint64_t seed, std::initializer_list<std::uint64_t> tags) {
    std::uint64_t h = mix_seed(seed, tags);
    return Pcg32(h, splitmix64(h ^ 0x2545f4914f6cdd1dULL));
}

// Fixed tags for the derived streams used across the pipeline.
namespace streams {
inline constexpr std::uint64_t kHeight = 0x01;
inline constexpr std::uint64_t kMoisture = 0x02;
inline constexpr std::uint64_t kPatch = 0x03;
inline constexpr std::uint64_t kLabel = 0x04;
inline constexpr std::uint64_t kInit = 0x05;
inline constexpr std::uint64_t kShuffle = 0x06;
inline constexpr std::uint64_t kSplit = 0x07;
inline constexpr std::uint64_t kDropout = 0x08;
} // namespace streams

} // namespace terratwin
