#pragma once

// Counter-based random streams.
//
// Every Monte Carlo draw owns an independent stream addressed by
// (seed, stream id), so results depend only on the seed and the draw index,
// never on how draws are split across workers.

#include <array>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>

namespace itequant {

/// Philox4x32-10 block function (Salmon et al., 2011).
std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> counter,
                                        std::array<std::uint32_t, 2> key);

/// SplitMix64 finalizer; used to derive child seeds from (seed, tag).
constexpr std::uint64_t mix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag) {
    return mix64(seed ^ mix64(tag));
}

/// UniformRandomBitGenerator over one Philox stream.
class CounterRng {
public:
    using result_type = std::uint32_t;

    CounterRng(std::uint64_t seed, std::uint64_t stream);

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

    result_type operator()();

    /// Uniform on [0, 1) with 53 random bits.
    double uniform01();

    /// Uniform integer in [0, bound); bound > 0. Rejection sampling, unbiased.
    std::uint64_t below(std::uint64_t bound);

    /// Standard normal via Box-Muller.
    double normal();

private:
    void refill();

    std::array<std::uint32_t, 2> key_{};
    std::array<std::uint32_t, 4> counter_{};
    std::array<std::uint32_t, 4> block_{};
    std::size_t used_ = 4;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

/// Writes a uniformly random size-`k` subset of {0..n-1} into the first `k`
/// slots of `scratch` (partial Fisher-Yates). `scratch` must hold n entries.
void sample_subset(CounterRng& rng, std::span<std::size_t> scratch, std::size_t k);

}  // namespace itequant
