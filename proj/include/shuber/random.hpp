#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <numbers>

namespace shuber {

/// Counter-based Gaussian source.
///
/// Every draw is a pure function of (seed, stream, counters): the key is
/// folded through SplitMix64 finalizers, two 53-bit uniforms are taken from
/// it and mapped by the cosine branch of Box-Muller. Draws can therefore be
/// produced in any order (or in parallel) with identical results.
class CounterRng {
public:
    constexpr CounterRng(std::uint64_t seed, std::uint64_t stream) : base_(mix(seed ^ mix(stream))) {}

    static constexpr std::uint64_t mix(std::uint64_t x) {
        x += 0x9E3779B97F4A7C15ULL;
        x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
        x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
        return x ^ (x >> 31);
    }

    std::uint64_t bits(std::initializer_list<std::uint64_t> counters) const {
        std::uint64_t h = base_;
        for (std::uint64_t c : counters)
            h = mix(h ^ mix(c + 0x632BE59BD9B4E019ULL));
        return h;
    }

    /// Uniform on the open interval (0, 1).
    double uniform(std::initializer_list<std::uint64_t> counters) const {
        return to_unit(bits(counters));
    }

    double normal(std::uint64_t a, std::uint64_t b = 0, std::uint64_t c = 0) const {
        const std::uint64_t h = bits({a, b, c});
        const double u1 = to_unit(h);
        const double u2 = to_unit(mix(h ^ 0xD1B54A32D192ED03ULL));
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

private:
    static double to_unit(std::uint64_t h) {
        return (static_cast<double>(h >> 11) + 0.5) * 0x1.0p-53;
    }

    std::uint64_t base_;
};

/// Stream identifiers; each generated quantity draws from its own stream.
namespace streams {
inline constexpr std::uint64_t kDesign = 1;
inline constexpr std::uint64_t kNoise = 2;
inline constexpr std::uint64_t kLeftBasis = 3;
inline constexpr std::uint64_t kRightBasis = 4;
inline constexpr std::uint64_t kSupport = 5;
inline constexpr std::uint64_t kReplicate = 6;
} // namespace streams

/// Seed of replicate `rep` under a master seed.
inline std::uint64_t replicate_seed(std::uint64_t master_seed, std::uint64_t rep) {
    return CounterRng(master_seed, streams::kReplicate).bits({rep});
}

} // namespace shuber
