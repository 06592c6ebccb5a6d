#pragma once

#include <cmath>
#include <cstdint>
#include <limits>

namespace jolt {

/// SplitMix64 finalizer; a bijective 64-bit mixer.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Counter-based generator: the i-th output is a pure function of (key, i).
/// Streams are derived with `split`, so any (seed, example, epoch) triple gets
/// an independent, reproducible sequence regardless of evaluation order.
class CounterRng {
public:
    using result_type = std::uint64_t;

    explicit CounterRng(std::uint64_t seed = 0) noexcept : key_(mix64(seed)) {}

    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

    result_type operator()() noexcept { return mix64(key_ ^ mix64(counter_++)); }

    /// Child stream keyed by `stream`; does not advance this generator.
    CounterRng split(std::uint64_t stream) const noexcept {
        CounterRng child;
        child.key_ = mix64(key_ + 0x632be59bd9b4e019ULL * (stream + 1));
        return child;
    }

    /// Uniform integer in [0, bound). bound must be > 0.
    std::uint64_t below(std::uint64_t bound) noexcept {
        // Lemire's multiply-shift with rejection; exact uniformity.
        std::uint64_t x = (*this)();
        __uint128_t m = static_cast<__uint128_t>(x) * bound;
        auto low = static_cast<std::uint64_t>(m);
        if (low < bound) {
            const std::uint64_t threshold = (0 - bound) % bound;
            while (low < threshold) {
                x = (*this)();
                m = static_cast<__uint128_t>(x) * bound;
                low = static_cast<std::uint64_t>(m);
            }
        }
        return static_cast<std::uint64_t>(m >> 64);
    }

    /// Uniform integer in [lo, hi] inclusive.
    std::int64_t between(std::int64_t lo, std::int64_t hi) noexcept {
        return lo + static_cast<std::int64_t>(below(static_cast<std::uint64_t>(hi - lo) + 1));
    }

    /// Uniform double in [0, 1) with 53 random bits.
    double uniform() noexcept { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

    /// Standard normal via Box-Muller (one value per call).
    double normal() noexcept {
        double u1 = uniform();
        const double u2 = uniform();
        if (u1 < 1e-300) u1 = 1e-300;
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
    }

private:
    std::uint64_t key_ = 0;
    std::uint64_t counter_ = 0;
};

/// Stream for a (seed, example, epoch) triple.
inline CounterRng stream_for(std::uint64_t seed, std::uint64_t example_id, std::uint64_t epoch) noexcept {
    return CounterRng(seed).split(example_id).split(epoch);
}

}  // namespace jolt

