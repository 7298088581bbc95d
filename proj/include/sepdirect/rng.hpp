#pragma once

#include <cstdint>

namespace sepdirect {

namespace detail {

// SplitMix64 finalizer (Stafford mix 13).
inline std::uint64_t mix64(std::uint64_t z) {
    z ^= z >> 30;
    z *= 0xBF58476D1CE4E5B9ULL;
    z ^= z >> 27;
    z *= 0x94D049BB133111EBULL;
    z ^= z >> 31;
    return z;
}

inline constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

} // namespace detail

/// Derives an independent sub-seed for a task/replicate/record index.
/// Order-independent: stream i never depends on stream j.
inline std::uint64_t derive_stream(std::uint64_t seed, std::uint64_t index) {
    return detail::mix64(seed ^ detail::mix64(index + detail::kGolden));
}

/// Counter-based generator: the state is a pure function of (seed, stream),
/// successive draws advance a Weyl counter through the SplitMix64 finalizer.
class CounterRng {
  public:
    CounterRng(std::uint64_t seed, std::uint64_t stream) : state_(derive_stream(seed, stream)) {}

    std::uint64_t next_u64() {
        state_ += detail::kGolden;
        return detail::mix64(state_);
    }

    /// Uniform draw in [0, 1) with 53-bit resolution.
    double next_unit() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    bool bernoulli(double p) { return next_unit() < p; }

    /// Uniform in [lo, hi).
    double next_in(double lo, double hi) { return lo + (hi - lo) * next_unit(); }

    /// Uniform integer in [0, n); n must be positive.
    std::uint64_t next_below(std::uint64_t n) {
        // Lemire rejection-free-ish bounded draw; bias is negligible for n << 2^64
        // but we reject to keep the distribution exact.
        const std::uint64_t threshold = (0 - n) % n;
        for (;;) {
            const std::uint64_t r = next_u64();
            if (r >= threshold) return r % n;
        }
    }

  private:
    std::uint64_t state_;
};

} // namespace sepdirect
