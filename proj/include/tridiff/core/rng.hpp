#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace tridiff {

namespace detail {
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x ^= x >> 30;
    x *= 0xBF58476D1CE4E5B9ULL;
    x ^= x >> 27;
    x *= 0x94D049BB133111EBULL;
    x ^= x >> 31;
    return x;
}
}  // namespace detail

/// Seeded random source. Every stochastic operation in the library draws from
/// one of these; nothing reads std::random_device, so a run is fully
/// determined by the seeds handed in at the API boundary.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : seed_(seed), engine_(seed) {}

    std::uint64_t seed() const { return seed_; }

    /// Uniform in [0, 1).
    double uniform() {
        // 53 random bits -> double in [0,1), independent of
        // std::uniform_real_distribution's unspecified algorithm.
        return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    }

    /// Uniform integer in [lo, hi] inclusive.
    std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
        const std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
        // Rejection sampling keeps the draw unbiased.
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % span;
        std::uint64_t r;
        do {
            r = engine_();
        } while (r >= limit);
        return lo + static_cast<std::int64_t>(r % span);
    }

    /// Standard normal via Box-Muller (cosine branch only, no cached state).
    double normal() {
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    }

    /// Independent child stream: a pure function of (this seed, stream_id).
    /// Does not advance the parent, so per-item streams can be handed out in
    /// any order (or in parallel) without changing results.
    Rng derive(std::uint64_t stream_id) const {
        return Rng(detail::splitmix64(seed_ ^ detail::splitmix64(stream_id + 0x51ED2701ULL)));
    }

private:
    std::uint64_t seed_;
    std::mt19937_64 engine_;
};

}  // namespace tridiff
