#pragma once

#include <cmath>
#include <cstdint>

namespace graspfield::rng {

// splitmix64 finalizer; the basis for all deterministic streams here.
inline std::uint64_t mix(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t mix3(std::uint64_t a, std::uint64_t b, std::uint64_t c) {
    return mix(mix(mix(a) ^ b) ^ c);
}

// Uniform in (0, 1); never returns 0, safe under log().
inline double to_unit(std::uint64_t x) {
    return (static_cast<double>(x >> 11) + 0.5) * (1.0 / 9007199254740992.0);
}

/// Standard normal indexed by (seed, iteration, point, axis). The value
/// depends only on the counter tuple, so parallel evaluation order cannot
/// change results.
inline double normal(std::uint64_t seed, std::uint64_t iteration, std::uint64_t point,
                     std::uint32_t axis) {
    const std::uint64_t key = mix3(seed, iteration, point);
    const double u1 = to_unit(mix(key ^ (0x9e3779b9ULL + 2ULL * axis)));
    const double u2 = to_unit(mix(key ^ (0x85ebca6bULL + 2ULL * axis + 1ULL)));
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

/// Small sequential stream for sampling tasks (surface sampling, scene
/// jitter). Deterministic across platforms.
class Sequence {
public:
    explicit Sequence(std::uint64_t seed) : state_(mix(seed ^ 0x5851f42d4c957f2dULL)) {}

    std::uint64_t next_u64() {
        state_ = mix(state_);
        return state_;
    }
    double next_unit() { return to_unit(next_u64()); }
    double uniform(double lo, double hi) { return lo + (hi - lo) * next_unit(); }
    std::uint64_t next_below(std::uint64_t n) { return n == 0 ? 0 : next_u64() % n; }
    double normal() {
        const double u1 = next_unit();
        const double u2 = next_unit();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    }

private:
    std::uint64_t state_;
};

}  // namespace graspfield::rng
