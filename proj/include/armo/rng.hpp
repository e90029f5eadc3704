#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

namespace armo {

/// SplitMix64 finalizer. Used as a counter-based generator:
/// mix(seed ^ stream ^ counter) gives reproducible, order-free draws.
constexpr std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

constexpr std::uint64_t counter_draw(std::uint64_t seed, std::uint64_t stream, std::uint64_t counter) {
    return mix64(mix64(seed ^ mix64(stream)) + counter);
}

/// Uniform integer in [0, bound) from a 64-bit draw (multiply-shift).
inline std::uint64_t bounded(std::uint64_t draw, std::uint64_t bound) {
    return static_cast<std::uint64_t>((static_cast<unsigned __int128>(draw) * bound) >> 64);
}

/// mt19937_64 with hand-rolled conversions, so streams are identical across
/// standard libraries (std:: distributions are implementation-defined).
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }
    /// Uniform in [0, 1).
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    /// Standard normal via Box-Muller (one value per call).
    double normal() {
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }
    std::uint64_t below(std::uint64_t bound) { return bounded(engine_(), bound); }

private:
    std::mt19937_64 engine_;
};

}  // namespace armo
