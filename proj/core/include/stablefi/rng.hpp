#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace stablefi {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Deterministic sub-seed for an independent stream (e.g. one per environment).
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) {
    return splitmix64(splitmix64(master) ^ splitmix64(stream + 0x51ed2701a2c9dbf1ULL));
}

// mt19937_64 with hand-rolled variate transforms. The standard distribution
// classes are implementation-defined, which would break the byte-identical
// output contract across standard libraries; the transforms below pin the
// exact bit stream to the engine.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform on [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    bool bernoulli(double p) { return uniform() < p; }

    /// Unbiased integer in [0, n). Lemire's multiply-shift rejection method.
    std::uint64_t uniform_index(std::uint64_t n) {
        while (true) {
            std::uint64_t x = next_u64();
            __uint128_t m = static_cast<__uint128_t>(x) * static_cast<__uint128_t>(n);
            auto lo = static_cast<std::uint64_t>(m);
            if (lo < n) {
                std::uint64_t threshold = (0ULL - n) % n;
                if (lo < threshold) continue;
            }
            return static_cast<std::uint64_t>(m >> 64);
        }
    }

    /// Box-Muller; consumes two uniforms per call so the stream position does
    /// not depend on hidden cache state.
    double normal(double mean, double stddev) {
        double u1 = uniform();
        double u2 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        return mean + stddev * r * std::cos(2.0 * M_PI * u2);
    }

private:
    std::mt19937_64 engine_;
};

}  // namespace stablefi
