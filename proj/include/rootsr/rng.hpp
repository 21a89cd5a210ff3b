#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace rootsr {

// Deterministic random source. std::mt19937_64 has a standard-specified
// sequence, and all distribution mappings are spelled out here instead of
// using std::*_distribution (whose algorithms vary between standard
// libraries). Consumption order: each draw below consumes a fixed number of
// engine outputs, so a seed fully determines every downstream value.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    /// Uniform in [0, 1); one engine draw, 53-bit mantissa.
    double uniform() {
        return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    }

    /// Uniform in [lo, hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform integer in [0, n); rejection-free modulo of a 64-bit draw.
    /// Bias is < 2^-53 for any n this project uses.
    std::uint64_t uniform_index(std::uint64_t n) {
        return static_cast<std::uint64_t>(uniform() * static_cast<double>(n)) % n;
    }

    /// Standard normal via Box-Muller; consumes two uniforms per pair,
    /// caching the second value.
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = uniform();
        double u2 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double t = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(t);
        has_spare_ = true;
        return r * std::cos(t);
    }

    double normal(double mean, double stddev) { return mean + stddev * normal(); }

    /// Poisson count. Knuth product method for small lambda, normal
    /// approximation with continuity correction above 64 (adequate for
    /// scene synthesis rates).
    std::uint64_t poisson(double lambda) {
        if (lambda <= 0.0) return 0;
        if (lambda > 64.0) {
            const double v = normal() * std::sqrt(lambda) + lambda + 0.5;
            return v < 0.0 ? 0 : static_cast<std::uint64_t>(v);
        }
        const double limit = std::exp(-lambda);
        std::uint64_t k = 0;
        double p = 1.0;
        do {
            ++k;
            p *= uniform();
        } while (p > limit);
        return k - 1;
    }

    std::uint64_t raw() { return engine_(); }

    /// Derive an independent stream (e.g. one per scene) without disturbing
    /// this stream's position beyond a single draw.
    Rng fork() { return Rng(engine_() ^ 0x9e3779b97f4a7c15ULL); }

private:
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace rootsr
