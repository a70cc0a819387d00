#pragma once
/*
Seeded generator with portable draw functions. std::mt19937_64 is bit-exact
across platforms; the distribution transforms here are explicit (inverse CDF
or Box-Muller) so a (seed, draw ordinal) pair always yields the same value,
unlike the implementation-defined std::*_distribution classes.
*/

#include <cmath>
#include <cstdint>
#include <random>

namespace htb {

class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    // Uniform on (0, 1); never returns an endpoint.
    double uniform() {
        const std::uint64_t bits = engine_() >> 11;  // top 53 bits
        return (static_cast<double>(bits) + 0.5) * 0x1.0p-53;
    }

    // Box-Muller without caching the spare: two uniforms per draw keeps the
    // draw ordinal aligned with the engine state.
    double normal(double mean, double sigma) {
        const double u1 = uniform();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        return mean + sigma * r * std::cos(2.0 * M_PI * u2);
    }

    double laplace(double mean, double scale) {
        const double u = uniform();
        return u < 0.5 ? mean + scale * std::log(2.0 * u)
                       : mean - scale * std::log(2.0 * (1.0 - u));
    }

    // Raw Pareto on [scale, inf) with tail index `shape`.
    double pareto(double shape, double scale) {
        return scale * std::pow(uniform(), -1.0 / shape);
    }

    std::uint64_t next_u64() { return engine_(); }

private:
    std::mt19937_64 engine_;
};

// Seed mixing for derived streams (per-trial, per-policy) so nearby seeds do
// not produce correlated engines.
inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
    std::uint64_t z = a + 0x9e3779b97f4a7c15ULL * (b + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

}  // namespace htb
