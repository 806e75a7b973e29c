#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <vector>

namespace nwsr {

// Deterministic random streams. All distribution mappings are written out
// explicitly (rather than using std:: distributions, whose output is
// implementation-defined) so that a given seed produces the same draws on
// every standard library. The raw engine is mt19937_64, whose sequence the
// standard pins down exactly.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    // Derive an independent substream from a master seed and stream ids,
    // e.g. per frame, per population member, per iteration.
    static Rng stream(std::uint64_t seed, std::uint64_t id0, std::uint64_t id1 = 0,
                      std::uint64_t id2 = 0) {
        std::uint64_t s = seed;
        s = splitmix(s ^ (0x9e3779b97f4a7c15ull + id0));
        s = splitmix(s ^ id1);
        s = splitmix(s ^ id2);
        return Rng(s);
    }

    std::uint64_t next_u64() { return engine_(); }

    // Uniform in [0, 1)
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // Uniform in [lo, hi)
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [0, n)
    std::uint64_t uniform_index(std::uint64_t n) {
        // modulo bias is < 2^-40 for the population sizes used here
        return next_u64() % n;
    }

    // Standard normal via Box-Muller. Draws two uniforms per sample; no
    // cached state, so each call is a pure function of the stream position.
    double normal() {
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

    double normal(double mean, double stddev) { return mean + stddev * normal(); }

    // Normal(mean, stddev) rejected outside mean +/- 2*stddev.
    double truncated_normal(double mean, double stddev) {
        for (;;) {
            const double z = normal();
            if (std::abs(z) <= 2.0) return mean + stddev * z;
        }
    }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            const std::size_t j = static_cast<std::size_t>(uniform_index(i));
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    static std::uint64_t splitmix(std::uint64_t x) {
        x += 0x9e3779b97f4a7c15ull;
        x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
        x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
        return x ^ (x >> 31);
    }

    std::mt19937_64 engine_;
};

}  // namespace nwsr
