#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace topodetect {

// Deterministic random source. All distributions are implemented by hand on
// top of the raw mt19937_64 stream because std::*_distribution output is
// implementation-defined and seed-reproducibility is part of the contract.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    // Uniform in [0, 1) with 53 bits of mantissa.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Unbiased integer in [0, n); rejection sampling on the top range.
    std::uint64_t below(std::uint64_t n) {
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t v = engine_();
        while (v >= limit) v = engine_();
        return v % n;
    }

    // Box-Muller, no cached spare so the stream stays position-independent.
    double normal(double mean = 0.0, double sigma = 1.0) {
        double u1 = uniform();
        while (u1 <= 1e-300) u1 = uniform();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        return mean + sigma * r * std::cos(2.0 * M_PI * u2);
    }

    // Normal rejected outside mean +- nsigma * sigma.
    double truncated_normal(double mean, double sigma, double nsigma = 2.0) {
        while (true) {
            const double v = normal(0.0, 1.0);
            if (std::fabs(v) <= nsigma) return mean + sigma * v;
        }
    }

    template <typename T>
    void shuffle(std::vector<T>& values) {
        for (std::size_t i = values.size(); i > 1; --i) {
            const std::size_t j = static_cast<std::size_t>(below(i));
            std::swap(values[i - 1], values[j]);
        }
    }

private:
    std::mt19937_64 engine_;
};

} // namespace topodetect
