#pragma once

// Deterministic random number generation. A master seed plus a stream index
// derive independent per-trajectory seeds, so ensembles are reproducible
// regardless of evaluation order and can be regenerated one trajectory at a
// time. Poisson and negative binomial samplers stay exact (no normal
// approximation) because trajectory statistics feed tail-sensitive tests.

#include <cmath>
#include <cstdint>
#include <random>

namespace qinstr {

// splitmix64 finalizer: bijective 64-bit mix with good avalanche.
inline std::uint64_t mix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) {
    return mix64(master ^ mix64(index));
}

class Rng {
  public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    double uniform() {
        // 53 random bits into [0, 1); never returns 1.
        return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    }

    double gauss() { return normal_(engine_); }

    // Exact Poisson. Inversion by sequential search for small means, the
    // PTRS transformed rejection sampler (Hoermann 1993) above that.
    std::int64_t poisson(double mean) {
        if (!(mean >= 0)) return 0;
        if (mean == 0) return 0;
        if (mean < 30.0) return poisson_inversion(mean);
        return poisson_ptrs(mean);
    }

    // Marsaglia-Tsang squeeze method, exact for shape >= 1; boosted for
    // shape < 1 via Gamma(a) = Gamma(a+1) * U^(1/a).
    double gamma(double shape) {
        if (!(shape > 0)) return 0;
        if (shape < 1.0) {
            const double u = uniform_open();
            return gamma(shape + 1.0) * std::pow(u, 1.0 / shape);
        }
        const double d = shape - 1.0 / 3.0;
        const double c = 1.0 / std::sqrt(9.0 * d);
        for (;;) {
            double x, v;
            do {
                x = gauss();
                v = 1.0 + c * x;
            } while (v <= 0);
            v = v * v * v;
            const double u = uniform_open();
            if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
            if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
        }
    }

    // Negative binomial NB(r, p): number of failures before the r-th
    // success, success probability p. Sampled by Gamma-Poisson mixture,
    // valid for non-integer r as well.
    std::int64_t neg_binomial(double r, double p) {
        if (!(p > 0) || !(p < 1)) return 0;
        const double lambda = gamma(r) * (1.0 - p) / p;
        return poisson(lambda);
    }

    std::uint64_t raw() { return engine_(); }

  private:
    double uniform_open() {
        // (0, 1): rejects the single zero value so log() stays finite.
        double u;
        do {
            u = uniform();
        } while (u <= 0.0);
        return u;
    }

    std::int64_t poisson_inversion(double mean) {
        const double l = std::exp(-mean);
        std::int64_t k = 0;
        double p = 1.0;
        do {
            ++k;
            p *= uniform();
        } while (p > l);
        return k - 1;
    }

    std::int64_t poisson_ptrs(double mean) {
        const double b = 0.931 + 2.53 * std::sqrt(mean);
        const double a = -0.059 + 0.02483 * b;
        const double inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
        const double v_r = 0.9277 - 3.6224 / (b - 2.0);
        const double log_mean = std::log(mean);
        for (;;) {
            const double u = uniform() - 0.5;
            const double v = uniform_open();
            const double us = 0.5 - std::abs(u);
            const double k = std::floor((2.0 * a / us + b) * u + mean + 0.43);
            if (us >= 0.07 && v <= v_r) return static_cast<std::int64_t>(k);
            if (k < 0 || (us < 0.013 && v > us)) continue;
            if (std::log(v * inv_alpha / (a / (us * us) + b)) <=
                k * log_mean - mean - std::lgamma(k + 1.0)) {
                return static_cast<std::int64_t>(k);
            }
        }
    }

    std::mt19937_64 engine_;
    std::normal_distribution<double> normal_{0.0, 1.0};
};

} // namespace qinstr
