#pragma once

// Deterministic random streams for the simulators. The engine is the
// standard-specified mt19937_64, so the raw integer sequence is identical on
// every conforming implementation; distributions are implemented here rather
// than via <random>'s distribution templates, whose output is
// implementation-defined.
//
//   poisson:  inversion by multiplication below mean 30, Hormann's
//             transformed-rejection (PTRS) above.
//   binomial: geometric-skip inversion while n*min(p,1-p) < 30, Hormann's
//             BTRS transformed rejection above.
//
// Sub-streams are derived with splitmix64 so dataset cases can be generated
// in any order (or in parallel) with identical results.

#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "abq/errors.hpp"

namespace abq::rng {

inline constexpr const char* kEngineDescription =
    "mt19937_64 seeded via splitmix64 stream derivation; "
    "poisson: inversion/PTRS; binomial: inversion/BTRS";

/// One splitmix64 output step as a pure function of the pre-increment state.
inline std::uint64_t splitmix64_mix(std::uint64_t x) {
    std::uint64_t z = x + 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

/// Collapses (seed, a, b, c) into one stream seed.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0,
                                 std::uint64_t c = 0) {
    std::uint64_t h = splitmix64_mix(seed);
    h = splitmix64_mix(h ^ a);
    h = splitmix64_mix(h ^ b);
    h = splitmix64_mix(h ^ c);
    return h;
}

class Stream {
public:
    explicit Stream(std::uint64_t seed) : eng_(seed) {}

    static Stream derive(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0,
                         std::uint64_t c = 0) {
        return Stream(derive_seed(seed, a, b, c));
    }

    std::uint64_t next_u64() { return eng_(); }

    /// Uniform double on the open interval (0, 1); safe as a log() argument.
    double uniform01() {
        return (static_cast<double>(eng_() >> 11) + 0.5) * 0x1.0p-53;
    }

    /// Uniform integer in [0, n), free of modulo bias.
    std::uint64_t uniform_below(std::uint64_t n) {
        if (n == 0) throw DomainError("uniform_below: n must be positive");
        const std::uint64_t threshold = (0 - n) % n;
        for (;;) {
            const std::uint64_t r = eng_();
            if (r >= threshold) return r % n;
        }
    }

    std::uint64_t poisson(double mean) {
        if (!(mean >= 0.0)) throw DomainError("poisson: mean must be non-negative");
        if (mean == 0.0) return 0;
        return mean < 30.0 ? poisson_inversion(mean) : poisson_ptrs(mean);
    }

    std::uint64_t binomial(std::uint64_t n, double p) {
        if (!(p >= 0.0 && p <= 1.0)) throw DomainError("binomial: p must lie in [0, 1]");
        if (n == 0 || p == 0.0) return 0;
        if (p == 1.0) return n;
        if (p > 0.5) return n - binomial(n, 1.0 - p);
        const double np = static_cast<double>(n) * p;
        return np < 30.0 ? binomial_inversion(n, p) : binomial_btrs(n, p);
    }

    /// Sequential conditional-binomial multinomial draw. `probs` must sum to 1
    /// within 1e-9.
    std::vector<std::uint64_t> multinomial(std::uint64_t n, std::span<const double> probs) {
        double total = 0.0;
        for (double p : probs) {
            if (!(p >= 0.0)) throw DomainError("multinomial: probabilities must be >= 0");
            total += p;
        }
        if (std::fabs(total - 1.0) > 1e-9)
            throw DomainError("multinomial: probabilities must sum to 1");
        std::vector<std::uint64_t> counts(probs.size(), 0);
        std::uint64_t remaining = n;
        double prob_left = 1.0;
        for (std::size_t b = 0; b + 1 < probs.size() && remaining > 0; ++b) {
            double cond = probs[b] / prob_left;
            if (cond > 1.0) cond = 1.0;
            if (cond < 0.0) cond = 0.0;
            const std::uint64_t draw = binomial(remaining, cond);
            counts[b] = draw;
            remaining -= draw;
            prob_left -= probs[b];
            if (prob_left <= 0.0) prob_left = 0.0;
        }
        if (!counts.empty()) counts.back() += remaining;
        return counts;
    }

    /// k distinct indices drawn uniformly from [0, population), via partial
    /// Fisher-Yates.
    std::vector<std::size_t> sample_without_replacement(std::size_t population, std::size_t k) {
        if (k > population)
            throw DomainError("sample_without_replacement: k exceeds population");
        std::vector<std::size_t> idx(population);
        for (std::size_t i = 0; i < population; ++i) idx[i] = i;
        for (std::size_t i = 0; i < k; ++i) {
            const std::size_t j = i + static_cast<std::size_t>(uniform_below(population - i));
            std::swap(idx[i], idx[j]);
        }
        idx.resize(k);
        return idx;
    }

private:
    std::mt19937_64 eng_;

    std::uint64_t poisson_inversion(double mean) {
        const double limit = std::exp(-mean);
        std::uint64_t k = 0;
        double prod = uniform01();
        while (prod > limit) {
            ++k;
            prod *= uniform01();
        }
        return k;
    }

    // Hormann (1993), transformed rejection with squeeze; valid for mean >= 10.
    std::uint64_t poisson_ptrs(double mean) {
        const double slam = std::sqrt(mean);
        const double loglam = std::log(mean);
        const double b = 0.931 + 2.53 * slam;
        const double a = -0.059 + 0.02483 * b;
        const double inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
        const double v_r = 0.9277 - 3.6224 / (b - 2.0);
        for (;;) {
            const double u = uniform01() - 0.5;
            const double v = uniform01();
            const double us = 0.5 - std::fabs(u);
            const double kf = std::floor((2.0 * a / us + b) * u + mean + 0.43);
            if (us >= 0.07 && v <= v_r) return static_cast<std::uint64_t>(kf);
            if (kf < 0.0 || (us < 0.013 && v > us)) continue;
            if (std::log(v) + std::log(inv_alpha) - std::log(a / (us * us) + b) <=
                kf * loglam - mean - std::lgamma(kf + 1.0)) {
                return static_cast<std::uint64_t>(kf);
            }
        }
    }

    std::uint64_t binomial_inversion(std::uint64_t n, double p) {
        const double log_q = std::log1p(-p);
        const double limit = static_cast<double>(n);
        std::uint64_t successes = 0;
        double position = 0.0;
        for (;;) {
            position += std::floor(std::log(uniform01()) / log_q) + 1.0;
            if (position > limit) return successes;
            ++successes;
        }
    }

    // Hormann (1993), BTRS transformed rejection; requires p <= 0.5 and
    // n * p >= 10.
    std::uint64_t binomial_btrs(std::uint64_t n, double p) {
        const double nd = static_cast<double>(n);
        const double q = 1.0 - p;
        const double spq = std::sqrt(nd * p * q);
        const double b = 1.15 + 2.53 * spq;
        const double a = -0.0873 + 0.0248 * b + 0.01 * p;
        const double c = nd * p + 0.5;
        const double v_r = 0.92 - 4.2 / b;
        const double urvr = 0.86 * v_r;
        const double alpha = (2.83 + 5.1 / b) * spq;
        const double lpq = std::log(p / q);
        const double m = std::floor((nd + 1.0) * p);
        const double h = std::lgamma(m + 1.0) + std::lgamma(nd - m + 1.0);
        for (;;) {
            double v = uniform01();
            double u;
            if (v <= urvr) {
                u = v / v_r - 0.43;
                return static_cast<std::uint64_t>(
                    std::floor((2.0 * a / (0.5 - std::fabs(u)) + b) * u + c));
            }
            if (v >= v_r) {
                u = uniform01() - 0.5;
            } else {
                u = v / v_r - 0.93;
                u = (u < 0.0 ? -0.5 : 0.5) - u;
                v = uniform01() * v_r;
            }
            const double us = 0.5 - std::fabs(u);
            const double kf = std::floor((2.0 * a / us + b) * u + c);
            if (kf < 0.0 || kf > nd) continue;
            v = v * alpha / (a / (us * us) + b);
            if (std::log(v) <=
                h - std::lgamma(kf + 1.0) - std::lgamma(nd - kf + 1.0) + (kf - m) * lpq) {
                return static_cast<std::uint64_t>(kf);
            }
        }
    }
};

}  // namespace abq::rng
