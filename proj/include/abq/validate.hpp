#pragma once

// In-flight randomization validation: decides whether observed per-bucket
// sample counts are consistent with a uniform multinomial split. Implements
// the PSI family (two-sample and uniform-reference PSI_k) alongside Pearson
// chi-square, Kolmogorov-Smirnov and Anderson-Darling baselines.
//
// PSI between empirical distributions p-hat and q-hat over B buckets:
//
//     PSI = sum_b (p_b - q_b) * ln(p_b / q_b)
//
// Scaled by 1/(1/n + 1/m) it is approximately chi^2 with B-1 degrees of
// freedom. The uniform-reference variant PSI_k treats the reference as a
// synthetic sample of size k*n, giving the alert rule
//
//     PSI_k > (k+1)/(k*n) * chi^2_{1-alpha, B-1}.
//
// Larger k lowers the threshold: recall grows, precision can drop.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "abq/errors.hpp"
#include "abq/stats.hpp"

namespace abq::validate {

/// Per-bucket sample counts for one experiment on one plane.
struct BucketCounts {
    std::vector<std::uint64_t> counts;

    BucketCounts() = default;
    explicit BucketCounts(std::vector<std::uint64_t> c) : counts(std::move(c)) {}

    std::size_t bucket_count() const { return counts.size(); }

    std::uint64_t total() const {
        return std::accumulate(counts.begin(), counts.end(), std::uint64_t{0});
    }

    static BucketCounts uniform(std::size_t buckets, std::uint64_t per_bucket) {
        return BucketCounts(std::vector<std::uint64_t>(buckets, per_bucket));
    }
};

enum class Method { psi_k, pearson_chi2, ks, ad };

inline const char* method_name(Method m) {
    switch (m) {
        case Method::psi_k: return "psi";
        case Method::pearson_chi2: return "chi2";
        case Method::ks: return "ks";
        case Method::ad: return "ad";
    }
    return "?";
}

/// What to do when a bucket that should carry traffic is empty. The PSI terms
/// involve ln(0) there; treating the statistic as +inf forces an alert, which
/// is the right call at production sample sizes. The smoothing alternative
/// adds 0.5 to every bucket before computing.
enum class ZeroPolicy { infinite_statistic, smoothing };

inline constexpr double kDefaultAlpha = 0.001;
inline constexpr int kDefaultK = 2;
inline constexpr std::uint64_t kDefaultMinTotalPerBucket = 10;

struct ValidationConfig {
    Method method = Method::psi_k;
    double alpha = kDefaultAlpha;
    int k = kDefaultK;
    std::optional<std::uint64_t> min_total;  // default: 10 samples per bucket
    ZeroPolicy zero_policy = ZeroPolicy::infinite_statistic;

    std::uint64_t resolved_min_total(std::size_t buckets) const {
        return min_total ? *min_total : kDefaultMinTotalPerBucket * buckets;
    }
};

struct ValidationResult {
    Method method = Method::psi_k;
    double statistic = 0.0;
    std::optional<double> threshold;  // critical value on the statistic scale
    std::optional<double> p_value;
    bool alert = false;
    bool evaluated = true;  // false: below the min-total guard, no verdict
    std::vector<double> per_bucket_deviation;
    std::string note;
};

namespace detail {

inline void check_alpha(double alpha) {
    if (!(alpha > 0.0 && alpha < 1.0)) throw DomainError("alpha must lie in (0, 1)");
}

inline void check_buckets(const BucketCounts& c) {
    if (c.bucket_count() < 2) throw ShapeError("bucket counts need at least 2 buckets");
}

inline std::vector<double> deviations_from_uniform(const BucketCounts& c, std::uint64_t n) {
    const double inv_b = 1.0 / static_cast<double>(c.bucket_count());
    std::vector<double> dev(c.bucket_count(), 0.0);
    if (n == 0) return dev;
    for (std::size_t b = 0; b < c.bucket_count(); ++b) {
        dev[b] = static_cast<double>(c.counts[b]) / static_cast<double>(n) - inv_b;
    }
    return dev;
}

inline bool has_zero(const BucketCounts& c) {
    return std::find(c.counts.begin(), c.counts.end(), std::uint64_t{0}) != c.counts.end();
}

}  // namespace detail

/// PSI between the empirical distributions of two bucket-count vectors.
/// Symmetric, non-negative, zero iff the empirical proportions are identical.
inline double psi_statistic(const BucketCounts& p, const BucketCounts& q,
                            ZeroPolicy zero_policy = ZeroPolicy::infinite_statistic) {
    detail::check_buckets(p);
    if (p.bucket_count() != q.bucket_count())
        throw ShapeError("psi_statistic: bucket cardinality mismatch");
    const std::uint64_t n = p.total();
    const std::uint64_t m = q.total();
    if (n == 0 || m == 0) throw DomainError("psi_statistic: both totals must be positive");

    // Smoothing only matters when some bucket is empty; otherwise use the
    // exact proportions.
    double add = 0.0;
    if (zero_policy == ZeroPolicy::smoothing && (detail::has_zero(p) || detail::has_zero(q))) {
        add = 0.5;
    }
    const double b_count = static_cast<double>(p.bucket_count());
    const double pn = static_cast<double>(n) + add * b_count;
    const double qn = static_cast<double>(m) + add * b_count;

    double sum = 0.0;
    for (std::size_t b = 0; b < p.bucket_count(); ++b) {
        const double pb = (static_cast<double>(p.counts[b]) + add) / pn;
        const double qb = (static_cast<double>(q.counts[b]) + add) / qn;
        if (pb == qb) continue;  // includes the 0/0 bucket
        if (pb == 0.0 || qb == 0.0) return std::numeric_limits<double>::infinity();
        sum += (pb - qb) * std::log(pb / qb);
    }
    return sum;
}

/// Two-sample PSI test: scaled statistic PSI / (1/n + 1/m) against the
/// chi^2_{B-1} critical value at level alpha.
inline ValidationResult psi_two_sample_test(const BucketCounts& p, const BucketCounts& q,
                                            double alpha,
                                            ZeroPolicy zero_policy = ZeroPolicy::infinite_statistic) {
    detail::check_alpha(alpha);
    const double psi = psi_statistic(p, q, zero_policy);
    const double n = static_cast<double>(p.total());
    const double m = static_cast<double>(q.total());
    const double scale = 1.0 / n + 1.0 / m;
    const int df = static_cast<int>(p.bucket_count()) - 1;

    ValidationResult r;
    r.method = Method::psi_k;
    r.statistic = psi;
    r.threshold = scale * stats::chi_square_quantile(1.0 - alpha, df);
    r.p_value = std::isinf(psi) ? 0.0 : 1.0 - stats::chi_square_cdf(psi / scale, df);
    r.alert = psi > *r.threshold;
    const std::uint64_t nt = p.total();
    r.per_bucket_deviation.resize(p.bucket_count());
    for (std::size_t b = 0; b < p.bucket_count(); ++b) {
        r.per_bucket_deviation[b] = static_cast<double>(p.counts[b]) / static_cast<double>(nt) -
                                    static_cast<double>(q.counts[b]) / m;
    }
    return r;
}

/// PSI_k uniformity test of one bucket-count vector against the uniform
/// distribution, with the synthetic reference-sample ratio k.
inline ValidationResult psi_k_uniform_test(const BucketCounts& counts, int k, double alpha,
                                           const ValidationConfig& config = {}) {
    detail::check_buckets(counts);
    detail::check_alpha(alpha);
    if (k < 1) throw DomainError("psi_k_uniform_test: k must be a positive integer");

    const std::uint64_t n = counts.total();
    const std::size_t b_count = counts.bucket_count();
    const int df = static_cast<int>(b_count) - 1;

    ValidationResult r;
    r.method = Method::psi_k;
    r.per_bucket_deviation = detail::deviations_from_uniform(counts, n);

    if (n < std::max<std::uint64_t>(config.resolved_min_total(b_count), 1)) {
        r.evaluated = false;
        r.note = "insufficient data";
        return r;
    }

    const double kd = static_cast<double>(k);
    r.threshold = (kd + 1.0) / (kd * static_cast<double>(n)) *
                  stats::chi_square_quantile(1.0 - alpha, df);

    double add = 0.0;
    if (config.zero_policy == ZeroPolicy::smoothing && detail::has_zero(counts)) add = 0.5;
    const double total = static_cast<double>(n) + add * static_cast<double>(b_count);
    const double log_inv_b = -std::log(static_cast<double>(b_count));

    double sum = 0.0;
    for (std::uint64_t c : counts.counts) {
        const double pb = (static_cast<double>(c) + add) / total;
        if (pb == 0.0) {
            sum = std::numeric_limits<double>::infinity();
            break;
        }
        const double diff = pb - 1.0 / static_cast<double>(b_count);
        if (diff == 0.0) continue;
        sum += diff * (std::log(pb) - log_inv_b);
    }
    r.statistic = sum;
    r.alert = r.statistic > *r.threshold;
    return r;
}

/// Pearson chi-square test of uniformity.
inline ValidationResult pearson_chi2_uniform_test(const BucketCounts& counts, double alpha) {
    detail::check_buckets(counts);
    detail::check_alpha(alpha);
    const std::uint64_t n = counts.total();
    if (n == 0) throw DomainError("pearson_chi2_uniform_test: total count is zero");

    const double expected = static_cast<double>(n) / static_cast<double>(counts.bucket_count());
    double t = 0.0;
    for (std::uint64_t c : counts.counts) {
        const double d = static_cast<double>(c) - expected;
        t += d * d / expected;
    }
    ValidationResult r;
    r.method = Method::pearson_chi2;
    r.statistic = t;
    r.p_value = 1.0 - stats::chi_square_cdf(t, static_cast<int>(counts.bucket_count()) - 1);
    r.alert = *r.p_value < alpha;
    r.per_bucket_deviation = detail::deviations_from_uniform(counts, n);
    return r;
}

/// Kolmogorov-Smirnov test of the bucket ECDF against the uniform CDF, in
/// recorded bucket-index order. The asymptotic Kolmogorov tail is conservative
/// on discrete data, which the result notes.
inline ValidationResult ks_uniform_test(const BucketCounts& counts, double alpha) {
    detail::check_buckets(counts);
    detail::check_alpha(alpha);
    const std::uint64_t n = counts.total();
    if (n == 0) throw DomainError("ks_uniform_test: total count is zero");

    const double b_count = static_cast<double>(counts.bucket_count());
    double cum = 0.0;
    double d_max = 0.0;
    for (std::size_t b = 0; b < counts.bucket_count(); ++b) {
        cum += static_cast<double>(counts.counts[b]);
        const double ecdf = cum / static_cast<double>(n);
        const double model = static_cast<double>(b + 1) / b_count;
        d_max = std::max(d_max, std::fabs(ecdf - model));
    }
    ValidationResult r;
    r.method = Method::ks;
    r.statistic = d_max;
    r.p_value = stats::kolmogorov_sf(std::sqrt(static_cast<double>(n)) * d_max);
    r.alert = *r.p_value < alpha;
    r.per_bucket_deviation = detail::deviations_from_uniform(counts, n);
    r.note = "conservative for discrete data";
    return r;
}

/// Discrete Anderson-Darling test of the bucket ECDF against the uniform CDF:
///   A^2 = n * sum_{b<B-1} (Fhat(b) - F(b))^2 * (F(b+1) - F(b)) / (F(b)(1 - F(b)))
/// with F(b) = (b+1)/B, referred to the asymptotic A^2 tail.
inline ValidationResult ad_uniform_test(const BucketCounts& counts, double alpha) {
    detail::check_buckets(counts);
    detail::check_alpha(alpha);
    if (counts.bucket_count() < 3)
        throw DomainError("ad_uniform_test: needs at least 3 buckets");
    const std::uint64_t n = counts.total();
    if (n == 0) throw DomainError("ad_uniform_test: total count is zero");

    const double b_count = static_cast<double>(counts.bucket_count());
    double cum = 0.0;
    double sum = 0.0;
    for (std::size_t b = 0; b + 1 < counts.bucket_count(); ++b) {
        cum += static_cast<double>(counts.counts[b]);
        const double ecdf = cum / static_cast<double>(n);
        const double model = static_cast<double>(b + 1) / b_count;
        const double width = 1.0 / b_count;  // F(b+1) - F(b)
        const double diff = ecdf - model;
        sum += diff * diff * width / (model * (1.0 - model));
    }
    ValidationResult r;
    r.method = Method::ad;
    r.statistic = static_cast<double>(n) * sum;
    r.p_value = stats::anderson_darling_sf(r.statistic);
    r.alert = *r.p_value < alpha;
    r.per_bucket_deviation = detail::deviations_from_uniform(counts, n);
    return r;
}

/// Runs the validator selected by `config`, applying the min-total guard to
/// every method (a too-small sample yields a not-evaluated result rather than
/// a verdict).
inline ValidationResult run_validator(const BucketCounts& counts, const ValidationConfig& config) {
    detail::check_buckets(counts);
    detail::check_alpha(config.alpha);
    const std::uint64_t n = counts.total();
    if (n < std::max<std::uint64_t>(config.resolved_min_total(counts.bucket_count()), 1)) {
        ValidationResult r;
        r.method = config.method;
        r.evaluated = false;
        r.note = "insufficient data";
        r.per_bucket_deviation = detail::deviations_from_uniform(counts, n);
        return r;
    }
    switch (config.method) {
        case Method::psi_k: return psi_k_uniform_test(counts, config.k, config.alpha, config);
        case Method::pearson_chi2: return pearson_chi2_uniform_test(counts, config.alpha);
        case Method::ks: return ks_uniform_test(counts, config.alpha);
        case Method::ad: return ad_uniform_test(counts, config.alpha);
    }
    throw Error("run_validator: unknown method");
}

}  // namespace abq::validate
