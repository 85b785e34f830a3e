#pragma once

// Deterministic simulator of the randomization architecture and generator of
// labeled benchmark datasets.
//
// Bucketing follows the production scheme: a sample identifier is hashed with
// MD5 together with the plane's randomization seed and reduced mod B, which
// distributes traffic as Multinom(1/B) per plane. Distinct seeds give
// independent assignments (orthogonal mode); experiments sharing a seed share
// assignments (exclusive mode).
//
// The bucket-count benchmark draws negatives as uniform multinomials with
// n ~ Poisson(mean_total) and injects anomalies into positives: m ~ U{1..max}
// buckets each get probability 1/B + (0.05 + x*10^-2)/100 with x ~
// Poisson(noise_lambda), the residual mass being shared equally by the
// remaining buckets. Per-case RNG streams are derived from (rng_seed,
// case_index), so cases are order-independent and negatives are identical
// across noise levels.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "abq/errors.hpp"
#include "abq/md5.hpp"
#include "abq/rng.hpp"
#include "abq/srm.hpp"
#include "abq/validate.hpp"

namespace abq::sim {

/// A hashing namespace: every plane spans the whole traffic, split into
/// `bucket_count` uniform buckets.
struct Plane {
    std::string seed;
    std::size_t bucket_count = 100;
};

/// Bucket ranges ("swim lanes") assigned to the arms of one experiment.
struct ExperimentDef {
    Plane plane;
    std::set<std::size_t> test_buckets;
    std::set<std::size_t> control_buckets;
    double trigger_rate = 1.0;

    void validate() const {
        if (plane.bucket_count < 2) throw SpecError("ExperimentDef: plane needs >= 2 buckets");
        for (std::size_t b : test_buckets) {
            if (b >= plane.bucket_count) throw SpecError("ExperimentDef: test bucket out of range");
            if (control_buckets.count(b))
                throw SpecError("ExperimentDef: a bucket cannot serve both variants");
        }
        for (std::size_t b : control_buckets) {
            if (b >= plane.bucket_count)
                throw SpecError("ExperimentDef: control bucket out of range");
        }
        if (!(trigger_rate >= 0.0 && trigger_rate <= 1.0))
            throw SpecError("ExperimentDef: trigger_rate must lie in [0, 1]");
    }
};

/// bucket = (big-endian u64 from the first 8 MD5 bytes of "user_id:seed") mod B.
/// The byte convention is fixed and golden-tested; see data/hash_vectors.csv.
inline std::size_t assign_bucket(std::string_view user_id, std::string_view seed,
                                 std::size_t bucket_count) {
    if (bucket_count == 0) throw DomainError("assign_bucket: bucket count must be positive");
    if (user_id.empty() || seed.empty())
        throw DomainError("assign_bucket: user id and seed must be non-empty");
    std::string key;
    key.reserve(user_id.size() + 1 + seed.size());
    key.append(user_id);
    key.push_back(':');
    key.append(seed);
    const auto d = md5::digest(key);
    std::uint64_t h = 0;
    for (int i = 0; i < 8; ++i) h = (h << 8) | d[static_cast<std::size_t>(i)];
    return static_cast<std::size_t>(h % bucket_count);
}

/// Hashes `n_users` synthetic sequential identifiers onto a plane.
inline validate::BucketCounts count_assignments(std::uint64_t n_users, const Plane& plane,
                                                std::string_view id_prefix = "user-") {
    std::vector<std::uint64_t> counts(plane.bucket_count, 0);
    std::string id;
    for (std::uint64_t i = 0; i < n_users; ++i) {
        id.assign(id_prefix);
        id += std::to_string(i);
        ++counts[assign_bucket(id, plane.seed, plane.bucket_count)];
    }
    return validate::BucketCounts(std::move(counts));
}

struct BucketDatasetSpec {
    std::uint64_t negatives = 500;
    std::uint64_t positives = 100;
    std::size_t buckets = 100;
    double mean_total = 3e6;          // Poisson mean of the case total
    double noise_lambda = 4.0;        // Poisson mean of the extra-noise draw x
    std::size_t max_anomalous_buckets = 5;
    std::uint64_t rng_seed = 0;

    void validate() const {
        if (buckets < 2) throw SpecError("BucketDatasetSpec: needs >= 2 buckets");
        if (!(mean_total > 0.0)) throw SpecError("BucketDatasetSpec: mean_total must be positive");
        if (!(noise_lambda >= 0.0))
            throw SpecError("BucketDatasetSpec: noise_lambda must be non-negative");
        if (max_anomalous_buckets < 1 || max_anomalous_buckets > buckets)
            throw SpecError("BucketDatasetSpec: max_anomalous_buckets out of range");
    }
};

struct LabeledBucketCase {
    validate::BucketCounts counts;
    bool label = false;  // true: anomaly injected
};

namespace detail {

inline constexpr std::uint64_t kTagCaseBase = 0x6361736562617365ULL;
inline constexpr std::uint64_t kTagCaseNoise = 0x6e6f697365747467ULL;
inline constexpr std::uint64_t kTagSrmSeries = 0x73726d7365726965ULL;
inline constexpr std::uint64_t kTagLeak = 0x6c65616b00000000ULL;

/// Probability vector with `extras[i]` added onto bucket `anomalous[i]` and
/// the residual shared equally by the untouched buckets.
inline std::vector<double> anomalous_probability_vector(std::size_t buckets,
                                                        std::span<const std::size_t> anomalous,
                                                        std::span<const double> extras) {
    const double base = 1.0 / static_cast<double>(buckets);
    double inflated_mass = 0.0;
    for (std::size_t i = 0; i < anomalous.size(); ++i) {
        inflated_mass += base + extras[i];
        if (base + extras[i] > 1.0)
            throw SpecError("bucket probability inflated beyond 1");
    }
    const double residual = 1.0 - inflated_mass;
    if (anomalous.size() >= buckets || residual < 0.0)
        throw SpecError("anomalous buckets exhaust the probability mass");

    std::vector<double> probs(buckets, residual / static_cast<double>(buckets - anomalous.size()));
    for (std::size_t i = 0; i < anomalous.size(); ++i) probs[anomalous[i]] = base + extras[i];
    return probs;
}

}  // namespace detail

/// One labeled benchmark case. Streams derive from (rng_seed, case_index):
/// the base stream drives n, the anomaly placement and the multinomial draw;
/// the separate noise stream drives only the Poisson noise magnitudes, so
/// sweeping noise_lambda re-scales anomalies without disturbing anything else.
inline LabeledBucketCase generate_bucket_case(bool positive, const BucketDatasetSpec& spec,
                                              std::uint64_t case_index) {
    spec.validate();
    rng::Stream base = rng::Stream::derive(spec.rng_seed, case_index, detail::kTagCaseBase);
    const std::uint64_t n = base.poisson(spec.mean_total);

    LabeledBucketCase out;
    out.label = positive;
    if (!positive) {
        const std::vector<double> probs(spec.buckets, 1.0 / static_cast<double>(spec.buckets));
        out.counts = validate::BucketCounts(base.multinomial(n, probs));
        return out;
    }

    const std::uint64_t m = 1 + base.uniform_below(spec.max_anomalous_buckets);
    const auto anomalous = base.sample_without_replacement(spec.buckets,
                                                           static_cast<std::size_t>(m));
    rng::Stream noise = rng::Stream::derive(spec.rng_seed, case_index, detail::kTagCaseNoise);
    std::vector<double> extras(anomalous.size());
    for (auto& e : extras) {
        const double x = static_cast<double>(noise.poisson(spec.noise_lambda));
        e = (0.05 + x * 1e-2) / 100.0;  // (0.05 + x*10^-2) percent
    }
    const auto probs = detail::anomalous_probability_vector(spec.buckets, anomalous, extras);
    out.counts = validate::BucketCounts(base.multinomial(n, probs));
    return out;
}

/// Negatives first (case indices 0..negatives-1), then positives.
inline std::vector<LabeledBucketCase> generate_bucket_dataset(const BucketDatasetSpec& spec) {
    spec.validate();
    std::vector<LabeledBucketCase> cases;
    cases.reserve(spec.negatives + spec.positives);
    for (std::uint64_t i = 0; i < spec.negatives; ++i) {
        cases.push_back(generate_bucket_case(false, spec, i));
    }
    for (std::uint64_t i = 0; i < spec.positives; ++i) {
        cases.push_back(generate_bucket_case(true, spec, spec.negatives + i));
    }
    return cases;
}

/// One dataset per noise level, sharing every base parameter (and therefore
/// the negative cases) across levels.
inline std::vector<std::pair<double, std::vector<LabeledBucketCase>>> generate_noise_sweep(
    std::span<const double> lambdas, const BucketDatasetSpec& base_spec) {
    std::vector<std::pair<double, std::vector<LabeledBucketCase>>> out;
    out.reserve(lambdas.size());
    for (double lambda : lambdas) {
        BucketDatasetSpec spec = base_spec;
        spec.noise_lambda = lambda;
        out.emplace_back(lambda, generate_bucket_dataset(spec));
    }
    return out;
}

struct SrmSeriesSpec {
    int days = 29;
    double daily_volume = 1e5;        // Poisson mean of each day's arrivals
    double p0 = 0.5;                  // designed test share
    double injected_shift = 0.0;      // additive shift of the true test share
    int shift_start_day = 1;          // first day the shift applies
    std::uint64_t rng_seed = 0;

    void validate() const {
        if (days < 1) throw SpecError("SrmSeriesSpec: days must be >= 1");
        if (!(daily_volume >= 0.0))
            throw SpecError("SrmSeriesSpec: daily_volume must be non-negative");
        if (!(p0 > 0.0 && p0 < 1.0)) throw SpecError("SrmSeriesSpec: p0 must lie in (0,1)");
        const double shifted = p0 + injected_shift;
        if (!(shifted > 0.0 && shifted < 1.0))
            throw SpecError("SrmSeriesSpec: shifted share leaves (0,1)");
    }
};

struct LabeledSrmSeries {
    std::vector<srm::SrmSnapshot> snapshots;  // cumulative; zero-total days omitted
    bool truth = false;                       // true iff a shift was injected
};

inline LabeledSrmSeries generate_srm_series(const SrmSeriesSpec& spec) {
    spec.validate();
    rng::Stream stream = rng::Stream::derive(spec.rng_seed, detail::kTagSrmSeries);
    LabeledSrmSeries out;
    out.truth = spec.injected_shift != 0.0;
    std::uint64_t cum_t = 0, cum_c = 0;
    for (int day = 1; day <= spec.days; ++day) {
        const std::uint64_t arrivals = stream.poisson(spec.daily_volume);
        const double share =
            day >= spec.shift_start_day ? spec.p0 + spec.injected_shift : spec.p0;
        const std::uint64_t to_test = stream.binomial(arrivals, share);
        cum_t += to_test;
        cum_c += arrivals - to_test;
        if (cum_t + cum_c > 0) out.snapshots.push_back({day, cum_t, cum_c});
    }
    return out;
}

/// Adds round(leak_fraction * n) phantom samples spread uniformly over
/// `target_buckets` — the tracked-id-mismatch scenario where ghost users leak
/// into an experiment's buckets.
inline validate::BucketCounts inject_ghost_leakage(const validate::BucketCounts& assigned,
                                                   double leak_fraction,
                                                   std::span<const std::size_t> target_buckets,
                                                   rng::Stream& stream) {
    if (!(leak_fraction >= 0.0 && leak_fraction < 1.0))
        throw DomainError("inject_ghost_leakage: leak_fraction must lie in [0, 1)");
    if (target_buckets.empty())
        throw SpecError("inject_ghost_leakage: target bucket set is empty");
    for (std::size_t b : target_buckets) {
        if (b >= assigned.bucket_count())
            throw SpecError("inject_ghost_leakage: target bucket out of range");
    }
    validate::BucketCounts out = assigned;
    const auto extra = static_cast<std::uint64_t>(
        std::llround(leak_fraction * static_cast<double>(assigned.total())));
    if (extra == 0) return out;
    const std::vector<double> probs(target_buckets.size(),
                                    1.0 / static_cast<double>(target_buckets.size()));
    const auto spread = stream.multinomial(extra, probs);
    for (std::size_t i = 0; i < target_buckets.size(); ++i) {
        out.counts[target_buckets[i]] += spread[i];
    }
    return out;
}

}  // namespace abq::sim
