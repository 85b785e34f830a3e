#pragma once

// Detector-quality metrics over labeled datasets, and the benchmark drivers
// that compare the validators and SRM detectors on simulated suites.
//
// Evaluation protocol for the SRM comparison: the per-snapshot baselines
// (t-test, chi-square) are scored once per (series, day) cell against the
// rule-based label of that day's cumulative counts, while the sequential
// detectors are scored once per series (absorbing alert vs the final-day
// label). Per-series any-day flags are also reported for every detector so
// the two families can be compared at series level.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "abq/errors.hpp"
#include "abq/sim.hpp"
#include "abq/srm.hpp"
#include "abq/validate.hpp"

namespace abq::eval {

struct ConfusionMatrix {
    std::uint64_t tn = 0;
    std::uint64_t fp = 0;
    std::uint64_t fn = 0;
    std::uint64_t tp = 0;

    std::uint64_t total() const { return tn + fp + fn + tp; }

    void add(bool prediction, bool label) {
        if (prediction) {
            (label ? tp : fp) += 1;
        } else {
            (label ? fn : tn) += 1;
        }
    }
};

/// Each metric is absent when its denominator is zero ("n/a" in reports,
/// never 0 or 1).
struct MetricsReport {
    std::optional<double> fpr;
    std::optional<double> precision;
    std::optional<double> recall;
    std::optional<double> f_score;
};

inline MetricsReport metrics_from(const ConfusionMatrix& cm) {
    MetricsReport m;
    if (cm.fp + cm.tn > 0)
        m.fpr = static_cast<double>(cm.fp) / static_cast<double>(cm.fp + cm.tn);
    if (cm.tp + cm.fp > 0)
        m.precision = static_cast<double>(cm.tp) / static_cast<double>(cm.tp + cm.fp);
    if (cm.tp + cm.fn > 0)
        m.recall = static_cast<double>(cm.tp) / static_cast<double>(cm.tp + cm.fn);
    if (m.precision && m.recall && *m.precision + *m.recall > 0.0)
        m.f_score = 2.0 * *m.precision * *m.recall / (*m.precision + *m.recall);
    return m;
}

inline std::pair<ConfusionMatrix, MetricsReport> score(const std::vector<bool>& predictions,
                                                       const std::vector<bool>& labels) {
    if (predictions.size() != labels.size())
        throw ShapeError("score: predictions and labels differ in length");
    ConfusionMatrix cm;
    for (std::size_t i = 0; i < predictions.size(); ++i) cm.add(predictions[i], labels[i]);
    return {cm, metrics_from(cm)};
}

// ---------------------------------------------------------------------------
// Randomization-validator benchmarks
// ---------------------------------------------------------------------------

/// The level the baseline comparisons run at. See the pearson FPR targets:
/// on clean simulated nulls the chi-square false-positive rate approximates
/// its alpha, and the reference tables put it near 10%.
inline constexpr double kBenchmarkAlpha = 0.1;

struct ValidatorEvalRow {
    validate::Method method = validate::Method::psi_k;
    ConfusionMatrix cm;
    MetricsReport metrics;
    std::vector<bool> alerts;  // per case, in dataset order
};

inline std::vector<ValidatorEvalRow> evaluate_validators(
    std::span<const sim::LabeledBucketCase> dataset, std::span<const validate::Method> methods,
    double alpha = kBenchmarkAlpha, int k = 1, const validate::ValidationConfig& base = {}) {
    std::vector<ValidatorEvalRow> rows;
    rows.reserve(methods.size());
    for (auto method : methods) {
        validate::ValidationConfig config = base;
        config.method = method;
        config.alpha = alpha;
        config.k = k;
        ValidatorEvalRow row;
        row.method = method;
        row.alerts.reserve(dataset.size());
        for (const auto& c : dataset) {
            const auto result = validate::run_validator(c.counts, config);
            const bool alert = result.evaluated && result.alert;
            row.alerts.push_back(alert);
            row.cm.add(alert, c.label);
        }
        row.metrics = metrics_from(row.cm);
        rows.push_back(std::move(row));
    }
    return rows;
}

struct KSweepRow {
    int k = 1;
    ConfusionMatrix cm;
    MetricsReport metrics;
    std::vector<bool> alerts;
};

inline std::vector<KSweepRow> k_sweep(std::span<const sim::LabeledBucketCase> dataset,
                                      std::span<const int> ks, double alpha = kBenchmarkAlpha,
                                      const validate::ValidationConfig& base = {}) {
    std::vector<KSweepRow> rows;
    rows.reserve(ks.size());
    for (int k : ks) {
        KSweepRow row;
        row.k = k;
        row.alerts.reserve(dataset.size());
        for (const auto& c : dataset) {
            const auto result = validate::psi_k_uniform_test(c.counts, k, alpha, base);
            const bool alert = result.evaluated && result.alert;
            row.alerts.push_back(alert);
            row.cm.add(alert, c.label);
        }
        row.metrics = metrics_from(row.cm);
        rows.push_back(std::move(row));
    }
    return rows;
}

struct NoiseSweepRow {
    double lambda = 0.0;
    std::vector<ValidatorEvalRow> rows;
};

inline std::vector<NoiseSweepRow> noise_sweep_eval(std::span<const double> lambdas,
                                                   const sim::BucketDatasetSpec& base_spec,
                                                   std::span<const validate::Method> methods,
                                                   double alpha = kBenchmarkAlpha, int k = 1) {
    std::vector<NoiseSweepRow> out;
    out.reserve(lambdas.size());
    for (const auto& [lambda, dataset] : sim::generate_noise_sweep(lambdas, base_spec)) {
        NoiseSweepRow row;
        row.lambda = lambda;
        row.rows = evaluate_validators(dataset, methods, alpha, k);
        out.push_back(std::move(row));
    }
    return out;
}

// ---------------------------------------------------------------------------
// SRM detector benchmarks
// ---------------------------------------------------------------------------

enum class SrmDetector { sprt_gaussian, sprt_exact, t_test, chi2 };

inline const char* srm_detector_name(SrmDetector d) {
    switch (d) {
        case SrmDetector::sprt_gaussian: return "sprt";
        case SrmDetector::sprt_exact: return "sprt-exact";
        case SrmDetector::t_test: return "t-test";
        case SrmDetector::chi2: return "chi2";
    }
    return "?";
}

struct SrmEvalConfig {
    double sprt_alpha = 0.05;
    double sprt_beta = 0.0;
    std::optional<double> delta;   // nullopt: default_delta(split)
    double baseline_alpha = 0.01;  // deliberately below the SPRT level
    std::uint64_t min_total = 100;
    std::size_t size_bins = 4;
};

struct SizeBinRecall {
    std::uint64_t max_final_total = 0;  // inclusive upper edge of the bin
    std::uint64_t positives = 0;        // label-1 series landing in the bin
    std::optional<double> recall;
};

struct SrmDetectorReport {
    SrmDetector detector = SrmDetector::sprt_gaussian;
    // Baselines: one cell per evaluated (series, day); sequential detectors:
    // one cell per series.
    ConfusionMatrix primary_cm;
    MetricsReport primary_metrics;
    // Series-level view for every detector (any-day flag vs final-day label).
    ConfusionMatrix series_cm;
    MetricsReport series_metrics;
    std::vector<bool> series_flagged;
    std::vector<SizeBinRecall> recall_by_size;
};

struct SrmEvalReport {
    std::string protocol_note;
    std::vector<SrmDetectorReport> detectors;
    std::vector<bool> series_labels;            // rule label at the final day
    std::vector<std::uint64_t> series_final_totals;

    const SrmDetectorReport& detector(SrmDetector d) const {
        for (const auto& r : detectors) {
            if (r.detector == d) return r;
        }
        throw Error("SrmEvalReport: detector not evaluated");
    }
};

/// Fraction of series on which two detectors reach the same fired/not-fired
/// verdict.
inline double decision_agreement(const SrmDetectorReport& a, const SrmDetectorReport& b) {
    if (a.series_flagged.size() != b.series_flagged.size() || a.series_flagged.empty())
        throw ShapeError("decision_agreement: incompatible detector reports");
    std::size_t same = 0;
    for (std::size_t i = 0; i < a.series_flagged.size(); ++i) {
        if (a.series_flagged[i] == b.series_flagged[i]) ++same;
    }
    return static_cast<double>(same) / static_cast<double>(a.series_flagged.size());
}

inline SrmEvalReport evaluate_srm_detectors(std::span<const sim::LabeledSrmSeries> series_set,
                                            std::span<const SrmDetector> detectors,
                                            const srm::ExpectedSplit& split,
                                            const SrmEvalConfig& config = {}) {
    SrmEvalReport report;
    report.protocol_note =
        "baselines scored per (series, day) cell; sequential detectors scored per series "
        "with absorbing alerts; labels from the 1% cumulative-count rule";

    report.series_labels.reserve(series_set.size());
    report.series_final_totals.reserve(series_set.size());
    for (const auto& series : series_set) {
        const bool label =
            series.snapshots.empty()
                ? false
                : srm::srm_label_rule(series.snapshots.back()).value_or(false);
        report.series_labels.push_back(label);
        report.series_final_totals.push_back(
            series.snapshots.empty() ? 0 : series.snapshots.back().total());
    }

    // Equal-count size-bin edges (inclusive upper quantiles) over final totals.
    std::vector<std::uint64_t> sorted_totals = report.series_final_totals;
    std::sort(sorted_totals.begin(), sorted_totals.end());
    const std::size_t bins = std::max<std::size_t>(1, config.size_bins);
    std::vector<std::uint64_t> bin_edges(bins, 0);
    if (!sorted_totals.empty()) {
        const std::size_t n = sorted_totals.size();
        for (std::size_t b = 0; b < bins; ++b) {
            std::size_t idx = (b + 1) * n / bins;
            idx = idx == 0 ? 0 : idx - 1;
            bin_edges[b] = sorted_totals[std::min(idx, n - 1)];
        }
        bin_edges.back() = sorted_totals.back();
    }
    auto bin_of = [&](std::uint64_t total) {
        for (std::size_t b = 0; b + 1 < bin_edges.size(); ++b) {
            if (total <= bin_edges[b]) return b;
        }
        return bin_edges.size() - 1;
    };

    for (auto which : detectors) {
        SrmDetectorReport det;
        det.detector = which;
        det.series_flagged.reserve(series_set.size());
        std::vector<ConfusionMatrix> bin_cms(bins);

        const bool sequential =
            which == SrmDetector::sprt_gaussian || which == SrmDetector::sprt_exact;
        srm::SprtConfig sprt_config;
        sprt_config.alpha = config.sprt_alpha;
        sprt_config.beta = config.sprt_beta;
        sprt_config.delta = config.delta;
        sprt_config.min_total = config.min_total;
        sprt_config.variant = which == SrmDetector::sprt_exact ? srm::Variant::exact
                                                               : srm::Variant::gaussian;

        for (std::size_t i = 0; i < series_set.size(); ++i) {
            const auto& series = series_set[i];
            const bool series_label = report.series_labels[i];
            bool flagged = false;

            if (sequential) {
                flagged = srm::monitor_series(series.snapshots, split, sprt_config).fired();
                det.primary_cm.add(flagged, series_label);
            } else {
                for (const auto& snap : series.snapshots) {
                    if (snap.total() == 0) continue;
                    const bool day_label = srm::srm_label_rule(snap).value_or(false);
                    const bool alert =
                        which == SrmDetector::t_test
                            ? srm::t_test_detector(snap, split, config.baseline_alpha,
                                                   config.min_total)
                            : srm::chi2_detector(snap, split, config.baseline_alpha,
                                                 config.min_total);
                    det.primary_cm.add(alert, day_label);
                    flagged = flagged || alert;
                }
            }

            det.series_flagged.push_back(flagged);
            det.series_cm.add(flagged, series_label);
            bin_cms[bin_of(report.series_final_totals[i])].add(flagged, series_label);
        }

        det.primary_metrics = metrics_from(det.primary_cm);
        det.series_metrics = metrics_from(det.series_cm);
        det.recall_by_size.reserve(bins);
        for (std::size_t b = 0; b < bins; ++b) {
            SizeBinRecall bin;
            bin.max_final_total = bin_edges.empty() ? 0 : bin_edges[b];
            bin.positives = bin_cms[b].tp + bin_cms[b].fn;
            bin.recall = metrics_from(bin_cms[b]).recall;
            det.recall_by_size.push_back(bin);
        }
        report.detectors.push_back(std::move(det));
    }
    return report;
}

}  // namespace abq::eval
