#pragma once

// Sample-ratio-mismatch detection over cumulative daily counts.
//
// The monitor runs two one-sided Wald sequential probability ratio tests per
// experiment against the design share p0 = r_t / (r_t + r_c), with an error
// tolerance delta below which deviations are considered noise:
//
//   Test A  H0: p - p0 = 0    vs  HA: p - p0 >= delta   (too much test traffic)
//   Test B  H0: p0 - p = 0    vs  HA: p0 - p >= delta   (too little)
//
// Gaussian variant (CLT on the observed share, sigma^2 = p(1-p)/n):
//   t_a = -(delta^2 - 2 delta (p - p0)) / (2 sigma^2)
//   t_b = -(delta^2 + 2 delta (p - p0)) / (2 sigma^2)
// Exact variant (binomial likelihood ratio):
//   t_a = x_t ln((p0+delta)/p0) + x_c ln((1-p0-delta)/(1-p0))
//   t_b = x_t ln((p0-delta)/p0) + x_c ln((1-p0+delta)/(1-p0))
//
// An alert fires the first day either statistic crosses the Wald bound
// ln((1-beta)/alpha); with beta = 0 the accept-H0 bound is -infinity, so the
// monitor only ever alerts or keeps watching. Alerts are absorbing.
//
// Statistics depend only on the cumulative counts of the current snapshot, so
// the monitor state needs nothing beyond the absorbing alert flag and the
// last processed day.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "abq/errors.hpp"
#include "abq/stats.hpp"

namespace abq::srm {

/// Designed traffic split between the test and control arms.
struct ExpectedSplit {
    double r_t = 1.0;
    double r_c = 1.0;

    ExpectedSplit() = default;
    ExpectedSplit(double test_share, double control_share) : r_t(test_share), r_c(control_share) {
        if (!(r_t > 0.0) || !(r_c > 0.0))
            throw DomainError("ExpectedSplit: both traffic shares must be positive");
    }

    double p0() const { return r_t / (r_t + r_c); }
};

/// Cumulative arm counts at one (abstract) day index.
struct SrmSnapshot {
    int day = 0;
    std::uint64_t x_t = 0;
    std::uint64_t x_c = 0;

    std::uint64_t total() const { return x_t + x_c; }
    double p_hat() const { return static_cast<double>(x_t) / static_cast<double>(total()); }
};

enum class Variant { gaussian, exact };

inline const char* variant_name(Variant v) {
    return v == Variant::gaussian ? "gaussian" : "exact";
}

/// delta = min(1%, 5% * min(p0, 1 - p0)).
inline double default_delta(const ExpectedSplit& split) {
    const double p0 = split.p0();
    return std::min(0.01, 0.05 * std::min(p0, 1.0 - p0));
}

struct SprtConfig {
    std::optional<double> delta;  // nullopt: default_delta(split)
    double alpha = 0.05;
    double beta = 0.0;
    Variant variant = Variant::gaussian;
    std::uint64_t min_total = 100;

    double resolve_delta(const ExpectedSplit& split) const {
        const double d = delta ? *delta : default_delta(split);
        const double p0 = split.p0();
        if (!(d > 0.0 && d < std::min(p0, 1.0 - p0)))
            throw DomainError("SprtConfig: delta must lie in (0, min(p0, 1-p0))");
        return d;
    }
};

struct WaldThresholds {
    double lower;  // -infinity when beta = 0 (never accept H0)
    double upper;
};

inline WaldThresholds wald_thresholds(double alpha, double beta) {
    if (!(alpha > 0.0 && alpha < 1.0)) throw DomainError("wald_thresholds: alpha not in (0,1)");
    if (!(beta >= 0.0 && beta < 1.0)) throw DomainError("wald_thresholds: beta not in [0,1)");
    if (!(alpha + beta < 1.0))
        throw DomainError("wald_thresholds: alpha + beta must be below 1");
    WaldThresholds t;
    t.upper = std::log((1.0 - beta) / alpha);
    t.lower = beta == 0.0 ? -std::numeric_limits<double>::infinity()
                          : std::log(beta / (1.0 - alpha));
    return t;
}

struct SprtStats {
    double t_a = 0.0;
    double t_b = 0.0;
    bool evaluated = true;
};

/// Gaussian-approximation statistics. Degenerate shares (p_hat of exactly 0
/// or 1) have zero estimated variance and yield a not-evaluated result.
inline SprtStats sprt_gaussian_stats(const SrmSnapshot& snap, const ExpectedSplit& split,
                                     double delta) {
    if (!(delta > 0.0)) throw DomainError("sprt_gaussian_stats: delta must be positive");
    SprtStats out;
    const std::uint64_t n = snap.total();
    if (n == 0) {
        out.evaluated = false;
        return out;
    }
    const double p_hat = snap.p_hat();
    if (p_hat <= 0.0 || p_hat >= 1.0) {
        out.evaluated = false;
        return out;
    }
    const double var = p_hat * (1.0 - p_hat) / static_cast<double>(n);
    const double drift = p_hat - split.p0();
    out.t_a = -(delta * delta - 2.0 * delta * drift) / (2.0 * var);
    out.t_b = -(delta * delta + 2.0 * delta * drift) / (2.0 * var);
    return out;
}

/// Exact binomial likelihood-ratio statistics; total for all counts (an empty
/// snapshot has log-likelihood ratio 0).
inline SprtStats sprt_exact_stats(const SrmSnapshot& snap, const ExpectedSplit& split,
                                  double delta) {
    const double p0 = split.p0();
    if (!(delta > 0.0 && p0 - delta > 0.0 && p0 + delta < 1.0))
        throw DomainError("sprt_exact_stats: delta must lie in (0, min(p0, 1-p0))");
    SprtStats out;
    const double xt = static_cast<double>(snap.x_t);
    const double xc = static_cast<double>(snap.x_c);
    out.t_a = xt * std::log((p0 + delta) / p0) + xc * std::log((1.0 - p0 - delta) / (1.0 - p0));
    out.t_b = xt * std::log((p0 - delta) / p0) + xc * std::log((1.0 - p0 + delta) / (1.0 - p0));
    return out;
}

enum class SprtOutcome { alert_high, alert_low, continue_monitoring, not_evaluated };

inline const char* outcome_name(SprtOutcome o) {
    switch (o) {
        case SprtOutcome::alert_high: return "alert_high";
        case SprtOutcome::alert_low: return "alert_low";
        case SprtOutcome::continue_monitoring: return "continue";
        case SprtOutcome::not_evaluated: return "not_evaluated";
    }
    return "?";
}

enum class Direction { high, low };

inline const char* direction_name(Direction d) { return d == Direction::high ? "high" : "low"; }

struct SprtDecision {
    int day = 0;
    double t_a = 0.0;
    double t_b = 0.0;
    double upper_threshold = 0.0;
    double lower_threshold = -std::numeric_limits<double>::infinity();
    SprtOutcome outcome = SprtOutcome::not_evaluated;
};

/// Absorbing per-experiment alert state. `last_day` orders incoming
/// snapshots and survives persistence.
struct MonitorState {
    bool fired = false;
    std::optional<int> first_alert_day;
    std::optional<Direction> direction;
    std::optional<int> last_day;
};

/// Evaluates one snapshot and advances the state. The per-day decision is
/// recomputed from cumulative counts regardless of the alert flag; the state
/// only absorbs the first alert ("send alert and break" semantics).
inline std::pair<MonitorState, SprtDecision> sprt_step(const MonitorState& state,
                                                       const SrmSnapshot& snap,
                                                       const ExpectedSplit& split,
                                                       const SprtConfig& config) {
    if (state.last_day && snap.day <= *state.last_day)
        throw SequenceError("sprt_step: snapshot days must be strictly increasing (got day " +
                            std::to_string(snap.day) + " after " +
                            std::to_string(*state.last_day) + ")");

    const WaldThresholds bounds = wald_thresholds(config.alpha, config.beta);
    const double delta = config.resolve_delta(split);

    SprtDecision decision;
    decision.day = snap.day;
    decision.upper_threshold = bounds.upper;
    decision.lower_threshold = bounds.lower;

    if (snap.total() < config.min_total) {
        decision.outcome = SprtOutcome::not_evaluated;
    } else {
        const SprtStats stats = config.variant == Variant::gaussian
                                    ? sprt_gaussian_stats(snap, split, delta)
                                    : sprt_exact_stats(snap, split, delta);
        if (!stats.evaluated) {
            decision.outcome = SprtOutcome::not_evaluated;
        } else {
            decision.t_a = stats.t_a;
            decision.t_b = stats.t_b;
            if (stats.t_a > bounds.upper) {
                decision.outcome = SprtOutcome::alert_high;
            } else if (stats.t_b > bounds.upper) {
                decision.outcome = SprtOutcome::alert_low;
            } else {
                decision.outcome = SprtOutcome::continue_monitoring;
            }
        }
    }

    MonitorState next = state;
    next.last_day = snap.day;
    if (!next.fired) {
        if (decision.outcome == SprtOutcome::alert_high) {
            next.fired = true;
            next.first_alert_day = snap.day;
            next.direction = Direction::high;
        } else if (decision.outcome == SprtOutcome::alert_low) {
            next.fired = true;
            next.first_alert_day = snap.day;
            next.direction = Direction::low;
        }
    }
    return {next, decision};
}

/// Two-sided one-proportion z-test on a single snapshot.
inline bool t_test_detector(const SrmSnapshot& snap, const ExpectedSplit& split, double alpha,
                            std::uint64_t min_total = 0) {
    if (!(alpha > 0.0 && alpha < 1.0)) throw DomainError("t_test_detector: alpha not in (0,1)");
    const std::uint64_t n = snap.total();
    if (n == 0 || n < min_total) return false;
    const double p0 = split.p0();
    const double z = (snap.p_hat() - p0) / std::sqrt(p0 * (1.0 - p0) / static_cast<double>(n));
    const double p_value = 2.0 * (1.0 - stats::normal_cdf(std::fabs(z)));
    return p_value < alpha;
}

/// Pearson chi-square (1 df) on a single snapshot; algebraically z^2 of the
/// t-test above.
inline bool chi2_detector(const SrmSnapshot& snap, const ExpectedSplit& split, double alpha,
                          std::uint64_t min_total = 0) {
    if (!(alpha > 0.0 && alpha < 1.0)) throw DomainError("chi2_detector: alpha not in (0,1)");
    const std::uint64_t n = snap.total();
    if (n == 0 || n < min_total) return false;
    const double p0 = split.p0();
    const double e_t = static_cast<double>(n) * p0;
    const double e_c = static_cast<double>(n) * (1.0 - p0);
    const double dt = static_cast<double>(snap.x_t) - e_t;
    const double dc = static_cast<double>(snap.x_c) - e_c;
    const double t = dt * dt / e_t + dc * dc / e_c;
    return 1.0 - stats::chi_square_cdf(t, 1) < alpha;
}

/// Rule-based label for 50/50 designs: |x_t - x_c| / x_c > 1%, strict, in
/// exact integer arithmetic. Returns nullopt when both arms are empty.
inline std::optional<bool> srm_label_rule(const SrmSnapshot& snap) {
    if (snap.x_c == 0) {
        if (snap.x_t == 0) return std::nullopt;
        return true;
    }
    const std::uint64_t diff = snap.x_t > snap.x_c ? snap.x_t - snap.x_c : snap.x_c - snap.x_t;
    return 100 * diff > snap.x_c;
}

/// Extension of the rule to arbitrary designs: |x_t r_c - x_c r_t| / (x_c r_t)
/// > 1%. Reduces to srm_label_rule when r_t = r_c.
inline std::optional<bool> generalized_srm_label_rule(const SrmSnapshot& snap,
                                                      const ExpectedSplit& split) {
    const double scaled_t = static_cast<double>(snap.x_t) * split.r_c;
    const double scaled_c = static_cast<double>(snap.x_c) * split.r_t;
    if (scaled_c == 0.0) {
        if (scaled_t == 0.0) return std::nullopt;
        return true;
    }
    return std::fabs(scaled_t - scaled_c) / scaled_c > 0.01;
}

struct MonitorReport {
    MonitorState final_state;
    std::vector<SprtDecision> trace;

    bool fired() const { return final_state.fired; }
};

/// Folds sprt_step over an ordered series.
inline MonitorReport monitor_series(std::span<const SrmSnapshot> snapshots,
                                    const ExpectedSplit& split, const SprtConfig& config,
                                    MonitorState initial = {}) {
    MonitorReport report;
    report.final_state = initial;
    report.trace.reserve(snapshots.size());
    for (const auto& snap : snapshots) {
        auto [next, decision] = sprt_step(report.final_state, snap, split, config);
        report.final_state = next;
        report.trace.push_back(decision);
    }
    return report;
}

struct SegmentedReport {
    std::map<std::string, MonitorReport> segments;
    MonitorReport aggregate;
    std::vector<SrmSnapshot> aggregate_series;
    std::vector<std::string> skipped;    // segments omitted for empty series
    std::vector<std::string> divergent;  // fired status differs from aggregate
};

/// Sums segment series into one cumulative "all" series over the union of
/// their day indices, carrying each segment's cumulative counts forward
/// between its snapshot days. Empty segments contribute nothing.
inline std::vector<SrmSnapshot> aggregate_segments(
    const std::map<std::string, std::vector<SrmSnapshot>>& by_segment) {
    std::vector<int> days;
    for (const auto& [name, series] : by_segment) {
        for (const auto& snap : series) days.push_back(snap.day);
    }
    std::sort(days.begin(), days.end());
    days.erase(std::unique(days.begin(), days.end()), days.end());

    std::vector<SrmSnapshot> aggregate(days.size());
    for (std::size_t i = 0; i < days.size(); ++i) aggregate[i].day = days[i];
    for (const auto& [name, series] : by_segment) {
        std::size_t pos = 0;
        std::uint64_t cur_t = 0, cur_c = 0;
        for (std::size_t i = 0; i < days.size(); ++i) {
            while (pos < series.size() && series[pos].day <= days[i]) {
                cur_t = series[pos].x_t;
                cur_c = series[pos].x_c;
                ++pos;
            }
            aggregate[i].x_t += cur_t;
            aggregate[i].x_c += cur_c;
        }
    }
    return aggregate;
}

/// Monitors each segment independently plus the summed "all" aggregate, and
/// flags segments whose verdict differs from the aggregate — the diagnostic
/// for faults confined to one site/channel/browser family.
inline SegmentedReport segmented_monitor(
    const std::map<std::string, std::vector<SrmSnapshot>>& by_segment, const ExpectedSplit& split,
    const SprtConfig& config) {
    SegmentedReport report;
    for (const auto& [name, series] : by_segment) {
        if (series.empty()) {
            report.skipped.push_back(name);
            continue;
        }
        report.segments.emplace(name, monitor_series(series, split, config));
    }
    report.aggregate_series = aggregate_segments(by_segment);
    report.aggregate = monitor_series(report.aggregate_series, split, config);
    for (const auto& [name, seg_report] : report.segments) {
        if (seg_report.fired() != report.aggregate.fired()) report.divergent.push_back(name);
    }
    return report;
}

}  // namespace abq::srm
