// Acceptance suite: runs every release criterion end to end against the
// simulated benchmarks and prints one PASS/FAIL line per criterion.
//
// Criteria (tolerances pinned in code):
//   1. bucket benchmark: PSI_1 FPR <= 0.6%, recall >= 95%; Pearson chi2 FPR
//      in [7%, 14%]; under 60 s.
//   2. noise sweep lambda 0..10: PSI_1 precision >= 98% at every level and
//      PSI recall >= KS and AD recall at every lambda >= 4; under 5 min.
//   3. PSI k-sweep k=1..7: alert sets nested (exact), FPR <= 0.6% for k <= 4.
//   4. desk SRM example: exact-variant statistic matches an independent
//      recomputation to 1e-9, exceeds ln 20, both variants fire "low".
//   5. 1000 null series: SPRT fires <= 7%, the per-day t-test flags at least
//      3x as many series, and on the mixed suite SPRT precision beats the
//      t-test; under 2 min.
//   6. gaussian/exact fired-decision agreement >= 99% on the mixed suite.
//   7. property suites: PSI positivity/symmetry, gaussian identity, exact
//      linearity, chi-square round-trip, hash golden vectors + uniformity,
//      parser rejection corpus, CLI idempotence and exit codes.
//   8. SPRT recall in the largest size bin exceeds the smallest bin.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "abq/errors.hpp"
#include "abq/eval.hpp"
#include "abq/io.hpp"
#include "abq/rng.hpp"
#include "abq/sim.hpp"
#include "abq/srm.hpp"
#include "abq/stats.hpp"
#include "abq/validate.hpp"

using namespace abq;
namespace fs = std::filesystem;

namespace {

int g_failures = 0;

double seconds_since(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

void report(int criterion, bool pass, const std::string& detail) {
    std::printf("[%s] %d. %s\n", pass ? "PASS" : "FAIL", criterion, detail.c_str());
    if (!pass) ++g_failures;
}

std::string pct(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f%%", v * 100.0);
    return buf;
}

// The seeded benchmark datasets shared by criteria 1 and 3.
sim::BucketDatasetSpec benchmark_spec() {
    sim::BucketDatasetSpec spec;
    spec.negatives = 500;
    spec.positives = 100;
    spec.buckets = 100;
    spec.mean_total = 3e6;
    spec.noise_lambda = 4.0;
    spec.max_anomalous_buckets = 5;
    spec.rng_seed = 20190301;
    return spec;
}

// Mixed SRM suite shared by criteria 5 (precision direction), 6 and 8:
// four daily-volume decades, half the series carrying a +-0.8% share shift.
std::vector<sim::LabeledSrmSeries> mixed_srm_suite() {
    std::vector<sim::LabeledSrmSeries> suite;
    const double volumes[] = {5e2, 5e3, 5e4, 5e5};
    for (int i = 0; i < 400; ++i) {
        sim::SrmSeriesSpec spec;
        spec.days = 29;
        spec.daily_volume = volumes[i % 4];
        spec.injected_shift = i < 200 ? 0.0 : (i % 2 == 0 ? 0.008 : -0.008);
        spec.rng_seed = rng::derive_seed(77001, static_cast<std::uint64_t>(i));
        suite.push_back(sim::generate_srm_series(spec));
    }
    return suite;
}

// ---------------------------------------------------------------------------

void criterion_1(const std::vector<sim::LabeledBucketCase>& dataset) {
    const auto start = std::chrono::steady_clock::now();
    const std::vector<validate::Method> methods = {validate::Method::psi_k,
                                                   validate::Method::pearson_chi2};
    const auto rows = eval::evaluate_validators(dataset, methods, eval::kBenchmarkAlpha, 1);
    const double psi_fpr = rows[0].metrics.fpr.value_or(1.0);
    const double psi_recall = rows[0].metrics.recall.value_or(0.0);
    const double chi2_fpr = rows[1].metrics.fpr.value_or(1.0);
    const double elapsed = seconds_since(start);

    const bool pass = psi_fpr <= 0.006 && psi_recall >= 0.95 && chi2_fpr >= 0.07 &&
                      chi2_fpr <= 0.14 && elapsed < 60.0;
    std::ostringstream detail;
    detail << "bucket benchmark (500 neg / 100 pos): PSI_1 FPR=" << pct(psi_fpr)
           << " (<=0.60%), recall=" << pct(psi_recall) << " (>=95%), chi2 FPR=" << pct(chi2_fpr)
           << " (in [7%,14%]), " << std::round(elapsed * 10) / 10 << "s (<60s)";
    report(1, pass, detail.str());
}

void criterion_2() {
    const auto start = std::chrono::steady_clock::now();
    sim::BucketDatasetSpec base = benchmark_spec();
    base.rng_seed = 20190302;
    const std::vector<double> lambdas = {0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
    const std::vector<validate::Method> methods = {validate::Method::psi_k,
                                                   validate::Method::ks, validate::Method::ad};
    const auto sweep = eval::noise_sweep_eval(lambdas, base, methods, eval::kBenchmarkAlpha, 1);

    bool precision_ok = true;
    bool recall_dominates = true;
    double worst_precision = 1.0;
    for (const auto& level : sweep) {
        const auto& psi = level.rows[0].metrics;
        const auto& ks = level.rows[1].metrics;
        const auto& ad = level.rows[2].metrics;
        const double p = psi.precision.value_or(0.0);
        worst_precision = std::min(worst_precision, p);
        if (p < 0.98) precision_ok = false;
        if (level.lambda >= 4.0) {
            if (psi.recall.value_or(0.0) < ks.recall.value_or(0.0) ||
                psi.recall.value_or(0.0) < ad.recall.value_or(0.0)) {
                recall_dominates = false;
            }
        }
    }
    const double elapsed = seconds_since(start);
    const bool pass = precision_ok && recall_dominates && elapsed < 300.0;
    std::ostringstream detail;
    detail << "noise sweep lambda 0..10: PSI_1 precision>=" << pct(worst_precision)
           << " (>=98% everywhere), PSI recall dominates KS/AD for lambda>=4: "
           << (recall_dominates ? "yes" : "NO") << ", " << std::round(elapsed * 10) / 10
           << "s (<300s)";
    report(2, pass, detail.str());
}

void criterion_3(const std::vector<sim::LabeledBucketCase>& dataset) {
    const std::vector<int> ks = {1, 2, 3, 4, 5, 6, 7};
    const auto sweep = eval::k_sweep(dataset, ks, eval::kBenchmarkAlpha);

    bool nested = true;
    for (std::size_t i = 1; i < sweep.size(); ++i) {
        for (std::size_t c = 0; c < dataset.size(); ++c) {
            if (sweep[i - 1].alerts[c] && !sweep[i].alerts[c]) nested = false;
        }
    }
    bool fpr_ok = true;
    double worst_fpr = 0.0;
    for (const auto& row : sweep) {
        if (row.k <= 4) {
            const double fpr = row.metrics.fpr.value_or(1.0);
            worst_fpr = std::max(worst_fpr, fpr);
            if (fpr > 0.006) fpr_ok = false;
        }
    }
    const bool pass = nested && fpr_ok;
    std::ostringstream detail;
    detail << "PSI k-sweep 1..7: alert sets nested=" << (nested ? "yes" : "NO")
           << " (exact), FPR for k<=4 max=" << pct(worst_fpr) << " (<=0.60%)";
    report(3, pass, detail.str());
}

void criterion_4() {
    const srm::SrmSnapshot desk{1, 2108, 3183};
    const srm::ExpectedSplit split{1.0, 1.0};
    const double ln20 = std::log(20.0);

    // Independent recomputation of the exact-variant statistic in long double
    // with the terms evaluated separately.
    const long double term_t = 2108.0L * std::log(0.98L);
    const long double term_c = 3183.0L * std::log(1.02L);
    const double expected_tb = static_cast<double>(term_t + term_c);

    const auto exact = srm::sprt_exact_stats(desk, split, 0.01);
    const bool stat_matches = std::fabs(exact.t_b - expected_tb) < 1e-9;
    const bool exceeds = exact.t_b > ln20;

    srm::SprtConfig gaussian_cfg;  // alpha 0.05, beta 0
    srm::SprtConfig exact_cfg;
    exact_cfg.variant = srm::Variant::exact;
    const auto [gs, gd] = srm::sprt_step({}, desk, split, gaussian_cfg);
    const auto [es, ed] = srm::sprt_step({}, desk, split, exact_cfg);
    const bool both_fire_low = gs.fired && es.fired &&
                               gs.direction == srm::Direction::low &&
                               es.direction == srm::Direction::low;

    const bool pass = stat_matches && exceeds && both_fire_low;
    std::ostringstream detail;
    detail << "desk example (2108/3183, 50/50): exact t_b=" << exact.t_b
           << " matches recomputation to 1e-9=" << (stat_matches ? "yes" : "NO")
           << ", > ln20=" << (exceeds ? "yes" : "NO")
           << ", both variants fire low=" << (both_fire_low ? "yes" : "NO");
    report(4, pass, detail.str());
}

void criterion_5(const std::vector<sim::LabeledSrmSeries>& mixed,
                 const eval::SrmEvalReport& mixed_report) {
    const auto start = std::chrono::steady_clock::now();
    int sprt_fired = 0;
    int t_test_flagged = 0;
    srm::SprtConfig sprt_cfg;  // gaussian, alpha 0.05, beta 0
    for (int run = 0; run < 1000; ++run) {
        sim::SrmSeriesSpec spec;
        spec.days = 29;
        spec.daily_volume = 1e5;
        spec.rng_seed = rng::derive_seed(55001, static_cast<std::uint64_t>(run));
        const auto series = sim::generate_srm_series(spec);
        if (srm::monitor_series(series.snapshots, {1, 1}, sprt_cfg).fired()) ++sprt_fired;
        bool flagged = false;
        for (const auto& snap : series.snapshots) {
            if (srm::t_test_detector(snap, {1, 1}, 0.01, 100)) {
                flagged = true;
                break;
            }
        }
        if (flagged) ++t_test_flagged;
    }
    const double sprt_rate = sprt_fired / 1000.0;
    const bool type1_ok = sprt_rate <= 0.07;
    const bool ratio_ok = t_test_flagged >= 3 * sprt_fired;

    const auto& sprt_det = mixed_report.detector(eval::SrmDetector::sprt_gaussian);
    const auto& t_det = mixed_report.detector(eval::SrmDetector::t_test);
    const double sprt_precision = sprt_det.series_metrics.precision.value_or(0.0);
    const double t_precision = t_det.series_metrics.precision.value_or(1.0);
    const bool precision_ok = sprt_precision > t_precision;

    const double elapsed = seconds_since(start);
    const bool pass = type1_ok && ratio_ok && precision_ok && elapsed < 120.0;
    std::ostringstream detail;
    detail << "sequential type-I control: SPRT fired " << sprt_fired
           << "/1000 null series (<=7%), t-test flagged " << t_test_flagged
           << " (>=3x), mixed-suite precision SPRT " << pct(sprt_precision) << " > t-test "
           << pct(t_precision) << "=" << (precision_ok ? "yes" : "NO") << ", "
           << std::round(elapsed * 10) / 10 << "s (<120s)";
    report(5, pass, detail.str());
    (void)mixed;
}

void criterion_6(const eval::SrmEvalReport& mixed_report) {
    const double agreement =
        eval::decision_agreement(mixed_report.detector(eval::SrmDetector::sprt_gaussian),
                                 mixed_report.detector(eval::SrmDetector::sprt_exact));
    const bool pass = agreement >= 0.99;
    std::ostringstream detail;
    detail << "gaussian/exact fired-decision agreement on 400 series: " << pct(agreement)
           << " (>=99%)";
    report(6, pass, detail.str());
}

bool property_psi(std::string& note) {
    rng::Stream s(7101);
    for (int rep = 0; rep < 500; ++rep) {
        std::vector<std::uint64_t> a(10), b(10);
        for (auto& v : a) v = 1 + s.uniform_below(100000);
        for (auto& v : b) v = 1 + s.uniform_below(100000);
        const validate::BucketCounts pa(a), pb(b);
        const double ab = validate::psi_statistic(pa, pb);
        const double ba = validate::psi_statistic(pb, pa);
        if (!(ab >= 0.0) || std::fabs(ab - ba) > 1e-12) {
            note = "PSI positivity/symmetry";
            return false;
        }
    }
    return true;
}

bool property_gaussian_identity(std::string& note) {
    rng::Stream s(7102);
    for (int rep = 0; rep < 500; ++rep) {
        const srm::SrmSnapshot snap{1, 1 + s.uniform_below(2000000), 1 + s.uniform_below(2000000)};
        const double delta = 0.001 + 0.02 * s.uniform01();
        const auto st = srm::sprt_gaussian_stats(snap, {1, 1}, delta);
        const double n = static_cast<double>(snap.total());
        const double var = snap.p_hat() * (1.0 - snap.p_hat()) / n;
        const double target = -delta * delta / var;
        if (std::fabs(st.t_a + st.t_b - target) > 1e-9 * std::max(1.0, std::fabs(target))) {
            note = "gaussian identity t_a + t_b = -delta^2/sigma^2";
            return false;
        }
    }
    return true;
}

bool property_exact_linearity(std::string& note) {
    rng::Stream s(7103);
    for (int rep = 0; rep < 500; ++rep) {
        const srm::SrmSnapshot snap{1, 1 + s.uniform_below(100000), 1 + s.uniform_below(100000)};
        const std::uint64_t c = 2 + s.uniform_below(20);
        const srm::SrmSnapshot scaled{1, snap.x_t * c, snap.x_c * c};
        const auto base = srm::sprt_exact_stats(snap, {1, 1}, 0.01);
        const auto big = srm::sprt_exact_stats(scaled, {1, 1}, 0.01);
        const double cd = static_cast<double>(c);
        if (std::fabs(big.t_a - cd * base.t_a) > 1e-12 * std::max(1.0, std::fabs(cd * base.t_a)) ||
            std::fabs(big.t_b - cd * base.t_b) > 1e-12 * std::max(1.0, std::fabs(cd * base.t_b))) {
            note = "exact-variant linearity";
            return false;
        }
    }
    return true;
}

bool property_chi2_roundtrip(std::string& note) {
    for (int df : {1, 5, 99}) {
        for (double x : {0.1, 1.0, 10.0, 100.0}) {
            const double p = stats::chi_square_cdf(x, df);
            if (p <= 0.0 || p >= 1.0) continue;
            const double back = stats::chi_square_quantile(p, df);
            if (std::fabs(back - x) > 1e-9 * x) {
                note = "chi-square quantile/CDF round-trip";
                return false;
            }
        }
    }
    return true;
}

bool property_hash_golden(std::string& note) {
    std::ifstream in(std::string(ABQ_DATA_DIR) + "/hash_vectors.csv");
    if (!in.good()) {
        note = "golden vector file missing";
        return false;
    }
    std::string line;
    std::getline(in, line);
    int rows = 0;
    while (std::getline(in, line)) {
        const auto c1 = line.find(',');
        const auto c2 = line.rfind(',');
        const std::string user_id = line.substr(0, c1);
        const std::string seed = line.substr(c1 + 1, c2 - c1 - 1);
        const std::size_t bucket = std::stoul(line.substr(c2 + 1));
        if (sim::assign_bucket(user_id, seed, 100) != bucket) {
            note = "hash determinism vs golden vectors";
            return false;
        }
        ++rows;
    }
    if (rows != 50) {
        note = "golden vector file row count";
        return false;
    }
    return true;
}

bool property_hash_uniformity(std::string& note) {
    const sim::Plane plane{"acceptance-plane", 100};
    const auto counts = sim::count_assignments(1000000, plane);
    if (validate::pearson_chi2_uniform_test(counts, 1e-6).alert) {
        note = "hash uniformity chi2 at alpha=1e-6 over 1e6 ids";
        return false;
    }
    return true;
}

bool property_parser_rejection(std::string& note) {
    const fs::path dir = fs::temp_directory_path() / "abq_acceptance_parsers";
    fs::remove_all(dir);
    fs::create_directories(dir);
    auto write = [&](const char* name, const std::string& body) {
        std::ofstream out(dir / name, std::ios::trunc);
        out << body;
        return dir / name;
    };
    const std::vector<std::pair<fs::path, bool>> bucket_fixtures = {
        {write("neg.csv", "bucket,count\n5,-1\n"), true},
        {write("dup.csv", "bucket,count\n0,1\n0,2\n"), true},
        {write("head.csv", "b,c\n0,1\n"), true},
        {write("junk.csv", "bucket,count\nzero,ten\n"), true},
        {write("empty.csv", ""), true},
    };
    for (const auto& [path, expect_throw] : bucket_fixtures) {
        try {
            io::parse_bucket_csv(path);
            if (expect_throw) {
                note = "bucket parser accepted " + path.filename().string();
                fs::remove_all(dir);
                return false;
            }
        } catch (const ParseError&) {
        }
    }
    const std::vector<fs::path> jsonl_fixtures = {
        write("bad.jsonl", "{nope\n"),
        write("dupday.jsonl",
              "{\"experiment_id\":\"e\",\"day\":1,\"x_t\":1,\"x_c\":1,\"r_t\":1,\"r_c\":1}\n"
              "{\"experiment_id\":\"e\",\"day\":1,\"x_t\":2,\"x_c\":2,\"r_t\":1,\"r_c\":1}\n"),
        write("shrink.jsonl",
              "{\"experiment_id\":\"e\",\"day\":1,\"x_t\":9,\"x_c\":9,\"r_t\":1,\"r_c\":1}\n"
              "{\"experiment_id\":\"e\",\"day\":2,\"x_t\":5,\"x_c\":9,\"r_t\":1,\"r_c\":1}\n"),
        write("negcount.jsonl",
              "{\"experiment_id\":\"e\",\"day\":1,\"x_t\":-2,\"x_c\":9,\"r_t\":1,\"r_c\":1}\n"),
    };
    for (const auto& path : jsonl_fixtures) {
        try {
            io::parse_snapshot_jsonl(path);
            note = "snapshot parser accepted " + path.filename().string();
            fs::remove_all(dir);
            return false;
        } catch (const ParseError&) {
        }
    }
    fs::remove_all(dir);
    return true;
}

bool property_cli_contract(std::string& note) {
    const fs::path dir = fs::temp_directory_path() / "abq_acceptance_cli";
    fs::remove_all(dir);
    fs::create_directories(dir);
    auto run = [&](const std::string& args) {
        const std::string cmd =
            std::string(ABQ_CLI_PATH) + " " + args + " >/dev/null 2>/dev/null";
        const int status = std::system(cmd.c_str());
        return status == -1 ? -1 : WEXITSTATUS(status);
    };
    auto slurp = [&](const fs::path& p) {
        std::ifstream in(p, std::ios::binary);
        std::ostringstream ss;
        ss << in.rdbuf();
        return ss.str();
    };

    {
        std::ofstream out(dir / "uniform.csv");
        out << "bucket,count\n";
        for (int b = 0; b < 100; ++b) out << b << ",30000\n";
    }
    {
        std::ofstream out(dir / "desk.jsonl");
        out << "{\"experiment_id\":\"desk\",\"day\":1,\"x_t\":2108,\"x_c\":3183,"
               "\"r_t\":1,\"r_c\":1}\n";
    }

    if (run("validate --input " + (dir / "uniform.csv").string()) != 0) {
        note = "CLI exit code: uniform validate should be 0";
        return false;
    }
    if (run("validate --input " + (dir / "no_such_file.csv").string()) != 1) {
        note = "CLI exit code: missing input should be 1";
        return false;
    }
    const std::string monitor_args = "monitor --input " + (dir / "desk.jsonl").string() +
                                     " --state " + (dir / "state.json").string() + " --out ";
    if (run(monitor_args + (dir / "r1.json").string()) != 2) {
        note = "CLI exit code: desk monitor should be 2";
        return false;
    }
    if (run(monitor_args + (dir / "r2.json").string()) != 2) {
        note = "CLI exit code: desk monitor re-run should be 2";
        return false;
    }
    if (slurp(dir / "r1.json") != slurp(dir / "r2.json")) {
        note = "CLI idempotence: reports differ across identical runs";
        return false;
    }
    fs::remove_all(dir);
    return true;
}

void criterion_7() {
    struct NamedProperty {
        const char* name;
        bool (*check)(std::string&);
    };
    const NamedProperty properties[] = {
        {"psi", property_psi},
        {"gaussian-identity", property_gaussian_identity},
        {"exact-linearity", property_exact_linearity},
        {"chi2-roundtrip", property_chi2_roundtrip},
        {"hash-golden", property_hash_golden},
        {"hash-uniformity", property_hash_uniformity},
        {"parser-rejection", property_parser_rejection},
        {"cli-contract", property_cli_contract},
    };
    bool all = true;
    std::string first_failure;
    int passed = 0;
    for (const auto& p : properties) {
        std::string n;
        if (p.check(n)) {
            ++passed;
        } else {
            all = false;
            if (first_failure.empty()) first_failure = n.empty() ? p.name : n;
        }
    }
    std::ostringstream detail;
    detail << "property suites: " << passed << "/8 green";
    if (!all) detail << " (first failure: " << first_failure << ")";
    report(7, all, detail.str());
}

void criterion_8(const eval::SrmEvalReport& mixed_report) {
    const auto& sprt = mixed_report.detector(eval::SrmDetector::sprt_gaussian);
    const auto& bottom = sprt.recall_by_size.front();
    const auto& top = sprt.recall_by_size.back();
    const double bottom_recall = bottom.recall.value_or(0.0);
    const double top_recall = top.recall.value_or(0.0);
    const bool pass = bottom.recall.has_value() && top.recall.has_value() &&
                      top_recall > bottom_recall;
    std::ostringstream detail;
    detail << "recall by final sample size: SPRT top bin " << pct(top_recall) << " ("
           << top.positives << " positives) > bottom bin " << pct(bottom_recall) << " ("
           << bottom.positives << " positives)=" << (pass ? "yes" : "NO");
    report(8, pass, detail.str());
}

}  // namespace

int main() {
    std::printf("acceptance suite\n");
    const auto t0 = std::chrono::steady_clock::now();

    const auto dataset = sim::generate_bucket_dataset(benchmark_spec());
    criterion_1(dataset);
    criterion_2();
    criterion_3(dataset);
    criterion_4();

    const auto mixed = mixed_srm_suite();
    const std::vector<eval::SrmDetector> detectors = {
        eval::SrmDetector::sprt_gaussian, eval::SrmDetector::sprt_exact,
        eval::SrmDetector::t_test, eval::SrmDetector::chi2};
    const auto mixed_report = eval::evaluate_srm_detectors(mixed, detectors, {1, 1});

    criterion_5(mixed, mixed_report);
    criterion_6(mixed_report);
    criterion_7();
    criterion_8(mixed_report);

    std::printf("%s (%d criteria failed, %.1fs total)\n", g_failures == 0 ? "ALL PASS" : "FAILED",
                g_failures, seconds_since(t0));
    return g_failures == 0 ? 0 : 1;
}
