// abq — A/B experiment quality toolkit.
//
// Subcommands:
//   validate   uniformity check of per-bucket counts (PSI / chi2 / KS / AD)
//   monitor    sequential sample-ratio-mismatch monitoring with persisted state
//   simulate   deterministic benchmark dataset generation
//   evaluate   detector-quality benchmarks over simulated datasets
//
// Exit codes: 0 no alert, 2 alert raised, 1 error.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "abq/errors.hpp"
#include "abq/eval.hpp"
#include "abq/io.hpp"
#include "abq/rng.hpp"
#include "abq/sim.hpp"
#include "abq/srm.hpp"
#include "abq/stats.hpp"
#include "abq/validate.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace abq;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitError = 1;
constexpr int kExitAlert = 2;

json json_number(double v) {
    if (std::isfinite(v)) return v;
    if (std::isinf(v)) return v > 0 ? "infinity" : "-infinity";
    return nullptr;
}

json json_metric(const std::optional<double>& m) {
    if (!m) return "n/a";
    return *m;
}

std::string percent(const std::optional<double>& m) {
    if (!m) return "n/a";
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f%%", *m * 100.0);
    return buf;
}

void write_text_file(const fs::path& path, const std::string& body) {
    std::ofstream out(path, std::ios::trunc | std::ios::binary);
    if (!out.good()) throw Error("cannot write " + path.string());
    out << body;
    if (!out.good()) throw Error("failed writing " + path.string());
}

void emit_report(const json& report, const std::string& out_path, bool quiet_stdout = false) {
    const std::string body = report.dump(2) + "\n";
    if (!out_path.empty()) write_text_file(out_path, body);
    if (!quiet_stdout) std::cout << body;
}

std::vector<double> parse_double_list(const std::string& text) {
    // "0..10" (integer range) or "0,1,2.5,4".
    std::vector<double> out;
    const auto dots = text.find("..");
    if (dots != std::string::npos) {
        const long lo = std::stol(text.substr(0, dots));
        const long hi = std::stol(text.substr(dots + 2));
        if (hi < lo) throw Error("bad range '" + text + "'");
        for (long v = lo; v <= hi; ++v) out.push_back(static_cast<double>(v));
        return out;
    }
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (!item.empty()) out.push_back(std::stod(item));
    }
    if (out.empty()) throw Error("empty list '" + text + "'");
    return out;
}

std::vector<int> parse_int_list(const std::string& text) {
    std::vector<int> out;
    for (double v : parse_double_list(text)) out.push_back(static_cast<int>(v));
    return out;
}

validate::Method method_from_name(const std::string& name) {
    if (name == "psi") return validate::Method::psi_k;
    if (name == "chi2") return validate::Method::pearson_chi2;
    if (name == "ks") return validate::Method::ks;
    if (name == "ad") return validate::Method::ad;
    throw Error("unknown method '" + name + "' (expected psi|chi2|ks|ad)");
}

eval::SrmDetector detector_from_name(const std::string& name) {
    if (name == "sprt") return eval::SrmDetector::sprt_gaussian;
    if (name == "sprt-exact") return eval::SrmDetector::sprt_exact;
    if (name == "ttest") return eval::SrmDetector::t_test;
    if (name == "chi2") return eval::SrmDetector::chi2;
    throw Error("unknown detector '" + name + "' (expected sprt|sprt-exact|ttest|chi2)");
}

// ---------------------------------------------------------------------------
// validate
// ---------------------------------------------------------------------------

struct ValidateArgs {
    std::string input;
    std::string out;
    std::string method = "psi";
    double alpha = validate::kDefaultAlpha;
    int k = validate::kDefaultK;
    std::int64_t min_total = -1;  // -1: per-bucket default
    std::string zero_policy = "infinite";
    std::int64_t buckets = 0;  // 0: infer from file
};

int run_validate(const ValidateArgs& args) {
    std::optional<std::size_t> declared;
    if (args.buckets > 0) declared = static_cast<std::size_t>(args.buckets);
    const auto counts = io::parse_bucket_csv(args.input, declared);

    validate::ValidationConfig config;
    config.method = method_from_name(args.method);
    config.alpha = args.alpha;
    config.k = args.k;
    if (args.min_total >= 0) config.min_total = static_cast<std::uint64_t>(args.min_total);
    if (args.zero_policy == "smoothing") {
        config.zero_policy = validate::ZeroPolicy::smoothing;
    } else if (args.zero_policy != "infinite") {
        throw Error("unknown zero policy '" + args.zero_policy + "'");
    }

    const auto result = validate::run_validator(counts, config);
    const bool alert = result.evaluated && result.alert;

    json report;
    report["command"] = "validate";
    report["config"] = {
        {"method", validate::method_name(config.method)},
        {"alpha", config.alpha},
        {"k", config.k},
        {"min_total", config.resolved_min_total(counts.bucket_count())},
        {"zero_policy", args.zero_policy},
        {"input", args.input},
        {"buckets_declared", args.buckets > 0 ? json(args.buckets) : json(nullptr)},
    };
    report["input"] = {{"buckets", counts.bucket_count()}, {"total", counts.total()}};
    json res;
    res["alert"] = alert;
    res["evaluated"] = result.evaluated;
    res["statistic"] = json_number(result.statistic);
    if (result.threshold) res["threshold"] = json_number(*result.threshold);
    if (result.p_value) res["p_value"] = json_number(*result.p_value);
    if (!result.note.empty()) res["note"] = result.note;
    res["per_bucket_deviation"] = result.per_bucket_deviation;
    report["result"] = std::move(res);
    report["exit_code"] = alert ? kExitAlert : kExitOk;

    emit_report(report, args.out);
    return alert ? kExitAlert : kExitOk;
}

// ---------------------------------------------------------------------------
// monitor
// ---------------------------------------------------------------------------

struct MonitorArgs {
    std::string input;
    std::string out;
    std::string state_path;
    std::string variant = "gaussian";
    double alpha = 0.05;
    double beta = 0.0;
    std::string delta = "auto";
    std::int64_t min_total = 100;
    bool by_segment = false;
};

srm::MonitorState merge_states(const srm::MonitorState& persisted,
                               const srm::MonitorState& fresh) {
    srm::MonitorState merged;
    merged.fired = persisted.fired || fresh.fired;
    if (persisted.first_alert_day && fresh.first_alert_day) {
        if (*fresh.first_alert_day < *persisted.first_alert_day) {
            merged.first_alert_day = fresh.first_alert_day;
            merged.direction = fresh.direction;
        } else {
            merged.first_alert_day = persisted.first_alert_day;
            merged.direction = persisted.direction;
        }
    } else if (persisted.first_alert_day) {
        merged.first_alert_day = persisted.first_alert_day;
        merged.direction = persisted.direction;
    } else {
        merged.first_alert_day = fresh.first_alert_day;
        merged.direction = fresh.direction;
    }
    if (persisted.last_day && fresh.last_day) {
        merged.last_day = std::max(*persisted.last_day, *fresh.last_day);
    } else {
        merged.last_day = persisted.last_day ? persisted.last_day : fresh.last_day;
    }
    return merged;
}

json state_entry_json(const srm::MonitorState& s) {
    json out;
    out["fired"] = s.fired;
    out["first_alert_day"] = s.first_alert_day ? json(*s.first_alert_day) : json(nullptr);
    out["direction"] = s.direction ? json(srm::direction_name(*s.direction)) : json(nullptr);
    out["last_day"] = s.last_day ? json(*s.last_day) : json(nullptr);
    return out;
}

json trace_json(const std::vector<srm::SprtDecision>& trace) {
    json out = json::array();
    for (const auto& d : trace) {
        out.push_back({{"day", d.day},
                       {"t_a", json_number(d.t_a)},
                       {"t_b", json_number(d.t_b)},
                       {"upper_threshold", json_number(d.upper_threshold)},
                       {"outcome", srm::outcome_name(d.outcome)}});
    }
    return out;
}

int run_monitor(const MonitorArgs& args) {
    const auto parsed = io::parse_snapshot_jsonl(args.input);

    srm::SprtConfig config;
    config.alpha = args.alpha;
    config.beta = args.beta;
    config.min_total = static_cast<std::uint64_t>(std::max<std::int64_t>(args.min_total, 0));
    if (args.variant == "exact") {
        config.variant = srm::Variant::exact;
    } else if (args.variant != "gaussian") {
        throw Error("unknown variant '" + args.variant + "' (expected gaussian|exact)");
    }
    if (args.delta != "auto") config.delta = std::stod(args.delta);

    // Load persisted state up front; a corrupt file aborts before anything
    // else happens (and before the file could be rewritten).
    io::StateMap state;
    if (!args.state_path.empty()) state = io::load_state(args.state_path);

    // Regroup by experiment, then segment.
    std::map<std::string, std::map<std::string, io::SnapshotSeries>> experiments;
    for (const auto& [key, series] : parsed) {
        experiments[key.experiment_id].emplace(key.segment, series);
    }

    json experiments_json = json::array();
    bool any_alert = false;

    for (const auto& [experiment_id, segments] : experiments) {
        const auto split = segments.begin()->second.split;
        for (const auto& [segment, series] : segments) {
            if (series.split.r_t != split.r_t || series.split.r_c != split.r_c)
                throw Error("experiment " + experiment_id +
                            " declares different splits across segments");
        }

        std::map<std::string, std::vector<srm::SrmSnapshot>> by_segment;
        for (const auto& [segment, series] : segments) by_segment[segment] = series.snapshots;
        const bool segmented = segments.size() > 1 || !segments.begin()->first.empty();
        const std::vector<srm::SrmSnapshot> aggregate =
            segmented ? srm::aggregate_segments(by_segment) : segments.begin()->second.snapshots;

        json exp_json;
        exp_json["experiment_id"] = experiment_id;
        exp_json["split"] = {{"r_t", split.r_t}, {"r_c", split.r_c}};
        exp_json["delta"] = config.resolve_delta(split);

        const io::SeriesKey agg_key{experiment_id, ""};
        const auto fresh = srm::monitor_series(aggregate, split, config);
        const auto persisted_it = state.find(agg_key);
        const auto merged = persisted_it == state.end()
                                ? fresh.final_state
                                : merge_states(persisted_it->second, fresh.final_state);
        state[agg_key] = merged;
        any_alert = any_alert || merged.fired;

        exp_json["state"] = state_entry_json(merged);
        exp_json["trace"] = trace_json(fresh.trace);

        if (args.by_segment && segmented) {
            json segs = json::array();
            std::vector<std::string> divergent;
            for (const auto& [segment, series] : segments) {
                if (segment.empty()) continue;
                const io::SeriesKey seg_key{experiment_id, segment};
                const auto seg_fresh = srm::monitor_series(series.snapshots, split, config);
                const auto seg_it = state.find(seg_key);
                const auto seg_merged = seg_it == state.end()
                                            ? seg_fresh.final_state
                                            : merge_states(seg_it->second, seg_fresh.final_state);
                state[seg_key] = seg_merged;
                if (seg_merged.fired != merged.fired) divergent.push_back(segment);
                json seg_json;
                seg_json["segment"] = segment;
                seg_json["state"] = state_entry_json(seg_merged);
                seg_json["trace"] = trace_json(seg_fresh.trace);
                segs.push_back(std::move(seg_json));
            }
            exp_json["segments"] = std::move(segs);
            exp_json["divergent_segments"] = divergent;
        }
        experiments_json.push_back(std::move(exp_json));
    }

    json report;
    report["command"] = "monitor";
    report["config"] = {
        {"variant", args.variant},
        {"alpha", config.alpha},
        {"beta", config.beta},
        {"delta", args.delta == "auto" ? json("auto") : json(std::stod(args.delta))},
        {"min_total", config.min_total},
        {"by_segment", args.by_segment},
        {"input", args.input},
        {"state", args.state_path.empty() ? json(nullptr) : json(args.state_path)},
    };
    report["experiments"] = std::move(experiments_json);
    report["alerts"] = any_alert;
    report["exit_code"] = any_alert ? kExitAlert : kExitOk;

    if (!args.state_path.empty()) io::save_state(args.state_path, state);
    emit_report(report, args.out);
    return any_alert ? kExitAlert : kExitOk;
}

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

struct SimulateArgs {
    std::string kind;
    std::string out_dir;
    std::uint64_t seed = 1;
    // bucket datasets
    std::uint64_t negatives = 500;
    std::uint64_t positives = 100;
    std::int64_t buckets = 100;
    double mean_total = 3e6;
    double noise_lambda = 4.0;
    std::int64_t max_anomalous = 5;
    std::string lambdas = "0..10";
    // srm series
    std::int64_t series = 200;
    std::int64_t shifted = 100;
    std::int64_t days = 29;
    std::string volumes = "1000,10000,100000";
    double p0 = 0.5;
    double shift = 0.01;
    std::int64_t shift_start_day = 1;
};

std::string case_file_name(std::size_t index) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "case_%05zu.csv", index);
    return buf;
}

void write_bucket_case_csv(const fs::path& path, const validate::BucketCounts& counts) {
    std::ostringstream body;
    body << "bucket,count\n";
    for (std::size_t b = 0; b < counts.bucket_count(); ++b) {
        body << b << ',' << counts.counts[b] << '\n';
    }
    write_text_file(path, body.str());
}

json write_bucket_dataset(const fs::path& dir, const sim::BucketDatasetSpec& spec) {
    fs::create_directories(dir / "cases");
    const auto dataset = sim::generate_bucket_dataset(spec);

    std::ostringstream labels;
    labels << "case,label\n";
    json case_files = json::array();
    for (std::size_t i = 0; i < dataset.size(); ++i) {
        const std::string name = std::string("cases/") + case_file_name(i);
        write_bucket_case_csv(dir / name, dataset[i].counts);
        labels << name << ',' << (dataset[i].label ? 1 : 0) << '\n';
        case_files.push_back(name);
    }
    write_text_file(dir / "labels.csv", labels.str());

    json manifest;
    manifest["command"] = "simulate";
    manifest["kind"] = "buckets";
    manifest["rng"] = {{"engine", rng::kEngineDescription}, {"seed", spec.rng_seed}};
    manifest["spec"] = {{"negatives", spec.negatives},
                        {"positives", spec.positives},
                        {"buckets", spec.buckets},
                        {"mean_total", spec.mean_total},
                        {"noise_lambda", spec.noise_lambda},
                        {"max_anomalous_buckets", spec.max_anomalous_buckets}};
    manifest["cases"] = dataset.size();
    manifest["files"] = {{"labels", "labels.csv"}, {"case_files", std::move(case_files)}};
    write_text_file(dir / "manifest.json", manifest.dump(2) + "\n");
    return manifest;
}

int run_simulate(const SimulateArgs& args) {
    const fs::path dir = args.out_dir;
    fs::create_directories(dir);

    if (args.kind == "buckets" || args.kind == "noise-sweep") {
        sim::BucketDatasetSpec spec;
        spec.negatives = args.negatives;
        spec.positives = args.positives;
        spec.buckets = static_cast<std::size_t>(args.buckets);
        spec.mean_total = args.mean_total;
        spec.noise_lambda = args.noise_lambda;
        spec.max_anomalous_buckets = static_cast<std::size_t>(args.max_anomalous);
        spec.rng_seed = args.seed;

        if (args.kind == "buckets") {
            write_bucket_dataset(dir, spec);
            std::cout << "wrote " << (spec.negatives + spec.positives) << " cases to "
                      << dir.string() << "\n";
            return kExitOk;
        }

        const auto lambdas = parse_double_list(args.lambdas);
        json sub_manifests = json::array();
        for (std::size_t i = 0; i < lambdas.size(); ++i) {
            char name[32];
            std::snprintf(name, sizeof(name), "lambda_%02zu", i);
            sim::BucketDatasetSpec sub = spec;
            sub.noise_lambda = lambdas[i];
            write_bucket_dataset(dir / name, sub);
            sub_manifests.push_back(
                {{"lambda", lambdas[i]}, {"manifest", std::string(name) + "/manifest.json"}});
        }
        json manifest;
        manifest["command"] = "simulate";
        manifest["kind"] = "noise-sweep";
        manifest["rng"] = {{"engine", rng::kEngineDescription}, {"seed", spec.rng_seed}};
        manifest["lambdas"] = lambdas;
        manifest["datasets"] = std::move(sub_manifests);
        write_text_file(dir / "manifest.json", manifest.dump(2) + "\n");
        std::cout << "wrote " << lambdas.size() << " datasets to " << dir.string() << "\n";
        return kExitOk;
    }

    if (args.kind == "srm-series") {
        if (args.shifted > args.series) throw Error("--shifted cannot exceed --series");
        const auto volumes = parse_double_list(args.volumes);
        std::ostringstream lines;
        std::ostringstream labels;
        labels << "series,label\n";
        const double r_t = args.p0;
        const double r_c = 1.0 - args.p0;
        for (std::int64_t i = 0; i < args.series; ++i) {
            const bool is_shifted = i >= args.series - args.shifted;
            sim::SrmSeriesSpec spec;
            spec.days = static_cast<int>(args.days);
            spec.daily_volume = volumes[static_cast<std::size_t>(i) % volumes.size()];
            spec.p0 = args.p0;
            spec.injected_shift = is_shifted ? (i % 2 == 0 ? args.shift : -args.shift) : 0.0;
            spec.shift_start_day = static_cast<int>(args.shift_start_day);
            spec.rng_seed = rng::derive_seed(args.seed, static_cast<std::uint64_t>(i));
            const auto series = sim::generate_srm_series(spec);

            char name[32];
            std::snprintf(name, sizeof(name), "series-%05lld", static_cast<long long>(i));
            for (const auto& snap : series.snapshots) {
                json line = {{"experiment_id", name}, {"day", snap.day}, {"x_t", snap.x_t},
                             {"x_c", snap.x_c},       {"r_t", r_t},      {"r_c", r_c}};
                lines << line.dump() << '\n';
            }
            labels << name << ',' << (series.truth ? 1 : 0) << '\n';
        }
        write_text_file(dir / "snapshots.jsonl", lines.str());
        write_text_file(dir / "labels.csv", labels.str());

        json manifest;
        manifest["command"] = "simulate";
        manifest["kind"] = "srm-series";
        manifest["rng"] = {{"engine", rng::kEngineDescription}, {"seed", args.seed}};
        manifest["spec"] = {{"series", args.series},
                            {"shifted", args.shifted},
                            {"days", args.days},
                            {"volumes", volumes},
                            {"p0", args.p0},
                            {"shift", args.shift},
                            {"shift_start_day", args.shift_start_day}};
        manifest["files"] = {{"snapshots", "snapshots.jsonl"}, {"labels", "labels.csv"}};
        write_text_file(dir / "manifest.json", manifest.dump(2) + "\n");
        std::cout << "wrote " << args.series << " series to " << dir.string() << "\n";
        return kExitOk;
    }

    throw Error("unknown --kind '" + args.kind + "' (expected buckets|noise-sweep|srm-series)");
}

// ---------------------------------------------------------------------------
// evaluate
// ---------------------------------------------------------------------------

struct EvaluateArgs {
    std::string manifest;
    std::string out;
    std::string bins_csv;
    std::string methods = "psi,chi2,ks,ad";
    std::string detectors = "sprt,sprt-exact,ttest,chi2";
    double alpha = eval::kBenchmarkAlpha;
    int k = 1;
    std::string k_sweep;  // e.g. "1..7"
    double sprt_alpha = 0.05;
    double sprt_beta = 0.0;
    double baseline_alpha = 0.01;
    std::string delta = "auto";
    std::int64_t min_total = 100;
    std::int64_t size_bins = 4;
};

json load_manifest(const fs::path& path) {
    std::ifstream in(path);
    if (!in.good()) throw Error("cannot open manifest: " + path.string());
    json doc;
    try {
        in >> doc;
    } catch (const json::exception& e) {
        throw Error("invalid manifest " + path.string() + ": " + e.what());
    }
    return doc;
}

std::vector<sim::LabeledBucketCase> load_bucket_dataset(const fs::path& manifest_path,
                                                        const json& manifest) {
    const fs::path dir = manifest_path.parent_path();
    std::map<std::string, bool> labels;
    {
        std::ifstream in(dir / manifest.at("files").at("labels").get<std::string>());
        if (!in.good()) throw Error("dataset/manifest mismatch: labels file missing");
        std::string line;
        std::getline(in, line);
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            const auto comma = line.rfind(',');
            labels[line.substr(0, comma)] = line.substr(comma + 1) == "1";
        }
    }
    std::vector<sim::LabeledBucketCase> dataset;
    const auto& files = manifest.at("files").at("case_files");
    if (files.size() != manifest.at("cases").get<std::size_t>() || files.size() != labels.size())
        throw Error("dataset/manifest mismatch: case count disagrees");
    for (const auto& f : files) {
        const std::string name = f.get<std::string>();
        const auto it = labels.find(name);
        if (it == labels.end()) throw Error("dataset/manifest mismatch: no label for " + name);
        sim::LabeledBucketCase c;
        c.counts =
            io::parse_bucket_csv(dir / name, manifest.at("spec").at("buckets").get<std::size_t>());
        c.label = it->second;
        dataset.push_back(std::move(c));
    }
    return dataset;
}

json validator_rows_json(const std::vector<eval::ValidatorEvalRow>& rows) {
    json out = json::array();
    for (const auto& row : rows) {
        out.push_back(
            {{"method", validate::method_name(row.method)},
             {"confusion",
              {{"tn", row.cm.tn}, {"fp", row.cm.fp}, {"fn", row.cm.fn}, {"tp", row.cm.tp}}},
             {"fpr", json_metric(row.metrics.fpr)},
             {"precision", json_metric(row.metrics.precision)},
             {"recall", json_metric(row.metrics.recall)},
             {"f_score", json_metric(row.metrics.f_score)}});
    }
    return out;
}

std::string validator_rows_text(const std::vector<eval::ValidatorEvalRow>& rows) {
    std::ostringstream out;
    out << "method    tn     fp     fn     tp     FPR       precision  recall    F-score\n";
    for (const auto& row : rows) {
        char line[160];
        std::snprintf(line, sizeof(line), "%-8s %-6llu %-6llu %-6llu %-6llu %-9s %-10s %-9s %s\n",
                      validate::method_name(row.method),
                      static_cast<unsigned long long>(row.cm.tn),
                      static_cast<unsigned long long>(row.cm.fp),
                      static_cast<unsigned long long>(row.cm.fn),
                      static_cast<unsigned long long>(row.cm.tp),
                      percent(row.metrics.fpr).c_str(), percent(row.metrics.precision).c_str(),
                      percent(row.metrics.recall).c_str(), percent(row.metrics.f_score).c_str());
        out << line;
    }
    return out.str();
}

int run_evaluate(const EvaluateArgs& args) {
    const fs::path manifest_path = args.manifest;
    const json manifest = load_manifest(manifest_path);
    const std::string kind = manifest.value("kind", "");

    json report;
    report["command"] = "evaluate";
    report["manifest"] = args.manifest;
    report["dataset_kind"] = kind;
    report["rng"] = manifest.value("rng", json(nullptr));

    if (kind == "buckets") {
        const auto dataset = load_bucket_dataset(manifest_path, manifest);
        std::vector<validate::Method> methods;
        {
            std::stringstream ss(args.methods);
            std::string item;
            while (std::getline(ss, item, ',')) methods.push_back(method_from_name(item));
        }
        report["config"] = {{"alpha", args.alpha}, {"k", args.k}, {"methods", args.methods}};
        const auto rows = eval::evaluate_validators(dataset, methods, args.alpha, args.k);
        report["validators"] = validator_rows_json(rows);
        std::cout << "validator comparison (alpha=" << args.alpha << ", PSI k=" << args.k << ", "
                  << dataset.size() << " cases)\n"
                  << validator_rows_text(rows);

        if (!args.k_sweep.empty()) {
            const auto ks = parse_int_list(args.k_sweep);
            const auto sweep = eval::k_sweep(dataset, ks, args.alpha);
            json sweep_json = json::array();
            std::cout << "\nPSI_k sweep\nk    FPR       precision  recall\n";
            for (const auto& row : sweep) {
                sweep_json.push_back({{"k", row.k},
                                      {"fpr", json_metric(row.metrics.fpr)},
                                      {"precision", json_metric(row.metrics.precision)},
                                      {"recall", json_metric(row.metrics.recall)}});
                char line[120];
                std::snprintf(line, sizeof(line), "%-4d %-9s %-10s %s\n", row.k,
                              percent(row.metrics.fpr).c_str(),
                              percent(row.metrics.precision).c_str(),
                              percent(row.metrics.recall).c_str());
                std::cout << line;
            }
            report["k_sweep"] = std::move(sweep_json);
        }
        emit_report(report, args.out, true);
        return kExitOk;
    }

    if (kind == "noise-sweep") {
        std::vector<validate::Method> methods;
        {
            std::stringstream ss(args.methods);
            std::string item;
            while (std::getline(ss, item, ',')) methods.push_back(method_from_name(item));
        }
        report["config"] = {{"alpha", args.alpha}, {"k", args.k}, {"methods", args.methods}};
        json levels = json::array();
        std::cout << "noise sweep (alpha=" << args.alpha << ", PSI k=" << args.k << ")\n";
        for (const auto& entry : manifest.at("datasets")) {
            const fs::path sub_path =
                manifest_path.parent_path() / entry.at("manifest").get<std::string>();
            const json sub_manifest = load_manifest(sub_path);
            const auto dataset = load_bucket_dataset(sub_path, sub_manifest);
            const auto rows = eval::evaluate_validators(dataset, methods, args.alpha, args.k);
            const double lambda = entry.at("lambda").get<double>();
            levels.push_back({{"lambda", lambda},
                              {"mean_noise_percent", 0.05 + lambda * 0.01},
                              {"validators", validator_rows_json(rows)}});
            std::cout << "\nlambda=" << lambda << "  (mean noise " << 0.05 + lambda * 0.01
                      << "%)\n"
                      << validator_rows_text(rows);
        }
        report["levels"] = std::move(levels);
        emit_report(report, args.out, true);
        return kExitOk;
    }

    if (kind == "srm-series") {
        const fs::path dir = manifest_path.parent_path();
        const auto parsed = io::parse_snapshot_jsonl(
            dir / manifest.at("files").at("snapshots").get<std::string>());
        std::map<std::string, bool> truth;
        {
            std::ifstream in(dir / manifest.at("files").at("labels").get<std::string>());
            if (!in.good()) throw Error("dataset/manifest mismatch: labels file missing");
            std::string line;
            std::getline(in, line);
            while (std::getline(in, line)) {
                if (line.empty()) continue;
                const auto comma = line.rfind(',');
                truth[line.substr(0, comma)] = line.substr(comma + 1) == "1";
            }
        }
        if (truth.size() != manifest.at("spec").at("series").get<std::size_t>())
            throw Error("dataset/manifest mismatch: series count disagrees");

        std::vector<sim::LabeledSrmSeries> suite;
        srm::ExpectedSplit split;
        bool split_set = false;
        for (const auto& [key, series] : parsed) {
            const auto it = truth.find(key.experiment_id);
            if (it == truth.end())
                throw Error("dataset/manifest mismatch: no label for " + key.experiment_id);
            if (!split_set) {
                split = series.split;
                split_set = true;
            }
            sim::LabeledSrmSeries entry;
            entry.snapshots = series.snapshots;
            entry.truth = it->second;
            suite.push_back(std::move(entry));
        }

        std::vector<eval::SrmDetector> detectors;
        {
            std::stringstream ss(args.detectors);
            std::string item;
            while (std::getline(ss, item, ',')) detectors.push_back(detector_from_name(item));
        }
        eval::SrmEvalConfig config;
        config.sprt_alpha = args.sprt_alpha;
        config.sprt_beta = args.sprt_beta;
        config.baseline_alpha = args.baseline_alpha;
        config.min_total = static_cast<std::uint64_t>(std::max<std::int64_t>(args.min_total, 0));
        config.size_bins = static_cast<std::size_t>(std::max<std::int64_t>(args.size_bins, 1));
        if (args.delta != "auto") config.delta = std::stod(args.delta);

        report["config"] = {{"detectors", args.detectors},
                            {"sprt_alpha", config.sprt_alpha},
                            {"sprt_beta", config.sprt_beta},
                            {"baseline_alpha", config.baseline_alpha},
                            {"delta", args.delta},
                            {"min_total", config.min_total},
                            {"size_bins", config.size_bins}};

        const auto result = eval::evaluate_srm_detectors(suite, detectors, split, config);
        report["protocol"] = result.protocol_note;

        json det_json = json::array();
        std::cout << "SRM detector comparison (" << suite.size() << " series)\n"
                  << "detector    cells   tn      fp      fn      tp      precision  recall\n";
        for (const auto& det : result.detectors) {
            json bins = json::array();
            for (const auto& bin : det.recall_by_size) {
                bins.push_back({{"max_final_total", bin.max_final_total},
                                {"positives", bin.positives},
                                {"recall", json_metric(bin.recall)}});
            }
            det_json.push_back({{"detector", eval::srm_detector_name(det.detector)},
                                {"primary_confusion",
                                 {{"tn", det.primary_cm.tn},
                                  {"fp", det.primary_cm.fp},
                                  {"fn", det.primary_cm.fn},
                                  {"tp", det.primary_cm.tp}}},
                                {"primary_precision", json_metric(det.primary_metrics.precision)},
                                {"primary_recall", json_metric(det.primary_metrics.recall)},
                                {"series_precision", json_metric(det.series_metrics.precision)},
                                {"series_recall", json_metric(det.series_metrics.recall)},
                                {"recall_by_size", std::move(bins)}});
            char line[200];
            std::snprintf(line, sizeof(line),
                          "%-11s %-7llu %-7llu %-7llu %-7llu %-7llu %-10s %s\n",
                          eval::srm_detector_name(det.detector),
                          static_cast<unsigned long long>(det.primary_cm.total()),
                          static_cast<unsigned long long>(det.primary_cm.tn),
                          static_cast<unsigned long long>(det.primary_cm.fp),
                          static_cast<unsigned long long>(det.primary_cm.fn),
                          static_cast<unsigned long long>(det.primary_cm.tp),
                          percent(det.primary_metrics.precision).c_str(),
                          percent(det.primary_metrics.recall).c_str());
            std::cout << line;
        }
        report["detectors"] = std::move(det_json);

        if (!args.bins_csv.empty()) {
            std::ostringstream csv;
            csv << "detector,bin_max_final_total,positives,recall\n";
            for (const auto& det : result.detectors) {
                for (const auto& bin : det.recall_by_size) {
                    csv << eval::srm_detector_name(det.detector) << ',' << bin.max_final_total
                        << ',' << bin.positives << ','
                        << (bin.recall ? std::to_string(*bin.recall) : "n/a") << '\n';
                }
            }
            write_text_file(args.bins_csv, csv.str());
        }
        emit_report(report, args.out, true);
        return kExitOk;
    }

    throw Error("manifest kind '" + kind + "' is not something this tool evaluates");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"A/B experiment quality toolkit: randomization validation and "
                 "sample-ratio-mismatch monitoring"};
    app.require_subcommand(1);

    ValidateArgs validate_args;
    auto* cmd_validate =
        app.add_subcommand("validate", "Check per-bucket counts for uniform randomization");
    cmd_validate->add_option("--input", validate_args.input, "bucket CSV (header bucket,count)")
        ->required();
    cmd_validate->add_option("--buckets", validate_args.buckets,
                             "declared bucket count (missing indices read as 0)");
    cmd_validate->add_option("--method", validate_args.method, "psi|chi2|ks|ad");
    cmd_validate->add_option("--alpha", validate_args.alpha, "significance level")
        ->envname("ABQ_ALPHA");
    cmd_validate->add_option("--k", validate_args.k, "PSI reference-sample ratio")
        ->envname("ABQ_K");
    cmd_validate->add_option("--min-total", validate_args.min_total,
                             "minimum samples before a verdict (default 10 per bucket)");
    cmd_validate->add_option("--zero-policy", validate_args.zero_policy, "infinite|smoothing");
    cmd_validate->add_option("--out", validate_args.out, "write the JSON report here");

    MonitorArgs monitor_args;
    auto* cmd_monitor = app.add_subcommand(
        "monitor", "Sequential sample-ratio-mismatch monitoring over snapshot series");
    cmd_monitor->add_option("--input", monitor_args.input, "snapshot JSONL")->required();
    cmd_monitor->add_option("--variant", monitor_args.variant, "gaussian|exact");
    cmd_monitor->add_option("--alpha", monitor_args.alpha, "SPRT type-I bound");
    cmd_monitor->add_option("--beta", monitor_args.beta, "SPRT type-II bound");
    cmd_monitor->add_option("--delta", monitor_args.delta, "error tolerance, or 'auto'")
        ->envname("ABQ_DELTA");
    cmd_monitor->add_option("--min-total", monitor_args.min_total,
                            "minimum samples before evaluating");
    cmd_monitor->add_option("--state", monitor_args.state_path,
                            "persisted monitor state (atomically rewritten)");
    cmd_monitor->add_flag("--by-segment", monitor_args.by_segment,
                          "also monitor each segment and flag divergence");
    cmd_monitor->add_option("--out", monitor_args.out, "write the JSON report here");

    SimulateArgs simulate_args;
    auto* cmd_simulate = app.add_subcommand("simulate", "Generate labeled benchmark datasets");
    cmd_simulate->add_option("--kind", simulate_args.kind, "buckets|noise-sweep|srm-series")
        ->required();
    cmd_simulate->add_option("--out-dir", simulate_args.out_dir, "output directory")->required();
    cmd_simulate->add_option("--seed", simulate_args.seed, "RNG seed");
    cmd_simulate->add_option("--negatives", simulate_args.negatives, "clean cases");
    cmd_simulate->add_option("--positives", simulate_args.positives, "anomalous cases");
    cmd_simulate->add_option("--buckets", simulate_args.buckets, "buckets per case");
    cmd_simulate->add_option("--mean-total", simulate_args.mean_total,
                             "Poisson mean of the per-case total");
    cmd_simulate->add_option("--noise-lambda", simulate_args.noise_lambda,
                             "Poisson mean of the extra-noise draw");
    cmd_simulate->add_option("--max-anomalous", simulate_args.max_anomalous,
                             "upper bound on anomalous buckets per positive case");
    cmd_simulate->add_option("--lambdas", simulate_args.lambdas,
                             "noise levels for --kind noise-sweep, e.g. 0..10");
    cmd_simulate->add_option("--series", simulate_args.series, "number of series");
    cmd_simulate->add_option("--shifted", simulate_args.shifted,
                             "how many series carry an injected shift");
    cmd_simulate->add_option("--days", simulate_args.days, "days per series");
    cmd_simulate->add_option("--volumes", simulate_args.volumes,
                             "daily-volume levels cycled across series");
    cmd_simulate->add_option("--p0", simulate_args.p0, "designed test share");
    cmd_simulate->add_option("--shift", simulate_args.shift,
                             "injected share shift (alternating sign)");
    cmd_simulate->add_option("--shift-start-day", simulate_args.shift_start_day,
                             "first shifted day");

    EvaluateArgs evaluate_args;
    auto* cmd_evaluate =
        app.add_subcommand("evaluate", "Run detector benchmarks over a simulated dataset");
    cmd_evaluate->add_option("--manifest", evaluate_args.manifest, "dataset manifest.json")
        ->required();
    cmd_evaluate->add_option("--methods", evaluate_args.methods, "validators to compare");
    cmd_evaluate->add_option("--alpha", evaluate_args.alpha, "validator significance level");
    cmd_evaluate->add_option("--k", evaluate_args.k, "PSI reference-sample ratio");
    cmd_evaluate->add_option("--k-sweep", evaluate_args.k_sweep, "PSI k values, e.g. 1..7");
    cmd_evaluate->add_option("--detectors", evaluate_args.detectors, "SRM detectors to compare");
    cmd_evaluate->add_option("--sprt-alpha", evaluate_args.sprt_alpha, "SPRT type-I bound");
    cmd_evaluate->add_option("--sprt-beta", evaluate_args.sprt_beta, "SPRT type-II bound");
    cmd_evaluate->add_option("--baseline-alpha", evaluate_args.baseline_alpha,
                             "per-day baseline significance level");
    cmd_evaluate->add_option("--delta", evaluate_args.delta, "SPRT error tolerance or 'auto'");
    cmd_evaluate->add_option("--min-total", evaluate_args.min_total,
                             "minimum samples before evaluating");
    cmd_evaluate->add_option("--size-bins", evaluate_args.size_bins, "recall-by-size bin count");
    cmd_evaluate->add_option("--bins-csv", evaluate_args.bins_csv,
                             "write plot-ready recall-by-size CSV here");
    cmd_evaluate->add_option("--out", evaluate_args.out, "write the JSON report here");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        if (cmd_validate->parsed()) return run_validate(validate_args);
        if (cmd_monitor->parsed()) return run_monitor(monitor_args);
        if (cmd_simulate->parsed()) return run_simulate(simulate_args);
        if (cmd_evaluate->parsed()) return run_evaluate(evaluate_args);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitError;
    }
    return kExitError;
}
