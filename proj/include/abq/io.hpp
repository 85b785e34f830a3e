#pragma once

// File ingestion and state persistence for the CLI.
//
// Formats:
//   bucket CSV      header "bucket,count"; one row per bucket index. With a
//                   declared bucket count, missing indices read as zero.
//   snapshot JSONL  one object per line: experiment_id, day, x_t, x_c
//                   (cumulative), r_t, r_c, optional segment.
//   state JSON      versioned document with one entry per monitored
//                   (experiment, segment); written atomically via
//                   write-temp-then-rename and stable byte-for-byte across
//                   save/load/save round trips.

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "abq/errors.hpp"
#include "abq/srm.hpp"
#include "abq/validate.hpp"

namespace abq::io {

using json = nlohmann::json;

// ---------------------------------------------------------------------------
// Bucket CSV
// ---------------------------------------------------------------------------

inline validate::BucketCounts parse_bucket_csv(const std::filesystem::path& path,
                                               std::optional<std::size_t> declared_buckets = {}) {
    std::ifstream in(path);
    if (!in.good()) throw Error("cannot open bucket CSV: " + path.string());

    std::string line;
    std::size_t line_number = 0;
    if (!std::getline(in, line)) throw ParseError("empty bucket CSV", 1);
    ++line_number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != "bucket,count")
        throw ParseError("expected header 'bucket,count', got '" + line + "'", line_number);

    std::map<std::size_t, std::uint64_t> rows;
    while (std::getline(in, line)) {
        ++line_number;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto comma = line.find(',');
        if (comma == std::string::npos || line.find(',', comma + 1) != std::string::npos)
            throw ParseError("expected exactly one comma", line_number);
        const std::string bucket_text = line.substr(0, comma);
        const std::string count_text = line.substr(comma + 1);
        std::size_t bucket = 0;
        long long count = 0;
        try {
            std::size_t consumed = 0;
            if (!bucket_text.empty() && (bucket_text[0] == '-' || bucket_text[0] == '+'))
                throw std::invalid_argument("sign");
            bucket = std::stoul(bucket_text, &consumed);
            if (consumed != bucket_text.size()) throw std::invalid_argument("trailing");
            count = std::stoll(count_text, &consumed);
            if (consumed != count_text.size()) throw std::invalid_argument("trailing");
        } catch (const std::exception&) {
            throw ParseError("malformed row '" + line + "'", line_number);
        }
        if (count < 0)
            throw ParseError("negative count for bucket " + std::to_string(bucket), line_number);
        if (declared_buckets && bucket >= *declared_buckets)
            throw ParseError("bucket " + std::to_string(bucket) + " outside declared range",
                             line_number);
        if (!rows.emplace(bucket, static_cast<std::uint64_t>(count)).second)
            throw ParseError("duplicate bucket " + std::to_string(bucket), line_number);
    }
    if (rows.empty()) throw ParseError("bucket CSV has no data rows", line_number);

    const std::size_t bucket_count =
        declared_buckets ? *declared_buckets : rows.rbegin()->first + 1;
    std::vector<std::uint64_t> counts(bucket_count, 0);
    for (const auto& [bucket, count] : rows) counts[bucket] = count;
    return validate::BucketCounts(std::move(counts));
}

// ---------------------------------------------------------------------------
// Snapshot JSONL
// ---------------------------------------------------------------------------

struct SeriesKey {
    std::string experiment_id;
    std::string segment;  // empty: unsegmented

    auto operator<=>(const SeriesKey&) const = default;

    std::string display() const {
        return segment.empty() ? experiment_id : experiment_id + "/" + segment;
    }
};

struct SnapshotSeries {
    std::vector<srm::SrmSnapshot> snapshots;
    srm::ExpectedSplit split;
};

inline std::map<SeriesKey, SnapshotSeries> parse_snapshot_jsonl(
    const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in.good()) throw Error("cannot open snapshot JSONL: " + path.string());

    struct Row {
        srm::SrmSnapshot snap;
        double r_t;
        double r_c;
        std::size_t line;
    };
    std::map<SeriesKey, std::vector<Row>> grouped;

    std::string line;
    std::size_t line_number = 0;
    while (std::getline(in, line)) {
        ++line_number;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        json obj;
        try {
            obj = json::parse(line);
        } catch (const json::exception& e) {
            throw ParseError(std::string("invalid JSON: ") + e.what(), line_number);
        }
        try {
            if (!obj.is_object()) throw Error("not a JSON object");
            SeriesKey key;
            key.experiment_id = obj.at("experiment_id").get<std::string>();
            if (obj.contains("segment")) key.segment = obj.at("segment").get<std::string>();
            Row row;
            row.line = line_number;
            row.snap.day = obj.at("day").get<int>();
            if (row.snap.day < 1) throw Error("day indices start at 1");
            const auto x_t = obj.at("x_t").get<long long>();
            const auto x_c = obj.at("x_c").get<long long>();
            if (x_t < 0 || x_c < 0) throw Error("cumulative counts must be non-negative");
            row.snap.x_t = static_cast<std::uint64_t>(x_t);
            row.snap.x_c = static_cast<std::uint64_t>(x_c);
            row.r_t = obj.at("r_t").get<double>();
            row.r_c = obj.at("r_c").get<double>();
            if (!(row.r_t > 0.0 && row.r_c > 0.0))
                throw Error("traffic shares must be positive");
            grouped[key].push_back(row);
        } catch (const json::exception& e) {
            throw ParseError(std::string("bad snapshot record: ") + e.what(), line_number);
        } catch (const Error& e) {
            throw ParseError(std::string("bad snapshot record: ") + e.what(), line_number);
        }
    }

    std::map<SeriesKey, SnapshotSeries> out;
    for (auto& [key, rows] : grouped) {
        std::stable_sort(rows.begin(), rows.end(),
                         [](const Row& a, const Row& b) { return a.snap.day < b.snap.day; });
        SnapshotSeries series;
        series.split = srm::ExpectedSplit(rows.front().r_t, rows.front().r_c);
        for (std::size_t i = 0; i < rows.size(); ++i) {
            const auto& row = rows[i];
            if (row.r_t != rows.front().r_t || row.r_c != rows.front().r_c)
                throw ParseError("series " + key.display() + " changes its designed split",
                                 row.line);
            if (i > 0) {
                const auto& prev = rows[i - 1];
                if (row.snap.day == prev.snap.day)
                    throw ParseError("series " + key.display() + " repeats day " +
                                         std::to_string(row.snap.day),
                                     row.line);
                if (row.snap.x_t < prev.snap.x_t || row.snap.x_c < prev.snap.x_c)
                    throw ParseError("series " + key.display() +
                                         " has decreasing cumulative counts at day " +
                                         std::to_string(row.snap.day),
                                     row.line);
            }
            series.snapshots.push_back(row.snap);
        }
        out.emplace(key, std::move(series));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Monitor state persistence
// ---------------------------------------------------------------------------

using StateMap = std::map<SeriesKey, srm::MonitorState>;

inline constexpr int kStateVersion = 1;

inline json state_to_json(const StateMap& state) {
    json entries = json::array();
    for (const auto& [key, monitor] : state) {
        json entry;
        entry["experiment_id"] = key.experiment_id;
        if (!key.segment.empty()) entry["segment"] = key.segment;
        entry["fired"] = monitor.fired;
        if (monitor.first_alert_day) entry["first_alert_day"] = *monitor.first_alert_day;
        if (monitor.direction) entry["direction"] = srm::direction_name(*monitor.direction);
        if (monitor.last_day) entry["last_day"] = *monitor.last_day;
        entries.push_back(std::move(entry));
    }
    return json{{"version", kStateVersion}, {"entries", std::move(entries)}};
}

inline StateMap state_from_json(const json& doc) {
    StateMap out;
    if (!doc.is_object() || doc.value("version", -1) != kStateVersion ||
        !doc.contains("entries") || !doc.at("entries").is_array())
        throw Error("unrecognized state document");
    for (const auto& entry : doc.at("entries")) {
        SeriesKey key;
        key.experiment_id = entry.at("experiment_id").get<std::string>();
        if (entry.contains("segment")) key.segment = entry.at("segment").get<std::string>();
        srm::MonitorState monitor;
        monitor.fired = entry.at("fired").get<bool>();
        if (entry.contains("first_alert_day"))
            monitor.first_alert_day = entry.at("first_alert_day").get<int>();
        if (entry.contains("direction")) {
            const auto name = entry.at("direction").get<std::string>();
            if (name == "high") {
                monitor.direction = srm::Direction::high;
            } else if (name == "low") {
                monitor.direction = srm::Direction::low;
            } else {
                throw Error("unrecognized direction '" + name + "'");
            }
        }
        if (entry.contains("last_day")) monitor.last_day = entry.at("last_day").get<int>();
        if (monitor.fired != monitor.first_alert_day.has_value())
            throw Error("inconsistent alert state for " + key.display());
        if (!out.emplace(key, monitor).second)
            throw Error("duplicate state entry for " + key.display());
    }
    return out;
}

/// Missing file yields an empty map; a corrupt file throws without touching it.
inline StateMap load_state(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in.good()) return {};
    json doc;
    try {
        in >> doc;
        return state_from_json(doc);
    } catch (const json::exception& e) {
        throw Error("corrupt state file " + path.string() + ": " + e.what());
    } catch (const Error& e) {
        throw Error("corrupt state file " + path.string() + ": " + e.what());
    }
}

/// Atomic replace: serialize to <path>.tmp, then rename over the target.
inline void save_state(const std::filesystem::path& path, const StateMap& state) {
    const std::filesystem::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::trunc);
        if (!out.good()) throw Error("cannot write state file: " + tmp.string());
        out << state_to_json(state).dump(2) << '\n';
        if (!out.good()) throw Error("failed writing state file: " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

}  // namespace abq::io
