#include "loadwatch/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <nlohmann/json.hpp>

#include "loadwatch/errors.hpp"
#include "loadwatch/util.hpp"

namespace loadwatch {

using json = nlohmann::json;

std::string to_string(FillFlag f) {
    switch (f) {
        case FillFlag::observed: return "obs";
        case FillFlag::forward_filled: return "ff";
        case FillFlag::zero_filled: return "zero";
    }
    throw ConfigError("invalid fill flag");
}

FillFlag fill_flag_from_string(const std::string& s) {
    if (s == "obs") return FillFlag::observed;
    if (s == "ff") return FillFlag::forward_filled;
    if (s == "zero") return FillFlag::zero_filled;
    throw DataError("unknown fill flag '" + s + "'");
}

std::int64_t gap_fill_limit(const ResampleConfig& config) {
    if (config.r <= 0) throw ConfigError("resample interval r must be > 0");
    if (config.mean_interval < 0) throw ConfigError("mean_interval must be >= 0");
    return static_cast<std::int64_t>(std::floor(4.0 * config.mean_interval /
                                                static_cast<double>(config.r)));
}

RegularSeries resample(const ApplianceSeries& series, const ResampleConfig& config) {
    if (series.readings.empty()) throw DataError("resample: empty series");
    const std::int64_t r = config.r;
    const std::int64_t n = gap_fill_limit(config);

    const std::int64_t first = series.readings.front().timestamp;
    const std::int64_t last = series.readings.back().timestamp;
    const std::size_t buckets = static_cast<std::size_t>((last - first) / r + 1);

    std::vector<double> sums(buckets, 0.0);
    std::vector<std::size_t> counts(buckets, 0);
    for (const RawReading& reading : series.readings) {
        std::size_t i = static_cast<std::size_t>((reading.timestamp - first) / r);
        sums[i] += reading.watts;
        counts[i] += 1;
    }

    RegularSeries out;
    out.start_timestamp = first;
    out.r = r;
    out.values.resize(buckets, 0.0);
    out.filled_mask.resize(buckets, FillFlag::zero_filled);

    std::size_t i = 0;
    double last_observed = 0.0;
    while (i < buckets) {
        if (counts[i] > 0) {
            out.values[i] = sums[i] / static_cast<double>(counts[i]);
            out.filled_mask[i] = FillFlag::observed;
            last_observed = out.values[i];
            ++i;
            continue;
        }
        std::size_t run_end = i;
        while (run_end < buckets && counts[run_end] == 0) ++run_end;
        const std::size_t run_len = run_end - i;
        // First and last buckets always hold a reading, so every empty run has
        // an observed predecessor.
        const bool fill = static_cast<std::int64_t>(run_len) <= n;
        for (std::size_t j = i; j < run_end; ++j) {
            out.values[j] = fill ? last_observed : 0.0;
            out.filled_mask[j] = fill ? FillFlag::forward_filled : FillFlag::zero_filled;
        }
        i = run_end;
    }
    return out;
}

std::vector<Segment> segment_usages(const RegularSeries& series, const SegmentationConfig& config) {
    if (series.values.empty()) throw DataError("segment_usages: empty series");
    if (config.on_threshold < 0) throw ConfigError("on_threshold must be >= 0");
    if (config.merge_gap_max < 0) throw ConfigError("merge_gap_max must be >= 0");
    if (config.max_duration <= 0) throw ConfigError("max_duration must be > 0");

    const std::int64_t r = series.r;
    std::vector<std::pair<std::size_t, std::size_t>> spans; // [first_on, last_on]
    bool open = false;
    std::size_t span_start = 0, span_last = 0;
    for (std::size_t i = 0; i < series.values.size(); ++i) {
        if (series.values[i] <= config.on_threshold) continue;
        if (!open) {
            open = true;
            span_start = i;
        } else {
            const std::int64_t gap_seconds = static_cast<std::int64_t>(i - span_last - 1) * r;
            if (gap_seconds > config.merge_gap_max) {
                spans.emplace_back(span_start, span_last);
                span_start = i;
            }
        }
        span_last = i;
    }
    if (open) spans.emplace_back(span_start, span_last);

    const std::size_t max_buckets =
        std::max<std::size_t>(1, static_cast<std::size_t>(config.max_duration / r));

    std::vector<Segment> segments;
    segments.reserve(spans.size());
    for (auto [first_on, last_on] : spans) {
        Segment seg;
        seg.start_index = first_on;
        seg.start_timestamp = series.timestamp_at(first_on);
        std::size_t len = last_on - first_on + 1;
        if (len > max_buckets) {
            len = max_buckets;
            seg.truncated = true;
        }
        seg.values.assign(series.values.begin() + static_cast<std::ptrdiff_t>(first_on),
                          series.values.begin() + static_cast<std::ptrdiff_t>(first_on + len));
        segments.push_back(std::move(seg));
    }
    return segments;
}

UsageSignal to_usage_signal(const Segment& segment, std::size_t L, double norm_max) {
    if (norm_max <= 0.0) throw ConfigError("norm_max must be > 0");
    if (L == 0) throw ConfigError("signal length L must be > 0");
    if (segment.values.empty()) throw DataError("to_usage_signal: empty segment");

    UsageSignal sig;
    sig.start_timestamp = segment.start_timestamp;
    sig.length = L;
    sig.samples.assign(L, 0.0);
    const std::size_t used = std::min(L, segment.values.size());
    sig.raw_peak_watts = 0.0;
    for (std::size_t i = 0; i < used; ++i) {
        sig.raw_peak_watts = std::max(sig.raw_peak_watts, segment.values[i]);
        sig.samples[i] = std::clamp(segment.values[i] / norm_max, 0.0, 1.0);
    }
    return sig;
}

std::string regular_series_to_csv(const RegularSeries& series) {
    std::ostringstream out;
    out << "timestamp,value,fill_flag\n";
    for (std::size_t i = 0; i < series.values.size(); ++i)
        out << series.timestamp_at(i) << ',' << fmt_double(series.values[i]) << ','
            << to_string(series.filled_mask[i]) << "\n";
    return out.str();
}

RegularSeries regular_series_from_csv(const std::string& content) {
    std::istringstream in(content);
    std::string line;
    if (!std::getline(in, line)) throw DataError("regular series CSV: empty");
    if (split_csv_line(line) != std::vector<std::string>{"timestamp", "value", "fill_flag"})
        throw DataError("regular series CSV: unexpected header");

    RegularSeries series;
    std::int64_t prev_ts = 0;
    std::size_t row = 0;
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        std::vector<std::string> f = split_csv_line(line);
        if (f.size() != 3) throw DataError("regular series CSV: malformed row");
        std::int64_t ts = std::stoll(f[0]);
        double value = std::stod(f[1]);
        if (row == 0) {
            series.start_timestamp = ts;
        } else if (row == 1) {
            series.r = ts - prev_ts;
            if (series.r <= 0) throw DataError("regular series CSV: non-increasing timestamps");
        } else if (ts - prev_ts != series.r) {
            throw DataError("regular series CSV: uneven spacing at row " + std::to_string(row));
        }
        series.values.push_back(value);
        series.filled_mask.push_back(fill_flag_from_string(f[2]));
        prev_ts = ts;
        ++row;
    }
    if (series.values.empty()) throw DataError("regular series CSV: no rows");
    return series;
}

std::string segment_manifest_to_json(const std::vector<Segment>& segments,
                                     const RegularSeries& series, const std::string& source) {
    json j;
    j["source"] = source;
    j["r"] = series.r;
    j["start_timestamp"] = series.start_timestamp;
    j["segments"] = json::array();
    for (const Segment& seg : segments) {
        j["segments"].push_back({{"start_index", seg.start_index},
                                 {"start_timestamp", seg.start_timestamp},
                                 {"length", seg.values.size()},
                                 {"truncated", seg.truncated}});
    }
    return j.dump(2) + "\n";
}

SegmentManifest load_segment_manifest(const std::filesystem::path& manifest_path) {
    json j;
    try {
        j = json::parse(read_file(manifest_path));
    } catch (const json::parse_error& e) {
        throw DataError("segment manifest: " + std::string(e.what()));
    }
    SegmentManifest m;
    try {
        m.source = j.at("source").get<std::string>();
        m.r = j.at("r").get<std::int64_t>();
        m.start_timestamp = j.at("start_timestamp").get<std::int64_t>();

        RegularSeries series =
            regular_series_from_csv(read_file(manifest_path.parent_path() / m.source));
        if (series.values.size() > 1 && series.r != m.r)
            throw DataError("segment manifest: r does not match resampled CSV");

        for (const json& js : j.at("segments")) {
            Segment seg;
            seg.start_index = js.at("start_index").get<std::size_t>();
            seg.start_timestamp = js.at("start_timestamp").get<std::int64_t>();
            seg.truncated = js.at("truncated").get<bool>();
            const std::size_t len = js.at("length").get<std::size_t>();
            if (seg.start_index + len > series.values.size())
                throw DataError("segment manifest: segment exceeds series length");
            seg.values.assign(
                series.values.begin() + static_cast<std::ptrdiff_t>(seg.start_index),
                series.values.begin() + static_cast<std::ptrdiff_t>(seg.start_index + len));
            m.segments.push_back(std::move(seg));
        }
    } catch (const json::exception& e) {
        throw DataError("segment manifest: " + std::string(e.what()));
    }
    return m;
}

} // namespace loadwatch
