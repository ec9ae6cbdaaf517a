#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "loadwatch/ingest.hpp"

namespace loadwatch {

enum class FillFlag : std::uint8_t {
    observed = 0,
    forward_filled = 1,
    zero_filled = 2,
};

std::string to_string(FillFlag f);
FillFlag fill_flag_from_string(const std::string& s);

struct ResampleConfig {
    std::int64_t r = 10;        // target interval, seconds
    double mean_interval = 0.0; // t-bar, mean raw sampling interval, seconds
};

struct RegularSeries {
    std::int64_t start_timestamp = 0;
    std::int64_t r = 0;
    std::vector<double> values; // watts, finite, >= 0
    std::vector<FillFlag> filled_mask;

    std::int64_t timestamp_at(std::size_t index) const {
        return start_timestamp + static_cast<std::int64_t>(index) * r;
    }
};

struct SegmentationConfig {
    double on_threshold = 5.0;          // W
    std::int64_t merge_gap_max = 600;   // seconds
    std::int64_t max_duration = 3200;   // seconds
};

// One device usage cut from a RegularSeries: a run of buckets from the first
// above-threshold bucket to the last, interior sub-threshold gaps included.
struct Segment {
    std::size_t start_index = 0;
    std::int64_t start_timestamp = 0;
    std::vector<double> values; // raw resampled watts
    bool truncated = false;     // capped at max_duration
};

struct UsageSignal {
    std::int64_t start_timestamp = 0;
    std::vector<double> samples; // normalized to [0,1], length exactly L
    double raw_peak_watts = 0.0;
    std::size_t length = 0; // == samples.size()
};

// Maximum run of empty buckets that may be carried forward: n = floor(4*t_bar/r).
// Longer runs become zeros.
std::int64_t gap_fill_limit(const ResampleConfig& config);

// Buckets the series into intervals [start + i*r, start + (i+1)*r), each bucket
// the mean of its readings. Empty runs of length <= gap_fill_limit are carried
// forward from the last observed bucket; longer runs become zero.
RegularSeries resample(const ApplianceSeries& series, const ResampleConfig& config);

// A segment opens at the first bucket above on_threshold and closes once the
// series stays at/below it for more than merge_gap_max seconds. Segments longer
// than max_duration are cut there and flagged.
std::vector<Segment> segment_usages(const RegularSeries& series, const SegmentationConfig& config);

// Normalizes by norm_max, clamps to [0,1], right-pads with zeros or truncates
// to exactly L samples.
UsageSignal to_usage_signal(const Segment& segment, std::size_t L, double norm_max);

// Intermediate columnar CSV: timestamp,value,fill_flag.
std::string regular_series_to_csv(const RegularSeries& series);
RegularSeries regular_series_from_csv(const std::string& content);

// JSON manifest listing segments of a resampled series, so pipeline stages can
// run as separate processes. `source` is the resampled CSV filename.
std::string segment_manifest_to_json(const std::vector<Segment>& segments,
                                     const RegularSeries& series, const std::string& source);

struct SegmentManifest {
    std::string source;
    std::int64_t r = 0;
    std::int64_t start_timestamp = 0;
    std::vector<Segment> segments; // values filled from the resampled series
};

// Reads a manifest and the resampled CSV it references (relative to the
// manifest's directory) and reattaches bucket values to each segment.
SegmentManifest load_segment_manifest(const std::filesystem::path& manifest_path);

} // namespace loadwatch
