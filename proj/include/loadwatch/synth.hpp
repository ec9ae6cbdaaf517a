#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "loadwatch/ingest.hpp"

namespace loadwatch {
namespace synth {

struct Phase {
    std::int64_t duration = 0; // seconds, > 0
    double mean_watts = 0.0;   // >= 0
    double jitter = 0.0;       // fraction in [0, 1); per-usage level wobble
};

struct CycleTemplate {
    std::vector<Phase> phases;
    std::int64_t gap_min = 20000; // inter-usage gap bounds, seconds
    std::int64_t gap_max = 70000;
    std::int64_t gap_quantum = 10;     // gaps drawn in these steps
    std::int64_t sample_interval = 8;  // seconds between readings
    std::int64_t start_timestamp = 1600000000;

    std::int64_t cycle_duration() const;
    double peak_watts() const;
};

// Multi-phase dishwasher profile: pre-wash, heat, wash, heat-dry.
CycleTemplate default_dishwasher_template();

enum class AnomalyKind { spike, elongation, level_shift, stuck_on };

std::string to_string(AnomalyKind kind);
AnomalyKind anomaly_kind_from_string(const std::string& s);

struct AnomalyLabel {
    AnomalyKind kind = AnomalyKind::spike;
    std::int64_t start = 0; // Unix seconds, start < end
    std::int64_t end = 0;
    double magnitude = 1.0; // > 0; see inject() for per-kind meaning
};

struct UsageWindow {
    std::int64_t start = 0;
    std::int64_t end = 0; // exclusive
};

struct SynthSeries {
    ApplianceSeries series;
    std::vector<UsageWindow> usages;
};

// Continuous readings every sample_interval seconds: phase level inside a
// usage (each phase's level drawn once per usage as mean*(1+U(-j,j))), zero
// in between. Deterministic in seed.
SynthSeries generate(const CycleTemplate& tpl, std::size_t n_usages, std::uint64_t seed);

// Applies labels to a copy of the series. Readings outside label intervals
// are untouched. Per kind, over [start, end):
//   spike       adds magnitude * peak(series)
//   elongation  holds value_at(start) * magnitude
//   level_shift adds magnitude (watts)
//   stuck_on    holds magnitude * the last reading above 1 W before start
// Labels must lie within the series span and be pairwise disjoint.
ApplianceSeries inject(const ApplianceSeries& series, const std::vector<AnomalyLabel>& labels,
                       std::uint64_t seed);

// One label per chosen usage, kinds cycled in order, placed from
// region_start_fraction of the usage list onward. level_shift_watts sets that
// kind's magnitude; others use template-relative defaults.
std::vector<AnomalyLabel> make_labels(const std::vector<UsageWindow>& usages,
                                      const CycleTemplate& tpl, std::size_t n_labels,
                                      double region_start_fraction, double level_shift_watts,
                                      std::uint64_t seed);

std::string labels_to_json(const std::vector<AnomalyLabel>& labels);
std::vector<AnomalyLabel> labels_from_json(const std::string& content);

} // namespace synth
} // namespace loadwatch
