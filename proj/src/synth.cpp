#include "loadwatch/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include <nlohmann/json.hpp>

#include "loadwatch/errors.hpp"
#include "loadwatch/util.hpp"

namespace loadwatch {
namespace synth {

using json = nlohmann::json;

std::int64_t CycleTemplate::cycle_duration() const {
    std::int64_t total = 0;
    for (const Phase& p : phases) total += p.duration;
    return total;
}

double CycleTemplate::peak_watts() const {
    double peak = 0.0;
    for (const Phase& p : phases) peak = std::max(peak, p.mean_watts);
    return peak;
}

CycleTemplate default_dishwasher_template() {
    CycleTemplate tpl;
    tpl.phases = {
        {600, 80.0, 0.05},   // pre-wash
        {900, 2000.0, 0.05}, // heat
        {1200, 120.0, 0.05}, // wash
        {500, 1400.0, 0.05}, // heat-dry
    };
    return tpl;
}

std::string to_string(AnomalyKind kind) {
    switch (kind) {
        case AnomalyKind::spike: return "spike";
        case AnomalyKind::elongation: return "elongation";
        case AnomalyKind::level_shift: return "level_shift";
        case AnomalyKind::stuck_on: return "stuck_on";
    }
    throw ConfigError("invalid anomaly kind");
}

AnomalyKind anomaly_kind_from_string(const std::string& s) {
    if (s == "spike") return AnomalyKind::spike;
    if (s == "elongation") return AnomalyKind::elongation;
    if (s == "level_shift") return AnomalyKind::level_shift;
    if (s == "stuck_on") return AnomalyKind::stuck_on;
    throw DataError("unknown anomaly kind '" + s + "'");
}

namespace {

void validate_template(const CycleTemplate& tpl) {
    if (tpl.phases.empty()) throw ConfigError("cycle template: no phases");
    for (const Phase& p : tpl.phases) {
        if (p.duration <= 0) throw ConfigError("cycle template: phase durations must be > 0");
        if (p.mean_watts < 0) throw ConfigError("cycle template: watts must be >= 0");
        if (p.jitter < 0 || p.jitter >= 1) throw ConfigError("cycle template: jitter in [0, 1)");
    }
    if (tpl.gap_min <= 0 || tpl.gap_max < tpl.gap_min)
        throw ConfigError("cycle template: need 0 < gap_min <= gap_max");
    if (tpl.gap_quantum <= 0 || tpl.sample_interval <= 0)
        throw ConfigError("cycle template: quantum and sample interval must be > 0");
}

} // namespace

SynthSeries generate(const CycleTemplate& tpl, std::size_t n_usages, std::uint64_t seed) {
    validate_template(tpl);
    if (n_usages < 1) throw ConfigError("generate: n_usages must be >= 1");

    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::int64_t> gap_steps(tpl.gap_min / tpl.gap_quantum,
                                                          tpl.gap_max / tpl.gap_quantum);

    SynthSeries out;
    out.series.house_id = 0;
    out.series.appliance_label = "Appliance1";

    // Usage schedule first, then phase levels per usage, then the reading grid.
    std::vector<UsageWindow> usages;
    std::vector<std::vector<double>> levels(n_usages);
    std::int64_t cursor = tpl.start_timestamp;
    for (std::size_t u = 0; u < n_usages; ++u) {
        cursor += gap_steps(rng) * tpl.gap_quantum;
        UsageWindow w{cursor, cursor + tpl.cycle_duration()};
        usages.push_back(w);
        levels[u].reserve(tpl.phases.size());
        for (const Phase& p : tpl.phases) {
            std::uniform_real_distribution<double> wobble(-p.jitter, p.jitter);
            levels[u].push_back(p.mean_watts * (1.0 + (p.jitter > 0 ? wobble(rng) : 0.0)));
        }
        cursor = w.end;
    }
    const std::int64_t series_end = cursor + tpl.gap_min;

    std::size_t current = 0;
    for (std::int64_t ts = tpl.start_timestamp; ts < series_end; ts += tpl.sample_interval) {
        while (current < usages.size() && ts >= usages[current].end) ++current;
        double watts = 0.0;
        if (current < usages.size() && ts >= usages[current].start) {
            std::int64_t offset = ts - usages[current].start;
            for (std::size_t p = 0; p < tpl.phases.size(); ++p) {
                if (offset < tpl.phases[p].duration) {
                    watts = levels[current][p];
                    break;
                }
                offset -= tpl.phases[p].duration;
            }
        }
        out.series.readings.push_back({ts, watts});
    }
    out.usages = std::move(usages);
    return out;
}

ApplianceSeries inject(const ApplianceSeries& series, const std::vector<AnomalyLabel>& labels,
                       std::uint64_t /*seed*/) {
    if (series.readings.empty()) throw DataError("inject: empty series");
    const std::int64_t first = series.readings.front().timestamp;
    const std::int64_t last = series.readings.back().timestamp;

    std::vector<AnomalyLabel> sorted = labels;
    std::sort(sorted.begin(), sorted.end(),
              [](const AnomalyLabel& a, const AnomalyLabel& b) { return a.start < b.start; });
    for (std::size_t i = 0; i < sorted.size(); ++i) {
        const AnomalyLabel& l = sorted[i];
        if (l.start >= l.end) throw ConfigError("inject: label start must precede end");
        if (l.magnitude <= 0) throw ConfigError("inject: label magnitude must be > 0");
        if (l.start < first || l.end > last + 1)
            throw ConfigError("inject: label outside series span");
        if (i > 0 && l.start < sorted[i - 1].end)
            throw ConfigError("inject: labels overlap");
    }

    double peak = 0.0;
    for (const RawReading& r : series.readings) peak = std::max(peak, r.watts);

    ApplianceSeries out = series;
    for (const AnomalyLabel& label : sorted) {
        // Readings are sorted; find the affected range once per label.
        auto lo = std::lower_bound(out.readings.begin(), out.readings.end(), label.start,
                                   [](const RawReading& r, std::int64_t t) {
                                       return r.timestamp < t;
                                   });
        auto hi = std::lower_bound(lo, out.readings.end(), label.end,
                                   [](const RawReading& r, std::int64_t t) {
                                       return r.timestamp < t;
                                   });
        switch (label.kind) {
            case AnomalyKind::spike:
                for (auto it = lo; it != hi; ++it) it->watts += label.magnitude * peak;
                break;
            case AnomalyKind::level_shift:
                for (auto it = lo; it != hi; ++it) it->watts += label.magnitude;
                break;
            case AnomalyKind::elongation: {
                const double held = (lo != out.readings.end() ? lo->watts : 0.0) * label.magnitude;
                for (auto it = lo; it != hi; ++it) it->watts = held;
                break;
            }
            case AnomalyKind::stuck_on: {
                double active = 0.0;
                for (auto it = std::make_reverse_iterator(lo); it != out.readings.rend(); ++it) {
                    if (it->watts > 1.0) {
                        active = it->watts;
                        break;
                    }
                }
                const double held = active * label.magnitude;
                for (auto it = lo; it != hi; ++it) it->watts = held;
                break;
            }
        }
    }
    return out;
}

std::vector<AnomalyLabel> make_labels(const std::vector<UsageWindow>& usages,
                                      const CycleTemplate& tpl, std::size_t n_labels,
                                      double region_start_fraction, double level_shift_watts,
                                      std::uint64_t seed) {
    if (region_start_fraction < 0 || region_start_fraction >= 1)
        throw ConfigError("make_labels: region_start_fraction in [0, 1)");
    const std::size_t region_begin =
        static_cast<std::size_t>(region_start_fraction * static_cast<double>(usages.size()));
    if (region_begin >= usages.size() || usages.size() - region_begin < n_labels)
        throw ConfigError("make_labels: not enough usages in the target region for " +
                          std::to_string(n_labels) + " labels");

    std::vector<std::size_t> candidates(usages.size() - region_begin);
    std::iota(candidates.begin(), candidates.end(), region_begin);
    std::mt19937_64 rng(seed);
    std::shuffle(candidates.begin(), candidates.end(), rng);
    candidates.resize(n_labels);
    std::sort(candidates.begin(), candidates.end());

    const std::int64_t cycle = tpl.cycle_duration();
    std::vector<AnomalyLabel> labels;
    labels.reserve(n_labels);
    static constexpr AnomalyKind kinds[] = {AnomalyKind::spike, AnomalyKind::elongation,
                                            AnomalyKind::level_shift, AnomalyKind::stuck_on};
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        const std::int64_t us = usages[candidates[i]].start;
        AnomalyLabel label;
        label.kind = kinds[i % 4];
        switch (label.kind) {
            case AnomalyKind::spike:
                // Mid-cycle burst on top of whatever phase is running.
                label.start = us + cycle / 2;
                label.end = label.start + 300;
                label.magnitude = 1.0;
                break;
            case AnomalyKind::elongation:
                // Hold the value at 7/16 of the cycle across the next stretch.
                label.start = us + cycle * 7 / 16;
                label.end = us + cycle * 23 / 32;
                label.magnitude = 1.0;
                break;
            case AnomalyKind::level_shift:
                label.start = us + cycle * 9 / 16;
                label.end = label.start + 800;
                label.magnitude = level_shift_watts;
                break;
            case AnomalyKind::stuck_on:
                // Restarts after the off-gap has exceeded the merge window.
                label.start = us + cycle + 700;
                label.end = label.start + 1500;
                label.magnitude = 1.4;
                break;
        }
        // Keep label boundaries on the gap quantum so resampled buckets stay pure.
        label.start -= label.start % tpl.gap_quantum;
        label.end -= label.end % tpl.gap_quantum;
        labels.push_back(label);
    }
    return labels;
}

std::string labels_to_json(const std::vector<AnomalyLabel>& labels) {
    json j = json::array();
    for (const AnomalyLabel& l : labels)
        j.push_back({{"kind", to_string(l.kind)},
                     {"start", l.start},
                     {"end", l.end},
                     {"magnitude", l.magnitude}});
    return j.dump(2) + "\n";
}

std::vector<AnomalyLabel> labels_from_json(const std::string& content) {
    json j;
    try {
        j = json::parse(content);
    } catch (const json::parse_error& e) {
        throw DataError("labels JSON: " + std::string(e.what()));
    }
    std::vector<AnomalyLabel> labels;
    try {
        for (const json& jl : j) {
            AnomalyLabel l;
            l.kind = anomaly_kind_from_string(jl.at("kind").get<std::string>());
            l.start = jl.at("start").get<std::int64_t>();
            l.end = jl.at("end").get<std::int64_t>();
            l.magnitude = jl.at("magnitude").get<double>();
            labels.push_back(l);
        }
    } catch (const json::exception& e) {
        throw DataError("labels JSON: " + std::string(e.what()));
    }
    return labels;
}

} // namespace synth
} // namespace loadwatch
