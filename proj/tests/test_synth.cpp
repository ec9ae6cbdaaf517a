#include <doctest.h>

#include <set>
#include <sstream>

#include "loadwatch/errors.hpp"
#include "loadwatch/ingest.hpp"
#include "loadwatch/preprocess.hpp"
#include "loadwatch/synth.hpp"

using namespace loadwatch;
using namespace loadwatch::synth;

namespace {

RegularSeries resample_default(const ApplianceSeries& series) {
    return resample(series, {10, series_stats(series).mean_interval_seconds});
}

SegmentationConfig default_seg() { return {5.0, 600, 3200}; }

} // namespace

TEST_CASE("generate is deterministic in the seed") {
    const CycleTemplate tpl = default_dishwasher_template();
    SynthSeries a = generate(tpl, 5, 42);
    SynthSeries b = generate(tpl, 5, 42);
    SynthSeries c = generate(tpl, 5, 43);
    REQUIRE(a.series.readings.size() == b.series.readings.size());
    for (std::size_t i = 0; i < a.series.readings.size(); ++i) {
        CHECK(a.series.readings[i].timestamp == b.series.readings[i].timestamp);
        CHECK(a.series.readings[i].watts == b.series.readings[i].watts);
    }
    CHECK(a.series.readings.size() != c.series.readings.size());
}

TEST_CASE("zero jitter gives piecewise-constant phases") {
    CycleTemplate tpl = default_dishwasher_template();
    for (Phase& p : tpl.phases) p.jitter = 0.0;
    SynthSeries out = generate(tpl, 2, 1);
    const UsageWindow& w = out.usages[0];
    for (const RawReading& r : out.series.readings) {
        if (r.timestamp < w.start || r.timestamp >= w.end) continue;
        std::int64_t offset = r.timestamp - w.start;
        double expected = 0.0;
        for (const Phase& p : tpl.phases) {
            if (offset < p.duration) {
                expected = p.mean_watts;
                break;
            }
            offset -= p.duration;
        }
        CHECK(r.watts == expected);
    }
}

TEST_CASE("segmentation recovers exactly the generated usages") {
    SynthSeries out = generate(default_dishwasher_template(), 3, 7);
    RegularSeries regular = resample_default(out.series);
    auto segments = segment_usages(regular, default_seg());
    REQUIRE(segments.size() == 3);
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(segments[i].start_timestamp == out.usages[i].start);
        CHECK(segments[i].values.size() == 320);
        CHECK_FALSE(segments[i].truncated);
    }
}

TEST_CASE("generated series parses back through the ingest module") {
    SynthSeries out = generate(default_dishwasher_template(), 2, 3);
    std::istringstream csv(series_to_csv(out.series));
    ParseResult parsed = parse_refit_csv(csv, "Appliance1");
    CHECK(parsed.stats.dropped == 0);
    REQUIRE(parsed.series.readings.size() == out.series.readings.size());
    CHECK(parsed.series.readings.back().watts == out.series.readings.back().watts);
}

TEST_CASE("inject with no labels returns the series unchanged") {
    SynthSeries out = generate(default_dishwasher_template(), 2, 9);
    ApplianceSeries injected = inject(out.series, {}, 1);
    REQUIRE(injected.readings.size() == out.series.readings.size());
    for (std::size_t i = 0; i < injected.readings.size(); ++i)
        CHECK(injected.readings[i].watts == out.series.readings[i].watts);
}

TEST_CASE("inject only modifies readings inside label intervals") {
    SynthSeries out = generate(default_dishwasher_template(), 4, 9);
    std::vector<AnomalyLabel> labels{
        {AnomalyKind::spike, out.usages[1].start + 1600, out.usages[1].start + 1900, 1.0},
        {AnomalyKind::level_shift, out.usages[2].start + 100, out.usages[2].start + 400, 500.0},
    };
    ApplianceSeries injected = inject(out.series, labels, 1);
    REQUIRE(injected.readings.size() == out.series.readings.size());
    for (std::size_t i = 0; i < injected.readings.size(); ++i) {
        const std::int64_t ts = injected.readings[i].timestamp;
        const bool inside = (ts >= labels[0].start && ts < labels[0].end) ||
                            (ts >= labels[1].start && ts < labels[1].end);
        if (inside)
            CHECK(injected.readings[i].watts > out.series.readings[i].watts);
        else
            CHECK(injected.readings[i].watts == out.series.readings[i].watts);
    }
}

TEST_CASE("per-kind injection semantics") {
    SynthSeries out = generate(default_dishwasher_template(), 3, 10);
    const double peak = [&] {
        double p = 0.0;
        for (const RawReading& r : out.series.readings) p = std::max(p, r.watts);
        return p;
    }();
    const std::int64_t us = out.usages[1].start;

    SUBCASE("spike adds magnitude times the series peak") {
        ApplianceSeries injected =
            inject(out.series, {{AnomalyKind::spike, us + 1600, us + 1700, 0.5}}, 1);
        for (std::size_t i = 0; i < injected.readings.size(); ++i) {
            const std::int64_t ts = injected.readings[i].timestamp;
            if (ts >= us + 1600 && ts < us + 1700)
                CHECK(injected.readings[i].watts ==
                      doctest::Approx(out.series.readings[i].watts + 0.5 * peak));
        }
    }
    SUBCASE("level_shift adds its magnitude in watts") {
        ApplianceSeries injected =
            inject(out.series, {{AnomalyKind::level_shift, us + 1600, us + 1700, 333.0}}, 1);
        for (std::size_t i = 0; i < injected.readings.size(); ++i) {
            const std::int64_t ts = injected.readings[i].timestamp;
            if (ts >= us + 1600 && ts < us + 1700)
                CHECK(injected.readings[i].watts ==
                      doctest::Approx(out.series.readings[i].watts + 333.0));
        }
    }
    SUBCASE("elongation holds the value at label start") {
        // label starts inside the heat phase and stretches over the wash phase
        ApplianceSeries injected =
            inject(out.series, {{AnomalyKind::elongation, us + 1400, us + 2300, 1.0}}, 1);
        double held = -1.0;
        for (std::size_t i = 0; i < injected.readings.size(); ++i) {
            const std::int64_t ts = injected.readings[i].timestamp;
            if (ts >= us + 1400 && ts < us + 2300) {
                if (held < 0) held = injected.readings[i].watts;
                CHECK(injected.readings[i].watts == held);
            }
        }
        CHECK(held > 1500.0); // heat-phase level, not the wash level
    }
    SUBCASE("stuck_on holds the last active value past cycle end") {
        const std::int64_t ue = out.usages[1].end;
        ApplianceSeries injected =
            inject(out.series, {{AnomalyKind::stuck_on, ue + 700, ue + 1500, 1.0}}, 1);
        // last active value is the heat-dry phase level of usage 1
        double heat_dry = 0.0;
        for (const RawReading& r : out.series.readings)
            if (r.timestamp < ue && r.watts > 1.0) heat_dry = r.watts;
        for (std::size_t i = 0; i < injected.readings.size(); ++i) {
            const std::int64_t ts = injected.readings[i].timestamp;
            if (ts >= ue + 700 && ts < ue + 1500)
                CHECK(injected.readings[i].watts == doctest::Approx(heat_dry));
        }
    }
}

TEST_CASE("inject validates label intervals") {
    SynthSeries out = generate(default_dishwasher_template(), 2, 11);
    const std::int64_t us = out.usages[0].start;
    CHECK_THROWS_AS(
        inject(out.series,
               {{AnomalyKind::spike, us, us + 500, 1.0}, {AnomalyKind::spike, us + 400, us + 900, 1.0}},
               1),
        ConfigError);
    CHECK_THROWS_AS(inject(out.series, {{AnomalyKind::spike, us + 500, us, 1.0}}, 1), ConfigError);
    CHECK_THROWS_AS(inject(out.series, {{AnomalyKind::spike, us, us + 10, -1.0}}, 1), ConfigError);
    CHECK_THROWS_AS(
        inject(out.series, {{AnomalyKind::spike, 1, 2, 1.0}}, 1), ConfigError);
}

TEST_CASE("stuck_on adjacent to the cycle end pushes the segment past max_duration") {
    SynthSeries out = generate(default_dishwasher_template(), 3, 12);
    const std::int64_t ue = out.usages[1].end;
    // gap of 400 s <= merge_gap_max of 600 s merges the held tail into the usage
    ApplianceSeries injected =
        inject(out.series, {{AnomalyKind::stuck_on, ue + 400, ue + 2000, 1.0}}, 1);
    RegularSeries regular = resample_default(injected);
    auto segments = segment_usages(regular, default_seg());
    REQUIRE(segments.size() == 3);
    CHECK(segments[1].truncated);
    CHECK(segments[1].values.size() == 320);
    CHECK_FALSE(segments[0].truncated);
    CHECK_FALSE(segments[2].truncated);
}

TEST_CASE("make_labels places disjoint labels of all four kinds in the tail region") {
    const CycleTemplate tpl = default_dishwasher_template();
    SynthSeries out = generate(tpl, 40, 13);
    auto labels = make_labels(out.usages, tpl, 8, 0.8, 1600.0, 5);
    REQUIRE(labels.size() == 8);
    const std::int64_t region_start = out.usages[32].start;
    std::int64_t prev_end = 0;
    std::set<std::string> kinds;
    for (const AnomalyLabel& l : labels) {
        CHECK(l.start >= region_start);
        CHECK(l.start >= prev_end);
        CHECK(l.start < l.end);
        prev_end = l.end;
        kinds.insert(to_string(l.kind));
    }
    CHECK(kinds.size() == 4);
    // too many labels for the region
    CHECK_THROWS_AS(make_labels(out.usages, tpl, 9, 0.8, 1600.0, 5), ConfigError);
}

TEST_CASE("labels round-trip through JSON") {
    std::vector<AnomalyLabel> labels{{AnomalyKind::spike, 100, 200, 1.5},
                                     {AnomalyKind::stuck_on, 300, 400, 2.0}};
    auto back = labels_from_json(labels_to_json(labels));
    REQUIRE(back.size() == 2);
    CHECK(back[0].kind == AnomalyKind::spike);
    CHECK(back[0].start == 100);
    CHECK(back[1].kind == AnomalyKind::stuck_on);
    CHECK(back[1].magnitude == 2.0);
}
