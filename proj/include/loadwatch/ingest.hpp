#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace loadwatch {

struct RawReading {
    std::int64_t timestamp = 0; // Unix seconds, > 0
    double watts = 0.0;         // finite, >= 0
};

struct ApplianceSeries {
    int house_id = 0;
    std::string appliance_label;
    std::vector<RawReading> readings; // strictly increasing timestamps, non-empty
};

struct ParseStats {
    std::size_t data_rows = 0;            // rows after the header
    std::size_t emitted = 0;              // readings in the output series
    std::size_t dropped = 0;              // non-numeric / negative / malformed rows
    std::size_t duplicates_collapsed = 0; // rows shadowed by a later same-timestamp row
};

struct ParseResult {
    ApplianceSeries series;
    ParseStats stats;
};

struct SeriesStats {
    std::size_t count = 0;
    double min_watts = 0.0;
    double max_watts = 0.0;
    double mean_interval_seconds = 0.0; // 0 when count == 1
};

// Parses a REFIT-style CSV: header row with a "Unix" seconds column and one or
// more appliance columns. `column_selector` picks the appliance column by
// header name, falling back to a 0-based column index when the selector is
// numeric and no header matches. Rows with unparsable or negative watt values
// are dropped and counted; duplicate timestamps keep the last occurrence;
// output is sorted ascending.
ParseResult parse_refit_csv(std::istream& source, const std::string& column_selector);

SeriesStats series_stats(const ApplianceSeries& series);

// Writes "Unix,<label>" rows; parse_refit_csv on the result reproduces the series.
void write_series_csv(const ApplianceSeries& series, std::ostream& out);
std::string series_to_csv(const ApplianceSeries& series);

} // namespace loadwatch
