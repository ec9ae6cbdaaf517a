#include "loadwatch/ingest.hpp"

#include <algorithm>
#include <cassert>
#include <charconv>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>

#include "loadwatch/errors.hpp"
#include "loadwatch/util.hpp"

namespace loadwatch {

namespace {

bool parse_int64(const std::string& s, std::int64_t& out) {
    std::string t = trim(s);
    if (t.empty()) return false;
    auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), out);
    return ec == std::errc{} && ptr == t.data() + t.size();
}

bool parse_double(const std::string& s, double& out) {
    std::string t = trim(s);
    if (t.empty()) return false;
    char* end = nullptr;
    out = std::strtod(t.c_str(), &end);
    return end == t.c_str() + t.size();
}

// Header name match first (exact, then case-insensitive), then numeric
// selectors as 0-based column indexes. REFIT releases are not consistent
// about header casing.
std::size_t resolve_column(const std::vector<std::string>& headers, const std::string& selector) {
    std::string want = trim(selector);
    for (std::size_t i = 0; i < headers.size(); ++i)
        if (trim(headers[i]) == want) return i;
    std::string want_lc = to_lower(want);
    for (std::size_t i = 0; i < headers.size(); ++i)
        if (to_lower(trim(headers[i])) == want_lc) return i;
    std::int64_t idx = 0;
    if (parse_int64(want, idx) && idx >= 0 && static_cast<std::size_t>(idx) < headers.size())
        return static_cast<std::size_t>(idx);
    throw DataError("unknown appliance column '" + selector + "'");
}

std::size_t resolve_time_column(const std::vector<std::string>& headers) {
    for (std::size_t i = 0; i < headers.size(); ++i)
        if (to_lower(trim(headers[i])) == "unix") return i;
    throw DataError("missing 'Unix' timestamp column in header");
}

} // namespace

ParseResult parse_refit_csv(std::istream& source, const std::string& column_selector) {
    std::string line;
    if (!std::getline(source, line)) throw DataError("empty input: no header row");
    std::vector<std::string> headers = split_csv_line(line);
    std::size_t time_col = resolve_time_column(headers);
    std::size_t value_col = resolve_column(headers, column_selector);

    ParseResult result;
    result.series.appliance_label = trim(headers[value_col]);

    struct Row {
        std::int64_t ts;
        double watts;
    };
    std::vector<Row> rows;
    while (std::getline(source, line)) {
        if (trim(line).empty()) continue;
        ++result.stats.data_rows;
        std::vector<std::string> fields = split_csv_line(line);
        if (fields.size() <= std::max(time_col, value_col)) {
            ++result.stats.dropped;
            continue;
        }
        std::int64_t ts = 0;
        double watts = 0.0;
        if (!parse_int64(fields[time_col], ts) || ts <= 0 ||
            !parse_double(fields[value_col], watts) || !std::isfinite(watts) || watts < 0.0) {
            ++result.stats.dropped;
            continue;
        }
        rows.push_back({ts, watts});
    }

    // Stable sort keeps input order among equal timestamps, so the last
    // element of each run is the last occurrence in the file.
    std::stable_sort(rows.begin(), rows.end(),
                     [](const Row& a, const Row& b) { return a.ts < b.ts; });
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (i + 1 < rows.size() && rows[i + 1].ts == rows[i].ts) {
            ++result.stats.duplicates_collapsed;
            continue;
        }
        result.series.readings.push_back({rows[i].ts, rows[i].watts});
    }
    result.stats.emitted = result.series.readings.size();

    if (result.series.readings.empty())
        throw DataError("no valid rows for column '" + column_selector + "'");
    return result;
}

SeriesStats series_stats(const ApplianceSeries& series) {
    if (series.readings.empty()) throw DataError("series_stats: empty series");
    SeriesStats s;
    s.count = series.readings.size();
    s.min_watts = series.readings.front().watts;
    s.max_watts = series.readings.front().watts;
    double interval_sum = 0.0;
    for (std::size_t i = 0; i < series.readings.size(); ++i) {
        double w = series.readings[i].watts;
        s.min_watts = std::min(s.min_watts, w);
        s.max_watts = std::max(s.max_watts, w);
        if (i > 0)
            interval_sum += static_cast<double>(series.readings[i].timestamp -
                                                series.readings[i - 1].timestamp);
    }
    s.mean_interval_seconds = s.count > 1 ? interval_sum / static_cast<double>(s.count - 1) : 0.0;
    return s;
}

void write_series_csv(const ApplianceSeries& series, std::ostream& out) {
    out << "Unix," << (series.appliance_label.empty() ? "Appliance1" : series.appliance_label)
        << "\n";
    for (const RawReading& r : series.readings)
        out << r.timestamp << ',' << fmt_double(r.watts) << "\n";
}

std::string series_to_csv(const ApplianceSeries& series) {
    std::ostringstream ss;
    write_series_csv(series, ss);
    return ss.str();
}

} // namespace loadwatch
