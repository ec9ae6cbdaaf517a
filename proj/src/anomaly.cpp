#include "loadwatch/anomaly.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include <nlohmann/json.hpp>

#include "loadwatch/errors.hpp"
#include "loadwatch/util.hpp"

namespace loadwatch {

using json = nlohmann::json;

double sigma_prev_day(const RegularSeries& series, std::size_t t) {
    if (series.r <= 0) throw ConfigError("sigma_prev_day: series interval must be > 0");
    if (t > series.values.size())
        throw DataError("sigma_prev_day: timestep out of range");
    const std::size_t day_buckets = static_cast<std::size_t>(86400 / series.r);
    const std::size_t begin = t > day_buckets ? t - day_buckets : 0;
    if (begin >= t)
        throw InsufficientHistoryError("no samples in the 24 h window before timestep " +
                                       std::to_string(t));
    double sum = 0.0;
    for (std::size_t i = begin; i < t; ++i) sum += series.values[i];
    const double n = static_cast<double>(t - begin);
    const double mean = sum / n;
    double sq = 0.0;
    for (std::size_t i = begin; i < t; ++i) {
        const double d = series.values[i] - mean;
        sq += d * d;
    }
    return std::sqrt(sq / n);
}

double threshold_value(double y_hat, double sigma) {
    if (sigma < 0) throw ConfigError("threshold_value: sigma must be >= 0");
    return y_hat + 2.0 * sigma;
}

AnomalyReport detect(const RegularSeries& series, Autoencoder& net, double norm_max,
                     const DetectConfig& config) {
    if (norm_max <= 0) throw ConfigError("detect: norm_max must be > 0");
    const std::size_t L = config.input_length;
    if (L != net.input_length())
        throw ConfigError("detect: configured input_length " + std::to_string(L) +
                          " does not match model input " + std::to_string(net.input_length()));

    AnomalyReport report;
    const std::vector<Segment> segments = segment_usages(series, config.segmentation);
    for (std::size_t seg_idx = 0; seg_idx < segments.size(); ++seg_idx) {
        const Segment& seg = segments[seg_idx];
        if (seg.start_timestamp - series.start_timestamp < config.min_history) {
            report.skips.push_back({seg_idx, seg.start_timestamp, "insufficient history"});
            continue;
        }
        double sigma = 0.0;
        try {
            sigma = sigma_prev_day(series, seg.start_index);
        } catch (const InsufficientHistoryError& e) {
            report.skips.push_back({seg_idx, seg.start_timestamp, e.what()});
            continue;
        }

        const UsageSignal signal = to_usage_signal(seg, L, norm_max);
        const Tensor recon = net.forward(signal_to_tensor(signal), false);
        const std::vector<double>& recon_values = recon.data();

        SignalSummary summary;
        summary.signal_index = report.signals.size();
        summary.start_timestamp = seg.start_timestamp;
        summary.sigma = sigma;
        summary.truncated_segment = seg.truncated;

        const std::size_t scored = std::min(L, seg.values.size());
        bool in_event = false;
        AnomalyEvent event;
        for (std::size_t t = 0; t < scored; ++t) {
            TimestepRecord rec;
            rec.signal_index = summary.signal_index;
            rec.timestamp = seg.start_timestamp + static_cast<std::int64_t>(t) * series.r;
            rec.actual = seg.values[t];
            rec.predicted = recon_values[t] * norm_max;
            rec.threshold = threshold_value(rec.predicted, sigma);
            rec.is_anomaly = rec.actual > rec.threshold;
            report.timesteps.push_back(rec);
            ++summary.scored_timesteps;

            if (rec.is_anomaly) {
                ++summary.anomalous_timesteps;
                const double excess = rec.actual - rec.threshold;
                if (!in_event) {
                    in_event = true;
                    event = AnomalyEvent{summary.signal_index, rec.timestamp,
                                         rec.timestamp + series.r, 1, excess};
                } else {
                    event.end_timestamp = rec.timestamp + series.r;
                    event.length += 1;
                    event.peak_excess = std::max(event.peak_excess, excess);
                }
            } else if (in_event) {
                report.events.push_back(event);
                in_event = false;
            }
        }
        if (in_event) report.events.push_back(event);
        report.signals.push_back(summary);
    }
    return report;
}

std::string report_to_json(const AnomalyReport& report) {
    json j;
    j["signals"] = json::array();
    for (const SignalSummary& s : report.signals)
        j["signals"].push_back({{"signal_index", s.signal_index},
                                {"start_timestamp", s.start_timestamp},
                                {"scored_timesteps", s.scored_timesteps},
                                {"anomalous_timesteps", s.anomalous_timesteps},
                                {"sigma", s.sigma},
                                {"truncated_segment", s.truncated_segment}});
    j["events"] = json::array();
    for (const AnomalyEvent& e : report.events)
        j["events"].push_back({{"signal_index", e.signal_index},
                               {"start_timestamp", e.start_timestamp},
                               {"end_timestamp", e.end_timestamp},
                               {"length", e.length},
                               {"peak_excess", e.peak_excess}});
    j["skips"] = json::array();
    for (const SignalSkip& s : report.skips)
        j["skips"].push_back({{"segment_index", s.segment_index},
                              {"start_timestamp", s.start_timestamp},
                              {"reason", s.reason}});
    j["summary"] = {{"scored_signals", report.signals.size()},
                    {"total_events", report.events.size()},
                    {"total_anomalous_timesteps",
                     std::accumulate(report.signals.begin(), report.signals.end(), std::size_t{0},
                                     [](std::size_t acc, const SignalSummary& s) {
                                         return acc + s.anomalous_timesteps;
                                     })}};
    return j.dump(2) + "\n";
}

std::string report_to_csv(const AnomalyReport& report) {
    std::ostringstream out;
    out << "signal_index,timestamp,actual,predicted,threshold,is_anomaly\n";
    for (const TimestepRecord& r : report.timesteps)
        out << r.signal_index << ',' << r.timestamp << ',' << fmt_double(r.actual) << ','
            << fmt_double(r.predicted) << ',' << fmt_double(r.threshold) << ','
            << (r.is_anomaly ? 1 : 0) << "\n";
    return out.str();
}

std::string report_to_svg(const AnomalyReport& report) {
    const int width = 1200, height = 320, pad = 30;
    const std::size_t n = report.timesteps.size();
    std::ostringstream out;
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
        << height << "\" viewBox=\"0 0 " << width << ' ' << height << "\">\n";
    out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    if (n == 0) {
        out << "<text x=\"20\" y=\"40\" font-size=\"14\">no scored timesteps</text>\n</svg>\n";
        return out.str();
    }
    double y_max = 1.0;
    for (const TimestepRecord& r : report.timesteps)
        y_max = std::max({y_max, r.actual, r.threshold});
    const double sx = static_cast<double>(width - 2 * pad) / static_cast<double>(n);
    auto px = [&](std::size_t i) { return pad + sx * (static_cast<double>(i) + 0.5); };
    auto py = [&](double v) {
        return static_cast<double>(height - pad) -
               v / y_max * static_cast<double>(height - 2 * pad);
    };

    // Light separators between scored signals.
    for (std::size_t i = 1; i < n; ++i)
        if (report.timesteps[i].signal_index != report.timesteps[i - 1].signal_index)
            out << "<line x1=\"" << fmt_double(px(i)) << "\" y1=\"" << pad << "\" x2=\""
                << fmt_double(px(i)) << "\" y2=\"" << height - pad
                << "\" stroke=\"#dddddd\" stroke-width=\"1\"/>\n";

    auto polyline = [&](const char* color, const char* dash, auto getter) {
        out << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1\"";
        if (dash) out << " stroke-dasharray=\"" << dash << "\"";
        out << " points=\"";
        for (std::size_t i = 0; i < n; ++i)
            out << fmt_double(px(i)) << ',' << fmt_double(py(getter(report.timesteps[i]))) << ' ';
        out << "\"/>\n";
    };
    polyline("#e08020", "4,3", [](const TimestepRecord& r) { return r.threshold; });
    polyline("#202020", nullptr, [](const TimestepRecord& r) { return r.actual; });
    for (std::size_t i = 0; i < n; ++i)
        if (report.timesteps[i].is_anomaly)
            out << "<circle cx=\"" << fmt_double(px(i)) << "\" cy=\""
                << fmt_double(py(report.timesteps[i].actual))
                << "\" r=\"2\" fill=\"#d02020\"/>\n";
    out << "<text x=\"" << pad << "\" y=\"" << pad - 10
        << "\" font-size=\"12\" fill=\"#202020\">actual (solid) vs threshold (dashed); anomalies "
           "in red</text>\n";
    out << "</svg>\n";
    return out.str();
}

} // namespace loadwatch
