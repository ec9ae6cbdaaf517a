#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "loadwatch/models.hpp"
#include "loadwatch/preprocess.hpp"

namespace loadwatch {

struct ThresholdContext {
    double sigma = 0.0;         // same units as the signal, >= 0
    std::vector<double> window; // previous day's resampled values, non-empty
};

struct TimestepRecord {
    std::size_t signal_index = 0;
    std::int64_t timestamp = 0;
    double actual = 0.0;
    double predicted = 0.0;
    double threshold = 0.0; // predicted + 2*sigma
    bool is_anomaly = false;
};

// Maximal run of consecutive anomalous timesteps within one signal.
struct AnomalyEvent {
    std::size_t signal_index = 0;
    std::int64_t start_timestamp = 0;
    std::int64_t end_timestamp = 0; // exclusive
    std::size_t length = 0;         // timesteps
    double peak_excess = 0.0;       // max(actual - threshold)
};

struct SignalSummary {
    std::size_t signal_index = 0;
    std::int64_t start_timestamp = 0;
    std::size_t scored_timesteps = 0;
    std::size_t anomalous_timesteps = 0;
    double sigma = 0.0;
    bool truncated_segment = false;
};

struct SignalSkip {
    std::size_t segment_index = 0;
    std::int64_t start_timestamp = 0;
    std::string reason;
};

struct AnomalyReport {
    std::vector<TimestepRecord> timesteps;
    std::vector<AnomalyEvent> events;
    std::vector<SignalSummary> signals;
    std::vector<SignalSkip> skips;
};

// Population standard deviation (divisor n) of the resampled values in the
// trailing 24 h window before timestep index t. Throws
// InsufficientHistoryError when the window is empty.
double sigma_prev_day(const RegularSeries& series, std::size_t t);

// gamma = y_hat + 2*sigma.
double threshold_value(double y_hat, double sigma);

struct DetectConfig {
    SegmentationConfig segmentation;
    std::size_t input_length = 320;
    // Signals starting earlier than this much history are skipped.
    std::int64_t min_history = 86400;
};

// Segments the series, reconstructs each usage with the model, and flags
// every timestep whose actual consumption strictly exceeds the per-timestep
// threshold. Signals without a full day of history are skipped and recorded.
AnomalyReport detect(const RegularSeries& series, Autoencoder& net, double norm_max,
                     const DetectConfig& config);

std::string report_to_json(const AnomalyReport& report);
std::string report_to_csv(const AnomalyReport& report);

// Actual-vs-threshold overlay of all scored timesteps, anomalies marked.
// No timestamps or other varying metadata, so output is reproducible.
std::string report_to_svg(const AnomalyReport& report);

} // namespace loadwatch
