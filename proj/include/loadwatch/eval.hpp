#pragma once

#include <span>
#include <string>
#include <vector>

#include "loadwatch/errors.hpp"
#include "loadwatch/models.hpp"

namespace loadwatch {
namespace eval {

struct SplitSpec {
    double train_fraction = 0.8; // in (0, 1)
    std::string label = "8:2";

    static SplitSpec from_label(const std::string& label); // "9:1", "8:2", "7:3", or a fraction
};

// Chronological: first floor(train_fraction * N) items train, rest test.
// Both sides must end up non-empty.
template <typename T>
std::pair<std::vector<T>, std::vector<T>> split(const std::vector<T>& items,
                                                const SplitSpec& spec) {
    if (items.size() < 2) throw DataError("split: need at least 2 items");
    if (!(spec.train_fraction > 0.0 && spec.train_fraction < 1.0))
        throw ConfigError("split: train_fraction must be in (0, 1)");
    const std::size_t n_train = static_cast<std::size_t>(
        spec.train_fraction * static_cast<double>(items.size()));
    if (n_train == 0 || n_train == items.size())
        throw DataError("split: leaves an empty side (N=" + std::to_string(items.size()) +
                        ", fraction=" + spec.label + ")");
    return {std::vector<T>(items.begin(), items.begin() + static_cast<std::ptrdiff_t>(n_train)),
            std::vector<T>(items.begin() + static_cast<std::ptrdiff_t>(n_train), items.end())};
}

double mae(std::span<const double> pred, std::span<const double> actual);

struct MapeResult {
    double percent = 0.0;
    std::size_t excluded = 0; // timesteps with |actual| <= epsilon_floor
};

// 100 * mean of |actual - pred| / |actual| over timesteps with |actual| above
// the floor. Throws when every timestep is excluded.
MapeResult mape(std::span<const double> pred, std::span<const double> actual,
                double epsilon_floor);

struct MetricsRow {
    std::string model_kind;
    std::string split_label;
    double mae = 0.0;          // normalized units
    double mape = 0.0;         // percent
    double mae_watts = 0.0;    // mae scaled back to watts
    double excluded_fraction = 0.0;
};

// Reconstruction metrics on normalized signals, averaged per signal first.
MetricsRow evaluate(Autoencoder& net, const std::vector<UsageSignal>& test_signals,
                    const SplitSpec& spec, double epsilon_floor, double norm_max);

std::string metrics_to_csv(const std::vector<MetricsRow>& rows);
std::string metrics_to_json(const std::vector<MetricsRow>& rows);

} // namespace eval
} // namespace loadwatch
