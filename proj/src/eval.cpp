#include "loadwatch/eval.hpp"

#include <cmath>
#include <sstream>

#include <nlohmann/json.hpp>

#include "loadwatch/util.hpp"

namespace loadwatch {
namespace eval {

using json = nlohmann::json;

SplitSpec SplitSpec::from_label(const std::string& label) {
    SplitSpec spec;
    spec.label = label;
    if (label == "9:1") {
        spec.train_fraction = 0.9;
    } else if (label == "8:2") {
        spec.train_fraction = 0.8;
    } else if (label == "7:3") {
        spec.train_fraction = 0.7;
    } else {
        try {
            std::size_t used = 0;
            spec.train_fraction = std::stod(label, &used);
            if (used != label.size()) throw std::invalid_argument(label);
        } catch (const std::exception&) {
            throw ConfigError("split: unknown ratio '" + label + "' (use 9:1, 8:2, 7:3 "
                              "or a fraction in (0,1))");
        }
        if (!(spec.train_fraction > 0.0 && spec.train_fraction < 1.0))
            throw ConfigError("split: fraction must be in (0, 1)");
    }
    return spec;
}

double mae(std::span<const double> pred, std::span<const double> actual) {
    if (pred.size() != actual.size()) throw DataError("mae: length mismatch");
    if (pred.empty()) throw DataError("mae: empty input");
    double sum = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) sum += std::abs(actual[i] - pred[i]);
    return sum / static_cast<double>(pred.size());
}

MapeResult mape(std::span<const double> pred, std::span<const double> actual,
                double epsilon_floor) {
    if (pred.size() != actual.size()) throw DataError("mape: length mismatch");
    MapeResult result;
    double sum = 0.0;
    std::size_t used = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        if (std::abs(actual[i]) <= epsilon_floor) {
            ++result.excluded;
            continue;
        }
        sum += std::abs(actual[i] - pred[i]) / std::abs(actual[i]);
        ++used;
    }
    if (used == 0) throw DataError("mape: undefined, all timesteps at or below the floor");
    result.percent = 100.0 * sum / static_cast<double>(used);
    return result;
}

MetricsRow evaluate(Autoencoder& net, const std::vector<UsageSignal>& test_signals,
                    const SplitSpec& spec, double epsilon_floor, double norm_max) {
    if (test_signals.empty()) throw DataError("evaluate: no test signals");
    MetricsRow row;
    row.model_kind = to_string(net.kind());
    row.split_label = spec.label;

    double mae_sum = 0.0, mape_sum = 0.0;
    std::size_t mape_signals = 0, excluded_total = 0, timesteps_total = 0;
    for (const UsageSignal& signal : test_signals) {
        const Tensor recon = net.forward(signal_to_tensor(signal), false);
        mae_sum += mae(recon.data(), signal.samples);
        timesteps_total += signal.samples.size();
        try {
            const MapeResult m = mape(recon.data(), signal.samples, epsilon_floor);
            mape_sum += m.percent;
            excluded_total += m.excluded;
            ++mape_signals;
        } catch (const DataError&) {
            // Signal entirely at/below the floor; it contributes to MAE only.
            excluded_total += signal.samples.size();
        }
    }
    row.mae = mae_sum / static_cast<double>(test_signals.size());
    if (mape_signals == 0) throw DataError("evaluate: MAPE undefined on every signal");
    row.mape = mape_sum / static_cast<double>(mape_signals);
    row.mae_watts = row.mae * norm_max;
    row.excluded_fraction =
        static_cast<double>(excluded_total) / static_cast<double>(timesteps_total);
    return row;
}

std::string metrics_to_csv(const std::vector<MetricsRow>& rows) {
    std::ostringstream out;
    out << "model,ratio,mae,mape,excluded_fraction\n";
    for (const MetricsRow& r : rows)
        out << r.model_kind << ',' << r.split_label << ',' << fmt_double(r.mae) << ','
            << fmt_double(r.mape) << ',' << fmt_double(r.excluded_fraction) << "\n";
    return out.str();
}

std::string metrics_to_json(const std::vector<MetricsRow>& rows) {
    json j = json::array();
    for (const MetricsRow& r : rows)
        j.push_back({{"model", r.model_kind},
                     {"ratio", r.split_label},
                     {"mae", r.mae},
                     {"mape", r.mape},
                     {"mae_watts", r.mae_watts},
                     {"excluded_fraction", r.excluded_fraction}});
    return j.dump(2) + "\n";
}

} // namespace eval
} // namespace loadwatch
