#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "loadwatch/eval.hpp"
#include "loadwatch/models.hpp"
#include "loadwatch/preprocess.hpp"

namespace loadwatch {

// Everything the pipeline stages need, loadable from one key=value file.
// Unknown keys are rejected so typos cannot silently fall back to defaults.
struct PipelineConfig {
    // preprocessing
    std::int64_t r = 10;
    std::size_t input_length = 320;
    double on_threshold = 5.0;
    std::int64_t merge_gap_max = 600;
    std::int64_t max_duration = 3200;
    std::string column = "Appliance1";

    // normalization: "train_max" or a fixed positive wattage
    std::string norm_max_policy = "train_max";
    double norm_max_fixed = 0.0;

    // model + training
    ModelKind model = ModelKind::tcn_ae;
    CnnAeConfig cnn;
    TcnAeConfig tcn;
    TrainConfig train_run;

    // evaluation
    eval::SplitSpec split = eval::SplitSpec::from_label("8:2");
    double epsilon_floor = 1e-6;

    // synthetic data command
    std::size_t synth_usages = 250;
    std::size_t synth_anomalies = 20;

    std::uint64_t seed = 1; // mirrored into train_run.seed
};

PipelineConfig parse_config_text(const std::string& content);
PipelineConfig load_config(const std::filesystem::path& path);
std::string config_to_text(const PipelineConfig& config);

} // namespace loadwatch
