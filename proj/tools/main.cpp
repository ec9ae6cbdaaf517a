#include <atomic>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <sstream>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "loadwatch/anomaly.hpp"
#include "loadwatch/config.hpp"
#include "loadwatch/errors.hpp"
#include "loadwatch/eval.hpp"
#include "loadwatch/ingest.hpp"
#include "loadwatch/models.hpp"
#include "loadwatch/preprocess.hpp"
#include "loadwatch/synth.hpp"
#include "loadwatch/util.hpp"

namespace fs = std::filesystem;
using namespace loadwatch;

namespace {

struct CommonOpts {
    std::string config_path;
    std::int64_t seed_override = -1;
    unsigned jobs = 1;

    PipelineConfig load() const {
        PipelineConfig cfg =
            config_path.empty() ? PipelineConfig{} : load_config(config_path);
        if (seed_override >= 0) {
            cfg.seed = static_cast<std::uint64_t>(seed_override);
            cfg.train_run.seed = cfg.seed;
        }
        return cfg;
    }
};

void add_common(CLI::App* cmd, CommonOpts& opts) {
    cmd->add_option("--config", opts.config_path, "pipeline config file (key = value lines)");
    cmd->add_option("--seed", opts.seed_override, "override the config seed");
    cmd->add_option("--jobs", opts.jobs, "worker threads across input files")
        ->check(CLI::PositiveNumber);
}

ApplianceSeries read_series(const fs::path& path, const std::string& column) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open: " + path.string());
    return parse_refit_csv(in, column).series;
}

RegularSeries resample_raw(const ApplianceSeries& series, const PipelineConfig& cfg) {
    ResampleConfig rc;
    rc.r = cfg.r;
    rc.mean_interval = series_stats(series).mean_interval_seconds;
    return resample(series, rc);
}

SegmentationConfig seg_config(const PipelineConfig& cfg) {
    return SegmentationConfig{cfg.on_threshold, cfg.merge_gap_max, cfg.max_duration};
}

// Runs fn(i) over [0, n) on `jobs` threads; rethrows the lowest-index failure.
void run_parallel(std::size_t n, unsigned jobs, const std::function<void(std::size_t)>& fn) {
    if (jobs <= 1 || n <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::mutex mu;
    std::size_t failed_index = n;
    std::exception_ptr error;
    auto worker = [&] {
        while (true) {
            const std::size_t i = next.fetch_add(1);
            if (i >= n) return;
            try {
                fn(i);
            } catch (...) {
                std::lock_guard lock(mu);
                if (i < failed_index) {
                    failed_index = i;
                    error = std::current_exception();
                }
            }
        }
    };
    std::vector<std::thread> threads;
    for (unsigned t = 0; t < std::min<unsigned>(jobs, static_cast<unsigned>(n)); ++t)
        threads.emplace_back(worker);
    for (std::thread& t : threads) t.join();
    if (error) std::rethrow_exception(error);
}

int cmd_synth(const CommonOpts& common, const std::string& out_dir) {
    const PipelineConfig cfg = common.load();
    const synth::CycleTemplate tpl = synth::default_dishwasher_template();
    synth::SynthSeries generated = synth::generate(tpl, cfg.synth_usages, cfg.seed);

    std::vector<synth::AnomalyLabel> labels;
    if (cfg.synth_anomalies > 0) {
        // Anomalies only in the tail the default split leaves for testing.
        labels = synth::make_labels(generated.usages, tpl, cfg.synth_anomalies,
                                    cfg.split.train_fraction, 1600.0, cfg.seed + 1);
    }
    const ApplianceSeries injected = synth::inject(generated.series, labels, cfg.seed + 2);

    const fs::path dir(out_dir);
    atomic_write_file(dir / "series.csv", series_to_csv(injected));
    atomic_write_file(dir / "labels.json", synth::labels_to_json(labels));
    std::cout << "wrote " << (dir / "series.csv").string() << " ("
              << injected.readings.size() << " readings, " << labels.size() << " anomalies)\n";
    return 0;
}

int cmd_preprocess(const CommonOpts& common, const std::vector<std::string>& inputs,
                   const std::string& out_dir) {
    const PipelineConfig cfg = common.load();
    const fs::path dir(out_dir);
    std::vector<std::string> notes(inputs.size());
    run_parallel(inputs.size(), common.jobs, [&](std::size_t i) {
        const fs::path input(inputs[i]);
        const ApplianceSeries series = read_series(input, cfg.column);
        const RegularSeries regular = resample_raw(series, cfg);
        const std::vector<Segment> segments = segment_usages(regular, seg_config(cfg));

        const std::string stem = input.stem().string();
        const std::string resampled_name = stem + ".resampled.csv";
        atomic_write_file(dir / resampled_name, regular_series_to_csv(regular));
        atomic_write_file(dir / (stem + ".segments.json"),
                          segment_manifest_to_json(segments, regular, resampled_name));
        std::ostringstream note;
        note << "wrote " << (dir / (stem + ".segments.json")).string() << " ("
             << segments.size() << " segments, " << regular.values.size() << " buckets)";
        notes[i] = note.str();
    });
    for (const std::string& n : notes) std::cout << n << "\n";
    return 0;
}

std::vector<UsageSignal> signals_from_segments(const std::vector<Segment>& segments,
                                               std::size_t L, double norm_max) {
    std::vector<UsageSignal> signals;
    signals.reserve(segments.size());
    for (const Segment& seg : segments) signals.push_back(to_usage_signal(seg, L, norm_max));
    return signals;
}

double resolve_norm_max(const PipelineConfig& cfg, const std::vector<Segment>& train_segments) {
    if (cfg.norm_max_policy == "fixed") return cfg.norm_max_fixed;
    double peak = 0.0;
    for (const Segment& seg : train_segments)
        for (double v : seg.values) peak = std::max(peak, v);
    if (peak <= 0) throw DataError("training split has no positive wattage; cannot normalize");
    return peak;
}

int cmd_train(const CommonOpts& common, const std::string& segments_path,
              const std::string& out_model) {
    const PipelineConfig cfg = common.load();
    const SegmentManifest manifest = load_segment_manifest(segments_path);
    if (manifest.segments.size() < 10)
        throw DataError("training needs at least 10 segments, got " +
                        std::to_string(manifest.segments.size()));

    auto [train_segments, test_segments] = eval::split(manifest.segments, cfg.split);
    const double norm_max = resolve_norm_max(cfg, train_segments);

    std::vector<UsageSignal> all_signals =
        signals_from_segments(manifest.segments, cfg.input_length, norm_max);
    TrainOutcome outcome = train(cfg.model, all_signals, cfg.split.train_fraction, cfg.train_run,
                                 cfg.cnn, cfg.tcn);

    Model model;
    model.net = std::move(outcome.net);
    model.norm_max = norm_max;
    model.r = cfg.r;
    model.cnn = cfg.cnn;
    model.tcn = cfg.tcn;
    model.save(out_model);

    std::ostringstream losses;
    losses << "epoch,loss\n";
    for (std::size_t e = 0; e < outcome.run.losses.size(); ++e)
        losses << e << ',' << fmt_double(outcome.run.losses[e]) << "\n";
    atomic_write_file(out_model + ".losses.csv", losses.str());

    std::cout << "trained " << to_string(cfg.model) << " on " << outcome.train_signals.size()
              << " signals (" << outcome.held_out.size() << " held out), final loss "
              << fmt_double(outcome.run.losses.back()) << ", model " << out_model << "\n";
    return 0;
}

int cmd_detect(const CommonOpts& common, const std::vector<std::string>& inputs,
               const std::string& model_path, const std::string& out_dir, bool plot) {
    const PipelineConfig cfg = common.load();
    const Model model = Model::load(model_path);
    if (model.net->input_length() != cfg.input_length)
        throw ConfigError("model input length " + std::to_string(model.net->input_length()) +
                          " does not match configured input_length " +
                          std::to_string(cfg.input_length));
    if (model.r != cfg.r)
        throw ConfigError("model was trained at r=" + std::to_string(model.r) +
                          ", config has r=" + std::to_string(cfg.r));

    DetectConfig dc;
    dc.segmentation = seg_config(cfg);
    dc.input_length = cfg.input_length;

    const fs::path dir(out_dir);
    std::vector<std::string> notes(inputs.size());
    // Reconstruction is read-only over the model but builds per-call graphs,
    // so each worker gets its own network instance.
    run_parallel(inputs.size(), common.jobs, [&](std::size_t i) {
        const fs::path input(inputs[i]);
        const Model local = common.jobs > 1 ? Model::load(model_path) : Model{};
        Autoencoder& net = common.jobs > 1 ? *local.net : *model.net;

        const ApplianceSeries series = read_series(input, cfg.column);
        const RegularSeries regular = resample_raw(series, cfg);
        const AnomalyReport report = detect(regular, net, model.norm_max, dc);

        const std::string stem = input.stem().string();
        atomic_write_file(dir / (stem + ".report.json"), report_to_json(report));
        atomic_write_file(dir / (stem + ".report.csv"), report_to_csv(report));
        if (plot) atomic_write_file(dir / (stem + ".report.svg"), report_to_svg(report));
        std::ostringstream note;
        note << "wrote " << (dir / (stem + ".report.json")).string() << " ("
             << report.signals.size() << " signals, " << report.events.size() << " events, "
             << report.skips.size() << " skipped)";
        notes[i] = note.str();
    });
    for (const std::string& n : notes) std::cout << n << "\n";
    return 0;
}

int cmd_eval(const CommonOpts& common, const std::string& segments_path,
             const std::string& model_path, const std::string& out_path,
             const std::string& format) {
    const PipelineConfig cfg = common.load();
    const Model model = Model::load(model_path);
    const SegmentManifest manifest = load_segment_manifest(segments_path);

    auto [train_segments, test_segments] = eval::split(manifest.segments, cfg.split);
    const std::vector<UsageSignal> test_signals =
        signals_from_segments(test_segments, cfg.input_length, model.norm_max);

    const eval::MetricsRow row =
        eval::evaluate(*model.net, test_signals, cfg.split, cfg.epsilon_floor, model.norm_max);
    const std::string content = format == "json" ? eval::metrics_to_json({row})
                                                 : eval::metrics_to_csv({row});
    if (out_path.empty())
        std::cout << content;
    else
        atomic_write_file(out_path, content);
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"appliance-level energy anomaly detection pipeline"};
    app.require_subcommand(1);

    CommonOpts synth_opts, pre_opts, train_opts, detect_opts, eval_opts;
    std::string synth_out = ".";
    std::vector<std::string> pre_inputs;
    std::string pre_out = ".";
    std::string train_segments, train_out = "model.lwm";
    std::vector<std::string> detect_inputs;
    std::string detect_model, detect_out = ".";
    bool detect_plot = false;
    std::string eval_segments, eval_model, eval_out, eval_format = "csv";

    CLI::App* synth_cmd =
        app.add_subcommand("synth", "generate a labeled synthetic appliance series");
    add_common(synth_cmd, synth_opts);
    synth_cmd->add_option("--out-dir", synth_out, "output directory");

    CLI::App* pre_cmd =
        app.add_subcommand("preprocess", "resample a raw CSV and cut usage segments");
    add_common(pre_cmd, pre_opts);
    pre_cmd->add_option("input", pre_inputs, "raw appliance CSV file(s)")->required();
    pre_cmd->add_option("--out-dir", pre_out, "output directory");

    CLI::App* train_cmd = app.add_subcommand("train", "train an autoencoder on usage segments");
    add_common(train_cmd, train_opts);
    train_cmd->add_option("segments", train_segments, "segments manifest JSON")->required();
    train_cmd->add_option("--out", train_out, "model output path");

    CLI::App* detect_cmd = app.add_subcommand("detect", "score a raw CSV against a trained model");
    add_common(detect_cmd, detect_opts);
    detect_cmd->add_option("input", detect_inputs, "raw appliance CSV file(s)")->required();
    detect_cmd->add_option("--model", detect_model, "trained model path")->required();
    detect_cmd->add_option("--out-dir", detect_out, "output directory");
    detect_cmd->add_flag("--plot", detect_plot, "also write an SVG overlay per input");

    CLI::App* eval_cmd = app.add_subcommand("eval", "reconstruction metrics on the test split");
    add_common(eval_cmd, eval_opts);
    eval_cmd->add_option("segments", eval_segments, "segments manifest JSON")->required();
    eval_cmd->add_option("--model", eval_model, "trained model path")->required();
    eval_cmd->add_option("--out", eval_out, "metrics output path (default stdout)");
    eval_cmd->add_option("--format", eval_format, "csv or json")
        ->check(CLI::IsMember({"csv", "json"}));

    try {
        app.parse(argc, argv);
        if (synth_cmd->parsed()) return cmd_synth(synth_opts, synth_out);
        if (pre_cmd->parsed()) return cmd_preprocess(pre_opts, pre_inputs, pre_out);
        if (train_cmd->parsed()) return cmd_train(train_opts, train_segments, train_out);
        if (detect_cmd->parsed())
            return cmd_detect(detect_opts, detect_inputs, detect_model, detect_out, detect_plot);
        if (eval_cmd->parsed())
            return cmd_eval(eval_opts, eval_segments, eval_model, eval_out, eval_format);
        return 2;
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    } catch (const ConfigError& e) {
        std::cerr << "error: config: " << e.what() << "\n";
        return 2;
    } catch (const NumericError& e) {
        std::cerr << "error: numeric: " << e.what() << "\n";
        return 4;
    } catch (const DataError& e) {
        std::cerr << "error: data: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: internal: " << e.what() << "\n";
        return 1;
    }
}
