#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "loadwatch/nn.hpp"
#include "loadwatch/preprocess.hpp"
#include "loadwatch/tensor.hpp"

namespace loadwatch {

enum class ModelKind { cnn_ae, tcn_ae };

std::string to_string(ModelKind kind);
ModelKind model_kind_from_string(const std::string& s);

struct CnnAeConfig {
    std::size_t input_length = 320;
    std::size_t channels = 1;
    std::array<std::size_t, 3> encoder_filters{32, 16, 8};
    std::size_t kernel_size = 7;
    double dropout_p = 0.2;
    std::size_t pool_s = 2; // per encoder stage
};

struct TcnAeConfig {
    std::vector<std::size_t> dilations{1, 2, 4, 8, 16}; // strictly increasing
    std::size_t n_filters = 16;
    std::size_t kernel = 3;
    std::size_t bottleneck_filters = 8;
    std::size_t pool_s = 4;
    std::size_t input_length = 320; // must be divisible by pool_s
    std::size_t channels = 1;
};

// Reconstructs its input; output shape always equals input shape.
class Autoencoder {
public:
    virtual ~Autoencoder() = default;
    virtual Tensor forward(const Tensor& x, bool training) = 0;
    virtual std::vector<Tensor> parameters() = 0;
    virtual NamedParams named_parameters() = 0;
    virtual ModelKind kind() const = 0;
    virtual std::size_t input_length() const = 0;
    virtual std::size_t channels() const = 0;
    std::size_t param_count();
};

// Three conv/ReLU/dropout/pool stages mirrored by upsample/conv stages.
class CnnAutoencoder : public Autoencoder {
public:
    CnnAutoencoder(const CnnAeConfig& config, std::uint64_t seed);
    Tensor forward(const Tensor& x, bool training) override;
    std::vector<Tensor> parameters() override;
    NamedParams named_parameters() override;
    ModelKind kind() const override { return ModelKind::cnn_ae; }
    std::size_t input_length() const override { return config_.input_length; }
    std::size_t channels() const override { return config_.channels; }
    const CnnAeConfig& config() const { return config_; }

private:
    CnnAeConfig config_;
    std::vector<Conv1dLayer> encoder_;
    std::vector<Conv1dLayer> decoder_;
    std::uint64_t dropout_seed_;
    std::uint64_t dropout_counter_ = 0;
};

// Dilated causal residual blocks; the encoder compresses [T, d] to
// [T/s, bottleneck_filters], the decoder mirrors with independent weights.
class TcnAutoencoder : public Autoencoder {
public:
    TcnAutoencoder(const TcnAeConfig& config, std::uint64_t seed);
    Tensor forward(const Tensor& x, bool training) override;
    Tensor encode(const Tensor& x); // latent [T/s, bottleneck_filters]
    std::vector<Tensor> parameters() override;
    NamedParams named_parameters() override;
    ModelKind kind() const override { return ModelKind::tcn_ae; }
    std::size_t input_length() const override { return config_.input_length; }
    std::size_t channels() const override { return config_.channels; }
    const TcnAeConfig& config() const { return config_; }

private:
    struct ResidualBlock {
        Conv1dLayer conv1;
        Conv1dLayer conv2;
        Conv1dLayer skip; // 1x1, only when in/out channel counts differ
        bool has_skip = false;
        Tensor forward(const Tensor& x) const;
    };
    static std::vector<ResidualBlock> build_tcn(const TcnAeConfig& config, std::size_t in_channels,
                                                std::mt19937_64& rng);
    static Tensor run_tcn(const std::vector<ResidualBlock>& blocks, const Tensor& x);

    TcnAeConfig config_;
    std::vector<ResidualBlock> encoder_tcn_;
    Conv1dLayer bottleneck_;
    std::vector<ResidualBlock> decoder_tcn_;
    Conv1dLayer output_proj_;
};

std::unique_ptr<Autoencoder> make_autoencoder(ModelKind kind, const CnnAeConfig& cnn,
                                              const TcnAeConfig& tcn, std::uint64_t seed);

struct TrainConfig {
    std::uint64_t seed = 1;
    std::size_t epochs = 30;
    std::size_t batch_size = 16;
    double learning_rate = 1e-3;
};

struct TrainRun {
    std::uint64_t seed = 0;
    std::size_t epochs = 0;
    std::size_t batch_size = 0;
    std::vector<double> losses; // per-epoch mean training loss, finite
};

// Minimizes MSE reconstruction loss over the signals with Adam. All
// randomness (shuffling, dropout) derives from config.seed. Aborts with
// NumericError on a non-finite loss, naming lr/epoch/batch.
TrainRun fit_autoencoder(Autoencoder& net, const std::vector<UsageSignal>& signals,
                         const TrainConfig& config);

struct TrainOutcome {
    std::unique_ptr<Autoencoder> net;
    TrainRun run;
    std::vector<UsageSignal> train_signals;
    std::vector<UsageSignal> held_out;
};

// Chronological split: the first floor(train_fraction*N) signals train, the
// rest are held out. Requires at least 10 signals.
TrainOutcome train(ModelKind kind, const std::vector<UsageSignal>& dataset, double train_fraction,
                   const TrainConfig& run_cfg, const CnnAeConfig& cnn, const TcnAeConfig& tcn);

Tensor signal_to_tensor(const UsageSignal& signal);

// Trained model artifact: parameters plus the context needed to score new data.
struct Model {
    std::unique_ptr<Autoencoder> net;
    double norm_max = 0.0;
    std::int64_t r = 0;
    CnnAeConfig cnn;
    TcnAeConfig tcn;

    // Writes <path> (binary parameters) and <path>.json (kind, config,
    // norm_max, r).
    void save(const std::filesystem::path& path) const;
    static Model load(const std::filesystem::path& path);
};

} // namespace loadwatch
