#include "loadwatch/models.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include <nlohmann/json.hpp>

#include "loadwatch/errors.hpp"
#include "loadwatch/util.hpp"

namespace loadwatch {

using json = nlohmann::json;

std::string to_string(ModelKind kind) {
    return kind == ModelKind::cnn_ae ? "cnn_ae" : "tcn_ae";
}

ModelKind model_kind_from_string(const std::string& s) {
    if (s == "cnn_ae" || s == "cnn") return ModelKind::cnn_ae;
    if (s == "tcn_ae" || s == "tcn") return ModelKind::tcn_ae;
    throw ConfigError("unknown model kind '" + s + "'");
}

std::size_t Autoencoder::param_count() {
    std::size_t n = 0;
    for (const Tensor& p : parameters()) n += p.size();
    return n;
}

// ---------------------------------------------------------------------------
// CNN autoencoder

namespace {

void validate_cnn_config(const CnnAeConfig& c) {
    if (c.input_length == 0 || c.channels == 0) throw ConfigError("cnn_ae: zero-sized input");
    if (c.kernel_size == 0 || c.pool_s == 0) throw ConfigError("cnn_ae: kernel/pool must be >= 1");
    if (c.dropout_p < 0.0 || c.dropout_p >= 1.0) throw ConfigError("cnn_ae: dropout_p in [0,1)");
    for (std::size_t f : c.encoder_filters)
        if (f == 0) throw ConfigError("cnn_ae: encoder filter counts must be >= 1");
    std::size_t len = c.input_length;
    for (int i = 0; i < 3; ++i) {
        if (len % c.pool_s != 0)
            throw ConfigError("cnn_ae: input_length must divide evenly through all pool stages");
        len /= c.pool_s;
    }
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t counter) {
    // splitmix64 step; decorrelates successive dropout masks.
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ull * (counter + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

} // namespace

CnnAutoencoder::CnnAutoencoder(const CnnAeConfig& config, std::uint64_t seed)
    : config_(config), dropout_seed_(seed) {
    validate_cnn_config(config_);
    std::mt19937_64 rng(seed);
    const auto& f = config_.encoder_filters;
    const std::size_t k = config_.kernel_size;
    encoder_.emplace_back(k, config_.channels, f[0], 1, Padding::same, rng);
    encoder_.emplace_back(k, f[0], f[1], 1, Padding::same, rng);
    encoder_.emplace_back(k, f[1], f[2], 1, Padding::same, rng);
    decoder_.emplace_back(k, f[2], f[1], 1, Padding::same, rng);
    decoder_.emplace_back(k, f[1], f[0], 1, Padding::same, rng);
    decoder_.emplace_back(k, f[0], config_.channels, 1, Padding::same, rng);
}

Tensor CnnAutoencoder::forward(const Tensor& x, bool training) {
    if (x.shape() != std::vector<std::size_t>{config_.input_length, config_.channels})
        throw ShapeError("cnn_ae: input shape mismatch");
    Tensor h = x;
    for (const Conv1dLayer& layer : encoder_) {
        h = relu(layer(h));
        h = dropout(h, config_.dropout_p, training, mix_seed(dropout_seed_, dropout_counter_++));
        h = avg_pool1d(h, config_.pool_s);
    }
    for (std::size_t i = 0; i < decoder_.size(); ++i) {
        h = upsample_nearest(h, config_.pool_s);
        h = decoder_[i](h);
        if (i + 1 < decoder_.size()) {
            h = relu(h);
            h = dropout(h, config_.dropout_p, training,
                        mix_seed(dropout_seed_, dropout_counter_++));
        }
        // Final stage is a linear projection back to the input channels.
    }
    return h;
}

std::vector<Tensor> CnnAutoencoder::parameters() {
    std::vector<Tensor> out;
    for (auto& [name, tensor] : named_parameters()) out.push_back(tensor);
    return out;
}

NamedParams CnnAutoencoder::named_parameters() {
    NamedParams out;
    for (std::size_t i = 0; i < encoder_.size(); ++i) {
        out.emplace_back("encoder." + std::to_string(i) + ".weight", encoder_[i].params.weight);
        out.emplace_back("encoder." + std::to_string(i) + ".bias", encoder_[i].params.bias);
    }
    for (std::size_t i = 0; i < decoder_.size(); ++i) {
        out.emplace_back("decoder." + std::to_string(i) + ".weight", decoder_[i].params.weight);
        out.emplace_back("decoder." + std::to_string(i) + ".bias", decoder_[i].params.bias);
    }
    return out;
}

// ---------------------------------------------------------------------------
// TCN autoencoder

namespace {

void validate_tcn_config(const TcnAeConfig& c) {
    if (c.input_length == 0 || c.channels == 0) throw ConfigError("tcn_ae: zero-sized input");
    if (c.kernel == 0 || c.n_filters == 0 || c.bottleneck_filters == 0)
        throw ConfigError("tcn_ae: kernel/filter counts must be >= 1");
    if (c.pool_s == 0) throw ConfigError("tcn_ae: pool_s must be >= 1");
    if (c.input_length % c.pool_s != 0)
        throw ConfigError("tcn_ae: input_length " + std::to_string(c.input_length) +
                          " not divisible by pool_s " + std::to_string(c.pool_s));
    if (c.dilations.empty()) throw ConfigError("tcn_ae: dilation list is empty");
    for (std::size_t i = 0; i < c.dilations.size(); ++i) {
        if (c.dilations[i] < 1) throw ConfigError("tcn_ae: dilations must be >= 1");
        if (i > 0 && c.dilations[i] <= c.dilations[i - 1])
            throw ConfigError("tcn_ae: dilations must be strictly increasing");
    }
}

} // namespace

Tensor TcnAutoencoder::ResidualBlock::forward(const Tensor& x) const {
    Tensor h = relu(conv1(x));
    h = conv2(h);
    Tensor shortcut = has_skip ? skip(x) : x;
    return relu(add(h, shortcut));
}

std::vector<TcnAutoencoder::ResidualBlock> TcnAutoencoder::build_tcn(const TcnAeConfig& config,
                                                                     std::size_t in_channels,
                                                                     std::mt19937_64& rng) {
    std::vector<ResidualBlock> blocks;
    std::size_t cin = in_channels;
    for (std::size_t q : config.dilations) {
        ResidualBlock block;
        block.conv1 = Conv1dLayer(config.kernel, cin, config.n_filters, q, Padding::causal, rng);
        block.conv2 = Conv1dLayer(config.kernel, config.n_filters, config.n_filters, q,
                                  Padding::causal, rng);
        if (cin != config.n_filters) {
            block.skip = Conv1dLayer(1, cin, config.n_filters, 1, Padding::causal, rng);
            block.has_skip = true;
        }
        blocks.push_back(std::move(block));
        cin = config.n_filters;
    }
    return blocks;
}

Tensor TcnAutoencoder::run_tcn(const std::vector<ResidualBlock>& blocks, const Tensor& x) {
    Tensor h = x;
    for (const ResidualBlock& block : blocks) h = block.forward(h);
    return h;
}

TcnAutoencoder::TcnAutoencoder(const TcnAeConfig& config, std::uint64_t seed) : config_(config) {
    validate_tcn_config(config_);
    std::mt19937_64 rng(seed);
    encoder_tcn_ = build_tcn(config_, config_.channels, rng);
    bottleneck_ =
        Conv1dLayer(1, config_.n_filters, config_.bottleneck_filters, 1, Padding::causal, rng);
    decoder_tcn_ = build_tcn(config_, config_.bottleneck_filters, rng);
    output_proj_ = Conv1dLayer(1, config_.n_filters, config_.channels, 1, Padding::causal, rng);
}

Tensor TcnAutoencoder::encode(const Tensor& x) {
    if (x.shape() != std::vector<std::size_t>{config_.input_length, config_.channels})
        throw ShapeError("tcn_ae: input shape mismatch");
    Tensor h = run_tcn(encoder_tcn_, x);
    h = bottleneck_(h);
    return avg_pool1d(h, config_.pool_s);
}

Tensor TcnAutoencoder::forward(const Tensor& x, bool /*training*/) {
    Tensor latent = encode(x);
    Tensor h = upsample_nearest(latent, config_.pool_s);
    h = run_tcn(decoder_tcn_, h);
    return output_proj_(h);
}

std::vector<Tensor> TcnAutoencoder::parameters() {
    std::vector<Tensor> out;
    for (auto& [name, tensor] : named_parameters()) out.push_back(tensor);
    return out;
}

NamedParams TcnAutoencoder::named_parameters() {
    NamedParams out;
    auto add_block = [&out](const std::string& prefix, const ResidualBlock& block) {
        out.emplace_back(prefix + ".conv1.weight", block.conv1.params.weight);
        out.emplace_back(prefix + ".conv1.bias", block.conv1.params.bias);
        out.emplace_back(prefix + ".conv2.weight", block.conv2.params.weight);
        out.emplace_back(prefix + ".conv2.bias", block.conv2.params.bias);
        if (block.has_skip) {
            out.emplace_back(prefix + ".skip.weight", block.skip.params.weight);
            out.emplace_back(prefix + ".skip.bias", block.skip.params.bias);
        }
    };
    for (std::size_t i = 0; i < encoder_tcn_.size(); ++i)
        add_block("encoder_tcn." + std::to_string(i), encoder_tcn_[i]);
    out.emplace_back("bottleneck.weight", bottleneck_.params.weight);
    out.emplace_back("bottleneck.bias", bottleneck_.params.bias);
    for (std::size_t i = 0; i < decoder_tcn_.size(); ++i)
        add_block("decoder_tcn." + std::to_string(i), decoder_tcn_[i]);
    out.emplace_back("output_proj.weight", output_proj_.params.weight);
    out.emplace_back("output_proj.bias", output_proj_.params.bias);
    return out;
}

std::unique_ptr<Autoencoder> make_autoencoder(ModelKind kind, const CnnAeConfig& cnn,
                                              const TcnAeConfig& tcn, std::uint64_t seed) {
    if (kind == ModelKind::cnn_ae) return std::make_unique<CnnAutoencoder>(cnn, seed);
    return std::make_unique<TcnAutoencoder>(tcn, seed);
}

// ---------------------------------------------------------------------------
// Training

Tensor signal_to_tensor(const UsageSignal& signal) {
    return Tensor::from_data({signal.samples.size(), 1}, signal.samples);
}

TrainRun fit_autoencoder(Autoencoder& net, const std::vector<UsageSignal>& signals,
                         const TrainConfig& config) {
    if (signals.empty()) throw DataError("fit_autoencoder: no training signals");
    if (config.epochs == 0) throw ConfigError("epochs must be >= 1");
    if (config.batch_size == 0) throw ConfigError("batch_size must be >= 1");
    if (!(config.learning_rate > 0)) throw ConfigError("learning_rate must be > 0");

    std::vector<Tensor> targets;
    targets.reserve(signals.size());
    for (const UsageSignal& s : signals) {
        if (s.samples.size() != net.input_length())
            throw ShapeError("fit_autoencoder: signal length " + std::to_string(s.samples.size()) +
                             " does not match model input " + std::to_string(net.input_length()));
        targets.push_back(signal_to_tensor(s));
    }

    std::vector<Tensor> params = net.parameters();
    OptimizerState opt = make_optimizer_state(params, config.learning_rate);
    std::mt19937_64 shuffle_rng(config.seed ^ 0x5deece66dull);

    TrainRun run;
    run.seed = config.seed;
    run.epochs = config.epochs;
    run.batch_size = config.batch_size;

    std::vector<std::size_t> index(signals.size());
    std::iota(index.begin(), index.end(), 0);

    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        std::shuffle(index.begin(), index.end(), shuffle_rng);
        double epoch_loss_sum = 0.0;
        for (std::size_t batch_start = 0, batch_no = 0; batch_start < index.size();
             batch_start += config.batch_size, ++batch_no) {
            const std::size_t batch_end =
                std::min(batch_start + config.batch_size, index.size());
            const double inv_batch = 1.0 / static_cast<double>(batch_end - batch_start);
            zero_grad_all(params);
            try {
                for (std::size_t b = batch_start; b < batch_end; ++b) {
                    const Tensor& target = targets[index[b]];
                    Tensor recon = net.forward(target, true);
                    Tensor loss = mse_loss(recon, target);
                    epoch_loss_sum += loss.item();
                    scale(loss, inv_batch).backward();
                }
            } catch (const NumericError& e) {
                // Forward ops reject non-finite values as soon as they appear.
                throw NumericError(std::string(e.what()) + " (lr=" +
                                   fmt_double(config.learning_rate) + ", epoch=" +
                                   std::to_string(epoch) + ", batch=" +
                                   std::to_string(batch_no) + ")");
            }
            optimizer_step(params, opt);
        }
        run.losses.push_back(epoch_loss_sum / static_cast<double>(signals.size()));
    }
    return run;
}

TrainOutcome train(ModelKind kind, const std::vector<UsageSignal>& dataset, double train_fraction,
                   const TrainConfig& run_cfg, const CnnAeConfig& cnn, const TcnAeConfig& tcn) {
    if (dataset.size() < 10)
        throw DataError("training needs at least 10 usage signals, got " +
                        std::to_string(dataset.size()));
    if (!(train_fraction > 0.0 && train_fraction < 1.0))
        throw ConfigError("train_fraction must be in (0, 1)");

    const std::size_t n_train =
        static_cast<std::size_t>(std::floor(train_fraction * static_cast<double>(dataset.size())));
    if (n_train == 0 || n_train == dataset.size())
        throw DataError("split leaves an empty side");

    TrainOutcome out;
    out.train_signals.assign(dataset.begin(), dataset.begin() + static_cast<std::ptrdiff_t>(n_train));
    out.held_out.assign(dataset.begin() + static_cast<std::ptrdiff_t>(n_train), dataset.end());
    out.net = make_autoencoder(kind, cnn, tcn, run_cfg.seed);
    out.run = fit_autoencoder(*out.net, out.train_signals, run_cfg);
    return out;
}

// ---------------------------------------------------------------------------
// Persistence

namespace {

json cnn_config_to_json(const CnnAeConfig& c) {
    return json{{"input_length", c.input_length},
                {"channels", c.channels},
                {"encoder_filters", c.encoder_filters},
                {"kernel_size", c.kernel_size},
                {"dropout_p", c.dropout_p},
                {"pool_s", c.pool_s}};
}

json tcn_config_to_json(const TcnAeConfig& c) {
    return json{{"dilations", c.dilations},
                {"n_filters", c.n_filters},
                {"kernel", c.kernel},
                {"bottleneck_filters", c.bottleneck_filters},
                {"pool_s", c.pool_s},
                {"input_length", c.input_length},
                {"channels", c.channels}};
}

CnnAeConfig cnn_config_from_json(const json& j) {
    CnnAeConfig c;
    c.input_length = j.at("input_length").get<std::size_t>();
    c.channels = j.at("channels").get<std::size_t>();
    auto filters = j.at("encoder_filters").get<std::vector<std::size_t>>();
    if (filters.size() != 3) throw DataError("model sidecar: encoder_filters must have 3 entries");
    std::copy(filters.begin(), filters.end(), c.encoder_filters.begin());
    c.kernel_size = j.at("kernel_size").get<std::size_t>();
    c.dropout_p = j.at("dropout_p").get<double>();
    c.pool_s = j.at("pool_s").get<std::size_t>();
    return c;
}

TcnAeConfig tcn_config_from_json(const json& j) {
    TcnAeConfig c;
    c.dilations = j.at("dilations").get<std::vector<std::size_t>>();
    c.n_filters = j.at("n_filters").get<std::size_t>();
    c.kernel = j.at("kernel").get<std::size_t>();
    c.bottleneck_filters = j.at("bottleneck_filters").get<std::size_t>();
    c.pool_s = j.at("pool_s").get<std::size_t>();
    c.input_length = j.at("input_length").get<std::size_t>();
    c.channels = j.at("channels").get<std::size_t>();
    return c;
}

} // namespace

void Model::save(const std::filesystem::path& path) const {
    if (!net) throw Error("Model::save: no network");
    save_parameters(path, const_cast<Autoencoder&>(*net).named_parameters());
    json j;
    j["kind"] = to_string(net->kind());
    j["norm_max"] = norm_max;
    j["r"] = r;
    j["config"] = net->kind() == ModelKind::cnn_ae ? cnn_config_to_json(cnn)
                                                   : tcn_config_to_json(tcn);
    atomic_write_file(path.string() + ".json", j.dump(2) + "\n");
}

Model Model::load(const std::filesystem::path& path) {
    json j;
    try {
        j = json::parse(read_file(path.string() + ".json"));
    } catch (const json::parse_error& e) {
        throw DataError("model sidecar: " + std::string(e.what()));
    }
    Model m;
    try {
        const ModelKind kind = model_kind_from_string(j.at("kind").get<std::string>());
        m.norm_max = j.at("norm_max").get<double>();
        m.r = j.at("r").get<std::int64_t>();
        if (kind == ModelKind::cnn_ae)
            m.cnn = cnn_config_from_json(j.at("config"));
        else
            m.tcn = tcn_config_from_json(j.at("config"));
        m.net = make_autoencoder(kind, m.cnn, m.tcn, 0);
    } catch (const json::exception& e) {
        throw DataError("model sidecar: " + std::string(e.what()));
    }
    NamedParams dest = m.net->named_parameters();
    assign_parameters(dest, load_parameters(path));
    return m;
}

} // namespace loadwatch
