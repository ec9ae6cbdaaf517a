#include <doctest.h>

#include <filesystem>
#include <random>
#include <set>

#include "loadwatch/errors.hpp"
#include "loadwatch/models.hpp"
#include "oracles.hpp"

using namespace loadwatch;

namespace {

// Closed-form conv parameter count: k*C_in*C_out + C_out.
std::size_t conv_params(std::size_t k, std::size_t cin, std::size_t cout) {
    return k * cin * cout + cout;
}

std::vector<UsageSignal> pulse_signals(std::size_t count, std::size_t L, std::uint64_t seed) {
    // Rectangular pulse with slight per-signal level wobble: an easy shape to
    // reconstruct, mimicking a single appliance phase.
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> level(0.55, 0.65);
    std::vector<UsageSignal> signals;
    for (std::size_t i = 0; i < count; ++i) {
        UsageSignal s;
        s.start_timestamp = 1000 + static_cast<std::int64_t>(i) * 10000;
        s.samples.assign(L, 0.0);
        const double v = level(rng);
        for (std::size_t t = L / 4; t < 3 * L / 4; ++t) s.samples[t] = v;
        s.raw_peak_watts = v * 1000;
        s.length = L;
        signals.push_back(std::move(s));
    }
    return signals;
}

TcnAeConfig small_tcn(std::size_t L = 64) {
    TcnAeConfig cfg;
    cfg.dilations = {1, 2, 4};
    cfg.n_filters = 6;
    cfg.kernel = 3;
    cfg.bottleneck_filters = 4;
    cfg.pool_s = 4;
    cfg.input_length = L;
    cfg.channels = 1;
    return cfg;
}

CnnAeConfig small_cnn(std::size_t L = 64) {
    CnnAeConfig cfg;
    cfg.input_length = L;
    cfg.encoder_filters = {8, 6, 4};
    cfg.kernel_size = 5;
    cfg.pool_s = 2;
    return cfg;
}

} // namespace

TEST_CASE("cnn_ae reconstruction shape equals input shape") {
    CnnAutoencoder net(small_cnn(), 3);
    std::mt19937_64 rng(9);
    Tensor x = Tensor::from_data({64, 1}, oracles::random_vector(rng, 64, 0.0, 1.0));
    Tensor y = net.forward(x, false);
    CHECK(y.shape() == x.shape());
}

TEST_CASE("cnn_ae with zeroed parameters maps zero to zero") {
    CnnAutoencoder net(small_cnn(), 3);
    for (Tensor& p : net.parameters())
        std::fill(p.mutable_data().begin(), p.mutable_data().end(), 0.0);
    Tensor x = Tensor::zeros({64, 1});
    Tensor out = net.forward(x, false);
    for (double v : out.data()) CHECK(v == 0.0);
}

TEST_CASE("cnn_ae inference is deterministic; training-mode dropout varies") {
    CnnAutoencoder net(small_cnn(), 3);
    std::mt19937_64 rng(10);
    Tensor x = Tensor::from_data({64, 1}, oracles::random_vector(rng, 64, 0.0, 1.0));
    CHECK(net.forward(x, false).data() == net.forward(x, false).data());
    // two training passes consume different dropout masks
    CHECK(net.forward(x, true).data() != net.forward(x, true).data());
}

TEST_CASE("cnn_ae parameter count matches the closed form") {
    CnnAeConfig cfg = small_cnn();
    CnnAutoencoder net(cfg, 3);
    const auto [f0, f1, f2] = std::tuple{cfg.encoder_filters[0], cfg.encoder_filters[1],
                                         cfg.encoder_filters[2]};
    const std::size_t k = cfg.kernel_size;
    const std::size_t expected = conv_params(k, 1, f0) + conv_params(k, f0, f1) +
                                 conv_params(k, f1, f2) + conv_params(k, f2, f1) +
                                 conv_params(k, f1, f0) + conv_params(k, f0, 1);
    CHECK(net.param_count() == expected);
}

TEST_CASE("tcn_ae latent length is T/s and reconstruction matches input shape") {
    TcnAeConfig cfg;
    cfg.input_length = 320;
    cfg.pool_s = 4;
    TcnAutoencoder net(cfg, 4);
    Tensor x = Tensor::zeros({320, 1});
    Tensor latent = net.encode(x);
    CHECK(latent.shape() == std::vector<std::size_t>{80, 8});
    Tensor y = net.forward(x, false);
    CHECK(y.shape() == std::vector<std::size_t>{320, 1});
}

TEST_CASE("tcn_ae with zeroed parameters maps zero to zero") {
    TcnAutoencoder net(small_tcn(), 5);
    for (Tensor& p : net.parameters())
        std::fill(p.mutable_data().begin(), p.mutable_data().end(), 0.0);
    Tensor x = Tensor::zeros({64, 1});
    Tensor out = net.forward(x, false);
    for (double v : out.data()) CHECK(v == 0.0);
}

TEST_CASE("tcn_ae encoder and decoder parameters are disjoint") {
    TcnAutoencoder net(small_tcn(), 5);
    std::set<const std::vector<double>*> encoder_ids, decoder_ids;
    for (auto& [name, tensor] : net.named_parameters()) {
        if (name.starts_with("encoder_tcn") || name.starts_with("bottleneck"))
            encoder_ids.insert(&tensor.data());
        else
            decoder_ids.insert(&tensor.data());
    }
    for (const auto* id : encoder_ids) CHECK(decoder_ids.count(id) == 0);
    CHECK_FALSE(encoder_ids.empty());
    CHECK_FALSE(decoder_ids.empty());
}

TEST_CASE("tcn_ae parameter count matches the closed form") {
    TcnAeConfig cfg = small_tcn();
    TcnAutoencoder net(cfg, 5);
    const std::size_t k = cfg.kernel, nf = cfg.n_filters, bf = cfg.bottleneck_filters;
    auto tcn_count = [&](std::size_t cin) {
        std::size_t total = 0;
        for (std::size_t i = 0; i < cfg.dilations.size(); ++i) {
            const std::size_t in = i == 0 ? cin : nf;
            total += conv_params(k, in, nf) + conv_params(k, nf, nf);
            if (in != nf) total += conv_params(1, in, nf); // 1x1 skip projection
        }
        return total;
    };
    const std::size_t expected = tcn_count(cfg.channels) + conv_params(1, nf, bf) +
                                 tcn_count(bf) + conv_params(1, nf, cfg.channels);
    CHECK(net.param_count() == expected);
}

TEST_CASE("tcn_ae rejects input length not divisible by pool_s") {
    TcnAeConfig cfg = small_tcn();
    cfg.input_length = 66;
    CHECK_THROWS_AS(TcnAutoencoder(cfg, 1), ConfigError);
    cfg.input_length = 64;
    cfg.dilations = {1, 4, 2};
    CHECK_THROWS_AS(TcnAutoencoder(cfg, 1), ConfigError);
}

TEST_CASE("training reduces reconstruction loss on pulse signals") {
    auto signals = pulse_signals(24, 64, 21);
    TrainConfig cfg;
    cfg.seed = 3;
    cfg.epochs = 8;
    cfg.batch_size = 8;
    cfg.learning_rate = 2e-3;

    for (ModelKind kind : {ModelKind::tcn_ae, ModelKind::cnn_ae}) {
        auto net = make_autoencoder(kind, small_cnn(), small_tcn(), cfg.seed);
        TrainRun run = fit_autoencoder(*net, signals, cfg);
        REQUIRE(run.losses.size() == cfg.epochs);
        for (double l : run.losses) CHECK(std::isfinite(l));
        CHECK(run.losses.back() < run.losses.front());
    }
}

TEST_CASE("trained model beats its untrained self on a held-out pulse") {
    auto signals = pulse_signals(24, 64, 22);
    auto held_out = pulse_signals(1, 64, 99)[0];
    TrainConfig cfg;
    cfg.seed = 3;
    cfg.epochs = 10;
    cfg.batch_size = 8;
    cfg.learning_rate = 2e-3;

    TcnAutoencoder untrained(small_tcn(), cfg.seed);
    TcnAutoencoder trained(small_tcn(), cfg.seed);
    fit_autoencoder(trained, signals, cfg);

    Tensor x = signal_to_tensor(held_out);
    const double before = mse_loss(untrained.forward(x, false), x).item();
    const double after = mse_loss(trained.forward(x, false), x).item();
    CHECK(after < before);
}

TEST_CASE("a diverging run aborts with lr/epoch/batch diagnostics") {
    auto signals = pulse_signals(12, 64, 26);
    TrainConfig cfg;
    cfg.seed = 3;
    cfg.epochs = 40;
    cfg.batch_size = 4;
    cfg.learning_rate = 1e100; // overflows within a few steps
    TcnAutoencoder net(small_tcn(), cfg.seed);
    CHECK_THROWS_WITH_AS(fit_autoencoder(net, signals, cfg), doctest::Contains("epoch="),
                         NumericError);
}

TEST_CASE("identical seeds give identical loss curves") {
    auto signals = pulse_signals(16, 64, 23);
    TrainConfig cfg;
    cfg.seed = 11;
    cfg.epochs = 3;
    cfg.batch_size = 4;
    auto run_once = [&]() {
        TcnAutoencoder net(small_tcn(), cfg.seed);
        return fit_autoencoder(net, signals, cfg).losses;
    };
    CHECK(run_once() == run_once());
}

TEST_CASE("train splits chronologically and enforces the minimum dataset size") {
    auto signals = pulse_signals(10, 64, 24);
    TrainConfig cfg;
    cfg.seed = 2;
    cfg.epochs = 1;
    cfg.batch_size = 4;
    TrainOutcome out = train(ModelKind::tcn_ae, signals, 0.8, cfg, small_cnn(), small_tcn());
    CHECK(out.train_signals.size() == 8);
    CHECK(out.held_out.size() == 2);
    CHECK(out.held_out[0].start_timestamp == signals[8].start_timestamp);
    CHECK(out.held_out[1].start_timestamp == signals[9].start_timestamp);

    auto too_few = pulse_signals(9, 64, 25);
    CHECK_THROWS_AS(train(ModelKind::tcn_ae, too_few, 0.8, cfg, small_cnn(), small_tcn()),
                    DataError);
}

TEST_CASE("model save/load round-trips parameters and reconstructions") {
    namespace fs = std::filesystem;
    const fs::path dir = fs::temp_directory_path() / "loadwatch_test_models";
    fs::remove_all(dir);
    fs::create_directories(dir);

    Model model;
    model.tcn = small_tcn();
    model.net = std::make_unique<TcnAutoencoder>(model.tcn, 9);
    model.norm_max = 1234.5;
    model.r = 10;
    model.save(dir / "model.lwm");

    Model back = Model::load(dir / "model.lwm");
    CHECK(back.norm_max == model.norm_max);
    CHECK(back.r == model.r);
    CHECK(back.net->kind() == ModelKind::tcn_ae);

    std::mt19937_64 rng(33);
    Tensor x = Tensor::from_data({64, 1}, oracles::random_vector(rng, 64, 0.0, 1.0));
    CHECK(back.net->forward(x, false).data() == model.net->forward(x, false).data());
    fs::remove_all(dir);
}
