#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "loadwatch/tensor.hpp"

namespace loadwatch {

// Trainable 1-D convolution layer. Weights get Glorot-uniform init, biases zero.
struct Conv1dLayer {
    Conv1dParams params;

    Conv1dLayer() = default;
    Conv1dLayer(std::size_t kernel, std::size_t in_channels, std::size_t out_channels,
                std::size_t dilation, Padding padding, std::mt19937_64& rng);

    Tensor operator()(const Tensor& x) const { return conv1d(x, params); }
    std::size_t param_count() const {
        return params.weight.size() + params.bias.size();
    }
};

struct OptimizerState {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    std::int64_t step_count = 0;
    // First/second moment accumulators, parallel to the parameter list.
    std::vector<std::vector<double>> m;
    std::vector<std::vector<double>> v;
};

OptimizerState make_optimizer_state(const std::vector<Tensor>& params, double learning_rate);

// One bias-corrected Adam update over all parameters. Every parameter must
// carry a gradient; grads are left untouched (call zero_grad_all after).
void optimizer_step(std::vector<Tensor>& params, OptimizerState& state);

void zero_grad_all(std::vector<Tensor>& params);

using NamedParams = std::vector<std::pair<std::string, Tensor>>;

// Flat binary container: magic "LWTP", u32 version, u64 count, then per
// parameter u32 name length, name bytes, u32 rank, u64 dims, f64 LE values.
// Round-trips bit-exactly.
std::string serialize_parameters(const NamedParams& params);
NamedParams deserialize_parameters(const std::string& blob);

void save_parameters(const std::filesystem::path& path, const NamedParams& params);
NamedParams load_parameters(const std::filesystem::path& path);

// Copies stored values into the matching destination tensors; names and
// shapes must line up exactly.
void assign_parameters(NamedParams& dest, const NamedParams& loaded);

} // namespace loadwatch
