#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace loadwatch {

namespace detail {
struct TensorNode;
}

// Shape-carrying array of doubles participating in reverse-mode
// differentiation. Copies share the underlying node; forward ops build a
// graph of nodes, backward() walks it once in reverse topological order.
// The graph is confined to one thread.
class Tensor {
public:
    Tensor(); // empty handle; most operations reject it

    static Tensor zeros(std::vector<std::size_t> shape, bool requires_grad = false);
    static Tensor full(std::vector<std::size_t> shape, double value, bool requires_grad = false);
    static Tensor from_data(std::vector<std::size_t> shape, std::vector<double> data,
                            bool requires_grad = false);

    bool empty() const { return node_ == nullptr; }
    const std::vector<std::size_t>& shape() const;
    std::size_t rank() const { return shape().size(); }
    std::size_t size() const;

    const std::vector<double>& data() const;
    std::vector<double>& mutable_data(); // in-place parameter updates only

    bool requires_grad() const;
    bool has_grad() const;
    const std::vector<double>& grad() const; // throws if never populated
    void zero_grad();

    double item() const; // value of a 1-element tensor

    // Runs reverse-mode accumulation from this scalar. Grads of repeated
    // calls accumulate until zero_grad().
    void backward() const;

    // Same values, cut loose from the graph; receives no grad.
    Tensor detach() const;

private:
    friend struct detail::TensorNode;
    friend Tensor make_op_result(std::vector<std::size_t> shape, std::vector<double> value,
                                 std::vector<Tensor> parents,
                                 std::function<void(detail::TensorNode&)> backprop,
                                 const char* op_name);
    friend detail::TensorNode& node_of(const Tensor& t);

    std::shared_ptr<detail::TensorNode> node_;
};

enum class Padding {
    same,   // centered receptive field, output length == input length
    causal, // looks only backward
};

// Parameters of one 1-D convolution: weight laid out [kernel, in, out].
struct Conv1dParams {
    std::size_t kernel_size = 1;
    std::size_t in_channels = 1;
    std::size_t out_channels = 1;
    std::size_t dilation = 1;
    Padding padding = Padding::same;
    Tensor weight; // [kernel_size, in_channels, out_channels]
    Tensor bias;   // [out_channels]
};

// input [T, C_in] -> [T, C_out]; taps spaced `dilation` apart, zero padding.
Tensor conv1d(const Tensor& input, const Conv1dParams& params);

Tensor relu(const Tensor& x);

// training=false is the identity. Otherwise zeroes each element with
// probability p and scales survivors by 1/(1-p); the mask is a pure function
// of rng_seed.
Tensor dropout(const Tensor& x, double p, bool training, std::uint64_t rng_seed);

// [T, C] -> [ceil(T/s), C], groups of s timesteps averaged. When s does not
// divide T the tail is padded with the final timestep before pooling.
Tensor avg_pool1d(const Tensor& x, std::size_t s);

// [T, C] -> [T*s, C], each timestep repeated s times.
Tensor upsample_nearest(const Tensor& x, std::size_t s);

// Elementwise; shapes must match.
Tensor add(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& x, double c);

// Mean of squared differences, as a scalar tensor.
Tensor mse_loss(const Tensor& pred, const Tensor& target);

} // namespace loadwatch
