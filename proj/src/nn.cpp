#include "loadwatch/nn.hpp"

#include <cmath>

#include "loadwatch/errors.hpp"
#include "loadwatch/util.hpp"

namespace loadwatch {

Conv1dLayer::Conv1dLayer(std::size_t kernel, std::size_t in_channels, std::size_t out_channels,
                         std::size_t dilation, Padding padding, std::mt19937_64& rng) {
    params.kernel_size = kernel;
    params.in_channels = in_channels;
    params.out_channels = out_channels;
    params.dilation = dilation;
    params.padding = padding;

    const double fan_in = static_cast<double>(kernel * in_channels);
    const double fan_out = static_cast<double>(kernel * out_channels);
    const double limit = std::sqrt(6.0 / (fan_in + fan_out));
    std::uniform_real_distribution<double> dist(-limit, limit);
    std::vector<double> w(kernel * in_channels * out_channels);
    for (double& x : w) x = dist(rng);
    params.weight = Tensor::from_data({kernel, in_channels, out_channels}, std::move(w), true);
    params.bias = Tensor::zeros({out_channels}, true);
}

OptimizerState make_optimizer_state(const std::vector<Tensor>& params, double learning_rate) {
    OptimizerState state;
    state.learning_rate = learning_rate;
    state.m.reserve(params.size());
    state.v.reserve(params.size());
    for (const Tensor& p : params) {
        state.m.emplace_back(p.size(), 0.0);
        state.v.emplace_back(p.size(), 0.0);
    }
    return state;
}

void optimizer_step(std::vector<Tensor>& params, OptimizerState& state) {
    if (state.m.size() != params.size() || state.v.size() != params.size())
        throw Error("optimizer_step: state does not match parameter list");
    for (const Tensor& p : params)
        if (!p.has_grad())
            throw Error("optimizer_step: parameter is missing its gradient");

    state.step_count += 1;
    const double t = static_cast<double>(state.step_count);
    const double bc1 = 1.0 - std::pow(state.beta1, t);
    const double bc2 = 1.0 - std::pow(state.beta2, t);

    for (std::size_t i = 0; i < params.size(); ++i) {
        std::vector<double>& value = params[i].mutable_data();
        const std::vector<double>& grad = params[i].grad();
        std::vector<double>& m = state.m[i];
        std::vector<double>& v = state.v[i];
        if (m.size() != value.size())
            throw Error("optimizer_step: accumulator shape mismatch");
        for (std::size_t j = 0; j < value.size(); ++j) {
            const double g = grad[j];
            m[j] = state.beta1 * m[j] + (1.0 - state.beta1) * g;
            v[j] = state.beta2 * v[j] + (1.0 - state.beta2) * g * g;
            const double m_hat = m[j] / bc1;
            const double v_hat = v[j] / bc2;
            value[j] -= state.learning_rate * m_hat / (std::sqrt(v_hat) + state.epsilon);
        }
    }
}

void zero_grad_all(std::vector<Tensor>& params) {
    for (Tensor& p : params) p.zero_grad();
}

std::string serialize_parameters(const NamedParams& params) {
    std::string out;
    out.append("LWTP");
    append_u32_le(out, 1);
    append_u64_le(out, params.size());
    for (const auto& [name, tensor] : params) {
        append_u32_le(out, static_cast<std::uint32_t>(name.size()));
        out.append(name);
        append_u32_le(out, static_cast<std::uint32_t>(tensor.shape().size()));
        for (std::size_t d : tensor.shape()) append_u64_le(out, d);
        for (double v : tensor.data()) append_f64_le(out, v);
    }
    return out;
}

NamedParams deserialize_parameters(const std::string& blob) {
    if (blob.size() < 4 || blob.substr(0, 4) != "LWTP")
        throw DataError("parameter container: bad magic");
    std::size_t pos = 4;
    const std::uint32_t version = read_u32_le(blob, pos);
    if (version != 1)
        throw DataError("parameter container: unsupported version " + std::to_string(version));
    const std::uint64_t count = read_u64_le(blob, pos);
    NamedParams params;
    params.reserve(count);
    for (std::uint64_t i = 0; i < count; ++i) {
        const std::uint32_t name_len = read_u32_le(blob, pos);
        if (pos + name_len > blob.size()) throw DataError("parameter container truncated");
        std::string name = blob.substr(pos, name_len);
        pos += name_len;
        const std::uint32_t rank = read_u32_le(blob, pos);
        std::vector<std::size_t> shape(rank);
        std::size_t n = 1;
        for (std::uint32_t d = 0; d < rank; ++d) {
            shape[d] = static_cast<std::size_t>(read_u64_le(blob, pos));
            n *= shape[d];
        }
        std::vector<double> data(n);
        for (std::size_t j = 0; j < n; ++j) data[j] = read_f64_le(blob, pos);
        params.emplace_back(std::move(name), Tensor::from_data(std::move(shape), std::move(data)));
    }
    if (pos != blob.size()) throw DataError("parameter container: trailing bytes");
    return params;
}

void save_parameters(const std::filesystem::path& path, const NamedParams& params) {
    atomic_write_file(path, serialize_parameters(params));
}

NamedParams load_parameters(const std::filesystem::path& path) {
    return deserialize_parameters(read_file(path));
}

void assign_parameters(NamedParams& dest, const NamedParams& loaded) {
    if (dest.size() != loaded.size())
        throw DataError("parameter count mismatch: model has " + std::to_string(dest.size()) +
                        ", file has " + std::to_string(loaded.size()));
    for (std::size_t i = 0; i < dest.size(); ++i) {
        if (dest[i].first != loaded[i].first)
            throw DataError("parameter name mismatch: expected '" + dest[i].first + "', got '" +
                            loaded[i].first + "'");
        if (dest[i].second.shape() != loaded[i].second.shape())
            throw DataError("parameter shape mismatch for '" + dest[i].first + "'");
        dest[i].second.mutable_data() = loaded[i].second.data();
    }
}

} // namespace loadwatch
