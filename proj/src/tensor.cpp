#include "loadwatch/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>
#include <unordered_set>

#include "loadwatch/errors.hpp"

namespace loadwatch {

namespace detail {

struct TensorNode {
    std::vector<std::size_t> shape;
    std::vector<double> value;
    std::vector<double> grad; // sized lazily on first accumulation
    bool requires_grad = false;
    std::vector<std::shared_ptr<TensorNode>> parents;
    std::function<void(TensorNode&)> backprop; // pulls this->grad into parents

    void accumulate(const std::vector<double>& g) {
        if (grad.empty()) grad.assign(value.size(), 0.0);
        for (std::size_t i = 0; i < g.size(); ++i) grad[i] += g[i];
    }
    void ensure_grad_storage() {
        if (grad.empty()) grad.assign(value.size(), 0.0);
    }
};

} // namespace detail

using detail::TensorNode;

namespace {

std::size_t shape_product(const std::vector<std::size_t>& shape) {
    std::size_t n = 1;
    for (std::size_t d : shape) {
        if (d == 0) throw ShapeError("tensor dimensions must be positive");
        n *= d;
    }
    return n;
}

std::string shape_str(const std::vector<std::size_t>& shape) {
    std::ostringstream ss;
    ss << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) ss << (i ? "," : "") << shape[i];
    ss << ']';
    return ss.str();
}

void ensure_finite(const char* op, const std::vector<double>& v) {
    for (double x : v)
        if (!std::isfinite(x))
            throw NumericError(std::string(op) + ": produced a non-finite value");
}

} // namespace

Tensor::Tensor() = default;

detail::TensorNode& node_of(const Tensor& t) {
    if (!t.node_) throw ShapeError("operation on empty tensor");
    return *t.node_;
}

Tensor make_op_result(std::vector<std::size_t> shape, std::vector<double> value,
                      std::vector<Tensor> parents,
                      std::function<void(TensorNode&)> backprop, const char* op_name) {
    ensure_finite(op_name, value);
    auto node = std::make_shared<TensorNode>();
    node->shape = std::move(shape);
    node->value = std::move(value);
    bool any_grad = false;
    for (const Tensor& p : parents) {
        node->parents.push_back(p.node_);
        any_grad = any_grad || p.node_->requires_grad;
    }
    node->requires_grad = any_grad;
    if (any_grad) node->backprop = std::move(backprop);
    Tensor t;
    t.node_ = std::move(node);
    return t;
}

Tensor Tensor::zeros(std::vector<std::size_t> shape, bool requires_grad) {
    return from_data(std::move(shape), {}, requires_grad);
}

Tensor Tensor::full(std::vector<std::size_t> shape, double value, bool requires_grad) {
    std::size_t n = shape_product(shape);
    return from_data(std::move(shape), std::vector<double>(n, value), requires_grad);
}

Tensor Tensor::from_data(std::vector<std::size_t> shape, std::vector<double> data,
                         bool requires_grad) {
    std::size_t n = shape_product(shape);
    if (data.empty()) data.assign(n, 0.0);
    if (data.size() != n)
        throw ShapeError("data length " + std::to_string(data.size()) +
                         " does not match shape " + shape_str(shape));
    auto node = std::make_shared<TensorNode>();
    node->shape = std::move(shape);
    node->value = std::move(data);
    node->requires_grad = requires_grad;
    Tensor t;
    t.node_ = std::move(node);
    return t;
}

const std::vector<std::size_t>& Tensor::shape() const { return node_of(*this).shape; }
std::size_t Tensor::size() const { return node_of(*this).value.size(); }
const std::vector<double>& Tensor::data() const { return node_of(*this).value; }
std::vector<double>& Tensor::mutable_data() { return node_of(*this).value; }
bool Tensor::requires_grad() const { return node_of(*this).requires_grad; }
bool Tensor::has_grad() const { return !node_of(*this).grad.empty(); }

const std::vector<double>& Tensor::grad() const {
    TensorNode& n = node_of(*this);
    if (n.grad.empty()) throw Error("tensor has no gradient; call backward() first");
    return n.grad;
}

void Tensor::zero_grad() { node_of(*this).grad.clear(); }

double Tensor::item() const {
    const TensorNode& n = node_of(*this);
    if (n.value.size() != 1)
        throw ShapeError("item() on tensor of shape " + shape_str(n.shape));
    return n.value[0];
}

Tensor Tensor::detach() const {
    const TensorNode& n = node_of(*this);
    return from_data(n.shape, n.value, false);
}

void Tensor::backward() const {
    TensorNode& root = node_of(*this);
    if (root.value.size() != 1)
        throw Error("backward() requires a scalar loss, got shape " + shape_str(root.shape));

    // Reverse topological order over the requires_grad subgraph, iteratively.
    std::vector<TensorNode*> order;
    std::unordered_set<TensorNode*> visited;
    std::vector<std::pair<TensorNode*, std::size_t>> stack;
    stack.emplace_back(&root, 0);
    visited.insert(&root);
    while (!stack.empty()) {
        auto& [node, next_child] = stack.back();
        if (next_child < node->parents.size()) {
            TensorNode* parent = node->parents[next_child++].get();
            if (parent->requires_grad && !visited.count(parent)) {
                visited.insert(parent);
                stack.emplace_back(parent, 0);
            }
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }

    // Interior grads are per-call scratch; only leaves accumulate across calls.
    for (TensorNode* node : order)
        if (node->backprop) node->grad.clear();

    root.ensure_grad_storage();
    root.grad[0] += 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        TensorNode* node = *it;
        if (node->backprop && !node->grad.empty()) node->backprop(*node);
    }
}

// ---------------------------------------------------------------------------
// Forward ops

namespace {

void check_rank2(const Tensor& x, const char* op) {
    if (x.rank() != 2)
        throw ShapeError(std::string(op) + ": expected [T, C] input, got " +
                         shape_str(x.shape()));
}

// Output grad of `node` is guaranteed non-empty when backprop runs.
std::int64_t same_pad_left(std::size_t kernel, std::size_t dilation) {
    return static_cast<std::int64_t>((kernel - 1) * dilation) / 2;
}

} // namespace

Tensor conv1d(const Tensor& input, const Conv1dParams& params) {
    check_rank2(input, "conv1d");
    if (params.kernel_size < 1 || params.dilation < 1)
        throw ConfigError("conv1d: kernel_size and dilation must be >= 1");
    const std::size_t T = input.shape()[0];
    const std::size_t cin = input.shape()[1];
    const std::size_t cout = params.out_channels;
    const std::size_t k = params.kernel_size;
    if (cin != params.in_channels)
        throw ShapeError("conv1d: input " + shape_str(input.shape()) + " does not match params [" +
                         std::to_string(k) + "," + std::to_string(params.in_channels) + "," +
                         std::to_string(cout) + "]");
    const std::vector<std::size_t> want_w{k, cin, cout};
    if (params.weight.shape() != want_w)
        throw ShapeError("conv1d: weight " + shape_str(params.weight.shape()) +
                         " does not match expected " + shape_str(want_w));
    if (params.bias.shape() != std::vector<std::size_t>{cout})
        throw ShapeError("conv1d: bias " + shape_str(params.bias.shape()) +
                         " does not match expected [" + std::to_string(cout) + "]");

    const std::int64_t pad_left = params.padding == Padding::causal
                                      ? static_cast<std::int64_t>((k - 1) * params.dilation)
                                      : same_pad_left(k, params.dilation);
    const std::int64_t q = static_cast<std::int64_t>(params.dilation);

    const std::vector<double>& x = input.data();
    const std::vector<double>& w = params.weight.data();
    const std::vector<double>& b = params.bias.data();

    std::vector<double> y(T * cout);
    for (std::size_t t = 0; t < T; ++t) {
        double* yt = y.data() + t * cout;
        for (std::size_t o = 0; o < cout; ++o) yt[o] = b[o];
        for (std::size_t i = 0; i < k; ++i) {
            const std::int64_t src = static_cast<std::int64_t>(t) +
                                     static_cast<std::int64_t>(i) * q - pad_left;
            if (src < 0 || src >= static_cast<std::int64_t>(T)) continue;
            const double* xs = x.data() + static_cast<std::size_t>(src) * cin;
            const double* wi = w.data() + i * cin * cout;
            for (std::size_t ci = 0; ci < cin; ++ci) {
                const double xv = xs[ci];
                const double* wo = wi + ci * cout;
                for (std::size_t o = 0; o < cout; ++o) yt[o] += xv * wo[o];
            }
        }
    }

    auto xn = input, wn = params.weight, bn = params.bias;
    auto backprop = [T, cin, cout, k, q, pad_left, xn, wn, bn](TensorNode& node) {
        const std::vector<double>& gy = node.grad;
        TensorNode& xnode = node_of(xn);
        TensorNode& wnode = node_of(wn);
        TensorNode& bnode = node_of(bn);
        const bool need_x = xnode.requires_grad;
        const bool need_w = wnode.requires_grad;
        const bool need_b = bnode.requires_grad;
        if (need_x) xnode.ensure_grad_storage();
        if (need_w) wnode.ensure_grad_storage();
        if (need_b) bnode.ensure_grad_storage();
        const std::vector<double>& x = xnode.value;
        const std::vector<double>& w = wnode.value;
        for (std::size_t t = 0; t < T; ++t) {
            const double* gyt = gy.data() + t * cout;
            if (need_b) {
                for (std::size_t o = 0; o < cout; ++o) bnode.grad[o] += gyt[o];
            }
            for (std::size_t i = 0; i < k; ++i) {
                const std::int64_t src = static_cast<std::int64_t>(t) +
                                         static_cast<std::int64_t>(i) * q - pad_left;
                if (src < 0 || src >= static_cast<std::int64_t>(T)) continue;
                const std::size_t s = static_cast<std::size_t>(src);
                for (std::size_t ci = 0; ci < cin; ++ci) {
                    const double xv = x[s * cin + ci];
                    const double* wo = w.data() + (i * cin + ci) * cout;
                    double gx = 0.0;
                    for (std::size_t o = 0; o < cout; ++o) {
                        const double g = gyt[o];
                        if (need_w) wnode.grad[(i * cin + ci) * cout + o] += xv * g;
                        gx += wo[o] * g;
                    }
                    if (need_x) xnode.grad[s * cin + ci] += gx;
                }
            }
        }
    };
    return make_op_result({T, cout}, std::move(y), {input, params.weight, params.bias},
                          std::move(backprop), "conv1d");
}

Tensor relu(const Tensor& x) {
    const std::vector<double>& v = x.data();
    std::vector<double> y(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) y[i] = v[i] > 0.0 ? v[i] : 0.0;
    Tensor xn = x;
    auto backprop = [xn](TensorNode& node) {
        TensorNode& xnode = node_of(xn);
        if (!xnode.requires_grad) return;
        xnode.ensure_grad_storage();
        for (std::size_t i = 0; i < node.grad.size(); ++i)
            if (xnode.value[i] > 0.0) xnode.grad[i] += node.grad[i];
    };
    return make_op_result(x.shape(), std::move(y), {x}, std::move(backprop), "relu");
}

Tensor dropout(const Tensor& x, double p, bool training, std::uint64_t rng_seed) {
    if (p < 0.0 || p >= 1.0) throw ConfigError("dropout: p must be in [0, 1)");
    if (!training || p == 0.0) {
        Tensor xn = x;
        auto backprop = [xn](TensorNode& node) {
            TensorNode& xnode = node_of(xn);
            if (!xnode.requires_grad) return;
            xnode.accumulate(node.grad);
        };
        return make_op_result(x.shape(), x.data(), {x}, std::move(backprop), "dropout");
    }
    std::mt19937_64 rng(rng_seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const double keep_scale = 1.0 / (1.0 - p);
    const std::vector<double>& v = x.data();
    auto mask = std::make_shared<std::vector<double>>(v.size());
    std::vector<double> y(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
        (*mask)[i] = unit(rng) < p ? 0.0 : keep_scale;
        y[i] = v[i] * (*mask)[i];
    }
    Tensor xn = x;
    auto backprop = [xn, mask](TensorNode& node) {
        TensorNode& xnode = node_of(xn);
        if (!xnode.requires_grad) return;
        xnode.ensure_grad_storage();
        for (std::size_t i = 0; i < node.grad.size(); ++i)
            xnode.grad[i] += node.grad[i] * (*mask)[i];
    };
    return make_op_result(x.shape(), std::move(y), {x}, std::move(backprop), "dropout");
}

Tensor avg_pool1d(const Tensor& x, std::size_t s) {
    check_rank2(x, "avg_pool1d");
    if (s == 0) throw ConfigError("avg_pool1d: s must be >= 1");
    const std::size_t T = x.shape()[0];
    const std::size_t C = x.shape()[1];
    const std::size_t To = (T + s - 1) / s;
    const std::vector<double>& v = x.data();
    std::vector<double> y(To * C, 0.0);
    for (std::size_t p = 0; p < To; ++p) {
        for (std::size_t j = 0; j < s; ++j) {
            // Tail beyond T repeats the final timestep.
            const std::size_t t = std::min(p * s + j, T - 1);
            for (std::size_t c = 0; c < C; ++c) y[p * C + c] += v[t * C + c];
        }
        for (std::size_t c = 0; c < C; ++c) y[p * C + c] /= static_cast<double>(s);
    }
    Tensor xn = x;
    auto backprop = [T, C, s, To, xn](TensorNode& node) {
        TensorNode& xnode = node_of(xn);
        if (!xnode.requires_grad) return;
        xnode.ensure_grad_storage();
        const double inv = 1.0 / static_cast<double>(s);
        for (std::size_t p = 0; p < To; ++p)
            for (std::size_t j = 0; j < s; ++j) {
                const std::size_t t = std::min(p * s + j, T - 1);
                for (std::size_t c = 0; c < C; ++c)
                    xnode.grad[t * C + c] += node.grad[p * C + c] * inv;
            }
    };
    return make_op_result({To, C}, std::move(y), {x}, std::move(backprop), "avg_pool1d");
}

Tensor upsample_nearest(const Tensor& x, std::size_t s) {
    check_rank2(x, "upsample_nearest");
    if (s == 0) throw ConfigError("upsample_nearest: s must be >= 1");
    const std::size_t T = x.shape()[0];
    const std::size_t C = x.shape()[1];
    const std::vector<double>& v = x.data();
    std::vector<double> y(T * s * C);
    for (std::size_t t = 0; t < T; ++t)
        for (std::size_t j = 0; j < s; ++j)
            for (std::size_t c = 0; c < C; ++c) y[(t * s + j) * C + c] = v[t * C + c];
    Tensor xn = x;
    auto backprop = [T, C, s, xn](TensorNode& node) {
        TensorNode& xnode = node_of(xn);
        if (!xnode.requires_grad) return;
        xnode.ensure_grad_storage();
        for (std::size_t t = 0; t < T; ++t)
            for (std::size_t j = 0; j < s; ++j)
                for (std::size_t c = 0; c < C; ++c)
                    xnode.grad[t * C + c] += node.grad[(t * s + j) * C + c];
    };
    return make_op_result({T * s, C}, std::move(y), {x}, std::move(backprop), "upsample_nearest");
}

Tensor add(const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape())
        throw ShapeError("add: shape mismatch " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
    const std::vector<double>& av = a.data();
    const std::vector<double>& bv = b.data();
    std::vector<double> y(av.size());
    for (std::size_t i = 0; i < av.size(); ++i) y[i] = av[i] + bv[i];
    Tensor an = a, bn = b;
    auto backprop = [an, bn](TensorNode& node) {
        TensorNode& anode = node_of(an);
        TensorNode& bnode = node_of(bn);
        if (anode.requires_grad) anode.accumulate(node.grad);
        if (bnode.requires_grad) bnode.accumulate(node.grad);
    };
    return make_op_result(a.shape(), std::move(y), {a, b}, std::move(backprop), "add");
}

Tensor scale(const Tensor& x, double c) {
    const std::vector<double>& v = x.data();
    std::vector<double> y(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) y[i] = v[i] * c;
    Tensor xn = x;
    auto backprop = [xn, c](TensorNode& node) {
        TensorNode& xnode = node_of(xn);
        if (!xnode.requires_grad) return;
        xnode.ensure_grad_storage();
        for (std::size_t i = 0; i < node.grad.size(); ++i) xnode.grad[i] += node.grad[i] * c;
    };
    return make_op_result(x.shape(), std::move(y), {x}, std::move(backprop), "scale");
}

Tensor mse_loss(const Tensor& pred, const Tensor& target) {
    if (pred.shape() != target.shape())
        throw ShapeError("mse_loss: shape mismatch " + shape_str(pred.shape()) + " vs " +
                         shape_str(target.shape()));
    const std::vector<double>& p = pred.data();
    const std::vector<double>& t = target.data();
    const double n = static_cast<double>(p.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        const double d = p[i] - t[i];
        sum += d * d;
    }
    Tensor pn = pred, tn = target;
    auto backprop = [pn, tn, n](TensorNode& node) {
        TensorNode& pnode = node_of(pn);
        TensorNode& tnode = node_of(tn);
        const double g = node.grad[0];
        const bool need_p = pnode.requires_grad;
        const bool need_t = tnode.requires_grad;
        if (need_p) pnode.ensure_grad_storage();
        if (need_t) tnode.ensure_grad_storage();
        for (std::size_t i = 0; i < pnode.value.size(); ++i) {
            const double d = 2.0 * (pnode.value[i] - tnode.value[i]) / n;
            if (need_p) pnode.grad[i] += g * d;
            if (need_t) tnode.grad[i] -= g * d;
        }
    };
    return make_op_result({1}, {sum / n}, {pred, target}, std::move(backprop), "mse_loss");
}

} // namespace loadwatch
