// Test-only reference implementations, independent of the library's forward
// and backward code paths.
#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <vector>

#include "loadwatch/tensor.hpp"

namespace oracles {

// Naive triple-loop 1-D convolution over [T, C_in] with weight [k, C_in, C_out].
inline std::vector<double> conv1d_reference(const std::vector<double>& x, std::size_t T,
                                            std::size_t cin, const std::vector<double>& w,
                                            std::size_t k, std::size_t cout,
                                            const std::vector<double>& bias, std::size_t dilation,
                                            bool causal) {
    const std::int64_t pad_left = causal ? static_cast<std::int64_t>((k - 1) * dilation)
                                         : static_cast<std::int64_t>((k - 1) * dilation) / 2;
    std::vector<double> y(T * cout, 0.0);
    for (std::size_t t = 0; t < T; ++t)
        for (std::size_t o = 0; o < cout; ++o) {
            double acc = bias[o];
            for (std::size_t i = 0; i < k; ++i)
                for (std::size_t ci = 0; ci < cin; ++ci) {
                    const std::int64_t src = static_cast<std::int64_t>(t) +
                                             static_cast<std::int64_t>(i * dilation) - pad_left;
                    if (src < 0 || src >= static_cast<std::int64_t>(T)) continue;
                    acc += w[(i * cin + ci) * cout + o] *
                           x[static_cast<std::size_t>(src) * cin + ci];
                }
            y[t * cout + o] = acc;
        }
    return y;
}

struct FdCheck {
    double max_rel_error = 0.0;
    std::size_t checked = 0;
};

// Central finite differences of scalar_fn around leaf's current values,
// compared against leaf.grad() after one backward of scalar_fn's output.
// rel error uses max(|analytic|, |fd|, floor) as denominator.
inline FdCheck finite_difference_check(loadwatch::Tensor leaf,
                                       const std::function<double()>& scalar_fn,
                                       const std::vector<double>& analytic, double h = 1e-5,
                                       double floor = 1e-4) {
    FdCheck result;
    std::vector<double>& values = leaf.mutable_data();
    for (std::size_t i = 0; i < values.size(); ++i) {
        const double saved = values[i];
        values[i] = saved + h;
        const double up = scalar_fn();
        values[i] = saved - h;
        const double down = scalar_fn();
        values[i] = saved;
        const double fd = (up - down) / (2.0 * h);
        const double denom = std::max({std::abs(fd), std::abs(analytic[i]), floor});
        result.max_rel_error = std::max(result.max_rel_error, std::abs(fd - analytic[i]) / denom);
        ++result.checked;
    }
    return result;
}

// Straightforward re-statement of the forward-fill rule over bucket
// occupancy: runs no longer than `limit` carry the previous observed value,
// longer runs become zero.
struct FillReference {
    std::vector<double> values;
    std::vector<int> mask; // 0 observed, 1 forward-filled, 2 zero-filled
};

inline FillReference fill_reference(const std::vector<bool>& occupied,
                                    const std::vector<double>& bucket_means, std::int64_t limit) {
    FillReference out;
    out.values.resize(occupied.size());
    out.mask.resize(occupied.size());
    double last = 0.0;
    for (std::size_t i = 0; i < occupied.size();) {
        if (occupied[i]) {
            out.values[i] = bucket_means[i];
            out.mask[i] = 0;
            last = bucket_means[i];
            ++i;
            continue;
        }
        std::size_t j = i;
        while (j < occupied.size() && !occupied[j]) ++j;
        const bool fill = static_cast<std::int64_t>(j - i) <= limit;
        for (std::size_t k = i; k < j; ++k) {
            out.values[k] = fill ? last : 0.0;
            out.mask[k] = fill ? 1 : 2;
        }
        i = j;
    }
    return out;
}

inline std::vector<double> random_vector(std::mt19937_64& rng, std::size_t n, double lo = -1.0,
                                         double hi = 1.0) {
    std::uniform_real_distribution<double> dist(lo, hi);
    std::vector<double> out(n);
    for (double& v : out) v = dist(rng);
    return out;
}

// Keeps values away from the ReLU kink so finite differences stay clean.
inline std::vector<double> random_vector_away_from_zero(std::mt19937_64& rng, std::size_t n,
                                                        double min_abs = 5e-3) {
    std::vector<double> out = random_vector(rng, n);
    for (double& v : out)
        if (std::abs(v) < min_abs) v = v < 0 ? -min_abs : min_abs;
    return out;
}

} // namespace oracles
