#pragma once

// Reference implementations used only by tests: brute-force cross areas,
// a six-loop convolution, and central-difference gradients.

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <random>
#include <vector>

#include "crossgo/nn/conv.hpp"
#include "crossgo/nn/cross_mask.hpp"

namespace testutil {

/// Union of a c x c block slid corner to corner along both diagonals.
inline std::vector<std::uint8_t> sliding_block_area(int n, int c)
{
    std::vector<std::uint8_t> area(std::size_t(n * n), 0);
    if (c <= 0) return area;
    for (int t = 0; t + c <= n; ++t)
        for (int dr = 0; dr < c; ++dr)
            for (int dq = 0; dq < c; ++dq) {
                area[std::size_t((t + dr) * n + (t + dq))] = 1;
                area[std::size_t((t + dr) * n + (n - c - t + dq))] = 1;
            }
    return area;
}

/// Naive cross-correlation in double; masked taps skipped explicitly.
template <typename T>
std::vector<double> naive_conv(const crossgo::nn::Tensor<T>& input, const crossgo::nn::ConvLayer<T>& layer)
{
    const auto d = crossgo::nn::image_dims(input);
    const int k = layer.kernel, s = layer.stride, p = layer.pad;
    const int ho = (int(d.h) + 2 * p - k) / s + 1, wo = (int(d.w) + 2 * p - k) / s + 1;
    std::vector<double> out(d.n * std::size_t(layer.out_channels * ho * wo), 0.0);
    for (std::size_t n = 0; n < d.n; ++n)
        for (int o = 0; o < layer.out_channels; ++o)
            for (int y = 0; y < ho; ++y)
                for (int x = 0; x < wo; ++x) {
                    double acc = layer.bias[std::size_t(o)];
                    for (int i = 0; i < layer.in_channels; ++i)
                        for (int kr = 0; kr < k; ++kr)
                            for (int kc = 0; kc < k; ++kc) {
                                if (layer.mask && !layer.mask->active(kr, kc)) continue;
                                const int iy = y * s + kr - p, ix = x * s + kc - p;
                                if (iy < 0 || ix < 0 || iy >= int(d.h) || ix >= int(d.w)) continue;
                                acc += double(layer.weights[std::size_t(((o * layer.in_channels + i) * k + kr) * k + kc)]) *
                                       double(input[((n * d.c + std::size_t(i)) * d.h + std::size_t(iy)) * d.w + std::size_t(ix)]);
                            }
                    out[((n * std::size_t(layer.out_channels) + std::size_t(o)) * std::size_t(ho) + std::size_t(y)) * std::size_t(wo) + std::size_t(x)] = acc;
                }
    return out;
}

/// Central difference d f / d x[i] with x perturbed in place.
template <typename T>
double central_difference(std::function<double()> f, T& x, double h)
{
    const T saved = x;
    x = static_cast<T>(saved + h);
    const double up = f();
    x = static_cast<T>(saved - h);
    const double down = f();
    x = saved;
    return (up - down) / (2 * h);
}

/// Relative error with a floor so near-zero gradients compare absolutely.
inline double rel_err(double analytic, double numeric, double floor = 1e-6)
{
    return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

template <typename T, typename Rng>
void fill_uniform(crossgo::nn::Tensor<T>& t, Rng& rng, double lo = -1.0, double hi = 1.0)
{
    std::uniform_real_distribution<double> u(lo, hi);
    for (auto& v : t.values()) v = static_cast<T>(u(rng));
}

/// Random layer/input pair with optional mask and stride.
template <typename T>
std::pair<crossgo::nn::ConvLayer<T>, crossgo::nn::Tensor<T>> random_conv_case(std::mt19937_64& rng, bool allow_stride = true)
{
    using namespace crossgo::nn;
    auto pick = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
    const int k = 2 * pick(0, 3) + 1 + (pick(0, 4) == 0 ? 1 : 0);
    const int in = pick(1, 4), out = pick(1, 4);
    const int pad = pick(0, k / 2);
    const int stride = allow_stride ? pick(1, 2) : 1;
    std::optional<CrossMask> mask;
    if (k >= 3 && pick(0, 1)) mask = cross_mask(k, pick(1, std::max(1, max_cross_width(k))));
    ConvLayer<T> layer(in, out, k, pad, mask, stride);
    fill_uniform(layer.weights, rng);
    fill_uniform(layer.bias, rng);
    layer.apply_mask();
    const int h = pick(std::max(1, k - 2 * pad), 9), w = pick(std::max(1, k - 2 * pad), 9);
    const std::size_t batch = std::size_t(pick(1, 2));
    Tensor<T> x(batch == 1 ? Shape{std::size_t(in), std::size_t(h), std::size_t(w)}
                           : Shape{batch, std::size_t(in), std::size_t(h), std::size_t(w)});
    fill_uniform(x, rng);
    return {std::move(layer), std::move(x)};
}

}  // namespace testutil
