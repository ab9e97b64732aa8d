#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "crossgo/nn/cross_mask.hpp"
#include "crossgo/nn/tensor.hpp"

namespace crossgo::nn {

/// 2D convolution (cross-correlation) with zero padding and an optional
/// cross mask. Weights are (out, in, k, k); bias is (out).
///
/// Masked coordinates are kept at exactly zero: forward only reads active
/// taps, backward only writes gradients for active taps, so any sequence of
/// updates built from those gradients leaves them untouched.
template <typename T = float>
struct ConvLayer {
    int in_channels = 0;
    int out_channels = 0;
    int kernel = 1;
    int stride = 1;
    int pad = 0;
    std::optional<CrossMask> mask;
    Tensor<T> weights;
    Tensor<T> bias;

    ConvLayer() = default;
    ConvLayer(int in, int out, int k, int padding, std::optional<CrossMask> m = std::nullopt, int s = 1)
        : in_channels(in), out_channels(out), kernel(k), stride(s), pad(padding), mask(std::move(m)),
          weights(Shape{std::size_t(out), std::size_t(in), std::size_t(k), std::size_t(k)}),
          bias(Shape{std::size_t(out)})
    {
        if (in <= 0 || out <= 0 || k <= 0 || s <= 0 || padding < 0)
            throw std::invalid_argument("invalid convolution geometry");
        if (mask && mask->size() != k) throw std::invalid_argument("mask size does not match kernel");
    }

    bool tap_active(int kr, int kc) const { return !mask || mask->active(kr, kc); }

    /// Active filter offsets as kr * kernel + kc, row-major.
    std::vector<int> active_taps() const
    {
        std::vector<int> taps;
        for (int kr = 0; kr < kernel; ++kr)
            for (int kc = 0; kc < kernel; ++kc)
                if (tap_active(kr, kc)) taps.push_back(kr * kernel + kc);
        return taps;
    }

    int active_fan_in() const { return in_channels * static_cast<int>(active_taps().size()); }

    std::size_t weight_index(int o, int i, int kr, int kc) const
    {
        return ((std::size_t(o) * in_channels + i) * kernel + kr) * kernel + kc;
    }

    /// Zeroes every weight outside the mask.
    void apply_mask()
    {
        if (!mask) return;
        for (int o = 0; o < out_channels; ++o)
            for (int i = 0; i < in_channels; ++i)
                for (int kr = 0; kr < kernel; ++kr)
                    for (int kc = 0; kc < kernel; ++kc)
                        if (!tap_active(kr, kc)) weights[weight_index(o, i, kr, kc)] = T(0);
    }

    std::size_t output_extent(std::size_t in) const
    {
        const long e = (static_cast<long>(in) + 2L * pad - kernel) / stride + 1;
        return e > 0 ? static_cast<std::size_t>(e) : 0;
    }
};

/// He-normal initialisation with fan-in counted over active weights only.
template <typename T, typename Rng>
void init_he(ConvLayer<T>& layer, Rng& rng, double gain = 2.0)
{
    const int fan_in = layer.active_fan_in();
    std::normal_distribution<double> dist(0.0, fan_in > 0 ? std::sqrt(gain / fan_in) : 0.0);
    for (auto& w : layer.weights.values()) w = static_cast<T>(dist(rng));
    layer.bias.fill(T(0));
    layer.apply_mask();
}

template <typename T>
struct ConvGrads {
    Tensor<T> input;
    Tensor<T> weights;
    Tensor<T> bias;
};

namespace detail {

template <typename T>
using RowMatrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatrixMap = Eigen::Map<RowMatrix<T>>;
template <typename T>
using ConstMatrixMap = Eigen::Map<const RowMatrix<T>>;

struct ConvGeometry {
    std::size_t c, h, w, ho, wo;
    int k, stride, pad;
};

// Output columns [lo, hi) whose input column ox * stride + kc - pad is inside.
inline std::pair<std::size_t, std::size_t> valid_columns(const ConvGeometry& g, int kc)
{
    const long off = kc - g.pad;
    long lo = off >= 0 ? 0 : (-off + g.stride - 1) / g.stride;
    long hi = (static_cast<long>(g.w) - 1 - off) < 0 ? 0 : (static_cast<long>(g.w) - 1 - off) / g.stride + 1;
    hi = std::min(hi, static_cast<long>(g.wo));
    lo = std::min(lo, hi);
    return {static_cast<std::size_t>(lo), static_cast<std::size_t>(hi)};
}

// Column matrix restricted to the active taps: row (ch * taps + t), column
// (oy * wo + ox) within one item. `ld` is the row stride of `cols`, so a
// batch of items can share one matrix side by side. Out-of-bounds reads are
// zero padding.
template <typename T>
void im2col(const T* in, const ConvGeometry& g, const std::vector<int>& taps, T* cols, std::size_t ld)
{
    std::size_t row = 0;
    for (std::size_t ch = 0; ch < g.c; ++ch) {
        const T* src = in + ch * g.h * g.w;
        for (int tap : taps) {
            const int kr = tap / g.k;
            const int kc = tap % g.k;
            const auto [lo, hi] = valid_columns(g, kc);
            const long off = kc - g.pad;
            T* dst = cols + row * ld;
            for (std::size_t oy = 0; oy < g.ho; ++oy) {
                const long iy = static_cast<long>(oy) * g.stride + kr - g.pad;
                T* line = dst + oy * g.wo;
                if (iy < 0 || iy >= static_cast<long>(g.h)) {
                    std::fill(line, line + g.wo, T(0));
                    continue;
                }
                const T* src_row = src + static_cast<std::size_t>(iy) * g.w;
                std::fill(line, line + lo, T(0));
                if (g.stride == 1) {
                    std::copy(src_row + static_cast<long>(lo) + off, src_row + static_cast<long>(hi) + off, line + lo);
                } else {
                    for (std::size_t ox = lo; ox < hi; ++ox) line[ox] = src_row[static_cast<long>(ox) * g.stride + off];
                }
                std::fill(line + hi, line + g.wo, T(0));
            }
            ++row;
        }
    }
}

template <typename T>
void col2im_add(const T* cols, std::size_t ld, const ConvGeometry& g, const std::vector<int>& taps, T* in_grad)
{
    std::size_t row = 0;
    for (std::size_t ch = 0; ch < g.c; ++ch) {
        T* dst = in_grad + ch * g.h * g.w;
        for (int tap : taps) {
            const int kr = tap / g.k;
            const int kc = tap % g.k;
            const auto [lo, hi] = valid_columns(g, kc);
            const long off = kc - g.pad;
            const T* src = cols + row * ld;
            for (std::size_t oy = 0; oy < g.ho; ++oy) {
                const long iy = static_cast<long>(oy) * g.stride + kr - g.pad;
                if (iy < 0 || iy >= static_cast<long>(g.h)) continue;
                T* dst_row = dst + static_cast<std::size_t>(iy) * g.w;
                const T* line = src + oy * g.wo;
                for (std::size_t ox = lo; ox < hi; ++ox) dst_row[static_cast<long>(ox) * g.stride + off] += line[ox];
            }
            ++row;
        }
    }
}

// Items per GEMM so the column buffer stays around 32 MB.
inline std::size_t chunk_items(std::size_t rows, std::size_t plane, std::size_t n)
{
    const std::size_t budget = std::size_t(1) << 17;
    return std::clamp<std::size_t>(budget / std::max<std::size_t>(1, rows * plane), 1, std::max<std::size_t>(n, 1));
}

// Weights restricted to active taps, as an (out, in * taps) matrix.
template <typename T>
RowMatrix<T> gather_weights(const ConvLayer<T>& layer, const std::vector<int>& taps)
{
    const std::size_t nt = taps.size();
    RowMatrix<T> w(layer.out_channels, layer.in_channels * static_cast<long>(nt));
    for (int o = 0; o < layer.out_channels; ++o)
        for (int i = 0; i < layer.in_channels; ++i)
            for (std::size_t t = 0; t < nt; ++t)
                w(o, static_cast<long>(i * nt + t)) =
                    layer.weights[layer.weight_index(o, i, taps[t] / layer.kernel, taps[t] % layer.kernel)];
    return w;
}

template <typename T>
ConvGeometry geometry(const ConvLayer<T>& layer, const ImageDims& d)
{
    if (static_cast<int>(d.c) != layer.in_channels)
        throw std::invalid_argument("conv input has " + std::to_string(d.c) + " channels, layer expects " +
                                    std::to_string(layer.in_channels));
    ConvGeometry g{d.c, d.h, d.w, layer.output_extent(d.h), layer.output_extent(d.w), layer.kernel,
                   layer.stride, layer.pad};
    if (g.ho == 0 || g.wo == 0) throw std::invalid_argument("conv output would be empty");
    return g;
}

template <typename T>
bool is_pointwise(const ConvLayer<T>& layer)
{
    return layer.kernel == 1 && layer.stride == 1 && layer.pad == 0;
}

// Stride-1 input gradient: dx[i](y, x) = sum over o and taps (kr, kc) of
// w[o, i, kr, kc] * dy[o](y - kr + pad, x - kc + pad), i.e. a correlation of
// dy with the kernel rotated by 180 degrees and padding k - 1 - pad.
template <typename T>
void input_grad_by_flipped_conv(const Tensor<T>& grad_out, const ConvLayer<T>& layer, const std::vector<int>& taps,
                                const ImageDims& d, const ConvGeometry& g, Tensor<T>& input_grad)
{
    const int k = layer.kernel;
    const std::size_t oc = std::size_t(layer.out_channels), nt = taps.size();
    std::vector<int> flipped(nt);
    for (std::size_t t = 0; t < nt; ++t) flipped[t] = (k - 1 - taps[t] / k) * k + (k - 1 - taps[t] % k);
    const ConvGeometry fg{oc, g.ho, g.wo, d.h, d.w, k, 1, k - 1 - layer.pad};
    RowMatrix<T> w2(layer.in_channels, long(oc * nt));
    for (std::size_t o = 0; o < oc; ++o)
        for (int i = 0; i < layer.in_channels; ++i)
            for (std::size_t t = 0; t < nt; ++t)
                w2(i, long(o * nt + t)) = layer.weights[layer.weight_index(int(o), i, taps[t] / k, taps[t] % k)];
    const std::size_t rows = oc * nt, plane = d.plane();
    const std::size_t chunk = chunk_items(rows, plane, d.n);
    RowMatrix<T> cols(long(rows), long(chunk * plane));
    RowMatrix<T> dx(layer.in_channels, long(chunk * plane));
    for (std::size_t n0 = 0; n0 < d.n; n0 += chunk) {
        const std::size_t m = std::min(chunk, d.n - n0);
        const std::size_t ld = m * plane;
        for (std::size_t j = 0; j < m; ++j)
            im2col(grad_out.data() + (n0 + j) * oc * g.ho * g.wo, fg, flipped, cols.data() + j * plane, ld);
        MatrixMap<T> out(dx.data(), layer.in_channels, long(ld));
        out.noalias() = w2 * ConstMatrixMap<T>(cols.data(), long(rows), long(ld));
        for (std::size_t j = 0; j < m; ++j)
            for (std::size_t i = 0; i < d.c; ++i)
                std::copy_n(out.data() + i * ld + j * plane, plane, input_grad.data() + (n0 + j) * d.item() + i * plane);
    }
}

}  // namespace detail

template <typename T>
Tensor<T> conv2d_forward(const Tensor<T>& input, const ConvLayer<T>& layer)
{
    const ImageDims d = image_dims(input);
    const auto g = detail::geometry(layer, d);
    const auto taps = layer.active_taps();
    const std::size_t rows = d.c * taps.size();
    const std::size_t plane = g.ho * g.wo;
    const std::size_t oc = std::size_t(layer.out_channels);

    Tensor<T> out(image_shape(input.rank(), d.n, oc, g.ho, g.wo));
    if (taps.empty()) {
        for (std::size_t n = 0; n < d.n; ++n)
            for (std::size_t o = 0; o < oc; ++o) std::fill_n(out.data() + (n * oc + o) * plane, plane, layer.bias[o]);
        return out;
    }

    // Items are laid side by side so one GEMM covers a whole chunk.
    const auto w = detail::gather_weights(layer, taps);
    const bool pointwise = detail::is_pointwise(layer);
    const std::size_t chunk = detail::chunk_items(rows, plane, d.n);
    detail::RowMatrix<T> cols(long(rows), long(chunk * plane));
    detail::RowMatrix<T> y(long(oc), long(chunk * plane));
    for (std::size_t n0 = 0; n0 < d.n; n0 += chunk) {
        const std::size_t m = std::min(chunk, d.n - n0);
        const std::size_t ld = m * plane;
        for (std::size_t j = 0; j < m; ++j) {
            const T* src = input.data() + (n0 + j) * d.item();
            if (pointwise) {
                for (std::size_t r = 0; r < rows; ++r) std::copy_n(src + r * plane, plane, cols.data() + r * ld + j * plane);
            } else {
                detail::im2col(src, g, taps, cols.data() + j * plane, ld);
            }
        }
        detail::ConstMatrixMap<T> c(cols.data(), long(rows), long(ld));
        detail::MatrixMap<T> yy(y.data(), long(oc), long(ld));
        yy.noalias() = w * c;
        for (std::size_t j = 0; j < m; ++j)
            for (std::size_t o = 0; o < oc; ++o) {
                const T* from = yy.data() + o * ld + j * plane;
                T* to = out.data() + ((n0 + j) * oc + o) * plane;
                const T b = layer.bias[o];
                for (std::size_t p = 0; p < plane; ++p) to[p] = from[p] + b;
            }
    }
    check_finite(out, "conv2d_forward");
    return out;
}

/// Gradients of conv2d_forward. `grads` must be shaped like the layer's
/// weights/bias; results are added to what is already there. When
/// `input_grad` is non-null it receives (overwrites) the input gradient.
template <typename T>
void conv2d_backward_accumulate(const Tensor<T>& grad_out, const Tensor<T>& saved_input, const ConvLayer<T>& layer,
                                Tensor<T>& weight_grad, Tensor<T>& bias_grad, Tensor<T>* input_grad)
{
    const ImageDims d = image_dims(saved_input);
    const auto g = detail::geometry(layer, d);
    const ImageDims od = image_dims(grad_out);
    if (od.n != d.n || od.c != std::size_t(layer.out_channels) || od.h != g.ho || od.w != g.wo)
        throw std::invalid_argument("conv grad_out shape " + shape_string(grad_out.shape()) +
                                    " does not match forward output");
    if (weight_grad.shape() != layer.weights.shape() || bias_grad.shape() != layer.bias.shape())
        throw std::invalid_argument("conv gradient buffers do not match layer parameters");

    const auto taps = layer.active_taps();
    const std::size_t rows = d.c * taps.size();
    const std::size_t plane = g.ho * g.wo;
    const std::size_t oc = std::size_t(layer.out_channels);
    if (input_grad) *input_grad = Tensor<T>(saved_input.shape());
    // A plain loop: Eigen's vectorised sum picks its order from pointer
    // alignment, which would make results vary between runs.
    for (std::size_t n = 0; n < d.n; ++n)
        for (std::size_t o = 0; o < oc; ++o) {
            const T* dy = grad_out.data() + n * od.item() + o * plane;
            T sum = T(0);
            for (std::size_t p = 0; p < plane; ++p) sum += dy[p];
            bias_grad[o] += sum;
        }
    if (taps.empty()) return;

    const auto w = detail::gather_weights(layer, taps);
    const bool pointwise = detail::is_pointwise(layer);
    // With fewer outputs than inputs, correlating grad_out with the flipped
    // kernel touches a smaller column buffer than scattering through col2im.
    const bool flipped = !pointwise && layer.stride == 1 && oc <= d.c;
    const std::size_t chunk = detail::chunk_items(rows, plane, d.n);
    detail::RowMatrix<T> dw = detail::RowMatrix<T>::Zero(long(oc), long(rows));
    detail::RowMatrix<T> cols(long(rows), long(chunk * plane));
    detail::RowMatrix<T> dys(long(oc), long(chunk * plane));
    detail::RowMatrix<T> dcols;
    for (std::size_t n0 = 0; n0 < d.n; n0 += chunk) {
        const std::size_t m = std::min(chunk, d.n - n0);
        const std::size_t ld = m * plane;
        for (std::size_t j = 0; j < m; ++j) {
            const T* src = saved_input.data() + (n0 + j) * d.item();
            if (pointwise) {
                for (std::size_t r = 0; r < rows; ++r) std::copy_n(src + r * plane, plane, cols.data() + r * ld + j * plane);
            } else {
                detail::im2col(src, g, taps, cols.data() + j * plane, ld);
            }
            for (std::size_t o = 0; o < oc; ++o)
                std::copy_n(grad_out.data() + (n0 + j) * od.item() + o * plane, plane, dys.data() + o * ld + j * plane);
        }
        detail::ConstMatrixMap<T> c(cols.data(), long(rows), long(ld));
        detail::ConstMatrixMap<T> dy(dys.data(), long(oc), long(ld));
        dw.noalias() += dy * c.transpose();
        if (!input_grad || flipped) continue;
        dcols.noalias() = w.transpose() * dy;
        for (std::size_t j = 0; j < m; ++j) {
            T* dst = input_grad->data() + (n0 + j) * d.item();
            if (pointwise) {
                for (std::size_t r = 0; r < rows; ++r) {
                    const T* from = dcols.data() + r * ld + j * plane;
                    for (std::size_t p = 0; p < plane; ++p) dst[r * plane + p] += from[p];
                }
            } else {
                detail::col2im_add(dcols.data() + j * plane, ld, g, taps, dst);
            }
        }
    }

    if (input_grad && flipped) detail::input_grad_by_flipped_conv(grad_out, layer, taps, d, g, *input_grad);

    const std::size_t nt = taps.size();
    for (int o = 0; o < layer.out_channels; ++o)
        for (int i = 0; i < layer.in_channels; ++i)
            for (std::size_t t = 0; t < nt; ++t)
                weight_grad[layer.weight_index(o, i, taps[t] / layer.kernel, taps[t] % layer.kernel)] +=
                    dw(o, static_cast<long>(i * nt + t));
}

template <typename T>
ConvGrads<T> conv2d_backward(const Tensor<T>& grad_out, const Tensor<T>& saved_input, const ConvLayer<T>& layer)
{
    ConvGrads<T> g{Tensor<T>(), Tensor<T>(layer.weights.shape()), Tensor<T>(layer.bias.shape())};
    conv2d_backward_accumulate(grad_out, saved_input, layer, g.weights, g.bias, &g.input);
    return g;
}

}  // namespace crossgo::nn
