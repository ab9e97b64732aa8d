#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

#include "crossgo/nn/tensor.hpp"

namespace crossgo::nn {

template <typename T>
Tensor<T> relu(const Tensor<T>& x)
{
    Tensor<T> y = x;
    for (auto& v : y.values()) v = v > T(0) ? v : T(0);
    return y;
}

/// Gradient of relu; `saved` may be the pre-activation or the relu output,
/// both are positive at exactly the same places.
template <typename T>
Tensor<T> relu_backward(const Tensor<T>& grad, const Tensor<T>& saved)
{
    if (grad.shape() != saved.shape()) throw std::invalid_argument("relu_backward shape mismatch");
    Tensor<T> out = grad;
    for (std::size_t i = 0; i < out.size(); ++i)
        if (!(saved[i] > T(0))) out[i] = T(0);
    return out;
}

template <typename T>
void relu_backward_inplace(Tensor<T>& grad, const Tensor<T>& saved)
{
    if (grad.shape() != saved.shape()) throw std::invalid_argument("relu_backward shape mismatch");
    for (std::size_t i = 0; i < grad.size(); ++i)
        if (!(saved[i] > T(0))) grad[i] = T(0);
}

/// Concatenates image tensors along the channel axis, keeping input order.
template <typename T>
Tensor<T> concat_channels(std::span<const Tensor<T>* const> parts)
{
    if (parts.empty()) throw std::invalid_argument("concat_channels needs at least one input");
    const ImageDims first = image_dims(*parts[0]);
    std::size_t channels = 0;
    for (const auto* p : parts) {
        const ImageDims d = image_dims(*p);
        if (p->rank() != parts[0]->rank() || d.n != first.n || d.h != first.h || d.w != first.w)
            throw std::invalid_argument("concat_channels: batch or spatial dims differ");
        channels += d.c;
    }
    Tensor<T> out(image_shape(parts[0]->rank(), first.n, channels, first.h, first.w));
    const std::size_t plane = first.plane();
    for (std::size_t n = 0; n < first.n; ++n) {
        T* dst = out.data() + n * channels * plane;
        for (const auto* p : parts) {
            const std::size_t item = p->size() / first.n;
            std::copy_n(p->data() + n * item, item, dst);
            dst += item;
        }
    }
    return out;
}

template <typename T>
Tensor<T> concat_channels(const std::vector<Tensor<T>>& parts)
{
    std::vector<const Tensor<T>*> ptrs;
    for (const auto& p : parts) ptrs.push_back(&p);
    return concat_channels<T>(std::span<const Tensor<T>* const>(ptrs));
}

/// Backward of concat_channels: splits a gradient at the same boundaries.
template <typename T>
std::vector<Tensor<T>> split_channels(const Tensor<T>& grad, std::span<const std::size_t> channels)
{
    const ImageDims d = image_dims(grad);
    std::size_t total = 0;
    for (auto c : channels) total += c;
    if (total != d.c) throw std::invalid_argument("split_channels: channel counts do not sum to input");
    std::vector<Tensor<T>> out;
    std::size_t offset = 0;
    for (auto c : channels) {
        Tensor<T> part(image_shape(grad.rank(), d.n, c, d.h, d.w));
        for (std::size_t n = 0; n < d.n; ++n)
            std::copy_n(grad.data() + (n * d.c + offset) * d.plane(), c * d.plane(), part.data() + n * c * d.plane());
        out.push_back(std::move(part));
        offset += c;
    }
    return out;
}

template <typename T>
struct LossAndGrad {
    T loss;
    std::vector<T> grad;
};

/// Softmax with max subtraction; loss = -log p[label], grad = p - onehot.
template <typename T>
LossAndGrad<T> softmax_cross_entropy(std::span<const T> scores, int label)
{
    if (label < 0 || static_cast<std::size_t>(label) >= scores.size())
        throw std::out_of_range("softmax_cross_entropy: label out of range");
    const T peak = *std::max_element(scores.begin(), scores.end());
    std::vector<T> p(scores.size());
    double total = 0.0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        p[i] = static_cast<T>(std::exp(static_cast<double>(scores[i] - peak)));
        total += p[i];
    }
    const double log_total = std::log(total);
    for (auto& v : p) v = static_cast<T>(v / total);
    const T loss = static_cast<T>(log_total - static_cast<double>(scores[label] - peak));
    p[label] -= T(1);
    return {loss, std::move(p)};
}

/// p <- p - lr * g
template <typename T>
void sgd_step(Tensor<T>& params, const Tensor<T>& grads, T lr)
{
    if (params.shape() != grads.shape()) throw std::invalid_argument("sgd_step shape mismatch");
    for (std::size_t i = 0; i < params.size(); ++i) params[i] -= lr * grads[i];
}

}  // namespace crossgo::nn
