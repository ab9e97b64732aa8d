#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace crossgo::nn {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_size(const Shape& s)
{
    return std::accumulate(s.begin(), s.end(), std::size_t{1}, std::multiplies<>());
}

inline std::string shape_string(const Shape& s)
{
    std::string out = "(";
    for (std::size_t i = 0; i < s.size(); ++i) out += (i ? "," : "") + std::to_string(s[i]);
    return out + ")";
}

/// Dense row-major tensor. Image tensors are (C,H,W) or batched (N,C,H,W).
template <typename T = float>
class Tensor {
public:
    using value_type = T;

    Tensor() = default;
    explicit Tensor(Shape shape, T fill = T(0)) : shape_(std::move(shape)), data_(shape_size(shape_), fill) {}
    Tensor(Shape shape, std::vector<T> data) : shape_(std::move(shape)), data_(std::move(data))
    {
        if (data_.size() != shape_size(shape_))
            throw std::invalid_argument("tensor data length " + std::to_string(data_.size()) +
                                        " does not match shape " + shape_string(shape_));
    }

    const Shape& shape() const { return shape_; }
    std::size_t rank() const { return shape_.size(); }
    std::size_t dim(std::size_t i) const { return shape_.at(i); }
    std::size_t size() const { return data_.size(); }

    T* data() { return data_.data(); }
    const T* data() const { return data_.data(); }
    std::span<T> values() { return data_; }
    std::span<const T> values() const { return data_; }

    T& operator[](std::size_t i) { return data_[i]; }
    const T& operator[](std::size_t i) const { return data_[i]; }

    T& at(std::size_t c, std::size_t h, std::size_t w)
    {
        return data_[(c * shape_[rank() - 2] + h) * shape_[rank() - 1] + w];
    }
    const T& at(std::size_t c, std::size_t h, std::size_t w) const
    {
        return data_[(c * shape_[rank() - 2] + h) * shape_[rank() - 1] + w];
    }

    void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

    Tensor reshaped(Shape s) const
    {
        if (shape_size(s) != size()) throw std::invalid_argument("reshape changes element count");
        return Tensor(std::move(s), data_);
    }

    bool all_finite() const
    {
        for (T v : data_)
            if (!std::isfinite(v)) return false;
        return true;
    }

    bool operator==(const Tensor&) const = default;

private:
    Shape shape_;
    std::vector<T> data_;
};

/// Trips on NaN/Inf in debug builds; compiled out with NDEBUG.
template <typename T>
inline void check_finite([[maybe_unused]] const Tensor<T>& t, [[maybe_unused]] const char* where)
{
#ifndef NDEBUG
    if (!t.all_finite()) throw std::runtime_error(std::string("non-finite value after ") + where);
#endif
}

/// View of an image tensor as (N,C,H,W); rank-3 tensors count as N=1.
struct ImageDims {
    std::size_t n, c, h, w;

    std::size_t plane() const { return h * w; }
    std::size_t item() const { return c * h * w; }
};

template <typename T>
ImageDims image_dims(const Tensor<T>& t)
{
    if (t.rank() == 3) return {1, t.dim(0), t.dim(1), t.dim(2)};
    if (t.rank() == 4) return {t.dim(0), t.dim(1), t.dim(2), t.dim(3)};
    throw std::invalid_argument("expected a (C,H,W) or (N,C,H,W) tensor, got " + shape_string(t.shape()));
}

inline Shape image_shape(std::size_t rank, std::size_t n, std::size_t c, std::size_t h, std::size_t w)
{
    return rank == 3 ? Shape{c, h, w} : Shape{n, c, h, w};
}

}  // namespace crossgo::nn
