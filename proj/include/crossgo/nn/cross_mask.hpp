#pragma once

#include <cstdint>
#include <cstdlib>
#include <stdexcept>
#include <vector>

namespace crossgo::nn {

/// Largest cross width that still leaves a masked-out region: ceil(n/2 - 1).
constexpr int max_cross_width(int n)
{
    // ceil((n - 2) / 2) for integer n
    return n <= 2 ? 0 : (n - 1) / 2;
}

/// Whether (row, col) of an n x n filter lies in the cross area of width c:
/// on or within c-1 of either corner-to-corner diagonal.
constexpr bool in_cross_area(int n, int c, int row, int col)
{
    if (c <= 0) return false;
    return std::abs(row - col) <= c - 1 || std::abs(row + col - (n - 1)) <= c - 1;
}

/// Binary n x n filter mask for a cross-shaped convolution.
///
/// Width 0 masks everything (a zero convolution); widths above
/// max_cross_width(n) keep everything (an ordinary convolution).
class CrossMask {
public:
    CrossMask(int n, int width) : n_(n), width_(width)
    {
        if (n < 2) throw std::invalid_argument("cross mask size must be >= 2");
        if (width < 0) throw std::invalid_argument("cross width must be >= 0");
        bits_.resize(static_cast<std::size_t>(n * n));
        const bool full = width > max_cross_width(n);
        for (int r = 0; r < n; ++r)
            for (int q = 0; q < n; ++q)
                bits_[static_cast<std::size_t>(r * n + q)] = full || in_cross_area(n, width, r, q);
    }

    int size() const { return n_; }
    int width() const { return width_; }
    bool active(int row, int col) const { return bits_[static_cast<std::size_t>(row * n_ + col)] != 0; }
    const std::vector<std::uint8_t>& bits() const { return bits_; }

    int active_count() const
    {
        int k = 0;
        for (auto b : bits_) k += b;
        return k;
    }

    bool is_full() const { return active_count() == n_ * n_; }

    bool operator==(const CrossMask&) const = default;

private:
    int n_;
    int width_;
    std::vector<std::uint8_t> bits_;
};

inline CrossMask cross_mask(int n, int c)
{
    return CrossMask(n, c);
}

}  // namespace crossgo::nn
