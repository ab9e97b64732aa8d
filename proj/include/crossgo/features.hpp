#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "crossgo/board.hpp"
#include "crossgo/symmetry.hpp"

namespace crossgo {

/// Plane layout of the 24-plane input encoding. All planes are relative to
/// the player to move ("ours").
namespace planes {
inline constexpr int kOurs = 0;
inline constexpr int kTheirs = 1;
inline constexpr int kEmpty = 2;
inline constexpr int kLegal = 3;
inline constexpr int kLibertiesAfterMove = 4;  // 4 planes: 1, 2, 3, >=4
inline constexpr int kMovesAgo = 8;            // 8 planes: played 1..8 moves ago
inline constexpr int kLiberties = 16;          // 8 planes: 1..7, >=8
inline constexpr int kCount = 24;
}  // namespace planes

inline constexpr int kNetworkBoardSize = 19;

/// Binary planes x size x size, stored plane-major then row-major.
class FeatureTensor {
public:
    static constexpr int kPlanes = planes::kCount;

    explicit FeatureTensor(int size = kNetworkBoardSize, Color perspective = Color::Black)
        : size_(size), perspective_(perspective),
          data_(static_cast<std::size_t>(kPlanes * size * size), 0)
    {
    }

    int size() const { return size_; }
    int area() const { return size_ * size_; }
    Color perspective() const { return perspective_; }
    void set_perspective(Color c) { perspective_ = c; }

    std::uint8_t at(int plane, int row, int col) const { return data_[offset(plane, row, col)]; }
    void set(int plane, int row, int col, std::uint8_t value = 1) { data_[offset(plane, row, col)] = value; }

    std::span<const std::uint8_t> plane(int p) const
    {
        return std::span<const std::uint8_t>(data_).subspan(static_cast<std::size_t>(p * area()),
                                                            static_cast<std::size_t>(area()));
    }
    std::span<const std::uint8_t> data() const { return data_; }
    std::span<std::uint8_t> data() { return data_; }

    // Perspective is bookkeeping only; it is not part of the stored encoding.
    bool operator==(const FeatureTensor& o) const { return size_ == o.size_ && data_ == o.data_; }

private:
    std::size_t offset(int plane, int row, int col) const
    {
        return static_cast<std::size_t>((plane * size_ + row) * size_ + col);
    }

    int size_;
    Color perspective_;
    std::vector<std::uint8_t> data_;
};

namespace detail {

inline FeatureTensor encode_any_size(const BoardState& state)
{
    const int n = state.size();
    const Color us = state.to_move();
    const Color them = opponent(us);
    FeatureTensor t(n, us);

    std::vector<int> stones;
    std::vector<std::uint8_t> mark(static_cast<std::size_t>(state.area()));
    std::vector<int> chain_liberties(static_cast<std::size_t>(state.area()), 0);
    for (int i = 0; i < state.area(); ++i) {
        if (state.at(i) == Color::Empty || chain_liberties[i] > 0) continue;
        std::fill(mark.begin(), mark.end(), 0);
        const int libs = flood(state.points(), n, i, stones, mark);
        for (int s : stones) chain_liberties[s] = libs;
    }

    for (int i = 0; i < state.area(); ++i) {
        const int r = i / n;
        const int c = i % n;
        const Color p = state.at(i);
        if (p == us) t.set(planes::kOurs, r, c);
        if (p == them) t.set(planes::kTheirs, r, c);
        if (p == Color::Empty) {
            t.set(planes::kEmpty, r, c);
            auto placed = place(state, Coord{r, c}, us);
            if (!placed.violation) {
                t.set(planes::kLegal, r, c);
                t.set(planes::kLibertiesAfterMove + std::min(placed.liberties, 4) - 1, r, c);
            }
        } else {
            t.set(planes::kLiberties + std::min(chain_liberties[i], 8) - 1, r, c);
        }
    }

    // A pass uses up a recency slot without marking anything.
    const auto& history = state.history();
    const int recent = static_cast<int>(std::min<std::size_t>(history.size(), 8));
    for (int k = 1; k <= recent; ++k) {
        const Move& m = history[history.size() - static_cast<std::size_t>(k)].move;
        if (m.is_play()) t.set(planes::kMovesAgo + k - 1, m.coord().row, m.coord().col);
    }
    return t;
}

}  // namespace detail

/// Encodes a 19x19 position into the 24 input planes.
inline FeatureTensor encode(const BoardState& state)
{
    if (state.size() != kNetworkBoardSize)
        throw std::invalid_argument("feature encoding requires a 19x19 board");
    return detail::encode_any_size(state);
}

/// Applies the same rotation/reflection to every plane.
inline FeatureTensor transform(const FeatureTensor& in, Symmetry sym)
{
    const int n = in.size();
    FeatureTensor out(n, in.perspective());
    for (int p = 0; p < FeatureTensor::kPlanes; ++p)
        for (int r = 0; r < n; ++r)
            for (int c = 0; c < n; ++c) {
                auto [tr, tc] = sym.apply(r, c, n);
                out.set(p, tr, tc, in.at(p, r, c));
            }
    return out;
}

/// Moves a row-major n x n score map through `sym`.
template <typename T>
std::vector<T> transform_scores(std::span<const T> scores, int n, Symmetry sym)
{
    if (scores.size() != static_cast<std::size_t>(n * n))
        throw std::invalid_argument("score map size does not match board");
    std::vector<T> out(scores.size());
    for (int r = 0; r < n; ++r)
        for (int c = 0; c < n; ++c) {
            auto [tr, tc] = sym.apply(r, c, n);
            out[static_cast<std::size_t>(tr * n + tc)] = scores[static_cast<std::size_t>(r * n + c)];
        }
    return out;
}

/// Undoes `transform_scores(., n, sym)`; a pure permutation, so round trips are exact.
template <typename T>
std::vector<T> inverse_transform_scores(std::span<const T> scores, int n, Symmetry sym)
{
    return transform_scores(scores, n, sym.inverse());
}

}  // namespace crossgo
