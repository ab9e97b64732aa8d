#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "crossgo/symmetry.hpp"

namespace crossgo {

inline constexpr int kMinBoardSize = 2;
inline constexpr int kMaxBoardSize = 25;
inline constexpr int kDefaultBoardSize = 19;

enum class Color : std::uint8_t { Empty = 0, Black = 1, White = 2 };

constexpr Color opponent(Color c)
{
    switch (c) {
    case Color::Black: return Color::White;
    case Color::White: return Color::Black;
    default: return Color::Empty;
    }
}

inline std::string_view color_name(Color c)
{
    switch (c) {
    case Color::Black: return "black";
    case Color::White: return "white";
    default: return "empty";
    }
}

struct Coord {
    int row = 0;
    int col = 0;

    constexpr auto operator<=>(const Coord&) const = default;
};

/// A board play or a pass. Passes carry no coordinate.
class Move {
public:
    static constexpr Move play(Coord c) { return Move(c); }
    static constexpr Move play(int row, int col) { return Move(Coord{row, col}); }
    static constexpr Move pass() { return Move(); }

    constexpr bool is_pass() const { return !coord_.has_value(); }
    constexpr bool is_play() const { return coord_.has_value(); }

    Coord coord() const
    {
        if (!coord_) throw std::logic_error("pass has no coordinate");
        return *coord_;
    }

    constexpr bool operator==(const Move&) const = default;

private:
    constexpr Move() = default;
    constexpr explicit Move(Coord c) : coord_(c) {}

    std::optional<Coord> coord_;
};

struct Turn {
    Move move = Move::pass();
    Color color = Color::Black;

    bool operator==(const Turn&) const = default;
};

/// The rule a rejected move violates.
enum class Rule { Occupied, Suicide, Superko, OffBoard };

inline std::string_view rule_name(Rule r)
{
    switch (r) {
    case Rule::Occupied: return "occupied";
    case Rule::Suicide: return "suicide";
    case Rule::Superko: return "superko";
    case Rule::OffBoard: return "off_board";
    }
    return "unknown";
}

class IllegalMove : public std::runtime_error {
public:
    explicit IllegalMove(Rule rule)
        : std::runtime_error("illegal move: " + std::string(rule_name(rule))), rule_(rule)
    {
    }

    Rule rule() const { return rule_; }

private:
    Rule rule_;
};

/// A maximal 4-connected same-colour chain. Both lists are sorted row-major.
struct GroupInfo {
    Color color = Color::Empty;
    std::vector<Coord> stones;
    std::vector<Coord> liberties;
};

namespace detail {

constexpr std::uint64_t splitmix64(std::uint64_t& state)
{
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// Indexed by row * kMaxBoardSize + col so that signatures do not depend on
// the board size a position happens to live on.
inline constexpr auto kZobrist = [] {
    std::array<std::array<std::uint64_t, 2>, kMaxBoardSize * kMaxBoardSize> table{};
    std::uint64_t state = 0x43524f5353474f31ULL;
    for (auto& entry : table) {
        entry[0] = splitmix64(state);
        entry[1] = splitmix64(state);
    }
    return table;
}();

inline std::uint64_t zobrist(int row, int col, Color c)
{
    return kZobrist[static_cast<std::size_t>(row * kMaxBoardSize + col)][c == Color::Black ? 0 : 1];
}

template <typename F>
inline void for_each_neighbor(int index, int size, F&& f)
{
    const int row = index / size;
    const int col = index % size;
    if (row > 0) f(index - size);
    if (row + 1 < size) f(index + size);
    if (col > 0) f(index - 1);
    if (col + 1 < size) f(index + 1);
}

}  // namespace detail

/// Position signature computed from scratch. Equal layouts give equal values.
inline std::uint64_t compute_signature(std::span<const Color> points, int size)
{
    std::uint64_t h = 0;
    for (int i = 0; i < size * size; ++i)
        if (points[i] != Color::Empty) h ^= detail::zobrist(i / size, i % size, points[i]);
    return h;
}

/// A full game position. Values are immutable through the public API:
/// `play` returns a successor and never touches its argument.
class BoardState {
public:
    explicit BoardState(int size = kDefaultBoardSize) : size_(size)
    {
        if (size < kMinBoardSize || size > kMaxBoardSize)
            throw std::invalid_argument("board size must be in 2..25, got " + std::to_string(size));
        points_.assign(static_cast<std::size_t>(size * size), Color::Empty);
        initial_ = std::make_shared<const std::vector<Color>>(points_);
        hashes_.push_back(hash_);
    }

    /// A position with pre-placed stones, e.g. handicap stones or a test fixture.
    static BoardState from_setup(int size, std::span<const Coord> black, std::span<const Coord> white,
                                 Color to_move = Color::Black)
    {
        BoardState s(size);
        auto place = [&](Coord c, Color color) {
            if (!s.on_board(c)) throw std::invalid_argument("setup stone off board");
            s.points_[s.index(c)] = color;
        };
        for (Coord c : black) place(c, Color::Black);
        for (Coord c : white) place(c, Color::White);
        s.to_move_ = to_move;
        s.initial_to_move_ = to_move;
        s.hash_ = compute_signature(s.points_, size);
        s.hashes_ = {s.hash_};
        s.initial_ = std::make_shared<const std::vector<Color>>(s.points_);
        return s;
    }

    int size() const { return size_; }
    int area() const { return size_ * size_; }
    bool on_board(Coord c) const { return c.row >= 0 && c.col >= 0 && c.row < size_ && c.col < size_; }
    int index(Coord c) const { return c.row * size_ + c.col; }
    Coord coord(int index) const { return {index / size_, index % size_}; }

    Color at(Coord c) const { return points_[static_cast<std::size_t>(index(c))]; }
    Color at(int index) const { return points_[static_cast<std::size_t>(index)]; }
    std::span<const Color> points() const { return points_; }

    Color to_move() const { return to_move_; }
    const std::vector<Turn>& history() const { return history_; }
    /// One signature for the starting position plus one per completed move.
    const std::vector<std::uint64_t>& position_hashes() const { return hashes_; }
    std::uint64_t signature() const { return hash_; }
    int captures(Color by) const { return by == Color::Black ? captures_black_ : captures_white_; }

    bool seen(std::uint64_t signature) const
    {
        return std::find(hashes_.begin(), hashes_.end(), signature) != hashes_.end();
    }

    /// The position this game started from (empty board or setup stones).
    BoardState initial_position() const
    {
        BoardState s(size_);
        s.points_ = *initial_;
        s.initial_ = initial_;
        s.to_move_ = initial_to_move_;
        s.initial_to_move_ = initial_to_move_;
        s.hash_ = compute_signature(s.points_, size_);
        s.hashes_ = {s.hash_};
        return s;
    }

    /// Same position with a different side to move; history is unchanged.
    /// Used where a controller asks one colour to move twice (GTP).
    BoardState with_to_move(Color c) const
    {
        if (c == Color::Empty) throw std::invalid_argument("side to move must be a colour");
        BoardState s = *this;
        s.to_move_ = c;
        return s;
    }

    bool operator==(const BoardState& o) const
    {
        return size_ == o.size_ && points_ == o.points_ && to_move_ == o.to_move_ &&
               history_ == o.history_ && hashes_ == o.hashes_ && hash_ == o.hash_ &&
               captures_black_ == o.captures_black_ && captures_white_ == o.captures_white_ &&
               *initial_ == *o.initial_ && initial_to_move_ == o.initial_to_move_;
    }

private:
    friend BoardState play(const BoardState& state, Move move);

    int size_;
    std::vector<Color> points_;
    Color to_move_ = Color::Black;
    std::vector<Turn> history_;
    std::vector<std::uint64_t> hashes_;
    std::uint64_t hash_ = 0;
    int captures_black_ = 0;
    int captures_white_ = 0;
    std::shared_ptr<const std::vector<Color>> initial_;
    Color initial_to_move_ = Color::Black;
};

inline BoardState new_board(int size = kDefaultBoardSize)
{
    return BoardState(size);
}

namespace detail {

/// Result of tentatively placing a stone: the successor grid with captures
/// applied, or the rule that forbids the placement.
struct Placement {
    std::optional<Rule> violation;
    std::vector<Color> points;
    std::uint64_t hash = 0;
    int captured = 0;
    int liberties = 0;
};

// Flood-fills the chain containing `start`; returns its stones and counts its
// distinct liberties. `mark` must be zero on entry and is left dirty.
inline int flood(std::span<const Color> points, int size, int start, std::vector<int>& stones,
                 std::vector<std::uint8_t>& mark)
{
    const Color color = points[start];
    stones.clear();
    stones.push_back(start);
    mark[start] = 1;
    int liberties = 0;
    for (std::size_t i = 0; i < stones.size(); ++i) {
        for_each_neighbor(stones[i], size, [&](int n) {
            if (mark[n]) return;
            if (points[n] == color) {
                mark[n] = 1;
                stones.push_back(n);
            } else if (points[n] == Color::Empty) {
                mark[n] = 2;
                ++liberties;
            }
        });
    }
    return liberties;
}

inline Placement place(const BoardState& state, Coord c, Color color)
{
    Placement out;
    if (!state.on_board(c)) {
        out.violation = Rule::OffBoard;
        return out;
    }
    const int p = state.index(c);
    if (state.at(p) != Color::Empty) {
        out.violation = Rule::Occupied;
        return out;
    }
    const int size = state.size();
    out.points.assign(state.points().begin(), state.points().end());
    out.points[p] = color;
    out.hash = state.signature() ^ zobrist(c.row, c.col, color);

    std::vector<int> stones;
    std::vector<std::uint8_t> mark(out.points.size());
    const Color them = opponent(color);
    for_each_neighbor(p, size, [&](int n) {
        if (out.points[n] != them) return;
        std::fill(mark.begin(), mark.end(), 0);
        if (flood(out.points, size, n, stones, mark) > 0) return;
        for (int s : stones) {
            out.points[s] = Color::Empty;
            out.hash ^= zobrist(s / size, s % size, them);
        }
        out.captured += static_cast<int>(stones.size());
    });

    std::fill(mark.begin(), mark.end(), 0);
    out.liberties = flood(out.points, size, p, stones, mark);
    if (out.liberties == 0)
        out.violation = Rule::Suicide;
    else if (state.seen(out.hash))
        out.violation = Rule::Superko;
    return out;
}

}  // namespace detail

inline GroupInfo group_at(const BoardState& state, Coord c)
{
    if (!state.on_board(c)) throw std::invalid_argument("group_at: coordinate off board");
    if (state.at(c) == Color::Empty) throw std::invalid_argument("group_at: point is empty");
    std::vector<int> stones;
    std::vector<std::uint8_t> mark(static_cast<std::size_t>(state.area()));
    detail::flood(state.points(), state.size(), state.index(c), stones, mark);
    GroupInfo g;
    g.color = state.at(c);
    for (int i = 0; i < state.area(); ++i) {
        if (mark[i] == 1) g.stones.push_back(state.coord(i));
        if (mark[i] == 2) g.liberties.push_back(state.coord(i));
    }
    return g;
}

/// Why `move` is illegal for the side to move, or nullopt when it is legal.
inline std::optional<Rule> violation(const BoardState& state, Move move)
{
    if (move.is_pass()) return std::nullopt;
    return detail::place(state, move.coord(), state.to_move()).violation;
}

inline bool is_legal(const BoardState& state, Move move)
{
    return !violation(state, move).has_value();
}

inline BoardState play(const BoardState& state, Move move)
{
    const Color mover = state.to_move();
    BoardState next = state;
    if (move.is_play()) {
        auto placed = detail::place(state, move.coord(), mover);
        if (placed.violation) throw IllegalMove(*placed.violation);
        next.points_ = std::move(placed.points);
        next.hash_ = placed.hash;
        (mover == Color::Black ? next.captures_black_ : next.captures_white_) += placed.captured;
    }
    next.to_move_ = opponent(mover);
    next.history_.push_back({move, mover});
    next.hashes_.push_back(next.hash_);
    return next;
}

/// Every legal move for the side to move: plays in row-major order, then Pass.
inline std::vector<Move> legal_moves(const BoardState& state)
{
    std::vector<Move> out;
    for (int i = 0; i < state.area(); ++i) {
        Move m = Move::play(state.coord(i));
        if (is_legal(state, m)) out.push_back(m);
    }
    out.push_back(Move::pass());
    return out;
}

/// Liberties of the played stone's chain in the successor position.
inline int liberties_after_move(const BoardState& state, Coord c)
{
    auto placed = detail::place(state, c, state.to_move());
    if (placed.violation) throw IllegalMove(*placed.violation);
    return placed.liberties;
}

inline std::uint64_t position_signature(const BoardState& state)
{
    return state.signature();
}

/// The whole game mapped through a board symmetry, history included, so that
/// superko bans and move recency transform along with the stones.
inline BoardState transformed(const BoardState& state, Symmetry sym)
{
    const int n = state.size();
    BoardState start = state.initial_position();
    std::vector<Coord> black, white;
    for (int i = 0; i < state.area(); ++i) {
        auto [r, c] = sym.apply(i / n, i % n, n);
        if (start.at(i) == Color::Black) black.push_back({r, c});
        if (start.at(i) == Color::White) white.push_back({r, c});
    }
    BoardState out = BoardState::from_setup(n, black, white, start.to_move());
    for (const Turn& t : state.history()) {
        if (out.to_move() != t.color) out = out.with_to_move(t.color);
        if (t.move.is_pass()) {
            out = play(out, Move::pass());
        } else {
            auto [r, c] = sym.apply(t.move.coord().row, t.move.coord().col, n);
            out = play(out, Move::play(r, c));
        }
    }
    if (out.to_move() != state.to_move()) out = out.with_to_move(state.to_move());
    return out;
}

/// Plain text diagram, top row first: X black, O white, . empty.
inline std::string to_diagram(const BoardState& state)
{
    std::string out;
    for (int r = 0; r < state.size(); ++r) {
        for (int c = 0; c < state.size(); ++c) {
            Color p = state.at(Coord{r, c});
            out += p == Color::Black ? 'X' : p == Color::White ? 'O' : '.';
        }
        out += '\n';
    }
    return out;
}

}  // namespace crossgo
