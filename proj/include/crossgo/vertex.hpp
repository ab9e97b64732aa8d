#pragma once

#include <cctype>
#include <optional>
#include <string>
#include <string_view>

#include "crossgo/board.hpp"

namespace crossgo {

// GTP vertex notation: column letters A..Z without I, row numbers counted
// from the bottom edge. Row 0 of a Coord is the top edge.

inline char column_letter(int col)
{
    return static_cast<char>('A' + col + (col >= 8 ? 1 : 0));
}

inline std::string to_vertex(Move m, int size)
{
    if (m.is_pass()) return "pass";
    const Coord c = m.coord();
    return std::string(1, column_letter(c.col)) + std::to_string(size - c.row);
}

/// Parses "Q16", "q16" or "pass"; nullopt when malformed or off the board.
inline std::optional<Move> parse_vertex(std::string_view v, int size)
{
    std::string s;
    for (char ch : v) s += static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
    if (s == "pass") return Move::pass();
    if (s.size() < 2 || s.size() > 3 || s[0] < 'a' || s[0] > 'z' || s[0] == 'i') return std::nullopt;
    const int col = s[0] - 'a' - (s[0] > 'i' ? 1 : 0);
    int number = 0;
    for (std::size_t i = 1; i < s.size(); ++i) {
        if (!std::isdigit(static_cast<unsigned char>(s[i]))) return std::nullopt;
        number = number * 10 + (s[i] - '0');
    }
    const int row = size - number;
    if (col >= size || number < 1 || row < 0) return std::nullopt;
    return Move::play(row, col);
}

}  // namespace crossgo
