#pragma once

#include <cctype>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "crossgo/board.hpp"

namespace crossgo {

class SgfError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Main line of one game: setup stones, then moves in order.
struct GameRecord {
    int board_size = kDefaultBoardSize;
    std::vector<Coord> setup_black;
    std::vector<Coord> setup_white;
    std::optional<Color> first_to_move;  // PL property, if present
    std::vector<Turn> moves;
    std::map<std::string, std::string> metadata;  // PB, PW, RE, KM, DT and anything else, verbatim

    /// Side to move before the first move: PL, else the first move's colour,
    /// else White when only black stones were set up (handicap), else Black.
    Color starting_color() const
    {
        if (first_to_move) return *first_to_move;
        if (!moves.empty()) return moves.front().color;
        return !setup_black.empty() && setup_white.empty() ? Color::White : Color::Black;
    }

    BoardState initial_position() const
    {
        return BoardState::from_setup(board_size, setup_black, setup_white, starting_color());
    }
};

namespace detail::sgf {

using Property = std::pair<std::string, std::vector<std::string>>;
using Node = std::vector<Property>;

class Reader {
public:
    explicit Reader(std::string_view text) : s_(text) {}

    // Reads the first game tree and returns the nodes along its main line
    // (the first variation at every branch).
    std::vector<Node> main_line()
    {
        skip_ws();
        expect('(');
        std::vector<Node> nodes;
        tree(nodes, true);
        return nodes;
    }

private:
    void tree(std::vector<Node>& nodes, bool keep)
    {
        skip_ws();
        if (peek() != ';') fail("expected ';' to start a node");
        while (peek() == ';') {
            ++pos_;
            Node n = node();
            if (keep) nodes.push_back(std::move(n));
            skip_ws();
        }
        bool first = true;
        while (peek() == '(') {
            ++pos_;
            tree(nodes, keep && first);
            first = false;
            skip_ws();
        }
        expect(')');
    }

    Node node()
    {
        Node n;
        skip_ws();
        while (pos_ < s_.size() && std::isalpha(static_cast<unsigned char>(s_[pos_]))) {
            std::string id;
            // FF[3] allows lowercase letters inside identifiers; only capitals count.
            while (pos_ < s_.size() && std::isalpha(static_cast<unsigned char>(s_[pos_]))) {
                if (std::isupper(static_cast<unsigned char>(s_[pos_]))) id += s_[pos_];
                ++pos_;
            }
            if (id.empty()) fail("property identifier without capital letters");
            std::vector<std::string> values;
            skip_ws();
            if (peek() != '[') fail("property " + id + " has no value");
            while (peek() == '[') {
                ++pos_;
                values.push_back(value());
                skip_ws();
            }
            n.emplace_back(std::move(id), std::move(values));
        }
        return n;
    }

    std::string value()
    {
        std::string v;
        while (true) {
            if (pos_ >= s_.size()) fail("unterminated property value");
            const char c = s_[pos_++];
            if (c == ']') return v;
            if (c == '\\') {
                if (pos_ >= s_.size()) fail("unterminated escape");
                const char e = s_[pos_++];
                if (e == '\n' || e == '\r') {  // soft line break
                    if (pos_ < s_.size() && (s_[pos_] == '\n' || s_[pos_] == '\r') && s_[pos_] != e) ++pos_;
                    continue;
                }
                v += e;
                continue;
            }
            v += c;
        }
    }

    void skip_ws()
    {
        while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
    }

    char peek()
    {
        skip_ws();
        return pos_ < s_.size() ? s_[pos_] : '\0';
    }

    void expect(char c)
    {
        if (peek() != c) fail(std::string("expected '") + c + "'");
        ++pos_;
    }

    [[noreturn]] void fail(const std::string& what) const
    {
        throw SgfError("sgf offset " + std::to_string(pos_) + ": " + what);
    }

    std::string_view s_;
    std::size_t pos_ = 0;
};

inline int parse_size(const std::string& v)
{
    auto colon = v.find(':');
    try {
        if (colon != std::string::npos) {
            const int w = std::stoi(v.substr(0, colon));
            const int h = std::stoi(v.substr(colon + 1));
            if (w != h) throw SgfError("non-square board " + v);
            return w;
        }
        return std::stoi(v);
    } catch (const std::logic_error&) {
        throw SgfError("bad SZ value '" + v + "'");
    }
}

// Letters a..z then A..Z index 0..51; the first letter is the column.
inline int letter_index(char c)
{
    if (c >= 'a' && c <= 'z') return c - 'a';
    if (c >= 'A' && c <= 'Z') return 26 + (c - 'A');
    return -1;
}

inline Move parse_move(const std::string& v, int size)
{
    if (v.empty()) return Move::pass();
    if (v == "tt" && size <= 19) return Move::pass();
    if (v.size() != 2) throw SgfError("bad move value '" + v + "'");
    const int col = letter_index(v[0]);
    const int row = letter_index(v[1]);
    if (col < 0 || row < 0 || col >= size || row >= size) throw SgfError("move '" + v + "' is off the board");
    return Move::play(row, col);
}

// Point lists accept compressed rectangles such as "aa:cc".
inline std::vector<Coord> parse_points(const std::vector<std::string>& values, int size)
{
    std::vector<Coord> out;
    for (const auto& v : values) {
        if (v.size() == 5 && v[2] == ':') {
            const Coord a = parse_move(v.substr(0, 2), size).coord();
            const Coord b = parse_move(v.substr(3, 2), size).coord();
            for (int r = std::min(a.row, b.row); r <= std::max(a.row, b.row); ++r)
                for (int c = std::min(a.col, b.col); c <= std::max(a.col, b.col); ++c) out.push_back({r, c});
            continue;
        }
        const Move m = parse_move(v, size);
        if (m.is_pass()) throw SgfError("setup point cannot be a pass");
        out.push_back(m.coord());
    }
    return out;
}

inline std::string point_letters(Coord c)
{
    auto letter = [](int i) { return static_cast<char>(i < 26 ? 'a' + i : 'A' + (i - 26)); };
    return {letter(c.col), letter(c.row)};
}

inline std::string escape(const std::string& v)
{
    std::string out;
    for (char c : v) {
        if (c == ']' || c == '\\') out += '\\';
        out += c;
    }
    return out;
}

}  // namespace detail::sgf

/// Parses the main line of the first game in an SGF collection.
///
/// Setup stones (AB/AW) are accepted before the first move; setup after a
/// move makes the record unusable and is rejected. Boards must be square and
/// at most 25 points wide.
inline GameRecord parse_sgf(std::string_view text)
{
    using namespace detail::sgf;
    auto nodes = Reader(text).main_line();
    if (nodes.empty()) throw SgfError("empty game tree");

    GameRecord rec;
    for (const auto& [id, values] : nodes.front())
        if (id == "SZ") rec.board_size = parse_size(values.front());
    if (rec.board_size < kMinBoardSize || rec.board_size > kMaxBoardSize)
        throw SgfError("unsupported board size " + std::to_string(rec.board_size));
    for (const auto& [id, values] : nodes.front())
        if (id == "GM" && values.front() != "1") throw SgfError("not a Go record (GM[" + values.front() + "])");

    for (const auto& node : nodes) {
        for (const auto& [id, values] : node) {
            if (id == "B" || id == "W") {
                const Color c = id == "B" ? Color::Black : Color::White;
                rec.moves.push_back({parse_move(values.front(), rec.board_size), c});
            } else if (id == "AB" || id == "AW" || id == "AE") {
                if (!rec.moves.empty()) throw SgfError("setup stones after the first move");
                auto pts = parse_points(values, rec.board_size);
                auto& add = id == "AB" ? rec.setup_black : rec.setup_white;
                if (id == "AE") {
                    auto erase = [&](std::vector<Coord>& v) {
                        std::erase_if(v, [&](Coord c) { return std::find(pts.begin(), pts.end(), c) != pts.end(); });
                    };
                    erase(rec.setup_black);
                    erase(rec.setup_white);
                } else {
                    add.insert(add.end(), pts.begin(), pts.end());
                }
            } else if (id == "PL") {
                if (!rec.moves.empty()) continue;
                const char p = values.front().empty() ? '\0' : static_cast<char>(std::toupper(values.front()[0]));
                if (p == 'B' || p == '1') rec.first_to_move = Color::Black;
                else if (p == 'W' || p == '2') rec.first_to_move = Color::White;
                else throw SgfError("bad PL value '" + values.front() + "'");
            } else if (&node == &nodes.front() && id != "SZ") {
                rec.metadata.emplace(id, values.front());
            }
        }
    }
    return rec;
}

/// Writes a record as a single-line main-line SGF.
inline std::string write_sgf(const GameRecord& rec)
{
    using detail::sgf::escape;
    using detail::sgf::point_letters;
    std::ostringstream out;
    out << "(;GM[1]FF[4]CA[UTF-8]SZ[" << rec.board_size << "]";
    for (const auto& [k, v] : rec.metadata)
        if (k != "GM" && k != "FF" && k != "CA") out << k << "[" << escape(v) << "]";
    if (!rec.setup_black.empty()) {
        out << "AB";
        for (Coord c : rec.setup_black) out << "[" << point_letters(c) << "]";
    }
    if (!rec.setup_white.empty()) {
        out << "AW";
        for (Coord c : rec.setup_white) out << "[" << point_letters(c) << "]";
    }
    if (rec.first_to_move) out << "PL[" << (*rec.first_to_move == Color::Black ? "B" : "W") << "]";
    for (const auto& t : rec.moves) {
        out << ";" << (t.color == Color::Black ? "B" : "W") << "[";
        if (t.move.is_play()) out << point_letters(t.move.coord());
        out << "]";
    }
    out << ")\n";
    return out.str();
}

/// Where and why replay of a record stopped early.
struct Truncation {
    std::size_t move_index;  // 0-based index of the offending move
    std::string reason;
};

struct Replay {
    /// (state before move i, move i) for every replayed move.
    std::vector<std::pair<BoardState, Move>> pairs;
    std::optional<Truncation> truncation;
    BoardState final_state{kDefaultBoardSize};
};

/// Replays a record through the rules kernel, stopping at the first illegal
/// or out-of-turn move.
inline Replay replay(const GameRecord& rec)
{
    Replay out;
    BoardState s = rec.initial_position();
    for (std::size_t i = 0; i < rec.moves.size(); ++i) {
        const auto& t = rec.moves[i];
        if (t.color != s.to_move()) {
            out.truncation = Truncation{i, std::string("out of turn: ") + std::string(color_name(t.color)) + " to play"};
            break;
        }
        if (auto rule = violation(s, t.move)) {
            out.truncation = Truncation{i, std::string(rule_name(*rule))};
            break;
        }
        out.pairs.emplace_back(s, t.move);
        s = play(s, t.move);
    }
    out.final_state = std::move(s);
    return out;
}

}  // namespace crossgo
