#pragma once

#include <algorithm>
#include <cctype>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "crossgo/engine.hpp"

namespace crossgo {

inline constexpr const char* kEngineName = "crossgo";
inline constexpr const char* kEngineVersion = "1.0.0";

/// GTP version 2 over text streams. Responses are "=[id] payload" or
/// "?[id] message", each followed by a blank line.
class GtpEngine {
public:
    explicit GtpEngine(Analyzer analyze, int board_size = kNetworkBoardSize)
        : analyze_(std::move(analyze)), size_(board_size), state_(new_board(board_size))
    {
    }

    const BoardState& state() const { return state_; }
    double komi() const { return komi_; }
    bool quit_requested() const { return quit_; }

    static const std::vector<std::string>& commands()
    {
        static const std::vector<std::string> list = {"protocol_version", "name",  "version",       "known_command",
                                                      "list_commands",    "quit",  "boardsize",     "clear_board",
                                                      "komi",             "play",  "genmove",       "showboard"};
        return list;
    }

    /// The full response for one input line, or nullopt for lines that carry
    /// no command (blank or comment only).
    std::optional<std::string> handle(std::string line)
    {
        line = clean(line);
        std::istringstream in(line);
        std::vector<std::string> words;
        for (std::string w; in >> w;) words.push_back(w);
        if (words.empty()) return std::nullopt;

        std::string id;
        if (std::all_of(words[0].begin(), words[0].end(), [](char c) { return std::isdigit(static_cast<unsigned char>(c)); })) {
            id = words[0];
            words.erase(words.begin());
        }
        if (words.empty()) return failure(id, "unknown command");
        const std::string cmd = words[0];
        const std::vector<std::string> args(words.begin() + 1, words.end());
        try {
            return dispatch(id, cmd, args);
        } catch (const std::exception& e) {
            return failure(id, e.what());
        }
    }

    /// Reads commands until quit or end of input. Returns 0.
    int serve(std::istream& in, std::ostream& out)
    {
        std::string line;
        while (!quit_ && std::getline(in, line)) {
            if (auto r = handle(line)) {
                out << *r << std::flush;
                if (!out) break;
            }
        }
        return 0;
    }

private:
    // Drops control characters other than tab, turns tabs into spaces and
    // strips comments.
    static std::string clean(const std::string& line)
    {
        std::string out;
        for (char c : line) {
            if (c == '#') break;
            if (c == '\t') c = ' ';
            if (static_cast<unsigned char>(c) < 32 || c == 127) continue;
            out += c;
        }
        return out;
    }

    static std::string success(const std::string& id, const std::string& payload)
    {
        return "=" + id + " " + payload + "\n\n";
    }

    static std::string failure(const std::string& id, const std::string& message)
    {
        return "?" + id + " " + message + "\n\n";
    }

    static std::optional<Color> parse_color(std::string s)
    {
        std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return char(std::tolower(c)); });
        if (s == "b" || s == "black") return Color::Black;
        if (s == "w" || s == "white") return Color::White;
        return std::nullopt;
    }

    std::string dispatch(const std::string& id, const std::string& cmd, const std::vector<std::string>& args)
    {
        auto need = [&](std::size_t n) {
            if (args.size() < n) throw std::runtime_error("syntax error");
        };
        if (cmd == "protocol_version") return success(id, "2");
        if (cmd == "name") return success(id, kEngineName);
        if (cmd == "version") return success(id, kEngineVersion);
        if (cmd == "known_command") {
            need(1);
            const auto& all = commands();
            return success(id, std::find(all.begin(), all.end(), args[0]) != all.end() ? "true" : "false");
        }
        if (cmd == "list_commands") {
            std::string list;
            for (const auto& c : commands()) list += (list.empty() ? "" : "\n") + c;
            return success(id, list);
        }
        if (cmd == "quit") {
            quit_ = true;
            return success(id, "");
        }
        if (cmd == "boardsize") {
            need(1);
            int n = 0;
            std::istringstream in(args[0]);
            if (!(in >> n) || !(in >> std::ws).eof()) return failure(id, "syntax error");
            if (n != size_) return failure(id, "unacceptable size");
            state_ = new_board(size_);
            return success(id, "");
        }
        if (cmd == "clear_board") {
            state_ = new_board(size_);
            return success(id, "");
        }
        if (cmd == "komi") {
            need(1);
            double k = 0.0;
            std::istringstream in(args[0]);
            if (!(in >> k) || !(in >> std::ws).eof()) return failure(id, "syntax error");
            komi_ = k;
            return success(id, "");
        }
        if (cmd == "play") {
            need(2);
            const auto color = parse_color(args[0]);
            const auto move = parse_vertex(args[1], size_);
            if (!color || !move) return failure(id, "syntax error");
            const auto s = state_.with_to_move(*color);
            if (!is_legal(s, *move)) return failure(id, "illegal move");
            state_ = play(s, *move);
            return success(id, "");
        }
        if (cmd == "genmove") {
            need(1);
            const auto color = parse_color(args[0]);
            if (!color) return failure(id, "syntax error");
            const auto s = state_.with_to_move(*color);
            const Move m = choose_move(s, analyze_(s));
            state_ = play(s, m);
            return success(id, to_vertex(m, size_));
        }
        if (cmd == "showboard") return success(id, "\n" + render_board(state_));
        return failure(id, "unknown command");
    }

    Analyzer analyze_;
    int size_;
    BoardState state_;
    double komi_ = 7.5;
    bool quit_ = false;
};

}  // namespace crossgo
