#pragma once

#include <algorithm>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "crossgo/engine.hpp"

namespace crossgo {

inline constexpr int kApiVersion = 1;

/// A structured API failure; `code` is what clients match on.
class ApiError : public std::runtime_error {
public:
    ApiError(std::string code, const std::string& message) : std::runtime_error(message), code_(std::move(code)) {}
    const std::string& code() const { return code_; }

private:
    std::string code_;
};

struct LoggedMove {
    Turn turn;
    bool by_engine = false;
    std::vector<RankedMove> top_moves;  // engine moves: the top 10 it chose from
};

/// One game. Holds only state; the analyzer is shared by all sessions.
struct GameSession {
    std::string id;
    BoardState state = new_board();
    std::optional<Color> engine_color = Color::White;
    std::vector<LoggedMove> log;
    std::mutex mutex;

    /// Rebuilds the position from the log, which must replay cleanly.
    BoardState replay_log() const
    {
        auto s = new_board(state.size());
        for (const auto& m : log) s = play(s.with_to_move(m.turn.color), m.turn.move);
        return s;
    }
};

namespace detail {

inline std::string color_word(Color c)
{
    return c == Color::Black ? "black" : c == Color::White ? "white" : "none";
}

inline nlohmann::ordered_json ranked_json(const std::vector<RankedMove>& moves, int size)
{
    auto out = nlohmann::ordered_json::array();
    for (const auto& r : moves) out.push_back({{"vertex", to_vertex(r.move, size)}, {"probability", r.probability}});
    return out;
}

}  // namespace detail

/// Session-scoped JSON requests. Every reply carries "v", the request's
/// "type" echoed as "reply_to", and the client's "id" when one was sent.
class SessionManager {
public:
    explicit SessionManager(Analyzer analyze, int board_size = kNetworkBoardSize)
        : analyze_(std::move(analyze)), size_(board_size)
    {
    }

    std::size_t session_count() const
    {
        std::lock_guard lock(mutex_);
        return sessions_.size();
    }

    /// Handles one request; never throws.
    nlohmann::ordered_json handle(const nlohmann::json& request)
    {
        nlohmann::ordered_json reply;
        reply["v"] = kApiVersion;
        try {
            if (!request.is_object()) throw ApiError("bad_request", "request must be a JSON object");
            const std::string type = request.value("type", "");
            reply["reply_to"] = type;
            if (request.contains("id")) reply["id"] = request["id"];
            if (type == "new_game") return merge(reply, new_game(request));
            auto session = find(request);
            std::lock_guard lock(session->mutex);
            if (type == "play") return merge(reply, human_play(*session, request));
            if (type == "genmove") return merge(reply, engine_turn(*session));
            if (type == "top_moves") return merge(reply, top_moves(*session, request));
            if (type == "board_state") return merge(reply, state_message(*session));
            if (type == "undo") return merge(reply, undo(*session));
            throw ApiError("unknown_type", "unknown request type '" + type + "'");
        } catch (const ApiError& e) {
            reply["type"] = "error";
            reply["error"] = e.code();
            reply["message"] = e.what();
        } catch (const std::exception& e) {
            reply["type"] = "error";
            reply["error"] = "bad_request";
            reply["message"] = e.what();
        }
        return reply;
    }

    /// Parses text, handles it and serialises the reply.
    std::string handle_text(const std::string& text)
    {
        nlohmann::json request;
        try {
            request = nlohmann::json::parse(text);
        } catch (const std::exception& e) {
            nlohmann::ordered_json reply{{"v", kApiVersion}, {"type", "error"}, {"error", "bad_request"},
                                         {"message", std::string("invalid JSON: ") + e.what()}};
            return reply.dump();
        }
        return handle(request).dump();
    }

private:
    static nlohmann::ordered_json merge(nlohmann::ordered_json head, const nlohmann::ordered_json& body)
    {
        for (auto it = body.begin(); it != body.end(); ++it) head[it.key()] = it.value();
        return head;
    }

    std::shared_ptr<GameSession> find(const nlohmann::json& request)
    {
        if (!request.contains("session") || !request["session"].is_string())
            throw ApiError("bad_request", "request needs a session id");
        std::lock_guard lock(mutex_);
        auto it = sessions_.find(request["session"].get<std::string>());
        if (it == sessions_.end()) throw ApiError("unknown_session", "no session " + request["session"].get<std::string>());
        return it->second;
    }

    nlohmann::ordered_json new_game(const nlohmann::json& request)
    {
        auto s = std::make_shared<GameSession>();
        s->state = new_board(size_);
        const std::string human = request.value("human_color", "black");
        if (human == "black") {
            s->engine_color = Color::White;
        } else if (human == "white") {
            s->engine_color = Color::Black;
        } else if (human == "both") {
            s->engine_color = std::nullopt;
        } else {
            throw ApiError("bad_request", "human_color must be black, white or both");
        }
        {
            std::lock_guard lock(mutex_);
            s->id = "s" + std::to_string(++next_id_);
            sessions_[s->id] = s;
        }
        std::lock_guard lock(s->mutex);
        if (s->engine_color == s->state.to_move()) return engine_turn(*s);
        return state_message(*s);
    }

    nlohmann::ordered_json human_play(GameSession& s, const nlohmann::json& request)
    {
        if (!request.contains("vertex") || !request["vertex"].is_string())
            throw ApiError("bad_request", "play needs a vertex");
        const auto move = parse_vertex(request["vertex"].get<std::string>(), size_);
        if (!move) throw ApiError("bad_vertex", "cannot parse vertex '" + request["vertex"].get<std::string>() + "'");
        if (auto rule = violation(s.state, *move)) throw ApiError(std::string(rule_name(*rule)), "illegal move: " + std::string(rule_name(*rule)));
        s.log.push_back({{*move, s.state.to_move()}, false, {}});
        s.state = play(s.state, *move);
        if (s.engine_color == s.state.to_move()) return engine_turn(s);
        return state_message(s);
    }

    nlohmann::ordered_json engine_turn(GameSession& s)
    {
        const auto out = analyze_(s.state);
        const Move m = choose_move(s.state, out);
        auto snapshot = top_k(out, 10);
        const Color mover = s.state.to_move();
        s.log.push_back({{m, mover}, true, snapshot});
        s.state = play(s.state, m);
        auto msg = state_message(s);
        msg["engine_move"] = {{"color", detail::color_word(mover)},
                              {"vertex", to_vertex(m, size_)},
                              {"top_moves", detail::ranked_json(snapshot, size_)}};
        return msg;
    }

    nlohmann::ordered_json top_moves(GameSession& s, const nlohmann::json& request)
    {
        const int k = request.value("k", 10);
        if (k < 1 || k > s.state.area()) throw ApiError("bad_request", "k must be in 1.." + std::to_string(s.state.area()));
        nlohmann::ordered_json msg;
        msg["type"] = "top_moves";
        msg["session"] = s.id;
        msg["top_moves"] = detail::ranked_json(top_k(analyze_(s.state), k), size_);
        return msg;
    }

    // Takes back the last ply; when that was an engine reply, the human move
    // before it goes too, so the human is to move again. An engine opening
    // move with no human move after it stays.
    nlohmann::ordered_json undo(GameSession& s)
    {
        const bool any_human = std::any_of(s.log.begin(), s.log.end(), [](const LoggedMove& m) { return !m.by_engine; });
        if (!any_human && s.engine_color) throw ApiError("nothing_to_undo", "no human move to undo");
        if (s.log.empty()) throw ApiError("nothing_to_undo", "no moves to undo");
        const bool engine_last = s.log.back().by_engine;
        s.log.pop_back();
        if (engine_last && !s.log.empty() && !s.log.back().by_engine) s.log.pop_back();
        s.state = s.replay_log();
        return state_message(s);
    }

    nlohmann::ordered_json state_message(const GameSession& s)
    {
        nlohmann::ordered_json msg;
        msg["type"] = "state";
        msg["session"] = s.id;
        auto rows = nlohmann::ordered_json::array();
        for (int r = 0; r < s.state.size(); ++r) {
            std::string row;
            for (int c = 0; c < s.state.size(); ++c) {
                const Color col = s.state.at(Coord{r, c});
                row += col == Color::Black ? 'X' : col == Color::White ? 'O' : '.';
            }
            rows.push_back(row);
        }
        msg["board"] = rows;
        msg["to_move"] = detail::color_word(s.state.to_move());
        msg["engine_color"] = s.engine_color ? detail::color_word(*s.engine_color) : "none";
        msg["move_number"] = s.log.size();
        msg["last_move"] = s.log.empty() ? nlohmann::ordered_json(nullptr)
                                         : nlohmann::ordered_json(to_vertex(s.log.back().turn.move, size_));
        msg["captures"] = {{"black", s.state.captures(Color::Black)}, {"white", s.state.captures(Color::White)}};
        auto moves = nlohmann::ordered_json::array();
        for (const auto& m : s.log)
            moves.push_back({{"color", detail::color_word(m.turn.color)},
                             {"vertex", to_vertex(m.turn.move, size_)},
                             {"engine", m.by_engine}});
        msg["moves"] = moves;
        msg["top_moves"] = detail::ranked_json(top_k(analyze_(s.state), 10), size_);
        return msg;
    }

    Analyzer analyze_;
    int size_;
    mutable std::mutex mutex_;
    std::map<std::string, std::shared_ptr<GameSession>> sessions_;
    std::uint64_t next_id_ = 0;
};

}  // namespace crossgo
