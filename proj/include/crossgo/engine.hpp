#pragma once

#include <functional>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "crossgo/board.hpp"
#include "crossgo/features.hpp"
#include "crossgo/model.hpp"
#include "crossgo/sgf.hpp"
#include "crossgo/vertex.hpp"

namespace crossgo {

/// Move scores for a position. Engines hold one of these; sessions and GTP
/// share it without holding weights themselves.
using Analyzer = std::function<PolicyOutput(const BoardState&)>;

/// The network's ensemble policy. `net` must outlive the analyzer.
inline Analyzer network_analyzer(const PolicyNet& net, EnsembleMode mode = EnsembleMode::AllSymmetries)
{
    return [&net, mode](const BoardState& s) { return ensemble_predict(net, s, mode); };
}

/// The highest-scoring move that the rules allow. The legal plane already
/// encodes the rules, so the fallback only guards against a disagreement;
/// passes only when nothing is legal.
inline Move choose_move(const BoardState& state, const PolicyOutput& out)
{
    Move m = select_move(out);
    if (is_legal(state, m)) return m;
    for (const auto& r : top_k(out, state.area()))
        if (is_legal(state, r.move)) return r.move;
    return Move::pass();
}

/// Samples a legal move in proportion to its probability.
template <typename Rng>
Move sample_move(const BoardState& state, const PolicyOutput& out, Rng& rng)
{
    std::vector<double> weights(out.probabilities.begin(), out.probabilities.end());
    double total = 0.0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        if (!out.legal[i] || !is_legal(state, Move::play(state.coord(int(i))))) weights[i] = 0.0;
        total += weights[i];
    }
    if (!(total > 0.0)) return choose_move(state, out);
    std::discrete_distribution<int> pick(weights.begin(), weights.end());
    return Move::play(state.coord(pick(rng)));
}

/// Board text: rows from the top edge (19) down to 1, columns A-T without I,
/// 'X' black, 'O' white, '.' empty.
inline std::string render_board(const BoardState& s)
{
    const int n = s.size();
    std::string letters = "  ";
    for (int c = 0; c < n; ++c) {
        letters += ' ';
        letters += column_letter(c);
    }
    std::ostringstream out;
    out << letters << '\n';
    for (int r = 0; r < n; ++r) {
        const int number = n - r;
        out << (number < 10 ? " " : "") << number;
        for (int c = 0; c < n; ++c) {
            const Color col = s.at(Coord{r, c});
            out << ' ' << (col == Color::Black ? 'X' : col == Color::White ? 'O' : '.');
        }
        out << ' ' << number << '\n';
    }
    out << letters;
    return out.str();
}

struct SelfPlayOptions {
    int max_moves = 200;
    int random_opening = 0;  // leading plies sampled from the policy
    std::uint64_t seed = 1;
};

/// The engine plays both sides from an empty board until the move cap or
/// two consecutive passes. Deterministic for a given seed.
inline GameRecord self_play(const Analyzer& analyze, const SelfPlayOptions& opt, int board_size = kNetworkBoardSize)
{
    if (opt.max_moves < 0) throw std::invalid_argument("move cap must be non-negative");
    std::mt19937_64 rng(opt.seed);
    GameRecord rec;
    rec.board_size = board_size;
    rec.metadata["PB"] = "crossgo";
    rec.metadata["PW"] = "crossgo";
    auto state = new_board(board_size);
    int passes = 0;
    for (int ply = 0; ply < opt.max_moves && passes < 2; ++ply) {
        const auto out = analyze(state);
        const Move m = ply < opt.random_opening ? sample_move(state, out, rng) : choose_move(state, out);
        rec.moves.push_back({m, state.to_move()});
        passes = m.is_pass() ? passes + 1 : 0;
        state = play(state, m);
    }
    return rec;
}

}  // namespace crossgo
