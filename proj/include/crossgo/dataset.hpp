#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "crossgo/features.hpp"
#include "crossgo/sgf.hpp"
#include "crossgo/shard.hpp"

namespace crossgo {

struct CompileOptions {
    double split_fraction = 0.9;  // share of games assigned to train
    std::uint64_t seed = 1;
    std::size_t shard_records = 100000;  // cap per shard file
};

struct SkippedGame {
    std::string file;
    std::string reason;
};

struct TruncatedGame {
    std::string file;
    std::size_t move_index;
    std::string reason;
};

struct SplitReport {
    std::vector<std::string> games;  // in shard order
    std::vector<std::size_t> pairs_per_game;
    std::vector<std::string> shards;
    std::size_t pairs = 0;
    std::size_t passes_skipped = 0;
};

struct CompileReport {
    std::size_t games_read = 0;
    std::vector<SkippedGame> skipped;
    std::vector<TruncatedGame> truncated;
    SplitReport train;
    SplitReport test;
    double split_fraction = 0.9;
    std::uint64_t seed = 1;

    nlohmann::ordered_json to_json() const
    {
        auto split = [](const SplitReport& s) {
            nlohmann::ordered_json j;
            j["games"] = s.games.size();
            j["pairs"] = s.pairs;
            j["passes_skipped"] = s.passes_skipped;
            j["shards"] = s.shards;
            auto& list = j["game_files"] = nlohmann::ordered_json::array();
            for (std::size_t i = 0; i < s.games.size(); ++i)
                list.push_back({{"file", s.games[i]}, {"pairs", s.pairs_per_game[i]}});
            return j;
        };
        nlohmann::ordered_json j;
        j["games_read"] = games_read;
        j["games_compiled"] = train.games.size() + test.games.size();
        j["games_skipped"] = skipped.size();
        j["split_fraction"] = split_fraction;
        j["seed"] = seed;
        j["train"] = split(train);
        j["test"] = split(test);
        auto& sk = j["skipped"] = nlohmann::ordered_json::array();
        for (const auto& s : skipped) sk.push_back({{"file", s.file}, {"reason", s.reason}});
        auto& tr = j["truncated"] = nlohmann::ordered_json::array();
        for (const auto& t : truncated) tr.push_back({{"file", t.file}, {"move_index", t.move_index}, {"reason", t.reason}});
        return j;
    }
};

/// Encodes every non-pass move of a replayed 19x19 record.
inline std::vector<StateMovePair> game_pairs(const Replay& r, std::size_t* passes = nullptr)
{
    std::vector<StateMovePair> out;
    for (const auto& [state, move] : r.pairs) {
        if (move.is_pass()) {
            if (passes) ++*passes;
            continue;
        }
        out.push_back({encode(state), state.index(move.coord())});
    }
    return out;
}

namespace detail {

// Fisher-Yates with raw mt19937_64 draws, so the permutation is the same on
// every standard library.
template <typename V>
void seeded_shuffle(std::vector<V>& v, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[rng() % i]);
}

inline std::vector<std::filesystem::path> sgf_files(const std::filesystem::path& dir)
{
    std::vector<std::filesystem::path> out;
    for (const auto& e : std::filesystem::recursive_directory_iterator(dir))
        if (e.is_regular_file() && e.path().extension() == ".sgf") out.push_back(e.path());
    std::sort(out.begin(), out.end());
    return out;
}

inline std::string read_file(const std::filesystem::path& p)
{
    std::ifstream in(p, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + p.string());
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

}  // namespace detail

/// Parses every .sgf under `input_dir`, assigns whole games to train/test by
/// a seeded shuffle, and writes `train-NNNNN.cgsh` / `test-NNNNN.cgsh` shards
/// plus `report.json` into `output_dir`.
inline CompileReport compile_dataset(const std::filesystem::path& input_dir, const std::filesystem::path& output_dir,
                                     const CompileOptions& opt = {})
{
    if (!(opt.split_fraction >= 0.0 && opt.split_fraction <= 1.0))
        throw std::invalid_argument("split fraction must be in [0, 1]");
    if (opt.shard_records == 0) throw std::invalid_argument("shard record cap must be positive");
    if (!std::filesystem::is_directory(input_dir)) throw std::runtime_error("no such corpus directory " + input_dir.string());

    CompileReport report;
    report.split_fraction = opt.split_fraction;
    report.seed = opt.seed;

    // Records are kept and replayed again at write time; holding every
    // replayed state for a large corpus would not fit in memory.
    struct Game {
        std::string name;
        GameRecord record;
    };
    std::vector<Game> games;
    for (const auto& path : detail::sgf_files(input_dir)) {
        ++report.games_read;
        const std::string name = std::filesystem::relative(path, input_dir).generic_string();
        try {
            auto rec = parse_sgf(detail::read_file(path));
            if (rec.board_size != kNetworkBoardSize)
                throw SgfError("board size " + std::to_string(rec.board_size) + " is not 19");
            auto r = replay(rec);
            if (r.truncation) report.truncated.push_back({name, r.truncation->move_index, r.truncation->reason});
            if (r.pairs.empty()) throw SgfError("no playable moves");
            games.push_back({name, std::move(rec)});
        } catch (const std::exception& e) {
            report.skipped.push_back({name, e.what()});
        }
    }
    if (games.empty()) throw std::runtime_error("corpus " + input_dir.string() + " has no usable games");

    detail::seeded_shuffle(games, opt.seed);
    const auto n_train = static_cast<std::size_t>(std::llround(opt.split_fraction * static_cast<double>(games.size())));

    std::filesystem::create_directories(output_dir);
    for (const auto& old : list_shards(output_dir, "train")) std::filesystem::remove(old);
    for (const auto& old : list_shards(output_dir, "test")) std::filesystem::remove(old);

    auto write_split = [&](std::size_t begin, std::size_t end, const std::string& prefix, SplitReport& split) {
        std::optional<ShardWriter> writer;
        for (std::size_t g = begin; g < end; ++g) {
            auto pairs = game_pairs(replay(games[g].record), &split.passes_skipped);
            split.games.push_back(games[g].name);
            split.pairs_per_game.push_back(pairs.size());
            for (const auto& p : pairs) {
                if (!writer || writer->count() >= opt.shard_records) {
                    if (writer) writer->close();
                    char name[32];
                    std::snprintf(name, sizeof name, "%s-%05zu.cgsh", prefix.c_str(), split.shards.size());
                    split.shards.push_back(name);
                    writer.emplace(output_dir / name);
                }
                writer->append(p);
                ++split.pairs;
            }
        }
        if (writer) writer->close();
    };
    write_split(0, n_train, "train", report.train);
    write_split(n_train, games.size(), "test", report.test);

    std::ofstream json(output_dir / "report.json");
    if (!json) throw std::runtime_error("cannot write report in " + output_dir.string());
    json << report.to_json().dump(2) << "\n";
    return report;
}

}  // namespace crossgo
