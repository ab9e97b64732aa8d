#include <CLI11.hpp>

#include <pthread.h>
#include <unistd.h>

#include <atomic>
#include <csignal>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "crossgo/dataset.hpp"
#include "crossgo/gtp.hpp"
#include "crossgo/server.hpp"
#include "crossgo/train.hpp"

namespace fs = std::filesystem;
using namespace crossgo;

namespace {

struct ModelFlags {
    std::string checkpoint;
    std::string config;
    bool single_view = false;

    void add(CLI::App* cmd)
    {
        cmd->add_option("--checkpoint", checkpoint, "Network checkpoint")->required()->check(CLI::ExistingFile);
        cmd->add_option("--config", config, "Network descriptor (default: network.cfg beside the checkpoint)")
            ->check(CLI::ExistingFile);
        cmd->add_flag("--single-view", single_view, "Score one orientation instead of averaging all eight");
    }

    PolicyNet load() const
    {
        std::optional<NetworkConfig> cfg;
        if (!config.empty()) cfg = NetworkConfig::from_key_values(KeyValues::load(config));
        return PolicyNet::load(checkpoint, cfg);
    }

    EnsembleMode mode() const { return single_view ? EnsembleMode::Single : EnsembleMode::AllSymmetries; }
};

std::vector<int> parse_k_list(const std::string& text)
{
    std::vector<int> ks;
    std::stringstream in(text);
    for (std::string item; std::getline(in, item, ',');) {
        std::size_t used = 0;
        const int k = std::stoi(item, &used);
        if (used != item.size() || k < 1) throw std::invalid_argument("bad --topk entry '" + item + "'");
        ks.push_back(k);
    }
    if (ks.empty()) throw std::invalid_argument("--topk needs at least one value");
    return ks;
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"crossgo: Go move prediction with a cross-convolution policy network"};
    app.require_subcommand(1);
    app.failure_message(CLI::FailureMessage::help);

    // compile
    auto* compile = app.add_subcommand("compile", "Compile an SGF corpus into train/test shards");
    std::string sgf_dir, out_dir;
    CompileOptions copt;
    compile->add_option("--sgf", sgf_dir, "Directory searched recursively for .sgf files")->required()->check(CLI::ExistingDirectory);
    compile->add_option("--out", out_dir, "Output directory for shards and report.json")->required();
    compile->add_option("--split", copt.split_fraction, "Fraction of games assigned to train")->capture_default_str()->check(CLI::Range(0.0, 1.0));
    compile->add_option("--seed", copt.seed, "Seed for the game shuffle")->capture_default_str();
    compile->add_option("--shard-records", copt.shard_records, "Records per shard file")->capture_default_str()->check(CLI::PositiveNumber);

    // train
    auto* train_cmd = app.add_subcommand("train", "Train a policy network on compiled shards");
    std::string shard_dir, train_config, train_out, init_checkpoint;
    std::size_t max_steps = 0;
    train_cmd->add_option("--shards", shard_dir, "Directory holding train-*.cgsh shards")->required()->check(CLI::ExistingDirectory);
    train_cmd->add_option("--config", train_config, "Training config (key = value lines)")->check(CLI::ExistingFile);
    train_cmd->add_option("--out", train_out, "Directory for checkpoints and history.json")->required();
    train_cmd->add_option("--checkpoint", init_checkpoint, "Start from these weights instead of a fresh init")->check(CLI::ExistingFile);
    train_cmd->add_option("--max-steps", max_steps, "Stop after this many steps (overrides the config)");

    // eval
    auto* eval_cmd = app.add_subcommand("eval", "Report top-k accuracy on compiled shards");
    ModelFlags eval_model;
    eval_model.add(eval_cmd);
    std::string eval_shards, topk_text = "1,5,10", split = "test";
    std::size_t limit = 0;
    eval_cmd->add_option("--shards", eval_shards, "Directory holding shards")->required()->check(CLI::ExistingDirectory);
    eval_cmd->add_option("--split", split, "Shard prefix to evaluate")->capture_default_str()->check(CLI::IsMember({"train", "test"}));
    eval_cmd->add_option("--topk", topk_text, "Comma-separated k values")->capture_default_str();
    eval_cmd->add_option("--limit", limit, "Evaluate only the first N records");

    // gtp
    auto* gtp_cmd = app.add_subcommand("gtp", "Play over the Go Text Protocol on stdin/stdout");
    ModelFlags gtp_model;
    gtp_model.add(gtp_cmd);

    // serve
    auto* serve_cmd = app.add_subcommand("serve", "Serve the JSON game API over WebSocket and static files over HTTP");
    ModelFlags serve_model;
    serve_model.add(serve_cmd);
    int port = 8080;
    std::string host = "127.0.0.1", static_dir;
    serve_cmd->add_option("--port", port, "TCP port; 0 picks a free one")->capture_default_str()->check(CLI::Range(0, 65535));
    serve_cmd->add_option("--host", host, "Address to bind")->capture_default_str();
    serve_cmd->add_option("--static", static_dir, "Directory of UI files served over HTTP")->check(CLI::ExistingDirectory);

    // selfplay
    auto* selfplay_cmd = app.add_subcommand("selfplay", "Let the engine play both sides and emit SGF");
    ModelFlags selfplay_model;
    selfplay_model.add(selfplay_cmd);
    int games = 1;
    SelfPlayOptions sp;
    std::string sgf_out;
    selfplay_cmd->add_option("--games", games, "Number of games")->capture_default_str()->check(CLI::PositiveNumber);
    selfplay_cmd->add_option("--max-moves", sp.max_moves, "Move cap per game")->capture_default_str()->check(CLI::NonNegativeNumber);
    selfplay_cmd->add_option("--random-opening", sp.random_opening, "Leading plies sampled from the policy")->capture_default_str()->check(CLI::NonNegativeNumber);
    selfplay_cmd->add_option("--seed", sp.seed, "Seed for sampled plies; game i uses seed + i")->capture_default_str();
    selfplay_cmd->add_option("--out", sgf_out, "Write game-NNNN.sgf files here instead of stdout");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*compile) {
            const auto report = compile_dataset(sgf_dir, out_dir, copt);
            std::cout << report.to_json().dump(2) << "\n";
            return 0;
        }
        if (*train_cmd) {
            TrainConfig tc;
            if (!train_config.empty()) tc = TrainConfig::from_key_values(KeyValues::load(train_config));
            if (max_steps) tc.max_steps = max_steps;
            const auto data = ShardSet::load(shard_dir, "train");
            auto net = init_checkpoint.empty() ? PolicyNet(NetworkConfig::reference(tc.width_multiplier))
                                               : PolicyNet::load(init_checkpoint);
            if (init_checkpoint.empty()) net.init_weights(tc.init_seed);
            TrainOptions opt;
            opt.out_dir = train_out;
            opt.on_step = [&](const StepInfo& s, const PolicyNet&) {
                if (s.step % std::size_t(tc.log_every) == 0)
                    std::cerr << "epoch " << s.epoch + 1 << " step " << s.step << " lr " << s.lr << " loss " << s.loss << "\n";
                return true;
            };
            std::cerr << "training on " << data.size() << " records, " << net.parameter_count() << " parameters\n";
            const auto history = train(net, data, tc, opt);
            std::cout << history.to_json().dump(2) << "\n";
            return 0;
        }
        if (*eval_cmd) {
            const auto ks = parse_k_list(topk_text);
            const auto net = eval_model.load();
            const auto data = ShardSet::load(eval_shards, split);
            std::cout << evaluate(net, data, ks, eval_model.mode(), limit).to_json().dump(2) << "\n";
            return 0;
        }
        if (*gtp_cmd) {
            const auto net = gtp_model.load();
            GtpEngine engine(network_analyzer(net, gtp_model.mode()), net.config().board_size);
            return engine.serve(std::cin, std::cout);
        }
        if (*serve_cmd) {
            const auto net = serve_model.load();
            SessionManager api(network_analyzer(net, serve_model.mode()), net.config().board_size);
            std::optional<fs::path> dir;
            if (!static_dir.empty()) dir = static_dir;
            // Signals are taken synchronously on one thread; stop() is not
            // safe inside a handler.
            sigset_t signals;
            sigemptyset(&signals);
            sigaddset(&signals, SIGINT);
            sigaddset(&signals, SIGTERM);
            pthread_sigmask(SIG_BLOCK, &signals, nullptr);
            Server server(api, host, static_cast<unsigned short>(port), dir);
            std::atomic<bool> signalled{false};
            std::thread waiter([&] {
                int sig = 0;
                sigwait(&signals, &sig);
                signalled = true;
                server.stop();
            });
            std::cout << "listening on port " << server.port() << std::endl;
            server.run();
            if (!signalled) ::kill(::getpid(), SIGTERM);
            waiter.join();
            return 0;
        }
        if (*selfplay_cmd) {
            const auto net = selfplay_model.load();
            const auto analyze = network_analyzer(net, selfplay_model.mode());
            if (!sgf_out.empty()) fs::create_directories(sgf_out);
            for (int g = 0; g < games; ++g) {
                auto opt = sp;
                opt.seed = sp.seed + std::uint64_t(g);
                auto rec = self_play(analyze, opt, net.config().board_size);
                rec.metadata["GN"] = "selfplay " + std::to_string(g + 1);
                const auto text = write_sgf(rec);
                if (sgf_out.empty()) {
                    std::cout << text << "\n";
                } else {
                    char name[32];
                    std::snprintf(name, sizeof name, "game-%04d.sgf", g + 1);
                    std::ofstream(fs::path(sgf_out) / name) << text << "\n";
                }
            }
            return 0;
        }
    } catch (const std::exception& e) {
        std::cerr << "crossgo: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
