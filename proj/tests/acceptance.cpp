// Acceptance driver: one PASS/FAIL line per criterion on stdout, progress on
// stderr. Exit status is 0 only when every criterion passes.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <deque>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <string>

#include "crossgo/dataset.hpp"
#include "crossgo/gtp.hpp"
#include "crossgo/nn/ops.hpp"
#include "crossgo/train.hpp"
#include "nn_oracles.hpp"
#include "rules_fixtures.hpp"
#include "test_util.hpp"

using namespace crossgo;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
    bool pass;
    std::string detail;
};

double seconds_since(Clock::time_point t0)
{
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, auto... args)
{
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

std::string slurp(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

fs::path scratch(const std::string& name)
{
    auto p = fs::temp_directory_path() / ("crossgo_acceptance_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

const fs::path kCorpus = testutil::data_dir() / "sgf";

// Rules ----------------------------------------------------------------------

Outcome rules_oracle()
{
    using namespace testutil::fixtures;
    const auto t0 = Clock::now();
    std::vector<std::string> failures;
    auto check = [&](bool ok, const std::string& what) {
        if (!ok) failures.push_back(what);
    };

    auto s = testutil::from_diagram(kCaptureFixture);
    auto after = play(s, Move::play(0, 3));
    auto oracle = testutil::Oracle::from(s);
    oracle.play(3, 'X');
    check(after.at(Coord{0, 1}) == Color::Empty && after.at(Coord{0, 2}) == Color::Empty, "capture: stones not removed");
    check(after.captures(Color::Black) == 2, "capture: count is not 2");
    check(testutil::Oracle::from(after).grid == oracle.grid, "capture: grid differs from oracle");

    auto corner = play(new_board(19), Move::play(0, 0));
    check(group_at(corner, {0, 0}).liberties.size() == 2, "corner stone does not have 2 liberties");
    auto l = testutil::from_diagram(R"(
        .......
        .......
        .......
        ...XX..
        ...X...
        .......
        .......)");
    check(group_at(l, {3, 3}).liberties.size() == 7, "shared liberty counted twice");
    check(testutil::Oracle::from(l).liberties(3 * 7 + 3) == 7, "oracle disagrees on shared liberties");

    auto ladder = testutil::from_diagram(kLadderStart, Color::White);
    auto lo = testutil::Oracle::from(ladder);
    int black_moves = 0;
    for (std::size_t k = 0; k < kLadderMoves.size(); ++k) {
        const bool black = k % 2 == 1;
        ladder = play(ladder, Move::play(kLadderMoves[k]));
        lo.play(ladder.index(kLadderMoves[k]), black ? 'X' : 'O');
        if (!black) continue;
        ++black_moves;
        const auto libs = group_at(ladder, {1, 1}).liberties.size();
        check(libs == 1 && lo.liberties(ladder.index({1, 1})) == 1,
              fmt("ladder: white has %zu liberties after black move %d", libs, black_moves));
    }
    const double t = seconds_since(t0);
    check(t < 1.0, fmt("runtime %.3f s", t));
    if (!failures.empty()) return {false, failures.front()};
    return {true, fmt("capture, liberty and ladder fixtures exact (%d black ladder moves), %.3f s", black_moves, t)};
}

// Cross mask -----------------------------------------------------------------

Outcome cross_mask_equivalence()
{
    const auto t0 = Clock::now();
    int cases = 0;
    for (int n = 2; n <= 39; ++n)
        for (int c = 1; c <= nn::max_cross_width(n); ++c, ++cases)
            if (nn::cross_mask(n, c).bits() != testutil::sliding_block_area(n, c))
                return {false, fmt("mismatch at n=%d c=%d", n, c)};
    const int s1 = nn::cross_mask(5, 1).active_count(), s2 = nn::cross_mask(5, 2).active_count(),
              s3 = nn::cross_mask(5, 3).active_count();
    if (s1 != 9 || s2 != 21 || s3 != 25) return {false, fmt("n=5 spot values %d/%d/%d, want 9/21/25", s1, s2, s3)};
    const double t = seconds_since(t0);
    if (t >= 5.0) return {false, fmt("runtime %.2f s", t)};
    return {true, fmt("%d (n, c) cases exact, n=5 spot values 9/21/25, %.2f s", cases, t)};
}

// Numeric core ----------------------------------------------------------------

double max_rel_err_conv(std::mt19937_64& rng, int instances)
{
    double worst = 0;
    for (int trial = 0; trial < instances; ++trial) {
        auto [layer, x] = testutil::random_conv_case<double>(rng);
        nn::Tensor<double> probe(nn::conv2d_forward(x, layer).shape());
        testutil::fill_uniform(probe, rng);
        auto loss = [&, &layer = layer, &x = x] {
            auto y = nn::conv2d_forward(x, layer);
            double s = 0;
            for (std::size_t i = 0; i < y.size(); ++i) s += y[i] * probe[i];
            return s;
        };
        auto g = nn::conv2d_backward(probe, x, layer);
        for (std::size_t i = 0; i < x.size(); ++i)
            worst = std::max(worst, testutil::rel_err(g.input[i], testutil::central_difference<double>(loss, x[i], 1e-5)));
        for (int tap : layer.active_taps())
            for (int o = 0; o < layer.out_channels; ++o)
                for (int i = 0; i < layer.in_channels; ++i) {
                    const auto idx = layer.weight_index(o, i, tap / layer.kernel, tap % layer.kernel);
                    worst = std::max(worst, testutil::rel_err(g.weights[idx], testutil::central_difference<double>(
                                                                                  loss, layer.weights[idx], 1e-5)));
                }
        for (std::size_t o = 0; o < layer.bias.size(); ++o)
            worst = std::max(worst, testutil::rel_err(g.bias[o], testutil::central_difference<double>(loss, layer.bias[o], 1e-5)));
    }
    return worst;
}

double max_rel_err_relu(std::mt19937_64& rng, int instances)
{
    double worst = 0;
    for (int trial = 0; trial < instances; ++trial) {
        nn::Tensor<double> x({2, 4, 4}), probe({2, 4, 4});
        testutil::fill_uniform(x, rng);
        testutil::fill_uniform(probe, rng);
        for (auto& v : x.values())
            if (std::abs(v) < 1e-2) v = 0.5;
        auto loss = [&] {
            auto y = nn::relu(x);
            double s = 0;
            for (std::size_t i = 0; i < y.size(); ++i) s += y[i] * probe[i];
            return s;
        };
        auto g = nn::relu_backward(probe, x);
        for (std::size_t i = 0; i < x.size(); ++i)
            worst = std::max(worst, testutil::rel_err(g[i], testutil::central_difference<double>(loss, x[i], 1e-5)));
    }
    return worst;
}

double max_rel_err_concat(std::mt19937_64& rng, int instances)
{
    double worst = 0;
    for (int trial = 0; trial < instances; ++trial) {
        std::vector<nn::Tensor<double>> parts;
        std::vector<std::size_t> counts;
        for (int k = 0; k < 3; ++k) {
            counts.push_back(std::size_t(1 + rng() % 3));
            parts.emplace_back(nn::Shape{counts.back(), 3, 3});
            testutil::fill_uniform(parts.back(), rng);
        }
        nn::Tensor<double> probe(nn::concat_channels(parts).shape());
        testutil::fill_uniform(probe, rng);
        auto loss = [&] {
            auto y = nn::concat_channels(parts);
            double s = 0;
            for (std::size_t i = 0; i < y.size(); ++i) s += y[i] * probe[i] * y[i];
            return s;
        };
        auto y = nn::concat_channels(parts);
        nn::Tensor<double> gy(y.shape());
        for (std::size_t i = 0; i < y.size(); ++i) gy[i] = 2 * probe[i] * y[i];
        auto gs = nn::split_channels(gy, std::span<const std::size_t>(counts));
        for (std::size_t p = 0; p < parts.size(); ++p)
            for (std::size_t i = 0; i < parts[p].size(); ++i)
                worst = std::max(worst, testutil::rel_err(gs[p][i], testutil::central_difference<double>(loss, parts[p][i], 1e-5)));
    }
    return worst;
}

double max_rel_err_softmax(std::mt19937_64& rng, int instances)
{
    double worst = 0;
    for (int trial = 0; trial < instances; ++trial) {
        std::vector<double> s(10);
        std::uniform_real_distribution<double> u(-3, 3);
        for (auto& v : s) v = u(rng);
        const int label = int(rng() % 10);
        auto r = nn::softmax_cross_entropy<double>(s, label);
        auto f = [&] { return nn::softmax_cross_entropy<double>(s, label).loss; };
        for (std::size_t i = 0; i < s.size(); ++i)
            worst = std::max(worst, testutil::rel_err(r.grad[i], testutil::central_difference<double>(f, s[i], 1e-5)));
    }
    return worst;
}

Outcome numeric_core()
{
    const auto t0 = Clock::now();
    std::mt19937_64 rng(2024);
    double forward = 0;
    for (int trial = 0; trial < 100; ++trial) {
        auto [layer, x] = testutil::random_conv_case<float>(rng);
        auto y = nn::conv2d_forward(x, layer);
        auto ref = testutil::naive_conv(x, layer);
        if (y.size() != ref.size()) return {false, fmt("forward shape mismatch on trial %d", trial)};
        for (std::size_t i = 0; i < y.size(); ++i) forward = std::max(forward, std::abs(double(y[i]) - ref[i]));
    }
    const double conv = max_rel_err_conv(rng, 25), relu = max_rel_err_relu(rng, 20), concat = max_rel_err_concat(rng, 20),
                 softmax = max_rel_err_softmax(rng, 20);
    const double backward = std::max({conv, relu, concat, softmax});
    const double t = seconds_since(t0);
    const std::string detail =
        fmt("forward max abs %.2e over 100 shapes; backward rel err conv %.1e relu %.1e concat %.1e softmax-xent %.1e; %.1f s",
            forward, conv, relu, concat, softmax, t);
    return {forward < 1e-5 && backward < 1e-3 && t < 120.0, detail};
}

// Mask preservation -------------------------------------------------------------

Outcome mask_preservation()
{
    const auto t0 = Clock::now();
    PolicyNet net(NetworkConfig::reference(1.0 / 8));
    net.init_weights(31);
    std::mt19937_64 rng(31);
    const int steps = 1000;
    std::vector<std::vector<float>> before;
    for (const auto* l : net.layers()) before.emplace_back(l->weights.values().begin(), l->weights.values().end());
    for (int step = 0; step < steps; ++step) {
        nn::Tensor<float> x({24, 19, 19});
        for (auto& v : x.values()) v = float(rng() % 2);
        PolicyNet::Trace trace;
        auto y = net.forward(x, trace);
        auto lg = nn::softmax_cross_entropy<float>(y.values(), int(rng() % 361));
        auto g = net.backward(nn::Tensor<float>(y.shape(), lg.grad), trace);
        auto layers = net.layers();
        for (std::size_t i = 0; i < layers.size(); ++i) {
            nn::sgd_step(layers[i]->weights, g.weights[i], 0.01f);
            nn::sgd_step(layers[i]->bias, g.bias[i], 0.01f);
        }
        if ((step + 1) % 250 == 0) std::cerr << "  mask preservation: step " << step + 1 << "\n";
    }
    std::size_t masked = 0, nonzero = 0, changed = 0;
    int masked_layers = 0;
    const auto layers = net.layers();
    for (std::size_t li = 0; li < layers.size(); ++li) {
        const auto& l = *layers[li];
        for (std::size_t i = 0; i < l.weights.size(); ++i) changed += l.weights[i] != before[li][i];
        if (!l.mask) continue;
        ++masked_layers;
        for (int o = 0; o < l.out_channels; ++o)
            for (int i = 0; i < l.in_channels; ++i)
                for (int kr = 0; kr < l.kernel; ++kr)
                    for (int kc = 0; kc < l.kernel; ++kc)
                        if (!l.tap_active(kr, kc)) {
                            ++masked;
                            nonzero += l.weights[l.weight_index(o, i, kr, kc)] != 0.0f;
                        }
    }
    const std::string detail = fmt("%d SGD steps, %d masked layers, %zu masked weights, %zu nonzero, %zu weights moved, %.0f s",
                                   steps, masked_layers, masked, nonzero, changed, seconds_since(t0));
    return {masked > 0 && nonzero == 0 && changed > 0, detail};
}

// Ensemble equivariance ---------------------------------------------------------

Outcome ensemble_equivariance()
{
    const auto t0 = Clock::now();
    PolicyNet net(NetworkConfig::reference(1.0 / 8));
    net.init_weights(41);
    std::mt19937_64 rng(41);
    int positions = 0, skipped = 0, move_mismatches = 0;
    double worst = 0;
    while (positions < 50) {
        auto s = testutil::random_playout(new_board(19), 10 + int(rng() % 200), rng);
        auto base = ensemble_predict(net, s);
        // Unique argmax: the best legal score beats the runner-up clearly.
        std::vector<float> legal_scores;
        for (std::size_t i = 0; i < 361; ++i)
            if (base.legal[i]) legal_scores.push_back(base.scores[i]);
        if (legal_scores.size() < 2) {
            ++skipped;
            continue;
        }
        std::partial_sort(legal_scores.begin(), legal_scores.begin() + 2, legal_scores.end(), std::greater<>());
        if (legal_scores[0] - legal_scores[1] < 1e-4f) {
            ++skipped;
            continue;
        }
        const Move best = select_move(base);
        for (Symmetry g : all_symmetries()) {
            auto out = ensemble_predict(net, transformed(s, g));
            for (int r = 0; r < 19; ++r)
                for (int c = 0; c < 19; ++c) {
                    auto [tr, tc] = g.apply(r, c, 19);
                    worst = std::max(worst, double(std::abs(out.scores[std::size_t(tr * 19 + tc)] - base.scores[std::size_t(r * 19 + c)])));
                }
            auto [br, bc] = g.apply(best.coord().row, best.coord().col, 19);
            move_mismatches += select_move(out) != Move::play(br, bc);
        }
        ++positions;
    }
    const std::string detail = fmt("%d positions x 8 symmetries, %d move mismatches, max score diff %.2e, %d skipped (tied argmax), %.0f s",
                                   positions, move_mismatches, worst, skipped, seconds_since(t0));
    return {move_mismatches == 0 && worst < 1e-5, detail};
}

// Training ----------------------------------------------------------------------

// Compiled once and shared by the training criteria.
struct Corpus {
    fs::path dir;
    CompileReport report;
};

const Corpus& corpus()
{
    static const Corpus c = [] {
        auto dir = scratch("corpus");
        auto report = compile_dataset(kCorpus, dir, {0.9, 1, 100000});
        return Corpus{dir, report};
    }();
    return c;
}

Outcome overfit()
{
    const double kBudget = 30 * 60;
    const std::size_t kMaxSteps = 5000;
    const auto all = ShardSet::load(corpus().dir, "train");
    const auto dir = scratch("overfit");
    {
        ShardWriter w(dir / "o-00000.cgsh");
        for (std::size_t i = 0; i < 256; ++i) w.append(all.record(i * (all.size() / 256)));
        w.close();
    }
    const auto set = ShardSet::load(dir, "o");
    PolicyNet net(NetworkConfig::reference(1.0 / 8));
    TrainConfig cfg;
    cfg.init_seed = 1;
    net.init_weights(cfg.init_seed);
    cfg.lr0 = 0.05;
    cfg.decay_per_epoch = 1.0;
    cfg.epochs = 1000;
    cfg.batch_size = 16;
    cfg.max_steps = kMaxSteps;
    const auto t0 = Clock::now();
    double top1 = 0;
    std::size_t reached = 0, last_step = 0;
    TrainOptions opt;
    opt.on_step = [&](const StepInfo& s, const PolicyNet& n) {
        last_step = s.step;
        if (seconds_since(t0) > kBudget) return false;
        if (s.step % 100 != 0) return true;
        top1 = evaluate(n, set, {1}, EnsembleMode::Single).top1();
        std::cerr << "  overfit: step " << s.step << " loss " << s.loss << " top1 " << top1 << " at "
                  << int(seconds_since(t0)) << " s\n";
        if (top1 >= 0.99) {
            reached = s.step;
            return false;
        }
        return true;
    };
    train(net, set, cfg, opt);
    const double t = seconds_since(t0);
    if (!reached)
        return {false, fmt("training top-1 %.4f after %zu steps, %.0f s (cap %zu steps, %.0f s)", top1, last_step, t, kMaxSteps, kBudget)};
    return {t < kBudget, fmt("training top-1 %.4f on 256 pairs at step %zu, %.0f s (single view, lr 0.05, batch 16)", top1, reached, t)};
}

Outcome learning_signal()
{
    const auto data = ShardSet::load(corpus().dir, "train");
    if (data.size() < 10000) return {false, fmt("only %zu training pairs", data.size())};
    PolicyNet net(NetworkConfig::reference(1.0 / 8));
    TrainConfig cfg;
    net.init_weights(cfg.init_seed);
    cfg.lr0 = 0.01;
    cfg.batch_size = 16;
    cfg.max_steps = 200;
    const auto t0 = Clock::now();
    std::deque<double> recent;
    double first = -1;
    std::size_t steps = 0;
    TrainOptions opt;
    opt.on_step = [&](const StepInfo& s, const PolicyNet&) {
        if (first < 0) first = s.loss;
        steps = s.step;
        recent.push_back(s.loss);
        if (recent.size() > 20) recent.pop_front();
        if (s.step % 50 == 0) std::cerr << "  learning signal: step " << s.step << " loss " << s.loss << "\n";
        return true;
    };
    train(net, data, cfg, opt);
    const double mean = std::accumulate(recent.begin(), recent.end(), 0.0) / double(recent.size());
    const double baseline = std::log(361.0);
    return {steps == 200 && mean < baseline,
            fmt("%zu pairs, mean loss of steps 181-200 = %.4f vs ln(361) = %.4f (first batch %.4f), lr 0.01, %.0f s",
                data.size(), mean, baseline, first, seconds_since(t0))};
}

// Dataset -----------------------------------------------------------------------

Outcome dataset_determinism()
{
    const auto t0 = Clock::now();
    auto a = scratch("det_a"), b = scratch("det_b");
    const CompileOptions opt{0.9, 42, 4000};
    auto ra = compile_dataset(kCorpus, a, opt);
    auto rb = compile_dataset(kCorpus, b, opt);
    std::vector<std::string> files = ra.train.shards;
    files.insert(files.end(), ra.test.shards.begin(), ra.test.shards.end());
    files.push_back("report.json");
    if (ra.train.shards != rb.train.shards || ra.test.shards != rb.test.shards) return {false, "shard lists differ"};
    for (const auto& name : files)
        if (slurp(a / name) != slurp(b / name)) return {false, "bytes differ in " + name};

    std::set<std::string> train_games(ra.train.games.begin(), ra.train.games.end());
    for (const auto& g : ra.test.games)
        if (train_games.count(g)) return {false, "game in both splits: " + g};

    // Independent re-encode of the train games, in report order.
    std::vector<StateMovePair> expected;
    for (const auto& g : ra.train.games)
        for (const auto& [state, move] : replay(parse_sgf(slurp(kCorpus / g))).pairs)
            if (move.is_play()) expected.push_back({encode(state), state.index(move.coord())});
    const auto set = ShardSet::load(a, "train");
    if (set.size() != expected.size()) return {false, fmt("%zu records, expected %zu", set.size(), expected.size())};
    std::mt19937_64 rng(5);
    for (int k = 0; k < 1000; ++k) {
        const std::size_t i = rng() % set.size();
        const auto rec = set.record(i);
        if (!(rec == expected[i])) return {false, fmt("record %zu differs from re-encoding", i)};
        const auto bytes = shard::encode_record(rec);
        if (!(shard::decode_record(bytes.data(), 19) == rec)) return {false, fmt("decode(encode) differs at record %zu", i)};
    }
    fs::remove_all(a);
    fs::remove_all(b);
    return {true, fmt("%zu files byte-identical, 1000 records lossless, %zu train / %zu test games disjoint, %.1f s",
                      files.size(), ra.train.games.size(), ra.test.games.size(), seconds_since(t0))};
}

// GTP ---------------------------------------------------------------------------

Outcome gtp_conformance()
{
    const auto t0 = Clock::now();
    PolicyNet zero(NetworkConfig::reference(1.0 / 8));
    GtpEngine golden(network_analyzer(zero));
    const auto in_text = slurp(testutil::data_dir() / "gtp" / "golden.in");
    std::istringstream in(in_text);
    std::ostringstream out;
    golden.serve(in, out);
    if (out.str() != slurp(testutil::data_dir() / "gtp" / "golden.out")) return {false, "golden transcript differs"};
    const auto commands = std::count(in_text.begin(), in_text.end(), '\n');

    PolicyNet net(NetworkConfig::reference(1.0 / 8));
    net.init_weights(5);
    GtpEngine gtp(network_analyzer(net));
    auto oracle = testutil::Oracle::from(new_board(19));
    std::mt19937_64 rng(17);
    int illegal = 0, engine_moves = 0;
    for (int ply = 0; ply < 500; ++ply) {
        const bool engine = ply % 2 == 1;
        const char who = engine ? 'O' : 'X';
        std::vector<int> legal;
        for (int i = 0; i < 361; ++i)
            if (oracle.legal(i, who)) legal.push_back(i);
        if (engine) {
            const auto reply = *gtp.handle("genmove w");
            ++engine_moves;
            const auto m = reply.rfind("= ", 0) == 0 ? parse_vertex(reply.substr(2, reply.size() - 4), 19) : std::nullopt;
            if (!m || (m->is_pass() && !legal.empty())) {
                ++illegal;
                continue;
            }
            if (m->is_pass()) continue;
            const int i = m->coord().row * 19 + m->coord().col;
            if (!oracle.legal(i, who)) return {false, fmt("illegal engine move at ply %d", ply)};
            oracle.play(i, who);
        } else if (legal.empty()) {
            gtp.handle("play b pass");
        } else {
            const int i = legal[rng() % legal.size()];
            if (gtp.handle("play b " + to_vertex(Move::play(i / 19, i % 19), 19))->rfind("= ", 0) != 0)
                return {false, fmt("engine rejected a legal move at ply %d", ply)};
            oracle.play(i, who);
        }
    }
    return {illegal == 0, fmt("golden transcript of %ld commands byte-exact; 500-move session, %d engine moves, %d illegal, %.0f s",
                              long(commands), engine_moves, illegal, seconds_since(t0))};
}

}  // namespace

int main()
{
    const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
        {"rules-oracle", rules_oracle},
        {"cross-mask-equivalence", cross_mask_equivalence},
        {"numeric-core", numeric_core},
        {"mask-preservation", mask_preservation},
        {"ensemble-equivariance", ensemble_equivariance},
        {"dataset-determinism", dataset_determinism},
        {"gtp-conformance", gtp_conformance},
        {"learning-signal", learning_signal},
        {"overfit", overfit},
    };
    int failed = 0;
    for (const auto& [name, check] : criteria) {
        std::cerr << "running " << name << "\n";
        Outcome r;
        try {
            r = check();
        } catch (const std::exception& e) {
            r = {false, std::string("exception: ") + e.what()};
        }
        failed += !r.pass;
        std::cout << (r.pass ? "PASS " : "FAIL ") << name << ": " << r.detail << std::endl;
    }
    fs::remove_all(fs::temp_directory_path() / "crossgo_acceptance_corpus");
    fs::remove_all(fs::temp_directory_path() / "crossgo_acceptance_overfit");
    return failed == 0 ? 0 : 1;
}
