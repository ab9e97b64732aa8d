#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "crossgo/train.hpp"
#include "test_util.hpp"

using namespace crossgo;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name)
{
    auto p = fs::temp_directory_path() / ("crossgo_test_train_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::string bytes_of(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

// `count` positions from random playouts, each labelled with a legal move.
ShardSet random_set(const fs::path& dir, std::size_t count, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    {
        ShardWriter w(dir / "r-00000.cgsh");
        for (std::size_t i = 0; i < count; ++i) {
            auto s = testutil::random_playout(new_board(19), int(rng() % 40), rng);
            auto legal = legal_moves(s);
            Move m = legal[rng() % legal.size()];
            while (m.is_pass()) m = legal[rng() % legal.size()];
            w.append({encode(s), s.index(m.coord())});
        }
    }
    return ShardSet::load(dir, "r");
}

TrainConfig quick(int epochs, int batch)
{
    TrainConfig c;
    c.epochs = epochs;
    c.batch_size = batch;
    c.log_every = 2;
    return c;
}

}  // namespace

TEST(TrainConfig, DefaultsAndSchedule)
{
    TrainConfig c;
    EXPECT_DOUBLE_EQ(c.lr0, 0.001);
    EXPECT_DOUBLE_EQ(c.decay_per_epoch, 0.5);
    EXPECT_EQ(c.batch_size, 16);
    EXPECT_FALSE(c.symmetry_augment);
    EXPECT_DOUBLE_EQ(c.learning_rate(0), 0.001);
    EXPECT_DOUBLE_EQ(c.learning_rate(1), 0.0005);
    EXPECT_DOUBLE_EQ(c.learning_rate(3), 0.000125);

    c.decay_per_epoch = 0.0;
    EXPECT_THROW(c.validate(), std::invalid_argument);
    c.decay_per_epoch = 1.5;
    EXPECT_THROW(c.validate(), std::invalid_argument);
    c.decay_per_epoch = 1.0;
    c.lr0 = 0.0;
    EXPECT_THROW(c.validate(), std::invalid_argument);
}

TEST(TrainConfig, ShippedConfigsParse)
{
    const auto dir = testutil::data_dir().parent_path().parent_path() / "configs";
    auto full = TrainConfig::from_key_values(KeyValues::load((dir / "full.cfg").string()));
    EXPECT_DOUBLE_EQ(full.lr0, 0.001);
    EXPECT_DOUBLE_EQ(full.decay_per_epoch, 0.5);
    EXPECT_DOUBLE_EQ(full.width_multiplier, 1.0);
    auto desk = TrainConfig::from_key_values(KeyValues::load((dir / "desk.cfg").string()));
    EXPECT_DOUBLE_EQ(desk.width_multiplier, 0.125);
}

TEST(TrainConfig, KeyValueRoundTrip)
{
    TrainConfig c;
    c.lr0 = 0.0125;
    c.epochs = 4;
    c.batch_size = 8;
    c.shuffle_seed = 99;
    c.symmetry_augment = true;
    c.max_steps = 123;
    std::stringstream s;
    c.to_key_values().write(s);
    auto back = TrainConfig::from_key_values(KeyValues::parse(s));
    EXPECT_DOUBLE_EQ(back.lr0, 0.0125);
    EXPECT_EQ(back.epochs, 4);
    EXPECT_EQ(back.batch_size, 8);
    EXPECT_EQ(back.shuffle_seed, 99u);
    EXPECT_TRUE(back.symmetry_augment);
    EXPECT_EQ(back.max_steps, 123u);

    std::istringstream typo("lr = 0.1\n");
    EXPECT_THROW(TrainConfig::from_key_values(KeyValues::parse(typo)), std::runtime_error);
}

TEST(Train, OneEpochOfTenAtBatchTwoIsFiveSteps)
{
    auto dir = scratch("five");
    auto data = random_set(dir, 10, 1);
    PolicyNet net(NetworkConfig::reference(0.125));
    net.init_weights(3);
    std::vector<double> lrs;
    TrainOptions opt;
    opt.on_step = [&](const StepInfo& s, const PolicyNet&) {
        lrs.push_back(s.lr);
        return true;
    };
    auto h = train(net, data, quick(1, 2), opt);
    EXPECT_EQ(h.steps, 5u);
    ASSERT_EQ(lrs.size(), 5u);
    for (double lr : lrs) EXPECT_DOUBLE_EQ(lr, 0.001);
    ASSERT_EQ(h.epochs.size(), 1u);
    EXPECT_EQ(h.epochs[0].steps, 5u);
    // Entries every 2 steps, plus the epoch's remainder.
    ASSERT_EQ(h.entries.size(), 3u);
    EXPECT_EQ(h.entries.back().step, 5u);
    fs::remove_all(dir);
}

TEST(Train, SecondEpochHalvesTheRate)
{
    auto dir = scratch("decay");
    auto data = random_set(dir, 6, 2);
    PolicyNet net(NetworkConfig::reference(0.125));
    net.init_weights(3);
    std::vector<std::pair<int, double>> seen;
    TrainOptions opt;
    opt.out_dir = dir / "run";
    opt.on_step = [&](const StepInfo& s, const PolicyNet&) {
        seen.emplace_back(s.epoch, s.lr);
        return true;
    };
    auto h = train(net, data, quick(2, 4), opt);
    ASSERT_EQ(seen.size(), 4u);  // 6 records at batch 4: a full and a partial batch per epoch
    EXPECT_DOUBLE_EQ(seen[1].second, 0.001);
    EXPECT_EQ(seen[2].first, 1);
    EXPECT_DOUBLE_EQ(seen[2].second, 0.0005);
    ASSERT_EQ(h.epochs.size(), 2u);
    EXPECT_DOUBLE_EQ(h.epochs[1].lr, 0.0005);

    EXPECT_TRUE(fs::exists(dir / "run" / "epoch-001.ckpt"));
    EXPECT_TRUE(fs::exists(dir / "run" / "epoch-002.ckpt"));
    EXPECT_TRUE(fs::exists(dir / "run" / "network.cfg"));
    auto history = nlohmann::json::parse(bytes_of(dir / "run" / "history.json"));
    EXPECT_EQ(history["steps"], 4);
    EXPECT_EQ(history["epochs"].size(), 2u);

    // The last epoch checkpoint is the trained network.
    auto loaded = PolicyNet::load(dir / "run" / "epoch-002.ckpt");
    auto f = encode(new_board(19));
    EXPECT_EQ(ensemble_scores(loaded, f, EnsembleMode::Single), ensemble_scores(net, f, EnsembleMode::Single));
    fs::remove_all(dir);
}

TEST(Train, DeterministicCheckpointsWithMasksIntact)
{
    auto dir = scratch("det");
    auto data = random_set(dir, 12, 3);
    auto run = [&](const std::string& name, TrainConfig c) {
        PolicyNet net(NetworkConfig::reference(0.125));
        net.init_weights(c.init_seed);
        TrainOptions opt;
        opt.out_dir = dir / name;
        train(net, data, c, opt);
    };
    auto c = quick(2, 4);
    c.symmetry_augment = true;
    run("a", c);
    run("b", c);
    for (const char* ckpt : {"epoch-001.ckpt", "epoch-002.ckpt"}) {
        EXPECT_TRUE(bytes_of(dir / "a" / ckpt) == bytes_of(dir / "b" / ckpt)) << ckpt;
        auto net = PolicyNet::load(dir / "a" / ckpt);
        int masked = 0;
        for (const auto* l : net.layers()) {
            if (!l->mask) continue;
            const int taps = l->kernel * l->kernel;
            for (std::size_t w = 0; w < l->weights.size(); ++w)
                if (!l->mask->active(int(w % taps) / l->kernel, int(w % taps) % l->kernel)) {
                    ++masked;
                    EXPECT_EQ(l->weights[w], 0.0f);
                }
        }
        EXPECT_GT(masked, 0);
    }
    c.shuffle_seed = 2;
    run("c", c);
    EXPECT_FALSE(bytes_of(dir / "a" / "epoch-002.ckpt") == bytes_of(dir / "c" / "epoch-002.ckpt"));
    if (!HasFailure()) fs::remove_all(dir);
}

TEST(Train, StopsOnStepCapAndCallback)
{
    auto dir = scratch("stop");
    auto data = random_set(dir, 8, 4);
    PolicyNet net(NetworkConfig::reference(0.125));
    net.init_weights(1);
    auto c = quick(5, 2);
    c.max_steps = 3;
    auto h = train(net, data, c);
    EXPECT_EQ(h.steps, 3u);
    EXPECT_TRUE(h.stopped_early);

    TrainOptions opt;
    opt.on_step = [](const StepInfo& s, const PolicyNet&) { return s.step < 2; };
    auto h2 = train(net, data, quick(5, 2), opt);
    EXPECT_EQ(h2.steps, 2u);
    EXPECT_TRUE(h2.stopped_early);

    PolicyNet small(NetworkConfig::reference(0.125, 9));
    EXPECT_THROW(train(small, data, quick(1, 2)), std::invalid_argument);
    EXPECT_THROW(train(net, ShardSet(), quick(1, 2)), std::invalid_argument);
    fs::remove_all(dir);
}

TEST(Train, RepeatedStepsReduceLossOnOneBatch)
{
    auto dir = scratch("fit");
    auto data = random_set(dir, 4, 5);
    std::vector<StateMovePair> batch;
    for (std::size_t i = 0; i < data.size(); ++i) batch.push_back(data.record(i));
    PolicyNet net(NetworkConfig::reference(0.125));
    net.init_weights(2);
    const double first = train_step(net, batch, 0.01f);
    double last = first;
    for (int i = 0; i < 15; ++i) last = train_step(net, batch, 0.01f);
    EXPECT_LT(last, first);
    fs::remove_all(dir);
}

TEST(Evaluate, OracleStubScoresPerfectly)
{
    auto dir = scratch("stub");
    auto data = random_set(dir, 20, 6);
    // The stub sees the label through a side channel: records are visited in order.
    std::size_t next = 0;
    Predictor stub = [&](const FeatureTensor& f) {
        const int label = data.record(next++).label;
        std::vector<float> scores(361, 0.0f);
        scores[std::size_t(label)] = 1000.0f;
        auto legal = f.plane(planes::kLegal);
        return make_policy_output(19, scores, {legal.begin(), legal.end()});
    };
    auto r = evaluate(stub, data, {1, 5, 10});
    EXPECT_DOUBLE_EQ(r.top1(), 1.0);
    EXPECT_DOUBLE_EQ(r.topk.at(10), 1.0);
    EXPECT_NEAR(r.loss, 0.0, 1e-6);
    EXPECT_EQ(r.examples_seen, 20u);
    fs::remove_all(dir);
}

TEST(Evaluate, ZeroNetIsUniformChance)
{
    auto dir = scratch("zero");
    {
        ShardWriter w(dir / "e-00000.cgsh");
        for (int label = 0; label < 361; ++label) w.append({encode(new_board(19)), label});
    }
    auto data = ShardSet::load(dir, "e");
    PolicyNet zero(NetworkConfig::reference(0.125));
    auto r = evaluate(zero, data, {1, 5, 10}, EnsembleMode::Single);
    EXPECT_NEAR(r.top1(), 1.0 / 361, 1e-12);
    EXPECT_NEAR(r.topk.at(5), 5.0 / 361, 1e-12);
    EXPECT_NEAR(r.topk.at(10), 10.0 / 361, 1e-12);
    EXPECT_NEAR(r.loss, std::log(361.0), 1e-5);
    fs::remove_all(dir);
}

TEST(Evaluate, TopKIsMonotone)
{
    auto dir = scratch("mono");
    auto data = random_set(dir, 16, 7);
    PolicyNet net(NetworkConfig::reference(0.125));
    net.init_weights(11);
    auto r = evaluate(net, data, {10, 1, 5});
    EXPECT_LE(r.top1(), r.topk.at(5));
    EXPECT_LE(r.topk.at(5), r.topk.at(10));
    for (const auto& [k, v] : r.topk) {
        EXPECT_GE(v, 0.0);
        EXPECT_LE(v, 1.0);
    }
    auto again = evaluate(net, data, {1, 5, 10});
    EXPECT_EQ(again.to_json().dump(), r.to_json().dump());
    EXPECT_EQ(evaluate(net, data, {1}, EnsembleMode::AllSymmetries, 4).examples_seen, 4u);
    EXPECT_THROW(evaluate(net, data, {0}), std::invalid_argument);
    fs::remove_all(dir);
}
