#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "crossgo/keyvalue.hpp"
#include "crossgo/model.hpp"
#include "crossgo/shard.hpp"
#include "crossgo/symmetry.hpp"

namespace crossgo {

struct TrainConfig {
    double lr0 = 0.001;
    double decay_per_epoch = 0.5;
    int epochs = 1;
    int batch_size = 16;
    std::uint64_t shuffle_seed = 1;
    std::uint64_t init_seed = 1;
    double width_multiplier = 0.125;
    bool symmetry_augment = false;
    int log_every = 10;         // steps per history entry
    std::size_t max_steps = 0;  // 0 means no cap

    double learning_rate(int epoch) const { return lr0 * std::pow(decay_per_epoch, epoch); }

    void validate() const
    {
        if (!(lr0 > 0.0)) throw std::invalid_argument("lr0 must be positive");
        if (!(decay_per_epoch > 0.0 && decay_per_epoch <= 1.0))
            throw std::invalid_argument("decay_per_epoch must be in (0, 1]");
        if (epochs < 1) throw std::invalid_argument("epochs must be at least 1");
        if (batch_size < 1) throw std::invalid_argument("batch_size must be at least 1");
        if (!(width_multiplier > 0.0)) throw std::invalid_argument("width_multiplier must be positive");
        if (log_every < 1) throw std::invalid_argument("log_every must be at least 1");
    }

    KeyValues to_key_values() const
    {
        KeyValues kv;
        auto num = [](double v) {
            std::ostringstream s;
            s.precision(17);
            s << v;
            return s.str();
        };
        kv.set("lr0", num(lr0));
        kv.set("decay_per_epoch", num(decay_per_epoch));
        kv.set("epochs", std::to_string(epochs));
        kv.set("batch_size", std::to_string(batch_size));
        kv.set("shuffle_seed", std::to_string(shuffle_seed));
        kv.set("init_seed", std::to_string(init_seed));
        kv.set("width_multiplier", num(width_multiplier));
        kv.set("symmetry_augment", symmetry_augment ? "true" : "false");
        kv.set("log_every", std::to_string(log_every));
        kv.set("max_steps", std::to_string(max_steps));
        return kv;
    }

    static TrainConfig from_key_values(const KeyValues& kv)
    {
        static const char* known[] = {"lr0",        "decay_per_epoch",  "epochs",    "batch_size", "shuffle_seed",
                                      "init_seed",  "width_multiplier", "symmetry_augment", "log_every", "max_steps"};
        for (const auto& [k, v] : kv.values())
            if (std::find(std::begin(known), std::end(known), k) == std::end(known))
                throw std::runtime_error("unknown training config key " + k);
        TrainConfig c;
        c.lr0 = kv.get("lr0", c.lr0);
        c.decay_per_epoch = kv.get("decay_per_epoch", c.decay_per_epoch);
        c.epochs = kv.get("epochs", c.epochs);
        c.batch_size = kv.get("batch_size", c.batch_size);
        c.shuffle_seed = kv.get("shuffle_seed", c.shuffle_seed);
        c.init_seed = kv.get("init_seed", c.init_seed);
        c.width_multiplier = kv.get("width_multiplier", c.width_multiplier);
        c.symmetry_augment = kv.get("symmetry_augment", c.symmetry_augment);
        c.log_every = kv.get("log_every", c.log_every);
        c.max_steps = kv.get("max_steps", c.max_steps);
        c.validate();
        return c;
    }
};

/// Records from one or more shards, addressed by a global index.
class ShardSet {
public:
    ShardSet() = default;
    explicit ShardSet(std::vector<Shard> shards) : shards_(std::move(shards))
    {
        for (const auto& s : shards_) {
            if (!shards_.empty() && s.board_size() != shards_.front().board_size())
                throw std::invalid_argument("shards mix board sizes");
            starts_.push_back(total_);
            total_ += s.size();
        }
    }

    /// All `<prefix>-NNNNN.cgsh` shards in a directory.
    static ShardSet load(const std::filesystem::path& dir, const std::string& prefix)
    {
        std::vector<Shard> shards;
        for (const auto& p : list_shards(dir, prefix)) shards.push_back(Shard::load(p));
        if (shards.empty()) throw std::runtime_error("no " + prefix + " shards in " + dir.string());
        return ShardSet(std::move(shards));
    }

    std::size_t size() const { return total_; }
    bool empty() const { return total_ == 0; }
    int board_size() const { return shards_.empty() ? kNetworkBoardSize : shards_.front().board_size(); }

    StateMovePair record(std::size_t i) const
    {
        if (i >= total_) throw std::out_of_range("shard set index");
        const auto it = std::upper_bound(starts_.begin(), starts_.end(), i) - 1;
        const auto s = static_cast<std::size_t>(it - starts_.begin());
        return shards_[s].record(i - *it);
    }

private:
    std::vector<Shard> shards_;
    std::vector<std::size_t> starts_;
    std::size_t total_ = 0;
};

struct StepInfo {
    std::size_t step;  // 1-based count of completed steps
    int epoch;         // 0-based
    double lr;
    double loss;  // mean over the batch
};

struct HistoryEntry {
    std::size_t step;
    int epoch;
    double lr;
    double loss;  // mean over the steps since the previous entry
};

struct EpochSummary {
    int epoch;
    double lr;
    std::size_t steps;
    double mean_loss;
    std::string checkpoint;
};

struct TrainHistory {
    std::vector<HistoryEntry> entries;
    std::vector<EpochSummary> epochs;
    std::size_t steps = 0;
    bool stopped_early = false;

    nlohmann::ordered_json to_json() const
    {
        nlohmann::ordered_json j;
        j["steps"] = steps;
        j["stopped_early"] = stopped_early;
        auto& e = j["loss"] = nlohmann::ordered_json::array();
        for (const auto& h : entries) e.push_back({{"step", h.step}, {"epoch", h.epoch}, {"lr", h.lr}, {"loss", h.loss}});
        auto& ep = j["epochs"] = nlohmann::ordered_json::array();
        for (const auto& s : epochs)
            ep.push_back({{"epoch", s.epoch},
                          {"lr", s.lr},
                          {"steps", s.steps},
                          {"mean_loss", s.mean_loss},
                          {"checkpoint", s.checkpoint}});
        return j;
    }
};

struct TrainOptions {
    /// Where epoch checkpoints, network.cfg and history.json go; empty skips writing.
    std::filesystem::path out_dir;
    /// Called after every step; returning false stops training.
    std::function<bool(const StepInfo&, const PolicyNet&)> on_step;
};

/// Mean softmax cross-entropy over every board point, and its gradient
/// with respect to the scores, for a batch of (N, 1, H, W) scores.
inline double batch_loss(const nn::Tensor<float>& scores, std::span<const int> labels, nn::Tensor<float>& grad)
{
    const std::size_t area = scores.size() / labels.size();
    grad = nn::Tensor<float>(scores.shape());
    double total = 0.0;
    const float scale = 1.0f / static_cast<float>(labels.size());
    for (std::size_t b = 0; b < labels.size(); ++b) {
        auto r = nn::softmax_cross_entropy<float>(std::span(scores.data() + b * area, area), labels[b]);
        total += r.loss;
        for (std::size_t i = 0; i < area; ++i) grad[b * area + i] = r.grad[i] * scale;
    }
    return total / static_cast<double>(labels.size());
}

/// One SGD step on a batch; returns the mean loss before the update.
inline double train_step(PolicyNet& net, std::span<const StateMovePair> batch, float lr)
{
    std::vector<FeatureTensor> features;
    std::vector<int> labels;
    for (const auto& p : batch) {
        features.push_back(p.features);
        labels.push_back(p.label);
    }
    PolicyNet::Trace trace;
    const auto scores = net.forward(to_batch(features), trace);
    nn::Tensor<float> grad;
    const double loss = batch_loss(scores, labels, grad);
    const auto g = net.backward(grad, trace);
    auto layers = net.layers();
    for (std::size_t i = 0; i < layers.size(); ++i) {
        nn::sgd_step(layers[i]->weights, g.weights[i], lr);
        nn::sgd_step(layers[i]->bias, g.bias[i], lr);
    }
    return loss;
}

namespace detail {

inline void write_text(const std::filesystem::path& path, const std::string& text)
{
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << text;
}

inline std::string epoch_checkpoint_name(int epoch)
{
    char name[32];
    std::snprintf(name, sizeof name, "epoch-%03d.ckpt", epoch + 1);
    return name;
}

}  // namespace detail

/// Minibatch SGD over `data`. Every epoch visits the records in a fresh
/// seeded order with lr = lr0 * decay^epoch; a trailing partial batch is
/// kept. Results depend only on the config and the data.
inline TrainHistory train(PolicyNet& net, const ShardSet& data, const TrainConfig& config, const TrainOptions& options = {})
{
    config.validate();
    if (data.empty()) throw std::invalid_argument("no training records");
    if (data.board_size() != net.config().board_size)
        throw std::invalid_argument("shard board size " + std::to_string(data.board_size()) + " does not match network " +
                                    std::to_string(net.config().board_size));
    if (net.config().input_planes != planes::kCount) throw std::invalid_argument("network input planes do not match features");

    const bool writing = !options.out_dir.empty();
    if (writing) {
        std::filesystem::create_directories(options.out_dir);
        std::ofstream cfg(options.out_dir / "network.cfg");
        net.config().to_key_values().write(cfg);
        std::ofstream tcfg(options.out_dir / "train.cfg");
        config.to_key_values().write(tcfg);
    }

    TrainHistory history;
    std::mt19937_64 rng(config.shuffle_seed);
    std::vector<std::size_t> order(data.size());
    double window = 0.0;
    int window_steps = 0;

    for (int epoch = 0; epoch < config.epochs && !history.stopped_early; ++epoch) {
        const double lr = config.learning_rate(epoch);
        std::iota(order.begin(), order.end(), std::size_t{0});
        for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng() % i]);

        double epoch_loss = 0.0;
        std::size_t epoch_steps = 0;
        for (std::size_t begin = 0; begin < order.size(); begin += std::size_t(config.batch_size)) {
            if (config.max_steps && history.steps >= config.max_steps) {
                history.stopped_early = true;
                break;
            }
            const std::size_t end = std::min(order.size(), begin + std::size_t(config.batch_size));
            std::vector<StateMovePair> batch;
            for (std::size_t i = begin; i < end; ++i) {
                auto p = data.record(order[i]);
                if (config.symmetry_augment) {
                    const Symmetry s(static_cast<int>(rng() % Symmetry::kCount));
                    const int n = p.features.size();
                    const auto rc = s.apply(p.label / n, p.label % n, n);
                    p = {transform(p.features, s), rc[0] * n + rc[1]};
                }
                batch.push_back(std::move(p));
            }
            const double loss = train_step(net, batch, static_cast<float>(lr));
            ++history.steps;
            ++epoch_steps;
            epoch_loss += loss;
            window += loss;
            if (++window_steps == config.log_every) {
                history.entries.push_back({history.steps, epoch, lr, window / window_steps});
                window = 0.0;
                window_steps = 0;
            }
            if (options.on_step && !options.on_step(StepInfo{history.steps, epoch, lr, loss}, net)) {
                history.stopped_early = true;
                break;
            }
        }
        if (window_steps > 0) {
            history.entries.push_back({history.steps, epoch, lr, window / window_steps});
            window = 0.0;
            window_steps = 0;
        }
        if (epoch_steps == 0) break;
        EpochSummary summary{epoch, lr, epoch_steps, epoch_loss / double(epoch_steps), ""};
        if (writing) {
            summary.checkpoint = detail::epoch_checkpoint_name(epoch);
            net.save(options.out_dir / summary.checkpoint);
        }
        history.epochs.push_back(summary);
        if (writing) detail::write_text(options.out_dir / "history.json", history.to_json().dump(2) + "\n");
    }
    return history;
}

struct EvalReport {
    std::map<int, double> topk;  // k -> fraction of hits
    double loss = 0.0;           // mean cross-entropy of the scores over all points
    std::size_t examples_seen = 0;

    double top1() const
    {
        auto it = topk.find(1);
        return it == topk.end() ? 0.0 : it->second;
    }

    nlohmann::ordered_json to_json() const
    {
        nlohmann::ordered_json j;
        j["examples_seen"] = examples_seen;
        j["loss"] = loss;
        for (const auto& [k, v] : topk) j["top" + std::to_string(k)] = v;
        return j;
    }
};

/// Scores one position; the default wraps ensemble_predict.
using Predictor = std::function<PolicyOutput(const FeatureTensor&)>;

/// Top-k accuracy of `predict` over `data`: a hit when the label is among
/// the k most probable legal moves. `limit` > 0 evaluates only the first
/// `limit` records.
inline EvalReport evaluate(const Predictor& predict, const ShardSet& data, const std::vector<int>& ks, std::size_t limit = 0)
{
    if (data.empty()) throw std::invalid_argument("no evaluation records");
    if (ks.empty()) throw std::invalid_argument("no k values to evaluate");
    for (int k : ks)
        if (k < 1) throw std::invalid_argument("k must be at least 1");
    const int kmax = *std::max_element(ks.begin(), ks.end());
    const std::size_t n = limit ? std::min(limit, data.size()) : data.size();

    std::map<int, std::size_t> hits;
    for (int k : ks) hits[k] = 0;
    double loss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const auto pair = data.record(i);
        const auto out = predict(pair.features);
        loss += nn::softmax_cross_entropy<float>(out.scores, pair.label).loss;
        const auto ranked = top_k(out, kmax);
        const Move truth = Move::play(pair.label / out.size, pair.label % out.size);
        auto pos = std::find_if(ranked.begin(), ranked.end(), [&](const RankedMove& r) { return r.move == truth; });
        const auto rank = static_cast<int>(pos - ranked.begin());
        for (int k : ks)
            if (rank < k && pos != ranked.end()) ++hits[k];
    }
    EvalReport report;
    report.examples_seen = n;
    report.loss = loss / static_cast<double>(n);
    for (const auto& [k, h] : hits) report.topk[k] = static_cast<double>(h) / static_cast<double>(n);
    return report;
}

inline EvalReport evaluate(const PolicyNet& net, const ShardSet& data, const std::vector<int>& ks = {1, 5, 10},
                           EnsembleMode mode = EnsembleMode::AllSymmetries, std::size_t limit = 0)
{
    return evaluate([&](const FeatureTensor& f) { return predict(net, f, mode); }, data, ks, limit);
}

}  // namespace crossgo
