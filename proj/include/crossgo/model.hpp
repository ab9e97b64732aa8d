#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "crossgo/board.hpp"
#include "crossgo/features.hpp"
#include "crossgo/keyvalue.hpp"
#include "crossgo/nn/checkpoint.hpp"
#include "crossgo/nn/conv.hpp"
#include "crossgo/nn/ops.hpp"
#include "crossgo/nn/tensor.hpp"

namespace crossgo {

/// One cross branch of a cross layer: an n x n convolution masked to cross
/// width `width`, optionally preceded by a 1x1 squeeze.
struct CrossSpec {
    int kernel = 7;
    int width = 1;
    int channels = 32;
    bool squeeze = false;
};

/// A cross layer: parallel dense and cross branches over the same input,
/// optionally alongside the input itself, concatenated and fused by a 1x1.
struct CrossLayerConfig {
    int dense_kernel = 3;
    int dense_channels = 128;
    std::vector<CrossSpec> crosses;
    int squeeze_channels = 16;
    bool include_passthrough = true;
    int fused_channels = 256;
};

struct NetworkConfig {
    int board_size = kNetworkBoardSize;
    int input_planes = planes::kCount;
    double width_multiplier = 1.0;

    int stem_kernel = 7;
    int stem_channels = 128;
    CrossLayerConfig block_a;
    int trunk_a_depth = 7;
    CrossLayerConfig block_b;
    int trunk_b_depth = 7;
    int trunk_kernel = 3;
    int trunk_channels = 256;

    /// Depth-ordered layer names; filled for the reference architecture.
    std::vector<std::string> layer_names;

    /// The 23-layer cross-convolution policy network. `multiplier` scales
    /// every channel width (1/8 gives the desk-scale variant).
    static NetworkConfig reference(double multiplier = 1.0, int board_size = kNetworkBoardSize)
    {
        NetworkConfig c;
        c.board_size = board_size;
        c.width_multiplier = multiplier;
        c.block_a.dense_kernel = 3;
        c.block_a.dense_channels = 128;
        c.block_a.crosses = {{7, 1, 32, false}, {39, 1, 16, true}, {39, 5, 16, true}};
        c.block_b.dense_kernel = 7;
        c.block_b.dense_channels = 64;
        c.block_b.crosses = {{39, 1, 16, true}, {39, 5, 16, true}};
        c.layer_names.push_back("L1 stem 7x7");
        c.layer_names.push_back("L2 cross_a 3x3 dense, 7x7 cross c=1, 1x1 squeezes");
        c.layer_names.push_back("L3 cross_a 39x39 cross c=1 and c=5");
        c.layer_names.push_back("L4 cross_a concat + 1x1 fuse");
        for (int i = 0; i < 7; ++i) c.layer_names.push_back("L" + std::to_string(5 + i) + " trunk_a 3x3");
        c.layer_names.push_back("L12 cross_b 7x7 dense");
        c.layer_names.push_back("L13 cross_b 1x1 squeezes");
        c.layer_names.push_back("L14 cross_b 39x39 cross c=1 and c=5");
        c.layer_names.push_back("L15 cross_b concat + 1x1 fuse");
        for (int i = 0; i < 7; ++i) c.layer_names.push_back("L" + std::to_string(16 + i) + " trunk_b 3x3");
        c.layer_names.push_back("L23 score head 1x1");
        return c;
    }

    int scaled(int channels) const
    {
        return std::max(1, static_cast<int>(std::lround(channels * width_multiplier)));
    }

    void validate() const
    {
        if (board_size < 1) throw std::invalid_argument("network board size must be positive");
        if (input_planes < 1) throw std::invalid_argument("network needs at least one input plane");
        if (!(width_multiplier > 0.0)) throw std::invalid_argument("width multiplier must be positive");
        auto odd = [](int k) { return k >= 1 && k % 2 == 1; };
        if (!odd(stem_kernel) || !odd(trunk_kernel)) throw std::invalid_argument("kernels must be odd");
        for (const auto* b : {&block_a, &block_b}) {
            if (b->dense_channels <= 0 && b->crosses.empty() && !b->include_passthrough)
                throw std::invalid_argument("cross layer needs at least one branch");
            if (b->dense_channels > 0 && !odd(b->dense_kernel)) throw std::invalid_argument("kernels must be odd");
            for (const auto& x : b->crosses)
                if (!odd(x.kernel) || x.channels <= 0 || x.width < 0)
                    throw std::invalid_argument("invalid cross branch");
        }
    }

    /// Human-readable, versioned descriptor.
    KeyValues to_key_values() const
    {
        KeyValues kv;
        kv.set("format", "crossgo-net");
        kv.set("version", "1");
        kv.set("architecture", "cross-policy-23");
        kv.set("board_size", std::to_string(board_size));
        kv.set("input_planes", std::to_string(input_planes));
        std::ostringstream m;
        m.precision(17);
        m << width_multiplier;
        kv.set("width_multiplier", m.str());
        return kv;
    }

    static NetworkConfig from_key_values(const KeyValues& kv)
    {
        if (kv.get("format", std::string("crossgo-net")) != "crossgo-net")
            throw std::runtime_error("not a crossgo network descriptor");
        if (kv.get<int>("version", 1) != 1) throw std::runtime_error("unsupported network descriptor version");
        if (kv.get("architecture", std::string("cross-policy-23")) != "cross-policy-23")
            throw std::runtime_error("unknown architecture in network descriptor");
        auto c = reference(kv.get<double>("width_multiplier", 1.0), kv.get<int>("board_size", kNetworkBoardSize));
        c.input_planes = kv.get<int>("input_planes", planes::kCount);
        c.validate();
        return c;
    }
};

/// Per-point scores and the legality-restricted move distribution.
struct PolicyOutput {
    int size = kNetworkBoardSize;
    std::vector<float> scores;
    std::vector<float> probabilities;
    std::vector<std::uint8_t> legal;
};

struct RankedMove {
    Move move = Move::pass();
    float probability = 0.0f;
};

/// Gradients aligned with PolicyNet::layers().
template <typename T>
struct BasicParamGrads {
    std::vector<nn::Tensor<T>> weights;
    std::vector<nn::Tensor<T>> bias;
};

/// The policy network over scalar type T. Inference and training use float;
/// double exists for gradient verification.
template <typename T>
class BasicPolicyNet {
public:
    using Tensor = nn::Tensor<T>;
    using Layer = nn::ConvLayer<T>;
    using ParamGrads = BasicParamGrads<T>;

    struct Unit {
        Layer conv;
        bool relu = true;
    };

    /// A plain convolution (`branches` empty) or a cross layer whose
    /// concatenated branches feed `main` as the 1x1 fuse.
    struct Stage {
        std::vector<std::vector<Unit>> branches;
        bool passthrough = false;
        Unit main;

        bool is_block() const { return !branches.empty() || passthrough; }
    };

    /// Activations saved by a training forward pass, indexed like layers().
    struct Trace {
        std::vector<Tensor> inputs;
        std::vector<Tensor> outputs;
    };

    /// All weights start at zero; call init_weights for a trainable net.
    explicit BasicPolicyNet(NetworkConfig config) : config_(std::move(config))
    {
        config_.validate();
        build();
    }

    const NetworkConfig& config() const { return config_; }
    const std::vector<Stage>& stages() const { return stages_; }

    std::vector<Layer*> layers()
    {
        std::vector<Layer*> out;
        for (auto& s : stages_) {
            for (auto& b : s.branches)
                for (auto& u : b) out.push_back(&u.conv);
            out.push_back(&s.main.conv);
        }
        return out;
    }

    std::vector<const Layer*> layers() const
    {
        std::vector<const Layer*> out;
        for (const auto& s : stages_) {
            for (const auto& b : s.branches)
                for (const auto& u : b) out.push_back(&u.conv);
            out.push_back(&s.main.conv);
        }
        return out;
    }

    std::size_t parameter_count() const
    {
        std::size_t n = 0;
        for (const auto* l : layers()) n += l->weights.size() + l->bias.size();
        return n;
    }

    /// He initialisation (fan-in over active weights); the score head uses
    /// unit gain since no ReLU follows it.
    void init_weights(std::uint64_t seed)
    {
        std::mt19937_64 rng(seed);
        auto all = layers();
        for (std::size_t i = 0; i < all.size(); ++i) nn::init_he(*all[i], rng, i + 1 == all.size() ? 1.0 : 2.0);
    }

    /// (N, planes, H, W) or (planes, H, W) in; (N, 1, H, W) or (1, H, W) out.
    Tensor forward(const Tensor& input) const
    {
        Tensor x = input;
        for (const auto& s : stages_) x = run_stage(s, x, nullptr);
        return x;
    }

    Tensor forward(const Tensor& input, Trace& trace) const
    {
        trace.inputs.clear();
        trace.outputs.clear();
        Tensor x = input;
        for (const auto& s : stages_) x = run_stage(s, x, &trace);
        return x;
    }

    /// Backpropagates d(loss)/d(scores) through a traced forward pass.
    ParamGrads backward(const Tensor& grad_scores, const Trace& trace) const
    {
        ParamGrads g;
        for (const auto* l : layers()) {
            g.weights.emplace_back(l->weights.shape());
            g.bias.emplace_back(l->bias.shape());
        }
        std::size_t next = trace.inputs.size();
        Tensor grad = grad_scores;
        for (std::size_t si = stages_.size(); si-- > 0;) {
            grad = backward_stage(stages_[si], grad, trace, g, next, si > 0);
        }
        return g;
    }

    /// d(loss)/d(input) for a traced forward pass.
    Tensor input_gradient(const Tensor& grad_scores, const Trace& trace) const
    {
        ParamGrads g;
        for (const auto* l : layers()) {
            g.weights.emplace_back(l->weights.shape());
            g.bias.emplace_back(l->bias.shape());
        }
        std::size_t next = trace.inputs.size();
        Tensor grad = grad_scores;
        for (std::size_t si = stages_.size(); si-- > 0;) grad = backward_stage(stages_[si], grad, trace, g, next, true);
        return grad;
    }

    void save(std::ostream& out) const { nn::write_layers(out, layers()); }

    void save(const std::filesystem::path& path) const
    {
        std::ofstream out(path, std::ios::binary);
        if (!out) throw std::runtime_error("cannot write checkpoint " + path.string());
        save(out);
    }

    /// Loads weights into a network of the given architecture; every stored
    /// layer descriptor must match.
    static BasicPolicyNet load(std::istream& in, const NetworkConfig& config)
    {
        auto stored = nn::read_layers(in);
        BasicPolicyNet net(config);
        auto mine = net.layers();
        if (stored.size() != mine.size())
            throw io::FormatError("checkpoint has " + std::to_string(stored.size()) + " layers, architecture has " +
                                  std::to_string(mine.size()));
        for (std::size_t i = 0; i < mine.size(); ++i) {
            const auto& s = stored[i];
            const auto& m = *mine[i];
            if (s.in_channels != m.in_channels || s.out_channels != m.out_channels || s.kernel != m.kernel ||
                s.stride != m.stride || s.pad != m.pad || s.mask.has_value() != m.mask.has_value() ||
                (s.mask && s.mask->width() != m.mask->width()))
                throw io::FormatError("checkpoint layer " + std::to_string(i) + " does not match architecture");
            *mine[i] = s;
        }
        return net;
    }

    /// Loads a checkpoint, taking the architecture from `config` when given,
    /// else from a sibling network.cfg, else inferring the width multiplier
    /// from the stem.
    static BasicPolicyNet load(const std::filesystem::path& path, std::optional<NetworkConfig> config = std::nullopt)
    {
        if (!config) {
            auto sidecar = path.parent_path() / "network.cfg";
            if (std::filesystem::exists(sidecar)) {
                config = NetworkConfig::from_key_values(KeyValues::load(sidecar.string()));
            } else {
                std::ifstream probe(path, std::ios::binary);
                if (!probe) throw std::runtime_error("cannot open checkpoint " + path.string());
                auto stored = nn::read_layers(probe);
                if (stored.empty()) throw io::FormatError("checkpoint has no layers");
                config = NetworkConfig::reference(stored.front().out_channels / 128.0);
            }
        }
        std::ifstream in(path, std::ios::binary);
        if (!in) throw std::runtime_error("cannot open checkpoint " + path.string());
        return load(in, *config);
    }

private:
    Unit make_unit(int in, int out, int k, std::optional<nn::CrossMask> mask = std::nullopt, bool relu = true) const
    {
        return Unit{Layer(in, out, k, k / 2, std::move(mask)), relu};
    }

    Stage make_block(const CrossLayerConfig& b, int in) const
    {
        Stage s;
        if (b.dense_channels > 0) s.branches.push_back({make_unit(in, config_.scaled(b.dense_channels), b.dense_kernel)});
        for (const auto& x : b.crosses) {
            std::vector<Unit> branch;
            int width_in = in;
            if (x.squeeze) {
                branch.push_back(make_unit(in, config_.scaled(b.squeeze_channels), 1));
                width_in = config_.scaled(b.squeeze_channels);
            }
            branch.push_back(make_unit(width_in, config_.scaled(x.channels), x.kernel, nn::CrossMask(x.kernel, x.width)));
            s.branches.push_back(std::move(branch));
        }
        s.passthrough = b.include_passthrough;
        int concat = s.passthrough ? in : 0;
        for (const auto& br : s.branches) concat += br.back().conv.out_channels;
        s.main = make_unit(concat, config_.scaled(b.fused_channels), 1);
        return s;
    }

    void build()
    {
        const auto& c = config_;
        auto single = [&](int in, int out, int k, bool relu = true) {
            Stage s;
            s.main = make_unit(in, out, k, std::nullopt, relu);
            return s;
        };
        int ch = c.scaled(c.stem_channels);
        stages_.push_back(single(c.input_planes, ch, c.stem_kernel));
        stages_.push_back(make_block(c.block_a, ch));
        ch = stages_.back().main.conv.out_channels;
        for (int i = 0; i < c.trunk_a_depth; ++i) {
            stages_.push_back(single(ch, c.scaled(c.trunk_channels), c.trunk_kernel));
            ch = c.scaled(c.trunk_channels);
        }
        stages_.push_back(make_block(c.block_b, ch));
        ch = stages_.back().main.conv.out_channels;
        for (int i = 0; i < c.trunk_b_depth; ++i) {
            stages_.push_back(single(ch, c.scaled(c.trunk_channels), c.trunk_kernel));
            ch = c.scaled(c.trunk_channels);
        }
        stages_.push_back(single(ch, 1, 1, false));
    }

    static Tensor run_unit(const Unit& u, const Tensor& x, Trace* trace)
    {
        Tensor y = nn::conv2d_forward(x, u.conv);
        if (u.relu)
            for (auto& v : y.values()) v = v > T(0) ? v : T(0);
        if (trace) {
            trace->inputs.push_back(x);
            trace->outputs.push_back(y);
        }
        return y;
    }

    Tensor run_stage(const Stage& s, const Tensor& x, Trace* trace) const
    {
        if (!s.is_block()) return run_unit(s.main, x, trace);
        std::vector<Tensor> outs;
        outs.reserve(s.branches.size() + 1);
        for (const auto& branch : s.branches) {
            Tensor h = x;
            for (const auto& u : branch) h = run_unit(u, h, trace);
            outs.push_back(std::move(h));
        }
        if (s.passthrough) outs.push_back(x);
        return run_unit(s.main, nn::concat_channels(outs), trace);
    }

    static Tensor backward_unit(const Unit& u, Tensor grad, const Trace& trace, ParamGrads& g, std::size_t index,
                                bool need_input)
    {
        if (u.relu) nn::relu_backward_inplace(grad, trace.outputs[index]);
        Tensor dx;
        nn::conv2d_backward_accumulate(grad, trace.inputs[index], u.conv, g.weights[index], g.bias[index],
                                       need_input ? &dx : nullptr);
        return dx;
    }

    Tensor backward_stage(const Stage& s, const Tensor& grad, const Trace& trace, ParamGrads& g, std::size_t& next,
                          bool need_input) const
    {
        // Branch inputs always need gradients so they can be summed.
        if (!s.is_block()) return backward_unit(s.main, grad, trace, g, --next, need_input);

        Tensor dcat = backward_unit(s.main, grad, trace, g, --next, true);
        std::vector<std::size_t> widths;
        for (const auto& b : s.branches) widths.push_back(std::size_t(b.back().conv.out_channels));
        if (s.passthrough) widths.push_back(std::size_t(s.main.conv.in_channels) - std::accumulate(widths.begin(), widths.end(), std::size_t{0}));
        auto parts = nn::split_channels(dcat, std::span<const std::size_t>(widths));

        Tensor dx = s.passthrough ? std::move(parts.back()) : Tensor();
        bool have_dx = s.passthrough;
        for (std::size_t bi = s.branches.size(); bi-- > 0;) {
            const auto& branch = s.branches[bi];
            Tensor h = std::move(parts[bi]);
            for (std::size_t ui = branch.size(); ui-- > 0;) h = backward_unit(branch[ui], std::move(h), trace, g, --next, true);
            if (!have_dx) {
                dx = std::move(h);
                have_dx = true;
            } else {
                for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += h[i];
            }
        }
        return dx;
    }

    NetworkConfig config_;
    std::vector<Stage> stages_;
};

using PolicyNet = BasicPolicyNet<float>;
using ParamGrads = BasicParamGrads<float>;

/// Packs feature tensors into an (N, 24, H, W) float batch.
inline nn::Tensor<float> to_batch(std::span<const FeatureTensor> features)
{
    if (features.empty()) throw std::invalid_argument("empty feature batch");
    const int n = features[0].size();
    const std::size_t item = static_cast<std::size_t>(FeatureTensor::kPlanes * n * n);
    nn::Tensor<float> out(nn::Shape{features.size(), std::size_t(FeatureTensor::kPlanes), std::size_t(n), std::size_t(n)});
    for (std::size_t i = 0; i < features.size(); ++i) {
        if (features[i].size() != n) throw std::invalid_argument("mixed board sizes in batch");
        auto src = features[i].data();
        std::transform(src.begin(), src.end(), out.data() + i * item, [](std::uint8_t b) { return float(b); });
    }
    return out;
}

enum class EnsembleMode { Single, AllSymmetries };

/// Raw scores for one position. In AllSymmetries mode the network sees all
/// eight orientations; each score map is mapped back and the eight maps are
/// averaged in symmetry-id order.
inline std::vector<float> ensemble_scores(const PolicyNet& net, const FeatureTensor& features,
                                          EnsembleMode mode = EnsembleMode::AllSymmetries)
{
    const int n = features.size();
    const std::size_t area = static_cast<std::size_t>(n * n);
    if (mode == EnsembleMode::Single) {
        auto out = net.forward(to_batch(std::span(&features, 1)));
        return {out.data(), out.data() + area};
    }
    std::vector<FeatureTensor> views;
    for (Symmetry s : all_symmetries()) views.push_back(transform(features, s));
    const auto out = net.forward(to_batch(views));
    std::vector<double> sum(area, 0.0);
    for (int s = 0; s < Symmetry::kCount; ++s) {
        std::span<const float> view(out.data() + s * area, area);
        auto back = inverse_transform_scores(view, n, Symmetry(s));
        for (std::size_t i = 0; i < area; ++i) sum[i] += back[i];
    }
    std::vector<float> avg(area);
    for (std::size_t i = 0; i < area; ++i) avg[i] = static_cast<float>(sum[i] / Symmetry::kCount);
    return avg;
}

/// Softmax restricted to legal points; illegal points get probability 0.
inline PolicyOutput make_policy_output(int size, std::vector<float> scores, std::vector<std::uint8_t> legal)
{
    PolicyOutput out;
    out.size = size;
    out.probabilities.assign(scores.size(), 0.0f);
    double peak = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < scores.size(); ++i)
        if (legal[i]) peak = std::max(peak, double(scores[i]));
    double total = 0.0;
    std::vector<double> e(scores.size(), 0.0);
    for (std::size_t i = 0; i < scores.size(); ++i)
        if (legal[i]) total += e[i] = std::exp(double(scores[i]) - peak);
    if (total > 0.0)
        for (std::size_t i = 0; i < scores.size(); ++i) out.probabilities[i] = static_cast<float>(e[i] / total);
    out.scores = std::move(scores);
    out.legal = std::move(legal);
    return out;
}

/// Policy for an encoded position; legality comes from the legal-move plane.
inline PolicyOutput predict(const PolicyNet& net, const FeatureTensor& features,
                            EnsembleMode mode = EnsembleMode::AllSymmetries)
{
    auto legal_plane = features.plane(planes::kLegal);
    return make_policy_output(features.size(), ensemble_scores(net, features, mode),
                              std::vector<std::uint8_t>(legal_plane.begin(), legal_plane.end()));
}

inline PolicyOutput ensemble_predict(const PolicyNet& net, const BoardState& state,
                                     EnsembleMode mode = EnsembleMode::AllSymmetries)
{
    return predict(net, encode(state), mode);
}

/// Highest-scoring legal play; ties go to the smallest row-major index.
/// Pass only when nothing is legal.
inline Move select_move(const PolicyOutput& output)
{
    int best = -1;
    for (std::size_t i = 0; i < output.scores.size(); ++i)
        if (output.legal[i] && (best < 0 || output.scores[i] > output.scores[std::size_t(best)])) best = int(i);
    if (best < 0) return Move::pass();
    return Move::play(best / output.size, best % output.size);
}

/// The k most probable legal plays, descending (ties by row-major index).
inline std::vector<RankedMove> top_k(const PolicyOutput& output, int k)
{
    if (k < 1) throw std::invalid_argument("top_k needs k >= 1");
    std::vector<int> idx;
    for (std::size_t i = 0; i < output.scores.size(); ++i)
        if (output.legal[i]) idx.push_back(int(i));
    std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) { return output.scores[a] > output.scores[b]; });
    if (idx.size() > std::size_t(k)) idx.resize(std::size_t(k));
    std::vector<RankedMove> out;
    for (int i : idx) out.push_back({Move::play(i / output.size, i % output.size), output.probabilities[std::size_t(i)]});
    return out;
}

}  // namespace crossgo
