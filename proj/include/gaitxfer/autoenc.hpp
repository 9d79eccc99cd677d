#pragma once

#include "gaitxfer/numerics/graph.hpp"
#include "gaitxfer/numerics/ops.hpp"
#include "gaitxfer/numerics/optimizer.hpp"
#include "gaitxfer/numerics/parameters.hpp"
#include "gaitxfer/numerics/rng.hpp"
#include "gaitxfer/sigprep.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace gaitxfer {

enum class PoolMode {
    stride1, ///< length-preserving moving average
    none     ///< pooling layers omitted
};

/// Temporal DenseNet autoencoder hyperparameters. Defaults reproduce the
/// reference configuration: 2 dense blocks per side, 4 layers per block,
/// bottleneck 4, 32 initial filters of width 7, initial pool 3, growth 16,
/// kernel width 3, transition pool 2, stride 1, theta 0.5, dropout 0.2.
struct AutoencoderConfig {
    std::size_t input_channels = 3;
    std::size_t dense_blocks_per_side = 2;
    std::size_t layers_per_block = 4;
    /// Bottleneck conv emits bottleneck_size * growth_filters channels; 0 disables it.
    std::size_t bottleneck_size = 4;
    std::size_t initial_filters = 32;
    std::size_t initial_kernel_width = 7;
    std::size_t initial_pool_width = 3;
    std::size_t growth_filters = 16;
    std::size_t kernel_width = 3;
    /// Width of the bottleneck conv inside each composite layer.
    std::size_t bottleneck_kernel_width = 3;
    std::size_t transition_pool_size = 2;
    std::size_t stride = 1;
    double theta = 0.5;
    double dropout_rate = 0.2;
    std::size_t latent_channels = 32;
    bool use_batchnorm = true;
    PoolMode pooling = PoolMode::stride1;
    bool reference_architecture = true;

    // training
    double learning_rate = 1e-3;
    double weight_decay = 1e-4;
    std::size_t batch_size = 16;
    std::size_t epochs = 10;
    double bn_momentum = 0.1;
    std::uint64_t seed = 42;

    void validate() const
    {
        auto positive = [](std::size_t v, const char* name) {
            if (v == 0) throw std::invalid_argument(std::string("autoencoder config: ") + name + " must be positive");
        };
        positive(input_channels, "input_channels");
        positive(dense_blocks_per_side, "dense_blocks_per_side");
        positive(layers_per_block, "layers_per_block");
        positive(initial_filters, "initial_filters");
        positive(initial_kernel_width, "initial_kernel_width");
        positive(initial_pool_width, "initial_pool_width");
        positive(growth_filters, "growth_filters");
        positive(kernel_width, "kernel_width");
        positive(bottleneck_kernel_width, "bottleneck_kernel_width");
        positive(transition_pool_size, "transition_pool_size");
        positive(latent_channels, "latent_channels");
        positive(batch_size, "batch_size");
        if (stride != 1) throw std::invalid_argument("autoencoder config: stride must be 1");
        if (!(theta > 0.0 && theta <= 1.0)) throw std::invalid_argument("autoencoder config: theta must lie in (0, 1]");
        if (!(dropout_rate >= 0.0 && dropout_rate < 1.0))
            throw std::invalid_argument("autoencoder config: dropout_rate must lie in [0, 1)");
        for (std::size_t w : {initial_kernel_width, kernel_width, bottleneck_kernel_width})
            if (w % 2 == 0) throw std::invalid_argument("autoencoder config: conv widths must be odd");
        if (reference_architecture && latent_channels != 32)
            throw std::invalid_argument("autoencoder config: reference-architecture mode requires 32 latent channels");
        if (!(learning_rate > 0.0)) throw std::invalid_argument("autoencoder config: learning_rate must be positive");
    }
};

namespace ae_detail {

struct ConvSpec {
    std::string name;
    std::size_t in = 0;
    std::size_t out = 0;
    std::size_t width = 1;
};

struct CompositeSpec {
    std::string prefix;
    std::size_t in = 0;
    bool has_bottleneck = false;
    ConvSpec bottleneck;
    ConvSpec conv;
};

struct TransitionSpec {
    std::string prefix;
    ConvSpec conv;
};

/// Channel arithmetic of one side (encoder or decoder).
struct SidePlan {
    std::string prefix;
    ConvSpec stem;
    std::vector<std::vector<CompositeSpec>> blocks;
    std::vector<TransitionSpec> transitions; // transitions[b] follows blocks[b]
    std::size_t head_in = 0;
    ConvSpec head;
};

inline SidePlan make_plan(const AutoencoderConfig& cfg, const std::string& prefix, std::size_t in, std::size_t out)
{
    SidePlan plan;
    plan.prefix = prefix;
    plan.stem = {prefix + ".stem", in, cfg.initial_filters, cfg.initial_kernel_width};
    std::size_t c = cfg.initial_filters;
    for (std::size_t b = 0; b < cfg.dense_blocks_per_side; ++b) {
        std::vector<CompositeSpec> block;
        for (std::size_t l = 0; l < cfg.layers_per_block; ++l) {
            CompositeSpec s;
            s.prefix = prefix + ".block" + std::to_string(b) + ".layer" + std::to_string(l);
            s.in = c;
            s.has_bottleneck = cfg.bottleneck_size > 0;
            std::size_t conv_in = c;
            if (s.has_bottleneck) {
                const std::size_t inter = cfg.bottleneck_size * cfg.growth_filters;
                s.bottleneck = {s.prefix + ".bottleneck", c, inter, cfg.bottleneck_kernel_width};
                conv_in = inter;
            }
            s.conv = {s.prefix + ".conv", conv_in, cfg.growth_filters, cfg.kernel_width};
            block.push_back(s);
            c += cfg.growth_filters;
        }
        plan.blocks.push_back(std::move(block));
        if (b + 1 < cfg.dense_blocks_per_side) {
            const auto reduced = std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(cfg.theta * static_cast<double>(c))));
            const std::string tp = prefix + ".transition" + std::to_string(b);
            plan.transitions.push_back({tp, {tp + ".conv", c, reduced, 1}});
            c = reduced;
        }
    }
    plan.head_in = c;
    plan.head = {prefix + ".head", c, out, 1};
    return plan;
}

} // namespace ae_detail

/// Running batch-norm statistics keyed by "<layer>.mean" / "<layer>.var".
template <class T>
using BufferMap = std::map<std::string, nx::Tensor<T>>;

/// Per-call forward options.
struct ForwardMode {
    bool training = false;
    std::uint64_t dropout_seed = 0;
};

/// Forward pass through one side of the autoencoder. In training mode the
/// observed batch-norm statistics are appended to `observed`.
template <class T>
class SideNetwork {
public:
    SideNetwork(const AutoencoderConfig& cfg, ae_detail::SidePlan plan) : cfg_(cfg), plan_(std::move(plan)) {}

    const ae_detail::SidePlan& plan() const noexcept { return plan_; }

    void init_parameters(nx::ParameterSet<T>& params, BufferMap<T>& buffers, nx::Rng& rng) const
    {
        auto add_conv = [&](const ae_detail::ConvSpec& c) {
            params.add(c.name + ".w", nx::fan_in_uniform<T>({c.out, c.in, c.width}, c.in * c.width, rng), true);
            params.add(c.name + ".b", nx::Tensor<T>({c.out}), false);
        };
        auto add_bn = [&](const std::string& name, std::size_t ch) {
            if (!cfg_.use_batchnorm) return;
            params.add(name + ".gamma", nx::Tensor<T>({ch}, T{1}), false);
            params.add(name + ".beta", nx::Tensor<T>({ch}), false);
            buffers.emplace(name + ".mean", nx::Tensor<T>({ch}));
            buffers.emplace(name + ".var", nx::Tensor<T>({ch}, T{1}));
        };
        add_conv(plan_.stem);
        for (std::size_t b = 0; b < plan_.blocks.size(); ++b) {
            for (const auto& layer : plan_.blocks[b]) {
                add_bn(layer.prefix + ".bn0", layer.in);
                if (layer.has_bottleneck) {
                    add_conv(layer.bottleneck);
                    add_bn(layer.prefix + ".bn1", layer.bottleneck.out);
                }
                add_conv(layer.conv);
            }
            if (b < plan_.transitions.size()) {
                add_bn(plan_.transitions[b].prefix + ".bn", plan_.transitions[b].conv.in);
                add_conv(plan_.transitions[b].conv);
            }
        }
        add_bn(plan_.prefix + ".head_bn", plan_.head_in);
        add_conv(plan_.head);
    }

    nx::Var forward(nx::Graph<T>& g, const nx::ParameterSet<T>& params, const BufferMap<T>& buffers, nx::Var x,
                    const ForwardMode& mode, std::vector<std::pair<std::string, nx::BatchStats<T>>>* observed) const
    {
        const std::size_t steps = nx::seq_dims(g.value(x), "autoencoder").steps;
        std::uint64_t layer_counter = 0;
        auto check = [&](nx::Var v, const std::string& where) {
            const auto d = nx::seq_dims(g.value(v), "autoencoder");
            if (d.steps != steps)
                throw std::logic_error("temporal extent changed at " + where + ": " + std::to_string(d.steps) +
                                       " != " + std::to_string(steps));
            return v;
        };
        auto conv = [&](nx::Var h, const ae_detail::ConvSpec& c) {
            return check(nx::conv1d(g, h, g.param(params, c.name + ".w"), g.param(params, c.name + ".b")), c.name);
        };
        auto drop = [&](nx::Var h) {
            return nx::dropout(g, h, cfg_.dropout_rate, mode.training, nx::derive_seed(mode.dropout_seed, layer_counter++));
        };
        // [BN]-ReLU preactivation
        auto preact = [&](nx::Var h, const std::string& bn) {
            if (cfg_.use_batchnorm) {
                nx::BatchStats<T> stats;
                h = nx::batch_norm(g, h, g.param(params, bn + ".gamma"), g.param(params, bn + ".beta"), mode.training,
                                   &buffers.at(bn + ".mean"), &buffers.at(bn + ".var"), &stats);
                if (mode.training && observed) observed->emplace_back(bn, std::move(stats));
            }
            return nx::relu(g, h);
        };
        auto pool = [&](nx::Var h, std::size_t width, const std::string& where) {
            if (cfg_.pooling == PoolMode::none) return h;
            return check(nx::avg_pool(g, h, width), where);
        };

        nx::Var h = conv(x, plan_.stem);
        h = pool(h, cfg_.initial_pool_width, plan_.prefix + ".stem_pool");
        for (std::size_t b = 0; b < plan_.blocks.size(); ++b) {
            for (const auto& layer : plan_.blocks[b]) {
                nx::Var y = preact(h, layer.prefix + ".bn0");
                if (layer.has_bottleneck) {
                    y = drop(conv(y, layer.bottleneck));
                    y = preact(y, layer.prefix + ".bn1");
                }
                y = drop(conv(y, layer.conv));
                h = nx::channel_concat(g, h, y);
            }
            if (b < plan_.transitions.size()) {
                const auto& t = plan_.transitions[b];
                h = drop(conv(preact(h, t.prefix + ".bn"), t.conv));
                h = pool(h, cfg_.transition_pool_size, t.prefix + ".pool");
            }
        }
        return conv(preact(h, plan_.prefix + ".head_bn"), plan_.head);
    }

private:
    AutoencoderConfig cfg_;
    ae_detail::SidePlan plan_;
};

class AutoencoderModel;
AutoencoderModel build_autoencoder(const AutoencoderConfig& config, std::uint64_t seed);

/// Encoder + decoder parameters with their configuration and training record.
class AutoencoderModel {
public:
    AutoencoderModel() = default;

    const AutoencoderConfig& config() const noexcept { return config_; }
    nx::ParameterSet<float>& encoder() noexcept { return encoder_; }
    const nx::ParameterSet<float>& encoder() const noexcept { return encoder_; }
    nx::ParameterSet<float>& decoder() noexcept { return decoder_; }
    const nx::ParameterSet<float>& decoder() const noexcept { return decoder_; }
    BufferMap<float>& buffers() noexcept { return buffers_; }
    const BufferMap<float>& buffers() const noexcept { return buffers_; }
    std::vector<double>& loss_history() noexcept { return loss_history_; }
    const std::vector<double>& loss_history() const noexcept { return loss_history_; }
    const std::string& trained_on() const noexcept { return trained_on_; }
    void set_trained_on(std::string fp) { trained_on_ = std::move(fp); }

    std::size_t parameter_count() const { return encoder_.total_count() + decoder_.total_count(); }

    SideNetwork<float> encoder_network() const
    {
        return SideNetwork<float>(config_, ae_detail::make_plan(config_, "encoder", config_.input_channels,
                                                                config_.latent_channels));
    }
    SideNetwork<float> decoder_network() const
    {
        return SideNetwork<float>(config_, ae_detail::make_plan(config_, "decoder", config_.latent_channels,
                                                                config_.input_channels));
    }

    /// Assembles a model from stored parts (used by the archive loader).
    static AutoencoderModel from_parts(AutoencoderConfig config, nx::ParameterSet<float> encoder,
                                       nx::ParameterSet<float> decoder, BufferMap<float> buffers,
                                       std::vector<double> loss_history, std::string trained_on)
    {
        config.validate();
        AutoencoderModel m;
        m.config_ = config;
        m.encoder_ = std::move(encoder);
        m.decoder_ = std::move(decoder);
        m.buffers_ = std::move(buffers);
        m.loss_history_ = std::move(loss_history);
        m.trained_on_ = std::move(trained_on);
        m.verify_layout();
        return m;
    }

    friend AutoencoderModel build_autoencoder(const AutoencoderConfig& config, std::uint64_t seed);

private:
    // Confirms stored parameters match what the config's plan expects.
    void verify_layout() const
    {
        AutoencoderModel fresh = build_autoencoder(config_, 0);
        auto same_shapes = [](const nx::ParameterSet<float>& a, const nx::ParameterSet<float>& b) {
            if (a.size() != b.size()) return false;
            auto ib = b.begin();
            for (const auto& [name, e] : a) {
                if (name != ib->first || e.value.shape() != ib->second.value.shape()) return false;
                ++ib;
            }
            return true;
        };
        if (!same_shapes(encoder_, fresh.encoder_) || !same_shapes(decoder_, fresh.decoder_))
            throw std::invalid_argument("autoencoder parameters do not match the layout implied by the config");
        for (const auto& [name, t] : fresh.buffers_) {
            auto it = buffers_.find(name);
            if (it == buffers_.end() || it->second.shape() != t.shape())
                throw std::invalid_argument("autoencoder buffer '" + name + "' missing or misshapen");
        }
    }

    AutoencoderConfig config_;
    nx::ParameterSet<float> encoder_;
    nx::ParameterSet<float> decoder_;
    BufferMap<float> buffers_;
    std::vector<double> loss_history_;
    std::string trained_on_;
};

/// Untrained model; identical seeds give bit-identical parameters.
inline AutoencoderModel build_autoencoder(const AutoencoderConfig& config, std::uint64_t seed)
{
    config.validate();
    AutoencoderModel m;
    m.config_ = config;
    nx::Rng rng(nx::derive_seed(seed, "autoencoder.init"));
    m.encoder_network().init_parameters(m.encoder_, m.buffers_, rng);
    m.decoder_network().init_parameters(m.decoder_, m.buffers_, rng);
    return m;
}

/// [C, B, 250] batch tensor from single-sensor frames.
inline nx::Tensor<float> frames_to_batch(std::span<const Frame> frames, std::span<const std::size_t> indices)
{
    const std::size_t b = indices.size();
    nx::Tensor<float> x({kAxes, b, kFrameLength});
    for (std::size_t i = 0; i < b; ++i) {
        const Frame& f = frames[indices[i]];
        if (f.channels != kAxes || f.values.size() != kAxes * kFrameLength)
            throw std::invalid_argument("autoencoder input must be single-sensor 3x250 frames, got " +
                                        std::to_string(f.channels) + " channels");
        for (std::size_t c = 0; c < kAxes; ++c)
            for (std::size_t t = 0; t < kFrameLength; ++t)
                x.at(c, i, t) = static_cast<float>(f.values[c * kFrameLength + t]);
    }
    return x;
}

namespace ae_detail {

inline void update_running_stats(BufferMap<float>& buffers,
                                 const std::vector<std::pair<std::string, nx::BatchStats<float>>>& observed,
                                 double momentum)
{
    for (const auto& [name, stats] : observed) {
        auto& mean = buffers.at(name + ".mean");
        auto& var = buffers.at(name + ".var");
        for (std::size_t c = 0; c < mean.size(); ++c) {
            mean[c] = static_cast<float>((1.0 - momentum) * mean[c] + momentum * stats.mean[c]);
            var[c] = static_cast<float>((1.0 - momentum) * var[c] + momentum * stats.var[c]);
        }
    }
}

} // namespace ae_detail

/// Raised when training diverges.
class TrainingDiverged : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Minimizes the reconstruction MSE of the frames. Batch order is shuffled
/// per epoch from the config seed; loss_history receives the mean training
/// loss of each epoch.
inline void train_autoencoder(AutoencoderModel& model, std::span<const Frame> frames)
{
    const AutoencoderConfig& cfg = model.config();
    if (cfg.epochs == 0) return;
    if (frames.empty()) throw std::invalid_argument("train_autoencoder: no training frames");
    nx::OptimizerConfig oc;
    oc.learning_rate = cfg.learning_rate;
    oc.weight_decay = cfg.weight_decay;
    auto enc_opt = nx::make_optimizer<float>(oc);
    auto dec_opt = nx::make_optimizer<float>(oc);
    const auto encoder = model.encoder_network();
    const auto decoder = model.decoder_network();

    std::vector<std::size_t> order(frames.size());
    std::size_t step = 0;
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::iota(order.begin(), order.end(), std::size_t{0});
        nx::Rng rng(nx::derive_seed(cfg.seed, "autoencoder.shuffle." + std::to_string(epoch)));
        rng.shuffle(order);
        double loss_sum = 0.0;
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            const std::size_t end = std::min(order.size(), start + cfg.batch_size);
            const std::span<const std::size_t> idx(order.data() + start, end - start);
            const nx::Tensor<float> x = frames_to_batch(frames, idx);
            std::vector<std::pair<std::string, nx::BatchStats<float>>> observed;
            nx::Graph<float> g;
            const ForwardMode mode{true, nx::derive_seed(cfg.seed, "autoencoder.dropout." + std::to_string(step))};
            double loss = 0.0;
            try {
                nx::Var latent = encoder.forward(g, model.encoder(), model.buffers(), g.constant(x), mode, &observed);
                ForwardMode dmode = mode;
                dmode.dropout_seed = nx::derive_seed(mode.dropout_seed, "decoder");
                nx::Var recon = decoder.forward(g, model.decoder(), model.buffers(), latent, dmode, &observed);
                nx::Var l = nx::mse_loss(g, recon, x);
                loss = g.value(l)[0];
                g.backward(l);
            } catch (const nx::NonFiniteError& e) {
                throw TrainingDiverged("autoencoder training diverged at epoch " + std::to_string(epoch) + ": " +
                                       e.what() + " (learning rate too high?)");
            }
            const auto grads = g.param_grads();
            nx::optimizer_step(model.encoder(), grads, enc_opt);
            nx::optimizer_step(model.decoder(), grads, dec_opt);
            ae_detail::update_running_stats(model.buffers(), observed, cfg.bn_momentum);
            loss_sum += loss * static_cast<double>(idx.size());
            ++step;
        }
        const double epoch_loss = loss_sum / static_cast<double>(order.size());
        if (!std::isfinite(epoch_loss))
            throw TrainingDiverged("autoencoder training loss became non-finite at epoch " + std::to_string(epoch));
        model.loss_history().push_back(epoch_loss);
        spdlog::debug("autoencoder epoch {} loss {:.6f}", epoch, epoch_loss);
    }
}

/// Latents [32, 250] of single-sensor frames, computed in inference mode.
inline std::vector<nx::Tensor<float>> encode_frames(const AutoencoderModel& model, std::span<const Frame> frames,
                                                    std::size_t chunk = 32)
{
    const auto encoder = model.encoder_network();
    const std::size_t lc = model.config().latent_channels;
    std::vector<nx::Tensor<float>> out;
    out.reserve(frames.size());
    std::vector<std::size_t> idx;
    for (std::size_t start = 0; start < frames.size(); start += chunk) {
        const std::size_t end = std::min(frames.size(), start + chunk);
        idx.resize(end - start);
        std::iota(idx.begin(), idx.end(), start);
        nx::Graph<float> g(false);
        nx::Var z = encoder.forward(g, model.encoder(), model.buffers(), g.constant(frames_to_batch(frames, idx)),
                                    ForwardMode{}, nullptr);
        const auto& zv = g.value(z);
        for (std::size_t i = 0; i < idx.size(); ++i) {
            nx::Tensor<float> one({lc, kFrameLength});
            for (std::size_t c = 0; c < lc; ++c)
                for (std::size_t t = 0; t < kFrameLength; ++t) one.at(c, t) = zv.at(c, i, t);
            out.push_back(std::move(one));
        }
    }
    return out;
}

inline nx::Tensor<float> encode(const AutoencoderModel& model, const Frame& frame)
{
    return encode_frames(model, std::span<const Frame>(&frame, 1)).front();
}

/// Inference-mode reconstructions [3, B, 250] of the frames.
inline nx::Tensor<float> reconstruct(const AutoencoderModel& model, std::span<const Frame> frames)
{
    std::vector<std::size_t> idx(frames.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    nx::Graph<float> g(false);
    const auto x = frames_to_batch(frames, idx);
    nx::Var z = model.encoder_network().forward(g, model.encoder(), model.buffers(), g.constant(x), ForwardMode{}, nullptr);
    nx::Var r = model.decoder_network().forward(g, model.decoder(), model.buffers(), z, ForwardMode{}, nullptr);
    return g.value(r);
}

/// Inference-mode reconstruction MSE over the frames.
inline double reconstruction_mse(const AutoencoderModel& model, std::span<const Frame> frames, std::size_t chunk = 32)
{
    double sum = 0.0;
    std::size_t count = 0;
    for (std::size_t start = 0; start < frames.size(); start += chunk) {
        const auto part = frames.subspan(start, std::min(chunk, frames.size() - start));
        const nx::Tensor<float> r = reconstruct(model, part);
        for (std::size_t i = 0; i < part.size(); ++i)
            for (std::size_t c = 0; c < kAxes; ++c)
                for (std::size_t t = 0; t < kFrameLength; ++t) {
                    const double e = static_cast<double>(r.at(c, i, t)) - part[i].values[c * kFrameLength + t];
                    sum += e * e;
                }
        count += part.size() * kAxes * kFrameLength;
    }
    return count ? sum / static_cast<double>(count) : 0.0;
}

} // namespace gaitxfer
