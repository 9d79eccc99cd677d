#pragma once

#include "gaitxfer/numerics/parameters.hpp"

#include <cmath>
#include <map>
#include <stdexcept>
#include <string>

namespace gaitxfer::nx {

enum class OptimizerKind { adam, sgd };

struct OptimizerConfig {
    OptimizerKind kind = OptimizerKind::adam;
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    /// L2 strength; added to the gradient of parameters flagged `decay`.
    double weight_decay = 1e-4;
};

template <class T>
struct OptimizerState {
    OptimizerConfig config;
    std::size_t step_count = 0;
    /// First and second moments; populated only for Adam.
    std::map<std::string, Tensor<T>> first_moment;
    std::map<std::string, Tensor<T>> second_moment;
};

template <class T>
OptimizerState<T> make_optimizer(const OptimizerConfig& config)
{
    return OptimizerState<T>{config, 0, {}, {}};
}

/// One update of every parameter that has a gradient entry.
template <class T>
void optimizer_step(ParameterSet<T>& params, const Gradients<T>& grads, OptimizerState<T>& state)
{
    const OptimizerConfig& cfg = state.config;
    ++state.step_count;
    const double t = static_cast<double>(state.step_count);
    const double bc1 = 1.0 - std::pow(cfg.beta1, t);
    const double bc2 = 1.0 - std::pow(cfg.beta2, t);

    for (auto& [name, entry] : params) {
        auto git = grads.find(name);
        if (git == grads.end()) continue;
        const Tensor<T>& grad = git->second;
        Tensor<T>& w = entry.value;
        if (grad.shape() != w.shape())
            throw ShapeError("optimizer_step: gradient shape " + shape_str(grad.shape()) + " for parameter '" +
                             name + "' of shape " + shape_str(w.shape()));
        const double decay = entry.decay ? cfg.weight_decay : 0.0;

        if (cfg.kind == OptimizerKind::sgd) {
            for (std::size_t i = 0; i < w.size(); ++i) {
                const double gi = static_cast<double>(grad[i]) + decay * static_cast<double>(w[i]);
                w[i] = static_cast<T>(w[i] - cfg.learning_rate * gi);
            }
            continue;
        }

        auto [mit, m_new] = state.first_moment.try_emplace(name, w.shape());
        auto [vit, v_new] = state.second_moment.try_emplace(name, w.shape());
        Tensor<T>& m = mit->second;
        Tensor<T>& v = vit->second;
        for (std::size_t i = 0; i < w.size(); ++i) {
            const double gi = static_cast<double>(grad[i]) + decay * static_cast<double>(w[i]);
            const double mi = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * gi;
            const double vi = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * gi * gi;
            m[i] = static_cast<T>(mi);
            v[i] = static_cast<T>(vi);
            const double update = cfg.learning_rate * (mi / bc1) / (std::sqrt(vi / bc2) + cfg.epsilon);
            w[i] = static_cast<T>(w[i] - update);
        }
    }
}

} // namespace gaitxfer::nx
