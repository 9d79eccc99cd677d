#pragma once

#include "gaitxfer/numerics/graph.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>

namespace gaitxfer::nx {

struct GradCheckResult {
    double max_relative_error = 0.0;
    /// Parameter holding the worst element, or the one that went non-finite.
    std::string worst_parameter;
    bool finite = true;

    bool passed(double tolerance) const { return finite && max_relative_error <= tolerance; }
};

/// Builds the computation on a fresh graph and returns its scalar output.
using Computation = std::function<Var(Graph<double>&, const ParameterSet<double>&)>;

/// Compares reverse-mode gradients against central differences for every
/// element of every parameter. Error per element is
/// |analytic - numeric| / max(1, |analytic|, |numeric|).
inline GradCheckResult grad_check(const Computation& computation, ParameterSet<double> params, double eps = 1e-5)
{
    GradCheckResult result;
    for (const auto& [name, entry] : params)
        if (!entry.value.all_finite()) {
            result.finite = false;
            result.worst_parameter = name;
            return result;
        }
    Gradients<double> analytic;
    try {
        Graph<double> g;
        Var out = computation(g, params);
        g.backward(out);
        analytic = g.param_grads();
    } catch (const NonFiniteError& e) {
        result.finite = false;
        result.worst_parameter = e.what();
        return result;
    }

    auto evaluate = [&](const std::string& name) {
        Graph<double> g(false);
        Var out = computation(g, params);
        const double v = g.value(out)[0];
        if (!std::isfinite(v)) throw NonFiniteError(name);
        return v;
    };

    for (auto& [name, entry] : params) {
        auto ait = analytic.find(name);
        const Tensor<double>* ga = ait == analytic.end() ? nullptr : &ait->second;
        for (std::size_t i = 0; i < entry.value.size(); ++i) {
            const double orig = entry.value[i];
            double plus = 0.0, minus = 0.0;
            try {
                entry.value[i] = orig + eps;
                plus = evaluate(name);
                entry.value[i] = orig - eps;
                minus = evaluate(name);
            } catch (const NonFiniteError&) {
                entry.value[i] = orig;
                result.finite = false;
                result.worst_parameter = name;
                return result;
            }
            entry.value[i] = orig;
            const double numeric = (plus - minus) / (2.0 * eps);
            const double a = ga ? (*ga)[i] : 0.0;
            const double err = std::abs(a - numeric) / std::max({1.0, std::abs(a), std::abs(numeric)});
            if (err >= result.max_relative_error) {
                result.max_relative_error = err;
                result.worst_parameter = name;
            }
        }
    }
    return result;
}

} // namespace gaitxfer::nx
