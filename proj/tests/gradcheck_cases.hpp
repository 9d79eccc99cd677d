#pragma once

#include "gaitxfer/numerics/gradcheck.hpp"
#include "gaitxfer/numerics/ops.hpp"
#include "support.hpp"

#include <string>
#include <utility>
#include <vector>

namespace gxtest {

namespace nx = gaitxfer::nx;

struct GradCase {
    std::string name;
    nx::GradCheckResult result;
};

/// One finite-difference check per layer kind, all in 64-bit.
inline std::vector<GradCase> layer_grad_checks(double eps = 1e-5)
{
    std::vector<GradCase> out;
    auto check = [&](std::string name, const nx::Computation& f, nx::ParameterSet<double> p) {
        out.push_back({std::move(name), nx::grad_check(f, std::move(p), eps)});
    };
    const auto upstream = random_tensor({4, 2, 12}, 901);

    {
        nx::ParameterSet<double> p;
        p.add("x", random_tensor({3, 2, 12}, 1), false);
        p.add("w", random_tensor({4, 3, 7}, 2), true);
        p.add("b", random_tensor({4}, 3), false);
        check("conv1d", [&](nx::Graph<double>& g, const nx::ParameterSet<double>& ps) {
            auto y = nx::conv1d(g, g.param(ps, "x"), g.param(ps, "w"), g.param(ps, "b"));
            return nx::weighted_sum(g, y, upstream);
        }, std::move(p));
    }
    {
        nx::ParameterSet<double> p;
        p.add("x", random_tensor({5, 6}, 4), false);
        p.add("w", random_tensor({6, 3}, 5), true);
        p.add("b", random_tensor({3}, 6), false);
        const auto target = random_tensor({5, 3}, 7);
        check("dense+relu+mse", [&, target](nx::Graph<double>& g, const nx::ParameterSet<double>& ps) {
            auto y = nx::relu(g, nx::dense_affine(g, g.param(ps, "x"), g.param(ps, "w"), g.param(ps, "b")));
            return nx::mse_loss(g, y, target);
        }, std::move(p));
    }
    {
        // keep inputs away from the kink at 0
        auto x = random_tensor({4, 2, 12}, 8, 0.1, 1.0);
        nx::Rng rng(9);
        for (auto& v : x.data())
            if (rng.uniform() < 0.5) v = -v;
        nx::ParameterSet<double> p;
        p.add("x", x, false);
        check("relu", [&](nx::Graph<double>& g, const nx::ParameterSet<double>& ps) {
            return nx::weighted_sum(g, nx::relu(g, g.param(ps, "x")), upstream);
        }, std::move(p));
    }
    {
        nx::ParameterSet<double> p;
        p.add("x", random_tensor({4, 2, 12}, 10), false);
        check("dropout (inference)", [&](nx::Graph<double>& g, const nx::ParameterSet<double>& ps) {
            return nx::weighted_sum(g, nx::dropout(g, g.param(ps, "x"), 0.2, false, 11), upstream);
        }, p);
        check("dropout (training, fixed mask)", [&](nx::Graph<double>& g, const nx::ParameterSet<double>& ps) {
            return nx::weighted_sum(g, nx::dropout(g, g.param(ps, "x"), 0.2, true, 11), upstream);
        }, std::move(p));
    }
    {
        nx::ParameterSet<double> p;
        p.add("x", random_tensor({4, 2, 12}, 12), false);
        const auto w = random_tensor({2, 4}, 13);
        check("global_avg_pool", [&, w](nx::Graph<double>& g, const nx::ParameterSet<double>& ps) {
            return nx::weighted_sum(g, nx::global_avg_pool(g, g.param(ps, "x")), w);
        }, std::move(p));
    }
    {
        nx::ParameterSet<double> p;
        p.add("a", random_tensor({1, 2, 12}, 14), false);
        p.add("b", random_tensor({3, 2, 12}, 15), false);
        check("channel_concat", [&](nx::Graph<double>& g, const nx::ParameterSet<double>& ps) {
            return nx::weighted_sum(g, nx::channel_concat(g, g.param(ps, "a"), g.param(ps, "b")), upstream);
        }, std::move(p));
    }
    {
        nx::ParameterSet<double> p;
        p.add("x", random_tensor({4, 2, 12}, 16), false);
        check("avg_pool", [&](nx::Graph<double>& g, const nx::ParameterSet<double>& ps) {
            return nx::weighted_sum(g, nx::avg_pool(g, g.param(ps, "x"), 3), upstream);
        }, std::move(p));
    }
    {
        nx::ParameterSet<double> p;
        p.add("x", random_tensor({4, 2, 12}, 17), false);
        p.add("gamma", random_tensor({4}, 18, 0.5, 1.5), false);
        p.add("beta", random_tensor({4}, 19), false);
        check("batchnorm (training)", [&](nx::Graph<double>& g, const nx::ParameterSet<double>& ps) {
            auto y = nx::batch_norm(g, g.param(ps, "x"), g.param(ps, "gamma"), g.param(ps, "beta"), true,
                                    static_cast<const nx::Tensor<double>*>(nullptr),
                                    static_cast<const nx::Tensor<double>*>(nullptr));
            return nx::weighted_sum(g, y, upstream);
        }, p);
        const auto rm = random_tensor({4}, 20), rv = random_tensor({4}, 21, 0.5, 2.0);
        check("batchnorm (inference)", [&, rm, rv](nx::Graph<double>& g, const nx::ParameterSet<double>& ps) {
            auto y = nx::batch_norm(g, g.param(ps, "x"), g.param(ps, "gamma"), g.param(ps, "beta"), false, &rm, &rv);
            return nx::weighted_sum(g, y, upstream);
        }, std::move(p));
    }
    {
        nx::ParameterSet<double> p;
        p.add("z", random_tensor({6, 3}, 22, -2.0, 2.0), false);
        const std::vector<int> labels{0, 2, 1, 1, 0, 2};
        check("softmax_cross_entropy", [&, labels](nx::Graph<double>& g, const nx::ParameterSet<double>& ps) {
            return nx::softmax_cross_entropy(g, g.param(ps, "z"), labels);
        }, std::move(p));
    }
    {
        nx::ParameterSet<double> p;
        p.add("x", random_tensor({4, 2, 12}, 23), false);
        const auto target = random_tensor({4, 2, 12}, 24);
        check("mse", [&, target](nx::Graph<double>& g, const nx::ParameterSet<double>& ps) {
            return nx::mse_loss(g, g.param(ps, "x"), target);
        }, std::move(p));
    }
    return out;
}

} // namespace gxtest
