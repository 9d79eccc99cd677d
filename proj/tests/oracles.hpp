#pragma once

#include "gaitxfer/harness.hpp"
#include "gaitxfer/statfeat.hpp"

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <span>
#include <vector>

namespace gxtest {

/// Column statistics of the 250x3 frame matrix via Eigen: covariance from
/// centered products, ranges from coefficient extrema.
inline std::array<double, 19> stat_oracle(const gaitxfer::Frame& f)
{
    Eigen::Matrix<double, Eigen::Dynamic, 3> m(250, 3);
    for (int t = 0; t < 250; ++t)
        for (int a = 0; a < 3; ++a) m(t, a) = f.at(static_cast<std::size_t>(a), static_cast<std::size_t>(t));
    const Eigen::RowVector3d mean = m.colwise().mean();
    const Eigen::MatrixXd c = m.rowwise() - mean;
    const Eigen::Matrix3d cov = (c.transpose() * c) / 250.0;
    const Eigen::RowVector3d ms = m.array().square().colwise().mean();
    const Eigen::RowVector3d range = m.colwise().maxCoeff() - m.colwise().minCoeff();
    std::array<double, 19> o{};
    for (int a = 0; a < 3; ++a) {
        o[a] = mean(a);
        o[3 + a] = cov(a, a);
        o[6 + a] = std::sqrt(ms(a));
        o[12 + a] = range(a);
    }
    o[9] = cov(0, 1) / std::sqrt(cov(0, 0) * cov(1, 1));
    o[10] = cov(1, 2) / std::sqrt(cov(1, 1) * cov(2, 2));
    o[11] = cov(0, 2) / std::sqrt(cov(0, 0) * cov(2, 2));
    o[15] = std::hypot(range(0), range(1));
    o[16] = std::hypot(range(1), range(2));
    o[17] = std::hypot(range(0), range(2));
    o[18] = range.norm();
    return o;
}

struct MetricOracle {
    double accuracy = 0.0, precision = 0.0, recall = 0.0, f1 = 0.0;
};

/// Support-weighted metrics from per-class tp/fp/fn counts.
inline MetricOracle metric_oracle(std::span<const int> pred, std::span<const int> lab, int k)
{
    MetricOracle o;
    const double n = static_cast<double>(lab.size());
    double correct = 0;
    for (int c = 0; c < k; ++c) {
        double tp = 0, fp = 0, fn = 0;
        for (std::size_t i = 0; i < lab.size(); ++i) {
            tp += pred[i] == c && lab[i] == c;
            fp += pred[i] == c && lab[i] != c;
            fn += pred[i] != c && lab[i] == c;
        }
        correct += tp;
        const double pc = tp + fp > 0 ? tp / (tp + fp) : 0.0, rc = tp + fn > 0 ? tp / (tp + fn) : 0.0;
        const double fc = tp > 0 ? 2 * tp / (2 * tp + fp + fn) : 0.0;
        const double w = (tp + fn) / n;
        o.precision += w * pc;
        o.recall += w * rc;
        o.f1 += w * fc;
    }
    o.accuracy = correct / n;
    return o;
}

/// Random prediction set number `s`: 2 to 4 classes, 5 to 64 samples.
inline std::pair<std::vector<int>, std::vector<int>> random_predictions(std::uint64_t s, int& k)
{
    gaitxfer::nx::Rng rng(s);
    k = 2 + static_cast<int>(rng.below(3));
    const std::size_t n = 5 + rng.below(60);
    std::vector<int> pred(n), lab(n);
    for (std::size_t i = 0; i < n; ++i) {
        lab[i] = static_cast<int>(rng.below(static_cast<std::uint64_t>(k)));
        pred[i] = static_cast<int>(rng.below(static_cast<std::uint64_t>(k)));
    }
    return {pred, lab};
}

} // namespace gxtest
