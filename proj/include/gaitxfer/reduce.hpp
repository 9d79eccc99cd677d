#pragma once

#include "gaitxfer/numerics/tensor.hpp"
#include "gaitxfer/sigprep.hpp"

#include <Eigen/Dense>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace gaitxfer {

inline constexpr std::size_t kLatentChannels = 32;

enum class FeatureKind { pca_latent, gap_latent, pca_raw, statfeat };

inline std::string_view to_string(FeatureKind k)
{
    switch (k) {
    case FeatureKind::pca_latent: return "unconstrained_pca";
    case FeatureKind::gap_latent: return "constrained_gap";
    case FeatureKind::pca_raw: return "raw_pca";
    case FeatureKind::statfeat: return "statfeat";
    }
    return "?";
}

/// A flat feature row tagged with the pipeline that produced it.
struct FeatureVector {
    FeatureKind kind = FeatureKind::gap_latent;
    std::vector<double> values;

    std::size_t dim() const noexcept { return values.size(); }
};

/// Length a feature of `kind` must have before any PCA step.
inline std::size_t pre_reduction_dim(FeatureKind kind, std::size_t sensors)
{
    switch (kind) {
    case FeatureKind::pca_latent: return sensors * kLatentChannels * kFrameLength;
    case FeatureKind::gap_latent: return sensors * kLatentChannels;
    case FeatureKind::pca_raw: return sensors * kAxes * kFrameLength;
    case FeatureKind::statfeat: return sensors * 19;
    }
    return 0;
}

using LatentMap = std::map<Placement, nx::Tensor<float>>;

namespace reduce_detail {

inline const nx::Tensor<float>& latent_for(const LatentMap& latents, Placement p)
{
    auto it = latents.find(p);
    if (it == latents.end())
        throw std::invalid_argument("no latent for sensor '" + std::string(to_string(p)) + "'");
    const auto& z = it->second;
    if (z.rank() != 2 || z.dim(1) != kFrameLength)
        throw nx::ShapeError("latent for '" + std::string(to_string(p)) + "' must be [C, 250], got " +
                             nx::shape_str(z.shape()));
    return z;
}

} // namespace reduce_detail

/// Concatenates per-sensor latents in (sensor, channel, time) order.
inline std::vector<double> vectorize_latents(const LatentMap& latents, std::span<const Placement> order)
{
    if (order.empty()) throw std::invalid_argument("vectorize_latents: empty sensor order");
    std::vector<double> out;
    for (Placement p : order) {
        const auto& z = reduce_detail::latent_for(latents, p);
        out.insert(out.end(), z.data().begin(), z.data().end());
    }
    return out;
}

/// Inverse of vectorize_latents.
inline LatentMap devectorize_latents(std::span<const double> v, std::span<const Placement> order,
                                     std::size_t channels = kLatentChannels)
{
    const std::size_t block = channels * kFrameLength;
    if (v.size() != order.size() * block)
        throw nx::ShapeError("devectorize_latents: length " + std::to_string(v.size()) + " does not match " +
                             std::to_string(order.size()) + " sensors x " + std::to_string(block));
    LatentMap out;
    for (std::size_t s = 0; s < order.size(); ++s) {
        nx::Tensor<float> z({channels, kFrameLength});
        for (std::size_t i = 0; i < block; ++i) z[i] = static_cast<float>(v[s * block + i]);
        out.emplace(order[s], std::move(z));
    }
    return out;
}

/// Per-sensor channel means over time, concatenated in sensor order.
inline std::vector<double> gap_features(const LatentMap& latents, std::span<const Placement> order)
{
    if (order.empty()) throw std::invalid_argument("gap_features: empty sensor order");
    std::vector<double> out;
    for (Placement p : order) {
        const auto& z = reduce_detail::latent_for(latents, p);
        for (std::size_t c = 0; c < z.dim(0); ++c) {
            double s = 0.0;
            for (std::size_t t = 0; t < kFrameLength; ++t) s += z.at(c, t);
            out.push_back(s / static_cast<double>(kFrameLength));
        }
    }
    return out;
}

/// Flattened stacked frame in (sensor, axis, time) order.
inline std::vector<double> raw_baseline(const Frame& frame)
{
    if (frame.values.size() != frame.channels * kFrameLength || frame.channels != kAxes * frame.origin.sensors.size())
        throw nx::ShapeError("raw_baseline: frame must be (3 x sensors) x 250");
    return frame.values;
}

inline Frame raw_devectorize(std::span<const double> v, std::span<const Placement> sensors)
{
    if (v.size() != sensors.size() * kAxes * kFrameLength)
        throw nx::ShapeError("raw_devectorize: length " + std::to_string(v.size()) + " does not match " +
                             std::to_string(sensors.size()) + " sensors");
    Frame f;
    f.channels = sensors.size() * kAxes;
    f.values.assign(v.begin(), v.end());
    f.origin.sensors.assign(sensors.begin(), sensors.end());
    return f;
}

enum class PcaRoute { automatic, covariance, gram };

struct PcaModel {
    Eigen::VectorXd mean;
    /// k x d, orthonormal rows, descending variance.
    Eigen::MatrixXd components;
    std::vector<double> explained_variance;
    std::vector<double> explained_ratio;
    double total_variance = 0.0;
    std::size_t fit_rows = 0;
    /// Identity of the training rows, set by the caller (leakage guard).
    std::string fit_fingerprint;

    std::size_t dim() const noexcept { return static_cast<std::size_t>(mean.size()); }
    std::size_t k() const noexcept { return static_cast<std::size_t>(components.rows()); }

    double retained_ratio() const
    {
        double s = 0.0;
        for (double r : explained_ratio) s += r;
        return s;
    }
};

namespace reduce_detail {

/// Flips each row so its largest-magnitude coordinate is positive (first wins on ties).
inline void canonical_signs(Eigen::MatrixXd& rows)
{
    for (Eigen::Index r = 0; r < rows.rows(); ++r) {
        Eigen::Index arg = 0;
        double best = -1.0;
        for (Eigen::Index j = 0; j < rows.cols(); ++j) {
            const double a = std::abs(rows(r, j));
            if (a > best) {
                best = a;
                arg = j;
            }
        }
        if (rows(r, arg) < 0.0) rows.row(r) *= -1.0;
    }
}

/// Replaces rows [from, k) with unit vectors orthogonal to everything above.
inline void complete_basis(Eigen::MatrixXd& rows, Eigen::Index from)
{
    Eigen::Index probe = 0;
    for (Eigen::Index r = from; r < rows.rows(); ++r) {
        for (;; ++probe) {
            if (probe >= rows.cols()) throw std::logic_error("PCA basis completion ran out of directions");
            Eigen::VectorXd v = Eigen::VectorXd::Unit(rows.cols(), probe);
            for (int pass = 0; pass < 2; ++pass)
                for (Eigen::Index q = 0; q < r; ++q) v -= rows.row(q).dot(v) * rows.row(q).transpose();
            const double n = v.norm();
            if (n > 0.5) {
                rows.row(r) = (v / n).transpose();
                ++probe;
                break;
            }
        }
    }
}

} // namespace reduce_detail

/// Principal components of the rows of `x` (n x d). k is clamped to
/// min(d, n - 1). The Gram route eigendecomposes the n x n centered Gram
/// matrix and maps eigenvectors back to d-space; `automatic` takes it when d > n.
inline PcaModel fit_pca(const Eigen::MatrixXd& x, std::size_t k, PcaRoute route = PcaRoute::automatic)
{
    const auto n = static_cast<std::size_t>(x.rows());
    const auto d = static_cast<std::size_t>(x.cols());
    if (n < 2) throw std::invalid_argument("fit_pca: need at least 2 rows, got " + std::to_string(n));
    if (d == 0) throw std::invalid_argument("fit_pca: zero-dimensional data");
    if (k == 0) throw std::invalid_argument("fit_pca: k must be positive");
    if (!x.allFinite()) throw std::invalid_argument("fit_pca: non-finite input");
    const std::size_t k_max = std::min(d, n - 1);
    if (k > k_max) {
        spdlog::warn("PCA: {} components requested, clamped to min(d, n - 1) = {}", k, k_max);
        k = k_max;
    }
    if (route == PcaRoute::automatic) route = d > n ? PcaRoute::gram : PcaRoute::covariance;

    PcaModel m;
    m.fit_rows = n;
    m.mean = x.colwise().mean().transpose();
    const Eigen::MatrixXd xc = x.rowwise() - m.mean.transpose();
    const double denom = static_cast<double>(n - 1);
    m.total_variance = xc.squaredNorm() / denom;
    const auto kk = static_cast<Eigen::Index>(k);
    m.components.resize(kk, static_cast<Eigen::Index>(d));
    m.explained_variance.resize(k);

    if (route == PcaRoute::covariance) {
        const Eigen::MatrixXd cov = (xc.transpose() * xc) / denom;
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
        if (es.info() != Eigen::Success) throw std::runtime_error("fit_pca: eigendecomposition failed");
        const auto dd = static_cast<Eigen::Index>(d);
        for (Eigen::Index i = 0; i < kk; ++i) {
            m.components.row(i) = es.eigenvectors().col(dd - 1 - i).transpose();
            m.explained_variance[static_cast<std::size_t>(i)] = std::max(0.0, es.eigenvalues()(dd - 1 - i));
        }
    } else {
        const Eigen::MatrixXd gram = xc * xc.transpose();
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(gram);
        if (es.info() != Eigen::Success) throw std::runtime_error("fit_pca: eigendecomposition failed");
        const auto nn = static_cast<Eigen::Index>(n);
        const double top = std::max(es.eigenvalues()(nn - 1), 0.0);
        Eigen::Index valid = 0;
        while (valid < kk && top > 0.0 && es.eigenvalues()(nn - 1 - valid) > 1e-12 * top) ++valid;
        if (valid > 0) {
            const Eigen::MatrixXd u = es.eigenvectors().rightCols(valid).rowwise().reverse();
            m.components.topRows(valid) = (xc.transpose() * u).transpose();
            for (Eigen::Index i = 0; i < valid; ++i) {
                const double lambda = es.eigenvalues()(nn - 1 - i);
                m.components.row(i) /= std::sqrt(lambda);
                m.explained_variance[static_cast<std::size_t>(i)] = lambda / denom;
            }
        }
        if (valid < kk) {
            reduce_detail::complete_basis(m.components, valid);
            for (Eigen::Index i = valid; i < kk; ++i) m.explained_variance[static_cast<std::size_t>(i)] = 0.0;
        }
    }
    reduce_detail::canonical_signs(m.components);
    m.explained_ratio.resize(k);
    for (std::size_t i = 0; i < k; ++i)
        m.explained_ratio[i] = m.total_variance > 0.0 ? m.explained_variance[i] / m.total_variance : 0.0;
    return m;
}

inline Eigen::VectorXd pca_transform(const PcaModel& m, std::span<const double> x)
{
    if (x.size() != m.dim())
        throw nx::ShapeError("pca_transform: input length " + std::to_string(x.size()) + " != model dimension " +
                             std::to_string(m.dim()));
    const Eigen::Map<const Eigen::VectorXd> v(x.data(), static_cast<Eigen::Index>(x.size()));
    return m.components * (v - m.mean);
}

/// Row-wise projection of an n x d matrix.
inline Eigen::MatrixXd pca_transform(const PcaModel& m, const Eigen::MatrixXd& x)
{
    if (static_cast<std::size_t>(x.cols()) != m.dim())
        throw nx::ShapeError("pca_transform: input width " + std::to_string(x.cols()) + " != model dimension " +
                             std::to_string(m.dim()));
    return (x.rowwise() - m.mean.transpose()) * m.components.transpose();
}

inline Eigen::VectorXd pca_reconstruct(const PcaModel& m, const Eigen::VectorXd& z)
{
    if (static_cast<std::size_t>(z.size()) != m.k())
        throw nx::ShapeError("pca_reconstruct: code length " + std::to_string(z.size()) + " != k " +
                             std::to_string(m.k()));
    return m.mean + m.components.transpose() * z;
}

} // namespace gaitxfer
