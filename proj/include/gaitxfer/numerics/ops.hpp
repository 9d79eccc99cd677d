#pragma once

#include "gaitxfer/numerics/graph.hpp"
#include "gaitxfer/numerics/rng.hpp"

#include <Eigen/Core>

#include <cmath>
#include <cstdint>
#include <memory>
#include <limits>
#include <span>
#include <string>
#include <vector>

namespace gaitxfer::nx {

namespace detail {

template <class T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class T>
using MapMat = Eigen::Map<RowMat<T>>;
template <class T>
using CMapMat = Eigen::Map<const RowMat<T>>;

// Column matrix for a stride-1, zero same-padded convolution.
// Row (ci * width + k), column (b * steps + t) holds x[ci, b, t + k - pad].
template <class T>
AlignedVector<T> im2col(const T* x, const SeqDims& d, std::size_t width)
{
    const std::ptrdiff_t pad = static_cast<std::ptrdiff_t>(width / 2);
    const std::size_t cols = d.columns();
    AlignedVector<T> col(d.channels * width * cols, T{0});
    const auto steps = static_cast<std::ptrdiff_t>(d.steps);
    for (std::size_t ci = 0; ci < d.channels; ++ci) {
        for (std::size_t k = 0; k < width; ++k) {
            const std::ptrdiff_t shift = static_cast<std::ptrdiff_t>(k) - pad;
            const std::ptrdiff_t t0 = std::max<std::ptrdiff_t>(0, -shift);
            const std::ptrdiff_t t1 = std::min<std::ptrdiff_t>(steps, steps - shift);
            T* row = col.data() + (ci * width + k) * cols;
            for (std::size_t b = 0; b < d.batch; ++b) {
                const T* src = x + (ci * d.batch + b) * d.steps;
                T* dst = row + b * d.steps;
                if (t1 > t0) std::copy(src + t0 + shift, src + t1 + shift, dst + t0);
            }
        }
    }
    return col;
}

template <class T>
void col2im_add(const T* col, const SeqDims& d, std::size_t width, T* gx)
{
    const std::ptrdiff_t pad = static_cast<std::ptrdiff_t>(width / 2);
    const std::size_t cols = d.columns();
    const auto steps = static_cast<std::ptrdiff_t>(d.steps);
    for (std::size_t ci = 0; ci < d.channels; ++ci) {
        for (std::size_t k = 0; k < width; ++k) {
            const std::ptrdiff_t shift = static_cast<std::ptrdiff_t>(k) - pad;
            const std::ptrdiff_t t0 = std::max<std::ptrdiff_t>(0, -shift);
            const std::ptrdiff_t t1 = std::min<std::ptrdiff_t>(steps, steps - shift);
            const T* row = col + (ci * width + k) * cols;
            for (std::size_t b = 0; b < d.batch; ++b) {
                T* __restrict dst = gx + (ci * d.batch + b) * d.steps;
                const T* __restrict src = row + b * d.steps;
                for (std::ptrdiff_t t = t0; t < t1; ++t) dst[t + shift] += src[t];
            }
        }
    }
}

/// Sum of f(i) over [0, n) with eight interleaved accumulators so the
/// reduction vectorizes.
template <class F>
double lane_sum(std::size_t n, F f)
{
    double acc[8] = {};
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8)
        for (std::size_t l = 0; l < 8; ++l) acc[l] += f(i + l);
    for (; i < n; ++i) acc[0] += f(i);
    return ((acc[0] + acc[1]) + (acc[2] + acc[3])) + ((acc[4] + acc[5]) + (acc[6] + acc[7]));
}

inline double unit_hash(std::uint64_t seed, std::uint64_t index)
{
    return static_cast<double>(mix64(seed ^ mix64(index)) >> 11) * 0x1.0p-53;
}

} // namespace detail

/// Stride-1 1-D convolution with zero same-padding of (width-1)/2 per side.
///
/// x: [C_in, T] or [C_in, B, T]; kernels: [C_out, C_in, width] with odd width;
/// bias: [C_out]. The temporal extent of the output equals that of the input.
template <class T>
Var conv1d(Graph<T>& g, Var x, Var kernels, Var bias)
{
    const Tensor<T>& xv = g.value(x);
    const Tensor<T>& wv = g.value(kernels);
    const Tensor<T>& bv = g.value(bias);
    const SeqDims d = seq_dims(xv, "conv1d");
    if (wv.rank() != 3)
        throw ShapeError("conv1d: kernels must be [C_out, C_in, W], got " + shape_str(wv.shape()));
    const std::size_t c_out = wv.dim(0), width = wv.dim(2);
    if (wv.dim(1) != d.channels)
        throw ShapeError("conv1d: input has " + std::to_string(d.channels) +
                         " channels but kernels expect " + std::to_string(wv.dim(1)));
    if (width % 2 == 0) throw ShapeError("conv1d: kernel width must be odd, got " + std::to_string(width));
    if (bv.size() != c_out)
        throw ShapeError("conv1d: bias has " + std::to_string(bv.size()) + " entries for " +
                         std::to_string(c_out) + " output channels");

    const std::size_t n = d.columns();
    const std::size_t k = d.channels * width;
    Tensor<T> out(seq_shape_like(xv, c_out));
    // the unfolded input is kept for the kernel gradient
    AlignedVector<T> col;
    {
        detail::CMapMat<T> w(wv.ptr(), c_out, k);
        detail::MapMat<T> y(out.ptr(), c_out, n);
        if (width == 1) {
            y.noalias() = w * detail::CMapMat<T>(xv.ptr(), k, n);
        } else {
            col = detail::im2col(xv.ptr(), d, width);
            y.noalias() = w * detail::CMapMat<T>(col.data(), k, n);
        }
        for (std::size_t c = 0; c < c_out; ++c) y.row(static_cast<Eigen::Index>(c)).array() += bv[c];
    }
    if (!g.grad_enabled()) col.clear();

    return g.record("conv1d", std::move(out), {x, kernels, bias},
                    [x, kernels, bias, d, c_out, width, n, k, col = std::move(col)](Graph<T>& gr,
                                                                                    const Tensor<T>& gy) {
                        const Tensor<T>& xv = gr.value(x);
                        const Tensor<T>& wv = gr.value(kernels);
                        detail::CMapMat<T> gym(gy.ptr(), c_out, n);
                        const T* colp = width > 1 ? col.data() : xv.ptr();
                        Tensor<T>* gw = gr.grad_target(kernels);
                        if (gw) {
                            detail::MapMat<T>(gw->ptr(), c_out, k).noalias() +=
                                gym * detail::CMapMat<T>(colp, k, n).transpose();
                        }
                        if (Tensor<T>* gb = gr.grad_target(bias)) {
                            Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, 1>>(gb->ptr(), c_out) +=
                                gym.rowwise().sum();
                        }
                        if (Tensor<T>* gx = gr.grad_target(x)) {
                            detail::CMapMat<T> w(wv.ptr(), c_out, k);
                            if (width == 1) {
                                detail::MapMat<T>(gx->ptr(), k, n).noalias() += w.transpose() * gym;
                            } else {
                                const std::unique_ptr<T[]> gcol(new T[k * n]);
                                detail::MapMat<T>(gcol.get(), k, n).noalias() = w.transpose() * gym;
                                detail::col2im_add(gcol.get(), d, width, gx->ptr());
                            }
                        }
                    });
}

/// out[b, j] = sum_i x[b, i] * w[i, j] + bias[j].  x: [B, D_in], w: [D_in, D_out].
template <class T>
Var dense_affine(Graph<T>& g, Var x, Var weight, Var bias)
{
    const Tensor<T>& xv = g.value(x);
    const Tensor<T>& wv = g.value(weight);
    const Tensor<T>& bv = g.value(bias);
    if (xv.rank() != 2 || wv.rank() != 2)
        throw ShapeError("dense_affine: expected [B, D_in] input and [D_in, D_out] weight, got " +
                         shape_str(xv.shape()) + " and " + shape_str(wv.shape()));
    const std::size_t rows = xv.dim(0), d_in = xv.dim(1), d_out = wv.dim(1);
    if (wv.dim(0) != d_in)
        throw ShapeError("dense_affine: input width " + std::to_string(d_in) +
                         " does not match weight rows " + std::to_string(wv.dim(0)));
    if (bv.size() != d_out)
        throw ShapeError("dense_affine: bias length " + std::to_string(bv.size()) +
                         " does not match output width " + std::to_string(d_out));

    Tensor<T> out(Shape{rows, d_out});
    detail::MapMat<T> y(out.ptr(), rows, d_out);
    y.noalias() = detail::CMapMat<T>(xv.ptr(), rows, d_in) * detail::CMapMat<T>(wv.ptr(), d_in, d_out);
    y.rowwise() += Eigen::Map<const Eigen::Matrix<T, 1, Eigen::Dynamic>>(bv.ptr(), d_out);

    return g.record("dense_affine", std::move(out), {x, weight, bias},
                    [x, weight, bias, rows, d_in, d_out](Graph<T>& gr, const Tensor<T>& gy) {
                        detail::CMapMat<T> gym(gy.ptr(), rows, d_out);
                        if (Tensor<T>* gw = gr.grad_target(weight)) {
                            detail::MapMat<T>(gw->ptr(), d_in, d_out).noalias() +=
                                detail::CMapMat<T>(gr.value(x).ptr(), rows, d_in).transpose() * gym;
                        }
                        if (Tensor<T>* gb = gr.grad_target(bias)) {
                            Eigen::Map<Eigen::Matrix<T, 1, Eigen::Dynamic>>(gb->ptr(), d_out) +=
                                gym.colwise().sum();
                        }
                        if (Tensor<T>* gx = gr.grad_target(x)) {
                            detail::MapMat<T>(gx->ptr(), rows, d_in).noalias() +=
                                gym * detail::CMapMat<T>(gr.value(weight).ptr(), d_in, d_out).transpose();
                        }
                    });
}

template <class T>
Var relu(Graph<T>& g, Var x)
{
    const Tensor<T>& xv = g.value(x);
    Tensor<T> out(xv.shape());
    for (std::size_t i = 0; i < xv.size(); ++i) out[i] = xv[i] > T{0} ? xv[i] : T{0};
    return g.record("relu", std::move(out), {x}, [x](Graph<T>& gr, const Tensor<T>& gy) {
        Tensor<T>* gx = gr.grad_target(x);
        if (!gx) return;
        const Tensor<T>& xv = gr.value(x);
        T* __restrict out = gx->ptr();
        const T* __restrict xs = xv.ptr();
        const T* __restrict gs = gy.ptr();
        for (std::size_t i = 0; i < xv.size(); ++i) out[i] += xs[i] > T{0} ? gs[i] : T{0};
    });
}

/// Inverted dropout: in training each unit is zeroed with probability `rate`
/// and survivors are scaled by 1/(1-rate); identity otherwise. The mask is a
/// pure function of (seed, element index).
template <class T>
Var dropout(Graph<T>& g, Var x, double rate, bool training, std::uint64_t seed)
{
    if (!(rate >= 0.0 && rate < 1.0))
        throw std::invalid_argument("dropout: rate must lie in [0, 1), got " + std::to_string(rate));
    if (!training || rate == 0.0) return x;
    const Tensor<T>& xv = g.value(x);
    const T scale = static_cast<T>(1.0 / (1.0 - rate));
    // unit_hash(seed, i) < rate, compared on the 53-bit integer grid
    const auto cut = static_cast<std::uint64_t>(std::ceil(rate * 0x1.0p53));
    std::vector<T> mask(xv.size());
    Tensor<T> out(xv.shape());
    for (std::size_t i = 0; i < xv.size(); ++i) {
        mask[i] = (mix64(seed ^ mix64(i)) >> 11) < cut ? T{0} : scale;
        out[i] = xv[i] * mask[i];
    }
    return g.record("dropout", std::move(out), {x},
                    [x, mask = std::move(mask)](Graph<T>& gr, const Tensor<T>& gy) {
                        Tensor<T>* gx = gr.grad_target(x);
                        if (!gx) return;
                        for (std::size_t i = 0; i < mask.size(); ++i) (*gx)[i] += gy[i] * mask[i];
                    });
}

/// Per-channel mean over time. [C, T] -> [C]; [C, B, T] -> [B, C].
template <class T>
Var global_avg_pool(Graph<T>& g, Var x)
{
    const Tensor<T>& xv = g.value(x);
    const SeqDims d = seq_dims(xv, "global_avg_pool");
    if (d.steps == 0) throw ShapeError("global_avg_pool: empty temporal axis");
    const bool batched = xv.rank() == 3;
    Tensor<T> out(batched ? Shape{d.batch, d.channels} : Shape{d.channels});
    const T inv = T{1} / static_cast<T>(d.steps);
    for (std::size_t c = 0; c < d.channels; ++c) {
        for (std::size_t b = 0; b < d.batch; ++b) {
            const T* row = xv.ptr() + (c * d.batch + b) * d.steps;
            T s{0};
            for (std::size_t t = 0; t < d.steps; ++t) s += row[t];
            out[b * d.channels + c] = s * inv;
        }
    }
    return g.record("global_avg_pool", std::move(out), {x}, [x, d, inv](Graph<T>& gr, const Tensor<T>& gy) {
        Tensor<T>* gx = gr.grad_target(x);
        if (!gx) return;
        for (std::size_t c = 0; c < d.channels; ++c)
            for (std::size_t b = 0; b < d.batch; ++b) {
                const T v = gy[b * d.channels + c] * inv;
                T* row = gx->ptr() + (c * d.batch + b) * d.steps;
                for (std::size_t t = 0; t < d.steps; ++t) row[t] += v;
            }
    });
}

/// Channels of `a` followed by channels of `b`; all other extents must agree.
template <class T>
Var channel_concat(Graph<T>& g, Var a, Var b)
{
    const Tensor<T>& av = g.value(a);
    const Tensor<T>& bv = g.value(b);
    if (av.rank() != bv.rank() || av.rank() < 2)
        throw ShapeError("channel_concat: incompatible ranks " + shape_str(av.shape()) + " and " +
                         shape_str(bv.shape()));
    for (std::size_t i = 1; i < av.rank(); ++i)
        if (av.dim(i) != bv.dim(i))
            throw ShapeError("channel_concat: extents differ beyond the channel axis: " +
                             shape_str(av.shape()) + " vs " + shape_str(bv.shape()));
    Tensor<T> out(seq_shape_like(av, av.dim(0) + bv.dim(0)));
    std::copy(av.data().begin(), av.data().end(), out.data().begin());
    std::copy(bv.data().begin(), bv.data().end(), out.data().begin() + static_cast<std::ptrdiff_t>(av.size()));
    const std::size_t split = av.size();
    return g.record("channel_concat", std::move(out), {a, b}, [a, b, split](Graph<T>& gr, const Tensor<T>& gy) {
        if (Tensor<T>* ga = gr.grad_target(a))
            for (std::size_t i = 0; i < split; ++i) (*ga)[i] += gy[i];
        if (Tensor<T>* gb = gr.grad_target(b))
            for (std::size_t i = 0; i < gb->size(); ++i) (*gb)[i] += gy[split + i];
    });
}

/// Length-preserving moving average (stride 1). The window for step t covers
/// [t - (w-1)/2, t + w/2] clipped to the sequence; only in-range samples are
/// averaged.
template <class T>
Var avg_pool(Graph<T>& g, Var x, std::size_t width)
{
    if (width == 0) throw std::invalid_argument("avg_pool: width must be positive");
    if (width == 1) return x;
    const Tensor<T>& xv = g.value(x);
    const SeqDims d = seq_dims(xv, "avg_pool");
    const auto lo = static_cast<std::ptrdiff_t>((width - 1) / 2);
    const auto hi = static_cast<std::ptrdiff_t>(width / 2);
    const auto steps = static_cast<std::ptrdiff_t>(d.steps);
    Tensor<T> out(xv.shape());
    const std::size_t rows = d.channels * d.batch;
    for (std::size_t r = 0; r < rows; ++r) {
        const T* src = xv.ptr() + r * d.steps;
        T* dst = out.ptr() + r * d.steps;
        for (std::ptrdiff_t t = 0; t < steps; ++t) {
            const std::ptrdiff_t a = std::max<std::ptrdiff_t>(0, t - lo);
            const std::ptrdiff_t e = std::min<std::ptrdiff_t>(steps - 1, t + hi);
            T s{0};
            for (std::ptrdiff_t u = a; u <= e; ++u) s += src[u];
            dst[t] = s / static_cast<T>(e - a + 1);
        }
    }
    return g.record("avg_pool", std::move(out), {x}, [x, rows, d, lo, hi, steps](Graph<T>& gr, const Tensor<T>& gy) {
        Tensor<T>* gx = gr.grad_target(x);
        if (!gx) return;
        for (std::size_t r = 0; r < rows; ++r) {
            const T* src = gy.ptr() + r * d.steps;
            T* dst = gx->ptr() + r * d.steps;
            for (std::ptrdiff_t t = 0; t < steps; ++t) {
                const std::ptrdiff_t a = std::max<std::ptrdiff_t>(0, t - lo);
                const std::ptrdiff_t e = std::min<std::ptrdiff_t>(steps - 1, t + hi);
                const T v = src[t] / static_cast<T>(e - a + 1);
                for (std::ptrdiff_t u = a; u <= e; ++u) dst[u] += v;
            }
        }
    });
}

/// Per-channel statistics observed by a training-mode batch_norm call.
template <class T>
struct BatchStats {
    std::vector<T> mean;
    std::vector<T> var;
};

/// Per-channel batch normalization over the (batch, time) axes.
///
/// Training mode normalizes with the biased batch statistics (reported via
/// `observed`); inference mode uses the supplied running statistics.
template <class T>
Var batch_norm(Graph<T>& g, Var x, Var gamma, Var beta, bool training, const Tensor<T>* running_mean,
               const Tensor<T>* running_var, BatchStats<T>* observed = nullptr, double eps = 1e-5)
{
    const Tensor<T>& xv = g.value(x);
    const SeqDims d = seq_dims(xv, "batch_norm");
    const std::size_t c_count = d.channels, n = d.columns();
    if (g.value(gamma).size() != c_count || g.value(beta).size() != c_count)
        throw ShapeError("batch_norm: scale/shift length must equal channel count " + std::to_string(c_count));
    std::vector<T> mean(c_count), inv_std(c_count);
    if (training) {
        if (n == 0) throw ShapeError("batch_norm: empty batch");
        std::vector<T> var(c_count);
        for (std::size_t c = 0; c < c_count; ++c) {
            const T* row = xv.ptr() + c * n;
            const double m = detail::lane_sum(n, [row](std::size_t i) { return static_cast<double>(row[i]); }) /
                             static_cast<double>(n);
            const double ss = detail::lane_sum(n, [row, m](std::size_t i) {
                const double e = row[i] - m;
                return e * e;
            });
            mean[c] = static_cast<T>(m);
            var[c] = static_cast<T>(ss / static_cast<double>(n));
            inv_std[c] = static_cast<T>(1.0 / std::sqrt(ss / static_cast<double>(n) + eps));
        }
        if (observed) *observed = BatchStats<T>{mean, var};
    } else {
        if (!running_mean || !running_var || running_mean->size() != c_count || running_var->size() != c_count)
            throw std::invalid_argument("batch_norm: inference mode needs running statistics per channel");
        for (std::size_t c = 0; c < c_count; ++c) {
            mean[c] = (*running_mean)[c];
            inv_std[c] = static_cast<T>(1.0 / std::sqrt(static_cast<double>((*running_var)[c]) + eps));
        }
    }
    const Tensor<T>& gm = g.value(gamma);
    const Tensor<T>& bt = g.value(beta);
    Tensor<T> out(xv.shape());
    for (std::size_t c = 0; c < c_count; ++c) {
        const T* row = xv.ptr() + c * n;
        T* dst = out.ptr() + c * n;
        const T a = gm[c] * inv_std[c];
        const T b = bt[c] - a * mean[c];
        for (std::size_t i = 0; i < n; ++i) dst[i] = a * row[i] + b;
    }
    return g.record(
        "batch_norm", std::move(out), {x, gamma, beta},
        [x, gamma, beta, training, c_count, n, mean = std::move(mean), inv_std = std::move(inv_std)](
            Graph<T>& gr, const Tensor<T>& gy) {
            const Tensor<T>& xv = gr.value(x);
            const Tensor<T>& gm = gr.value(gamma);
            Tensor<T>* gg = gr.grad_target(gamma);
            Tensor<T>* gb = gr.grad_target(beta);
            Tensor<T>* gx = gr.grad_target(x);
            for (std::size_t c = 0; c < c_count; ++c) {
                const T* row = xv.ptr() + c * n;
                const T* gyr = gy.ptr() + c * n;
                const T mc = mean[c], sc = inv_std[c];
                const double sum_gy =
                    detail::lane_sum(n, [gyr](std::size_t i) { return static_cast<double>(gyr[i]); });
                const double sum_gy_xhat = detail::lane_sum(n, [gyr, row, mc, sc](std::size_t i) {
                    return static_cast<double>(gyr[i] * ((row[i] - mc) * sc));
                });
                if (gg) (*gg)[c] += static_cast<T>(sum_gy_xhat);
                if (gb) (*gb)[c] += static_cast<T>(sum_gy);
                if (!gx) continue;
                T* gxr = gx->ptr() + c * n;
                const double a = gm[c] * inv_std[c];
                if (training) {
                    const double inv_n = 1.0 / static_cast<double>(n);
                    const T k0 = static_cast<T>(a), k1 = static_cast<T>(a * inv_n * sum_gy),
                            k2 = static_cast<T>(a * inv_n * sum_gy_xhat);
                    for (std::size_t i = 0; i < n; ++i) gxr[i] += k0 * gyr[i] - k1 - k2 * ((row[i] - mc) * sc);
                } else {
                    const T k0 = static_cast<T>(a);
                    for (std::size_t i = 0; i < n; ++i) gxr[i] += k0 * gyr[i];
                }
            }
        });
}

/// Mean of squared differences over all elements.
template <class T>
Var mse_loss(Graph<T>& g, Var prediction, const Tensor<T>& target)
{
    const Tensor<T>& pv = g.value(prediction);
    if (pv.shape() != target.shape())
        throw ShapeError("mse_loss: prediction " + shape_str(pv.shape()) + " vs target " +
                         shape_str(target.shape()));
    if (pv.size() == 0) throw ShapeError("mse_loss: empty tensors");
    const double s = detail::lane_sum(pv.size(), [&](std::size_t i) {
        const double e = static_cast<double>(pv[i]) - static_cast<double>(target[i]);
        return e * e;
    });
    const double inv = 1.0 / static_cast<double>(pv.size());
    Tensor<T> out(Shape{}, std::vector<T>{static_cast<T>(s * inv)});
    return g.record("mse_loss", std::move(out), {prediction},
                    [prediction, target, inv](Graph<T>& gr, const Tensor<T>& gy) {
                        Tensor<T>* gp = gr.grad_target(prediction);
                        if (!gp) return;
                        const Tensor<T>& pv = gr.value(prediction);
                        const T k = static_cast<T>(2.0 * inv) * gy[0];
                        for (std::size_t i = 0; i < pv.size(); ++i) (*gp)[i] += k * (pv[i] - target[i]);
                    });
}

/// Row-wise softmax of a [B, K] tensor.
template <class T>
Tensor<T> softmax_rows(const Tensor<T>& logits)
{
    if (logits.rank() != 2) throw ShapeError("softmax: expected [B, K], got " + shape_str(logits.shape()));
    const std::size_t rows = logits.dim(0), k = logits.dim(1);
    Tensor<T> p(logits.shape());
    for (std::size_t b = 0; b < rows; ++b) {
        const T* z = logits.ptr() + b * k;
        T* out = p.ptr() + b * k;
        const T zmax = *std::max_element(z, z + k);
        double s = 0.0;
        for (std::size_t j = 0; j < k; ++j) s += std::exp(static_cast<double>(z[j] - zmax));
        for (std::size_t j = 0; j < k; ++j) out[j] = static_cast<T>(std::exp(static_cast<double>(z[j] - zmax)) / s);
    }
    return p;
}

/// Mean over the batch of -log softmax(logits)[label].
template <class T>
Var softmax_cross_entropy(Graph<T>& g, Var logits, std::span<const int> labels)
{
    const Tensor<T>& zv = g.value(logits);
    if (zv.rank() != 2) throw ShapeError("softmax_cross_entropy: logits must be [B, K]");
    const std::size_t rows = zv.dim(0), k = zv.dim(1);
    if (labels.size() != rows)
        throw ShapeError("softmax_cross_entropy: " + std::to_string(labels.size()) + " labels for " +
                         std::to_string(rows) + " rows");
    if (rows == 0) throw ShapeError("softmax_cross_entropy: empty batch");
    for (int y : labels)
        if (y < 0 || static_cast<std::size_t>(y) >= k)
            throw std::out_of_range("softmax_cross_entropy: label " + std::to_string(y) + " outside [0, " +
                                    std::to_string(k) + ")");
    double loss = 0.0;
    for (std::size_t b = 0; b < rows; ++b) {
        const T* z = zv.ptr() + b * k;
        const double zmax = *std::max_element(z, z + k);
        double s = 0.0;
        for (std::size_t j = 0; j < k; ++j) s += std::exp(z[j] - zmax);
        loss += zmax + std::log(s) - z[labels[b]];
    }
    Tensor<T> out(Shape{}, std::vector<T>{static_cast<T>(loss / static_cast<double>(rows))});
    std::vector<int> ys(labels.begin(), labels.end());
    return g.record("softmax_cross_entropy", std::move(out), {logits},
                    [logits, ys = std::move(ys), rows, k](Graph<T>& gr, const Tensor<T>& gy) {
                        Tensor<T>* gz = gr.grad_target(logits);
                        if (!gz) return;
                        const Tensor<T> p = softmax_rows(gr.value(logits));
                        const T scale = gy[0] / static_cast<T>(rows);
                        for (std::size_t b = 0; b < rows; ++b)
                            for (std::size_t j = 0; j < k; ++j) {
                                const T onehot = static_cast<std::size_t>(ys[b]) == j ? T{1} : T{0};
                                (*gz)[b * k + j] += scale * (p[b * k + j] - onehot);
                            }
                    });
}

/// Sum of all elements.
template <class T>
Var sum(Graph<T>& g, Var x)
{
    const Tensor<T>& xv = g.value(x);
    double s = 0.0;
    for (T v : xv.data()) s += v;
    return g.record("sum", Tensor<T>(Shape{}, std::vector<T>{static_cast<T>(s)}), {x},
                    [x](Graph<T>& gr, const Tensor<T>& gy) {
                        if (Tensor<T>* gx = gr.grad_target(x))
                            for (auto& v : gx->data()) v += gy[0];
                    });
}

/// sum_i x[i] * weights[i]; gives non-uniform upstream gradients in checks.
template <class T>
Var weighted_sum(Graph<T>& g, Var x, const Tensor<T>& weights)
{
    const Tensor<T>& xv = g.value(x);
    if (xv.size() != weights.size())
        throw ShapeError("weighted_sum: " + shape_str(xv.shape()) + " vs " + shape_str(weights.shape()));
    double s = 0.0;
    for (std::size_t i = 0; i < xv.size(); ++i) s += static_cast<double>(xv[i]) * weights[i];
    return g.record("weighted_sum", Tensor<T>(Shape{}, std::vector<T>{static_cast<T>(s)}), {x},
                    [x, weights](Graph<T>& gr, const Tensor<T>& gy) {
                        if (Tensor<T>* gx = gr.grad_target(x))
                            for (std::size_t i = 0; i < gx->size(); ++i) (*gx)[i] += gy[0] * weights[i];
                    });
}

} // namespace gaitxfer::nx
