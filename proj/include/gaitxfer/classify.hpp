#pragma once

#include "gaitxfer/numerics/graph.hpp"
#include "gaitxfer/numerics/ops.hpp"
#include "gaitxfer/numerics/optimizer.hpp"
#include "gaitxfer/numerics/parameters.hpp"
#include "gaitxfer/numerics/rng.hpp"

#include <Eigen/Dense>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace gaitxfer {

enum class ClassifierKind { mlp, svm };

inline std::string_view to_string(ClassifierKind k) { return k == ClassifierKind::mlp ? "mlp" : "svm"; }

/// Raised when classifier training produces a non-finite loss.
class ClassifierDiverged : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

namespace clf_detail {

inline void check_training_set(const Eigen::MatrixXd& x, std::span<const int> labels, int classes, const char* who)
{
    if (x.rows() == 0) throw std::invalid_argument(std::string(who) + ": empty training set");
    if (static_cast<std::size_t>(x.rows()) != labels.size())
        throw std::invalid_argument(std::string(who) + ": " + std::to_string(x.rows()) + " rows but " +
                                    std::to_string(labels.size()) + " labels");
    for (int y : labels)
        if (y < 0 || y >= classes)
            throw std::out_of_range(std::string(who) + ": label " + std::to_string(y) + " outside [0, " +
                                    std::to_string(classes) + ")");
    if (!x.allFinite()) throw std::invalid_argument(std::string(who) + ": non-finite feature value");
}

} // namespace clf_detail

enum class ScaleMode { per_feature, global };

/// Affine feature standardization fitted on training rows only.
/// per_feature z-scores each column; global subtracts column means and
/// divides everything by one RMS deviation (keeps PCA variance ordering).
struct FeatureScaler {
    ScaleMode mode = ScaleMode::per_feature;
    Eigen::VectorXd mean;
    Eigen::VectorXd scale;

    Eigen::MatrixXd apply(const Eigen::MatrixXd& x) const
    {
        if (x.cols() != mean.size())
            throw std::invalid_argument("FeatureScaler: width " + std::to_string(x.cols()) + " != fitted " +
                                        std::to_string(mean.size()));
        return (x.rowwise() - mean.transpose()).array().rowwise() / scale.transpose().array();
    }
};

inline FeatureScaler fit_scaler(const Eigen::MatrixXd& x, ScaleMode mode)
{
    if (x.rows() == 0) throw std::invalid_argument("fit_scaler: no rows");
    FeatureScaler s;
    s.mode = mode;
    s.mean = x.colwise().mean().transpose();
    const Eigen::MatrixXd c = x.rowwise() - s.mean.transpose();
    const double n = static_cast<double>(x.rows());
    if (mode == ScaleMode::per_feature) {
        s.scale = (c.colwise().squaredNorm() / n).cwiseSqrt().transpose();
        for (auto& v : s.scale) v = v < 1e-12 ? 1.0 : v;
    } else {
        const double rms = std::sqrt(c.squaredNorm() / (n * static_cast<double>(std::max<Eigen::Index>(1, x.cols()))));
        s.scale = Eigen::VectorXd::Constant(x.cols(), rms < 1e-12 ? 1.0 : rms);
    }
    return s;
}

struct MlpConfig {
    std::array<std::size_t, 4> widths{64, 128, 128, 64};
    double dropout_rate = 0.2;
    /// Objective adds l2 * sum of squared weight-matrix entries.
    double l2 = 1e-4;
    double learning_rate = 1e-3;
    std::size_t batch_size = 32;
    std::size_t max_epochs = 300;
    /// Stop after this many epochs without a lower training loss.
    std::size_t patience = 20;
};

struct MlpModel {
    std::size_t input_dim = 0;
    int classes = 2;
    MlpConfig config;
    std::uint64_t seed = 0;
    nx::ParameterSet<float> params;
    std::vector<double> loss_history;

    static std::string weight_name(std::size_t layer) { return "dense" + std::to_string(layer) + ".w"; }
    static std::string bias_name(std::size_t layer) { return "dense" + std::to_string(layer) + ".b"; }
    static constexpr std::size_t kLayers = 5;

    std::size_t parameter_count() const { return params.total_count(); }
};

inline MlpModel build_mlp(std::size_t input_dim, int classes, std::uint64_t seed, const MlpConfig& config = {})
{
    if (input_dim == 0) throw std::invalid_argument("build_mlp: input_dim must be at least 1");
    if (classes < 2) throw std::invalid_argument("build_mlp: need at least 2 classes");
    if (!(config.dropout_rate >= 0.0 && config.dropout_rate < 1.0))
        throw std::invalid_argument("build_mlp: dropout rate must lie in [0, 1)");
    MlpModel m;
    m.input_dim = input_dim;
    m.classes = classes;
    m.config = config;
    m.seed = seed;
    nx::Rng rng(nx::derive_seed(seed, "mlp.init"));
    std::size_t fan_in = input_dim;
    for (std::size_t l = 0; l < MlpModel::kLayers; ++l) {
        const std::size_t out = l < 4 ? config.widths[l] : static_cast<std::size_t>(classes);
        m.params.add(MlpModel::weight_name(l), nx::fan_in_uniform<float>({fan_in, out}, fan_in, rng), true);
        m.params.add(MlpModel::bias_name(l), nx::Tensor<float>({out}), false);
        fan_in = out;
    }
    return m;
}

namespace clf_detail {

inline nx::Tensor<float> rows_to_tensor(const Eigen::MatrixXd& x, std::span<const std::size_t> idx)
{
    const auto d = static_cast<std::size_t>(x.cols());
    nx::Tensor<float> t({idx.size(), d});
    for (std::size_t i = 0; i < idx.size(); ++i)
        for (std::size_t j = 0; j < d; ++j)
            t[i * d + j] = static_cast<float>(x(static_cast<Eigen::Index>(idx[i]), static_cast<Eigen::Index>(j)));
    return t;
}

inline nx::Var mlp_logits(nx::Graph<float>& g, const MlpModel& m, nx::Var h, bool training, std::uint64_t seed)
{
    for (std::size_t l = 0; l < MlpModel::kLayers; ++l) {
        h = nx::dense_affine(g, h, g.param(m.params, MlpModel::weight_name(l)),
                             g.param(m.params, MlpModel::bias_name(l)));
        if (l + 1 < MlpModel::kLayers) {
            h = nx::relu(g, h);
            h = nx::dropout(g, h, m.config.dropout_rate, training, nx::derive_seed(seed, l));
        }
    }
    return h;
}

inline double l2_penalty(const MlpModel& m)
{
    double s = 0.0;
    for (const auto& [name, e] : m.params)
        if (e.decay)
            for (float v : e.value.data()) s += static_cast<double>(v) * v;
    return m.config.l2 * s;
}

} // namespace clf_detail

/// Adam on softmax cross-entropy + L2, mini-batches shuffled per epoch from
/// the model seed. loss_history holds the per-epoch objective.
inline void train_mlp(MlpModel& m, const Eigen::MatrixXd& x, std::span<const int> labels)
{
    clf_detail::check_training_set(x, labels, m.classes, "train_mlp");
    if (static_cast<std::size_t>(x.cols()) != m.input_dim)
        throw std::invalid_argument("train_mlp: feature width " + std::to_string(x.cols()) + " != model input " +
                                    std::to_string(m.input_dim));
    nx::OptimizerConfig oc;
    oc.learning_rate = m.config.learning_rate;
    oc.weight_decay = 2.0 * m.config.l2;
    auto opt = nx::make_optimizer<float>(oc);
    const std::size_t n = labels.size();
    std::vector<std::size_t> order(n);
    double best = std::numeric_limits<double>::infinity();
    std::size_t since_best = 0, step = 0;
    for (std::size_t epoch = 0; epoch < m.config.max_epochs; ++epoch) {
        std::iota(order.begin(), order.end(), std::size_t{0});
        nx::Rng rng(nx::derive_seed(m.seed, "mlp.shuffle." + std::to_string(epoch)));
        rng.shuffle(order);
        double loss_sum = 0.0;
        for (std::size_t start = 0; start < n; start += m.config.batch_size) {
            const std::size_t end = std::min(n, start + m.config.batch_size);
            const std::span<const std::size_t> idx(order.data() + start, end - start);
            std::vector<int> y(idx.size());
            for (std::size_t i = 0; i < idx.size(); ++i) y[i] = labels[idx[i]];
            nx::Graph<float> g;
            nx::Var logits = clf_detail::mlp_logits(g, m, g.constant(clf_detail::rows_to_tensor(x, idx)), true,
                                                    nx::derive_seed(m.seed, "mlp.dropout." + std::to_string(step)));
            nx::Var loss = nx::softmax_cross_entropy(g, logits, y);
            try {
                g.backward(loss);
            } catch (const nx::NonFiniteError& e) {
                throw ClassifierDiverged(std::string("MLP training diverged: ") + e.what());
            }
            loss_sum += static_cast<double>(g.value(loss)[0]) * static_cast<double>(idx.size());
            nx::optimizer_step(m.params, g.param_grads(), opt);
            ++step;
        }
        const double objective = loss_sum / static_cast<double>(n) + clf_detail::l2_penalty(m);
        if (!std::isfinite(objective))
            throw ClassifierDiverged("MLP training loss became non-finite at epoch " + std::to_string(epoch));
        m.loss_history.push_back(objective);
        if (objective < best) {
            best = objective;
            since_best = 0;
        } else if (++since_best >= m.config.patience) {
            spdlog::debug("MLP early stop at epoch {} (best {:.6f})", epoch, best);
            break;
        }
    }
}

/// Inference-mode class probabilities, one row per input row.
inline Eigen::MatrixXd mlp_predict_proba(const MlpModel& m, const Eigen::MatrixXd& x)
{
    if (static_cast<std::size_t>(x.cols()) != m.input_dim)
        throw std::invalid_argument("mlp predict: feature width " + std::to_string(x.cols()) + " != model input " +
                                    std::to_string(m.input_dim));
    Eigen::MatrixXd out(x.rows(), m.classes);
    if (x.rows() == 0) return out;
    std::vector<std::size_t> idx(static_cast<std::size_t>(x.rows()));
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    nx::Graph<float> g(false);
    nx::Var logits = clf_detail::mlp_logits(g, m, g.constant(clf_detail::rows_to_tensor(x, idx)), false, 0);
    const nx::Tensor<float> p = nx::softmax_rows(g.value(logits));
    const auto k = static_cast<std::size_t>(m.classes);
    for (Eigen::Index i = 0; i < x.rows(); ++i)
        for (std::size_t j = 0; j < k; ++j) out(i, static_cast<Eigen::Index>(j)) = p[static_cast<std::size_t>(i) * k + j];
    return out;
}

/// argmax per row; ties resolve to the lower class index.
inline std::vector<int> argmax_rows(const Eigen::MatrixXd& p)
{
    std::vector<int> out(static_cast<std::size_t>(p.rows()));
    for (Eigen::Index i = 0; i < p.rows(); ++i) {
        Eigen::Index best = 0;
        for (Eigen::Index j = 1; j < p.cols(); ++j)
            if (p(i, j) > p(i, best)) best = j;
        out[static_cast<std::size_t>(i)] = static_cast<int>(best);
    }
    return out;
}

inline std::vector<int> mlp_predict(const MlpModel& m, const Eigen::MatrixXd& x)
{
    return argmax_rows(mlp_predict_proba(m, x));
}

struct SvmConfig {
    double lambda = 1e-3;
    std::size_t epochs = 2000;
};

/// Binary linear SVM; class 1 is the positive side of w.x + b.
struct SvmModel {
    Eigen::VectorXd weight;
    double bias = 0.0;
    double lambda = 1e-3;
    std::vector<double> objective_history;

    std::size_t dim() const noexcept { return static_cast<std::size_t>(weight.size()); }
};

inline double svm_objective(const SvmModel& m, const Eigen::MatrixXd& x, std::span<const int> labels)
{
    double hinge = 0.0;
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        const double y = labels[static_cast<std::size_t>(i)] == 1 ? 1.0 : -1.0;
        hinge += std::max(0.0, 1.0 - y * (x.row(i).dot(m.weight) + m.bias));
    }
    return 0.5 * m.lambda * (m.weight.squaredNorm() + m.bias * m.bias) + hinge / static_cast<double>(x.rows());
}

/// Full-batch Pegasos: at epoch t the step is 1/(lambda t) on the
/// subgradient of lambda/2 |(w, b)|^2 + mean hinge, followed by projection
/// onto the ball of radius 1/sqrt(lambda). The bias is treated as the weight
/// of a constant-1 feature. Labels are {0, 1}; 0 maps to -1.
inline SvmModel train_linear_svm(const Eigen::MatrixXd& x, std::span<const int> labels, const SvmConfig& config = {})
{
    clf_detail::check_training_set(x, labels, 2, "train_linear_svm");
    const bool has_pos = std::find(labels.begin(), labels.end(), 1) != labels.end();
    const bool has_neg = std::find(labels.begin(), labels.end(), 0) != labels.end();
    if (!has_pos || !has_neg) throw std::invalid_argument("train_linear_svm: training labels contain a single class");
    if (!(config.lambda > 0.0)) throw std::invalid_argument("train_linear_svm: lambda must be positive");
    if (config.epochs == 0) throw std::invalid_argument("train_linear_svm: epochs must be positive");

    const Eigen::Index n = x.rows(), d = x.cols();
    Eigen::VectorXd y(n);
    for (Eigen::Index i = 0; i < n; ++i) y(i) = labels[static_cast<std::size_t>(i)] == 1 ? 1.0 : -1.0;
    SvmModel m;
    m.lambda = config.lambda;
    m.weight = Eigen::VectorXd::Zero(d);
    const double radius = 1.0 / std::sqrt(config.lambda);
    for (std::size_t t = 1; t <= config.epochs; ++t) {
        const double eta = 1.0 / (config.lambda * static_cast<double>(t));
        const Eigen::VectorXd margin = (x * m.weight).array() + m.bias;
        Eigen::VectorXd coef = Eigen::VectorXd::Zero(n);
        for (Eigen::Index i = 0; i < n; ++i)
            if (y(i) * margin(i) < 1.0) coef(i) = y(i);
        const double shrink = 1.0 - eta * config.lambda;
        m.weight = shrink * m.weight + (eta / static_cast<double>(n)) * (x.transpose() * coef);
        m.bias = shrink * m.bias + (eta / static_cast<double>(n)) * coef.sum();
        const double norm = std::sqrt(m.weight.squaredNorm() + m.bias * m.bias);
        if (norm > radius) {
            m.weight *= radius / norm;
            m.bias *= radius / norm;
        }
        if (t % 100 == 0 || t == config.epochs) {
            const double obj = svm_objective(m, x, labels);
            if (!std::isfinite(obj)) throw ClassifierDiverged("SVM objective became non-finite");
            m.objective_history.push_back(obj);
        }
    }
    return m;
}

inline Eigen::VectorXd svm_decision(const SvmModel& m, const Eigen::MatrixXd& x)
{
    if (static_cast<std::size_t>(x.cols()) != m.dim())
        throw std::invalid_argument("svm predict: feature width " + std::to_string(x.cols()) + " != model " +
                                    std::to_string(m.dim()));
    return (x * m.weight).array() + m.bias;
}

/// Class 1 when w.x + b > 0, else class 0.
inline std::vector<int> svm_predict(const SvmModel& m, const Eigen::MatrixXd& x)
{
    const Eigen::VectorXd s = svm_decision(m, x);
    std::vector<int> out(static_cast<std::size_t>(s.size()));
    for (Eigen::Index i = 0; i < s.size(); ++i) out[static_cast<std::size_t>(i)] = s(i) > 0.0 ? 1 : 0;
    return out;
}

} // namespace gaitxfer
