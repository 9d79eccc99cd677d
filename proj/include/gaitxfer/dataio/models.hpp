#pragma once

#include "gaitxfer/autoenc.hpp"
#include "gaitxfer/classify.hpp"
#include "gaitxfer/dataio/archive.hpp"
#include "gaitxfer/harness.hpp"
#include "gaitxfer/reduce.hpp"
#include "gaitxfer/sigprep.hpp"

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace gaitxfer {

/// Identity stamped into every archive and report.
struct Provenance {
    std::uint64_t seed = 0;
    std::string dataset_fingerprint;
    std::string config_fingerprint;
};

inline nlohmann::ordered_json to_json(const Provenance& p)
{
    return {{"seed", p.seed},
            {"dataset_fingerprint", p.dataset_fingerprint},
            {"config_fingerprint", p.config_fingerprint},
            {"created", creation_time()}};
}

inline Provenance provenance_from_json(const nlohmann::ordered_json& j)
{
    try {
        return {j.at("seed").get<std::uint64_t>(), j.at("dataset_fingerprint").get<std::string>(),
                j.at("config_fingerprint").get<std::string>()};
    } catch (const nlohmann::json::exception& e) {
        throw ArchiveError(std::string("archive provenance is incomplete: ") + e.what());
    }
}

inline void expect_kind(const Archive& a, const std::string& kind)
{
    if (a.kind != kind) throw ArchiveError("expected an archive of kind '" + kind + "', found '" + a.kind + "'");
}

// Autoencoder.

inline std::string_view to_string(PoolMode m) { return m == PoolMode::stride1 ? "stride1" : "none"; }

inline PoolMode pool_mode_from_string(std::string_view s)
{
    if (s == "stride1") return PoolMode::stride1;
    if (s == "none") return PoolMode::none;
    throw std::invalid_argument("unknown pooling mode '" + std::string(s) + "'");
}

inline nlohmann::ordered_json to_json(const AutoencoderConfig& c)
{
    nlohmann::ordered_json j;
    j["input_channels"] = c.input_channels;
    j["dense_blocks_per_side"] = c.dense_blocks_per_side;
    j["layers_per_block"] = c.layers_per_block;
    j["bottleneck_size"] = c.bottleneck_size;
    j["initial_filters"] = c.initial_filters;
    j["initial_kernel_width"] = c.initial_kernel_width;
    j["initial_pool_width"] = c.initial_pool_width;
    j["growth_filters"] = c.growth_filters;
    j["kernel_width"] = c.kernel_width;
    j["bottleneck_kernel_width"] = c.bottleneck_kernel_width;
    j["transition_pool_size"] = c.transition_pool_size;
    j["stride"] = c.stride;
    j["theta"] = c.theta;
    j["dropout_rate"] = c.dropout_rate;
    j["latent_channels"] = c.latent_channels;
    j["use_batchnorm"] = c.use_batchnorm;
    j["pooling"] = to_string(c.pooling);
    j["reference_architecture"] = c.reference_architecture;
    j["learning_rate"] = c.learning_rate;
    j["weight_decay"] = c.weight_decay;
    j["batch_size"] = c.batch_size;
    j["epochs"] = c.epochs;
    j["bn_momentum"] = c.bn_momentum;
    j["seed"] = c.seed;
    return j;
}

/// Missing keys keep their defaults; the result is validated.
inline AutoencoderConfig autoencoder_config_from_json(const nlohmann::json& j, AutoencoderConfig c = {})
{
    c.input_channels = j.value("input_channels", c.input_channels);
    c.dense_blocks_per_side = j.value("dense_blocks_per_side", c.dense_blocks_per_side);
    c.layers_per_block = j.value("layers_per_block", c.layers_per_block);
    c.bottleneck_size = j.value("bottleneck_size", c.bottleneck_size);
    c.initial_filters = j.value("initial_filters", c.initial_filters);
    c.initial_kernel_width = j.value("initial_kernel_width", c.initial_kernel_width);
    c.initial_pool_width = j.value("initial_pool_width", c.initial_pool_width);
    c.growth_filters = j.value("growth_filters", c.growth_filters);
    c.kernel_width = j.value("kernel_width", c.kernel_width);
    c.bottleneck_kernel_width = j.value("bottleneck_kernel_width", c.bottleneck_kernel_width);
    c.transition_pool_size = j.value("transition_pool_size", c.transition_pool_size);
    c.stride = j.value("stride", c.stride);
    c.theta = j.value("theta", c.theta);
    c.dropout_rate = j.value("dropout_rate", c.dropout_rate);
    c.latent_channels = j.value("latent_channels", c.latent_channels);
    c.use_batchnorm = j.value("use_batchnorm", c.use_batchnorm);
    if (j.contains("pooling")) c.pooling = pool_mode_from_string(j.at("pooling").get<std::string>());
    c.reference_architecture = j.value("reference_architecture", c.reference_architecture);
    c.learning_rate = j.value("learning_rate", c.learning_rate);
    c.weight_decay = j.value("weight_decay", c.weight_decay);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.epochs = j.value("epochs", c.epochs);
    c.bn_momentum = j.value("bn_momentum", c.bn_momentum);
    c.seed = j.value("seed", c.seed);
    c.validate();
    return c;
}

inline Archive autoencoder_archive(const AutoencoderModel& m, const Provenance& p)
{
    Archive a;
    a.kind = "autoencoder";
    a.config = to_json(m.config());
    a.config["trained_on"] = m.trained_on();
    a.provenance = to_json(p);
    for (const auto& [name, e] : m.encoder()) a.add_tensor("encoder/" + name, e.value);
    for (const auto& [name, e] : m.decoder()) a.add_tensor("decoder/" + name, e.value);
    for (const auto& [name, t] : m.buffers()) a.add_tensor("buffer/" + name, t);
    a.add_f64("loss_history", {m.loss_history().size()}, m.loss_history());
    return a;
}

inline AutoencoderModel autoencoder_from_archive(const Archive& a)
{
    expect_kind(a, "autoencoder");
    const AutoencoderConfig cfg = autoencoder_config_from_json(a.config);
    // The layout (names, shapes, decay flags) comes from the config; values from the blobs.
    AutoencoderModel fresh = build_autoencoder(cfg, 0);
    auto fill = [&](nx::ParameterSet<float>& set, const std::string& prefix) {
        for (auto& [name, e] : set) {
            nx::Tensor<float> t = a.tensor(prefix + name);
            if (t.shape() != e.value.shape()) throw ArchiveError("record '" + prefix + name + "' has the wrong shape");
            e.value = std::move(t);
        }
    };
    fill(fresh.encoder(), "encoder/");
    fill(fresh.decoder(), "decoder/");
    BufferMap<float> buffers;
    for (const auto& [name, t] : fresh.buffers()) buffers[name] = a.tensor("buffer/" + name);
    return AutoencoderModel::from_parts(cfg, fresh.encoder(), fresh.decoder(), std::move(buffers), a.f64("loss_history"),
                                        a.config.value("trained_on", std::string()));
}

// PCA. Components and mean are stored in 64-bit.

inline Archive pca_archive(const PcaModel& m, const Provenance& p)
{
    Archive a;
    a.kind = "pca";
    a.config = {{"dim", m.dim()}, {"k", m.k()}, {"fit_rows", m.fit_rows}, {"fit_fingerprint", m.fit_fingerprint},
                {"total_variance", m.total_variance}};
    a.provenance = to_json(p);
    a.add_f64("mean", {m.dim()}, std::span<const double>(m.mean.data(), m.dim()));
    // row-major k x d
    const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rows = m.components;
    a.add_f64("components", {m.k(), m.dim()}, std::span<const double>(rows.data(), m.k() * m.dim()));
    a.add_f64("explained_variance", {m.k()}, m.explained_variance);
    a.add_f64("explained_ratio", {m.k()}, m.explained_ratio);
    return a;
}

inline PcaModel pca_from_archive(const Archive& a)
{
    expect_kind(a, "pca");
    PcaModel m;
    const auto d = a.config.at("dim").get<std::size_t>();
    const auto k = a.config.at("k").get<std::size_t>();
    const auto mean = a.f64("mean");
    const auto comp = a.f64("components");
    if (mean.size() != d || comp.size() != k * d) throw ArchiveError("pca archive: record sizes disagree with dim/k");
    m.mean = Eigen::Map<const Eigen::VectorXd>(mean.data(), static_cast<Eigen::Index>(d));
    m.components = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
        comp.data(), static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(d));
    m.explained_variance = a.f64("explained_variance");
    m.explained_ratio = a.f64("explained_ratio");
    m.total_variance = a.config.at("total_variance").get<double>();
    m.fit_rows = a.config.at("fit_rows").get<std::size_t>();
    m.fit_fingerprint = a.config.at("fit_fingerprint").get<std::string>();
    return m;
}

// Classifiers.

inline nlohmann::ordered_json to_json(const MlpConfig& c)
{
    return {{"widths", c.widths},         {"dropout_rate", c.dropout_rate}, {"l2", c.l2},
            {"learning_rate", c.learning_rate}, {"batch_size", c.batch_size}, {"max_epochs", c.max_epochs},
            {"patience", c.patience}};
}

inline MlpConfig mlp_config_from_json(const nlohmann::json& j, MlpConfig c = {})
{
    if (j.contains("widths")) c.widths = j.at("widths").get<std::array<std::size_t, 4>>();
    c.dropout_rate = j.value("dropout_rate", c.dropout_rate);
    c.l2 = j.value("l2", c.l2);
    c.learning_rate = j.value("learning_rate", c.learning_rate);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.max_epochs = j.value("max_epochs", c.max_epochs);
    c.patience = j.value("patience", c.patience);
    if (c.batch_size == 0 || c.max_epochs == 0) throw std::invalid_argument("mlp config: batch_size and max_epochs must be positive");
    return c;
}

inline nlohmann::ordered_json to_json(const SvmConfig& c) { return {{"lambda", c.lambda}, {"epochs", c.epochs}}; }

inline SvmConfig svm_config_from_json(const nlohmann::json& j, SvmConfig c = {})
{
    c.lambda = j.value("lambda", c.lambda);
    c.epochs = j.value("epochs", c.epochs);
    return c;
}

inline std::string_view to_string(ScaleMode m) { return m == ScaleMode::global ? "global" : "per_feature"; }

namespace models_detail {

inline void add_vector(Archive& a, const std::string& name, const Eigen::VectorXd& v)
{
    a.add_f64(name, {static_cast<std::uint64_t>(v.size())}, std::span<const double>(v.data(), static_cast<std::size_t>(v.size())));
}

inline Eigen::VectorXd vector(const Archive& a, const std::string& name)
{
    const auto v = a.f64(name);
    return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

} // namespace models_detail

inline void add_mlp(Archive& a, const MlpModel& m)
{
    a.config["mlp"] = {{"input_dim", m.input_dim}, {"classes", m.classes}, {"seed", m.seed}, {"config", to_json(m.config)}};
    for (const auto& [name, e] : m.params) a.add_tensor("mlp/" + name, e.value);
    a.add_f64("mlp_loss_history", {m.loss_history.size()}, m.loss_history);
}

inline MlpModel mlp_from(const Archive& a)
{
    const auto& j = a.config.at("mlp");
    MlpModel m = build_mlp(j.at("input_dim").get<std::size_t>(), j.at("classes").get<int>(),
                           j.at("seed").get<std::uint64_t>(), mlp_config_from_json(j.at("config")));
    for (auto& [name, e] : m.params) {
        nx::Tensor<float> t = a.tensor("mlp/" + name);
        if (t.shape() != e.value.shape()) throw ArchiveError("record 'mlp/" + name + "' has the wrong shape");
        e.value = std::move(t);
    }
    m.loss_history = a.f64("mlp_loss_history");
    return m;
}

inline void add_svm(Archive& a, const SvmModel& m)
{
    a.config["svm"] = {{"lambda", m.lambda}, {"bias", m.bias}};
    models_detail::add_vector(a, "svm/weight", m.weight);
    a.add_f64("svm_objective_history", {m.objective_history.size()}, m.objective_history);
}

inline SvmModel svm_from(const Archive& a)
{
    SvmModel m;
    m.lambda = a.config.at("svm").at("lambda").get<double>();
    m.bias = a.config.at("svm").at("bias").get<double>();
    m.weight = models_detail::vector(a, "svm/weight");
    m.objective_history = a.f64("svm_objective_history");
    return m;
}

inline Archive mlp_archive(const MlpModel& m, const Provenance& p)
{
    Archive a;
    a.kind = "mlp";
    a.provenance = to_json(p);
    add_mlp(a, m);
    return a;
}

inline MlpModel mlp_from_archive(const Archive& a)
{
    expect_kind(a, "mlp");
    return mlp_from(a);
}

inline Archive svm_archive(const SvmModel& m, const Provenance& p)
{
    Archive a;
    a.kind = "svm";
    a.provenance = to_json(p);
    add_svm(a, m);
    return a;
}

inline SvmModel svm_from_archive(const Archive& a)
{
    expect_kind(a, "svm");
    return svm_from(a);
}

/// A split's scaler and classifier in one archive of kind "mlp" or "svm".
/// The split's PCA, when used, lives in its own archive.
inline Archive split_models_archive(const SplitModels& m, const SubjectSplit& split, const Provenance& p)
{
    Archive a;
    a.kind = std::string(to_string(m.classifier));
    a.provenance = to_json(p);
    a.config["split_id"] = split.split_id;
    a.config["train_fingerprint"] = m.train_fingerprint;
    a.config["scaler_mode"] = to_string(m.scaler.mode);
    a.config["uses_pca"] = m.pca.has_value();
    models_detail::add_vector(a, "scaler/mean", m.scaler.mean);
    models_detail::add_vector(a, "scaler/scale", m.scaler.scale);
    if (m.mlp) add_mlp(a, *m.mlp);
    if (m.svm) add_svm(a, *m.svm);
    return a;
}

inline SplitModels split_models_from_archive(const Archive& a, std::optional<PcaModel> pca)
{
    if (a.kind != "mlp" && a.kind != "svm") throw ArchiveError("expected a classifier archive, found '" + a.kind + "'");
    SplitModels m;
    m.classifier = a.kind == "mlp" ? ClassifierKind::mlp : ClassifierKind::svm;
    m.train_fingerprint = a.config.at("train_fingerprint").get<std::string>();
    m.scaler.mode = a.config.at("scaler_mode").get<std::string>() == "global" ? ScaleMode::global : ScaleMode::per_feature;
    m.scaler.mean = models_detail::vector(a, "scaler/mean");
    m.scaler.scale = models_detail::vector(a, "scaler/scale");
    if (a.config.at("uses_pca").get<bool>()) {
        if (!pca) throw ArchiveError("classifier was trained on PCA features but no PCA model was supplied");
        m.pca = std::move(pca);
    }
    if (m.classifier == ClassifierKind::mlp) m.mlp = mlp_from(a);
    else m.svm = svm_from(a);
    return m;
}

// Frame sets and feature tables.

/// Frames of one dataset with per-frame subject, label and window metadata.
struct FrameSet {
    std::vector<Placement> sensors;
    std::vector<std::string> class_names;
    std::vector<Frame> frames;
};

inline Archive frameset_archive(const FrameSet& fs, const Provenance& p)
{
    Archive a;
    a.kind = "frameset";
    a.provenance = to_json(p);
    std::vector<std::string> sensors, subjects;
    std::vector<int> labels;
    std::vector<std::size_t> recordings, windows;
    for (Placement s : fs.sensors) sensors.emplace_back(to_string(s));
    const std::size_t channels = kAxes * fs.sensors.size();
    std::vector<float> values;
    values.reserve(fs.frames.size() * channels * kFrameLength);
    for (const auto& f : fs.frames) {
        if (f.channels != channels || f.origin.sensors != fs.sensors)
            throw std::invalid_argument("frameset: frame sensors disagree with the set");
        for (double v : f.values) values.push_back(static_cast<float>(v));
        subjects.push_back(f.origin.subject_id);
        labels.push_back(f.label);
        recordings.push_back(f.origin.recording_index);
        windows.push_back(f.origin.window_index);
    }
    a.config = {{"sensors", sensors}, {"class_names", fs.class_names}, {"subjects", subjects},
                {"labels", labels},   {"recordings", recordings},      {"windows", windows}};
    a.add_f32("frames", {fs.frames.size(), channels, kFrameLength}, values);
    return a;
}

inline FrameSet frameset_from_archive(const Archive& a)
{
    expect_kind(a, "frameset");
    FrameSet fs;
    for (const auto& s : a.config.at("sensors")) fs.sensors.push_back(placement_or_throw(s.get<std::string>()));
    fs.class_names = a.config.at("class_names").get<std::vector<std::string>>();
    const auto subjects = a.config.at("subjects").get<std::vector<std::string>>();
    const auto labels = a.config.at("labels").get<std::vector<int>>();
    const auto recordings = a.config.at("recordings").get<std::vector<std::size_t>>();
    const auto windows = a.config.at("windows").get<std::vector<std::size_t>>();
    const auto values = a.f32("frames");
    const std::size_t channels = kAxes * fs.sensors.size(), per = channels * kFrameLength;
    const std::size_t n = subjects.size();
    if (labels.size() != n || recordings.size() != n || windows.size() != n || values.size() != n * per)
        throw ArchiveError("frameset archive: metadata and frame blob disagree");
    fs.frames.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        Frame& f = fs.frames[i];
        f.channels = channels;
        f.values.assign(values.begin() + static_cast<std::ptrdiff_t>(i * per),
                        values.begin() + static_cast<std::ptrdiff_t>((i + 1) * per));
        f.origin = FrameOrigin{subjects[i], recordings[i], windows[i], fs.sensors};
        f.label = labels[i];
    }
    return fs;
}

/// Feature matrices are stored in 32-bit and widened on load.
inline Archive features_archive(const FeatureTable& t, const Provenance& p)
{
    Archive a;
    a.kind = "features";
    a.provenance = to_json(p);
    std::vector<std::string> sensors;
    for (Placement s : t.sensors) sensors.emplace_back(to_string(s));
    a.config = {{"variant", to_string(t.kind)}, {"sensors", sensors},     {"class_names", t.class_names},
                {"labels", t.labels},           {"subjects", t.subjects}};
    const Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> x = t.x.cast<float>();
    a.add_f32("x", {static_cast<std::uint64_t>(x.rows()), static_cast<std::uint64_t>(x.cols())},
              std::span<const float>(x.data(), static_cast<std::size_t>(x.size())));
    return a;
}

inline FeatureKind feature_kind_from_string(std::string_view s)
{
    for (FeatureKind k : {FeatureKind::pca_latent, FeatureKind::gap_latent, FeatureKind::pca_raw, FeatureKind::statfeat})
        if (to_string(k) == s) return k;
    throw std::invalid_argument("unknown feature variant '" + std::string(s) + "'");
}

inline FeatureTable features_from_archive(const Archive& a)
{
    expect_kind(a, "features");
    FeatureTable t;
    t.kind = feature_kind_from_string(a.config.at("variant").get<std::string>());
    for (const auto& s : a.config.at("sensors")) t.sensors.push_back(placement_or_throw(s.get<std::string>()));
    t.class_names = a.config.at("class_names").get<std::vector<std::string>>();
    t.labels = a.config.at("labels").get<std::vector<int>>();
    t.subjects = a.config.at("subjects").get<std::vector<std::string>>();
    const auto& r = a.record("x");
    if (r.shape.size() != 2) throw ArchiveError("features archive: 'x' must be a matrix");
    const auto values = a.f32("x");
    t.x = Eigen::Map<const Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
              values.data(), static_cast<Eigen::Index>(r.shape[0]), static_cast<Eigen::Index>(r.shape[1]))
              .cast<double>();
    t.validate();
    return t;
}

} // namespace gaitxfer
