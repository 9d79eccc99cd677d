#pragma once

#include "gaitxfer/autoenc.hpp"
#include "gaitxfer/classify.hpp"
#include "gaitxfer/dataio/archive.hpp"
#include "gaitxfer/dataio/dataset.hpp"
#include "gaitxfer/dataio/fingerprint.hpp"
#include "gaitxfer/dataio/models.hpp"
#include "gaitxfer/dataio/synth.hpp"
#include "gaitxfer/harness.hpp"
#include "gaitxfer/reduce.hpp"
#include "gaitxfer/sigprep.hpp"
#include "gaitxfer/statfeat.hpp"

#include <Eigen/Dense>
#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

namespace gaitxfer {

/// A stage could not run: missing upstream artifact, mismatched
/// fingerprints or bad input. The message says what to do.
class StageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline constexpr std::size_t kReferenceParameterCount = 264265;

inline ClassifierKind classifier_from_string(std::string_view s)
{
    if (s == "mlp") return ClassifierKind::mlp;
    if (s == "svm") return ClassifierKind::svm;
    throw std::invalid_argument("unknown classifier '" + std::string(s) + "' (expected mlp or svm)");
}

struct PipelineConfig {
    /// Empty manifest paths mean the synthetic data under <out>/data.
    std::filesystem::path source_manifest;
    std::filesystem::path target_manifest;
    std::filesystem::path out_dir = "gaitxfer_out";
    /// Activity filter for the source set ("subset1", "subset2" or names).
    std::optional<std::vector<std::string>> source_activities;
    std::vector<std::string> class_names{"healthy", "pd"};
    AutoencoderConfig autoencoder;
    FeatureKind variant = FeatureKind::gap_latent;
    ClassifierKind classifier = ClassifierKind::mlp;
    std::size_t pca_k = 1600;
    std::size_t n_splits = 3;
    std::vector<Placement> sensors{kCanonicalSensors.begin(), kCanonicalSensors.end()};
    /// Master seed; the autoencoder and synthetic generator follow it.
    std::uint64_t seed = 42;
    MlpConfig mlp;
    SvmConfig svm;
    bool pca_on_all_frames = false;
    bool statistics_per_trial = false;
    SynthSpec synth;

    std::filesystem::path source_manifest_path() const
    {
        return source_manifest.empty() ? out_dir / "data" / "source_manifest.csv" : source_manifest;
    }
    std::filesystem::path target_manifest_path() const
    {
        return target_manifest.empty() ? out_dir / "data" / "target_manifest.csv" : target_manifest;
    }

    AutoencoderConfig effective_autoencoder() const
    {
        AutoencoderConfig c = autoencoder;
        c.seed = seed;
        return c;
    }
    SynthSpec effective_synth() const
    {
        SynthSpec s = synth;
        s.seed = seed;
        return s;
    }
    EvalSettings eval_settings() const
    {
        EvalSettings e;
        e.classifier = classifier;
        e.pca_k = pca_k;
        e.pca_on_all_frames = pca_on_all_frames;
        e.mlp = mlp;
        e.svm = svm;
        e.seed = seed;
        return e;
    }

    void validate() const
    {
        if (n_splits == 0) throw std::invalid_argument("config: splits must be at least 1");
        if (pca_k == 0) throw std::invalid_argument("config: pca_k must be at least 1");
        if (sensors.empty()) throw std::invalid_argument("config: sensor list is empty");
        canonical_order(sensors);
        if (class_names.size() != 2) throw std::invalid_argument("config: exactly two class names are required");
        autoencoder.validate();
        synth.validate();
    }
};

inline std::vector<std::string> sensor_names(std::span<const Placement> sensors)
{
    std::vector<std::string> out;
    for (Placement p : sensors) out.emplace_back(to_string(p));
    return out;
}

inline nlohmann::ordered_json to_json(const PipelineConfig& c)
{
    nlohmann::ordered_json j;
    j["paths"] = {{"source_manifest", c.source_manifest.generic_string()},
                  {"target_manifest", c.target_manifest.generic_string()},
                  {"out", c.out_dir.generic_string()}};
    j["source_activities"] = c.source_activities ? nlohmann::ordered_json(*c.source_activities) : nlohmann::ordered_json();
    j["class_names"] = c.class_names;
    j["autoencoder"] = to_json(c.effective_autoencoder());
    j["variant"] = to_string(c.variant);
    j["classifier"] = to_string(c.classifier);
    j["pca_k"] = c.pca_k;
    j["splits"] = c.n_splits;
    j["sensors"] = sensor_names(c.sensors);
    j["seed"] = c.seed;
    j["mlp"] = to_json(c.mlp);
    j["svm"] = to_json(c.svm);
    j["pca_on_all_frames"] = c.pca_on_all_frames;
    j["statistics_per_trial"] = c.statistics_per_trial;
    j["synth"] = to_json(c.effective_synth());
    return j;
}

/// Relative paths inside the file are resolved against `base`.
inline PipelineConfig pipeline_config_from_json(const nlohmann::json& j, const std::filesystem::path& base = {})
{
    PipelineConfig c;
    auto path = [&](const std::string& s) -> std::filesystem::path {
        if (s.empty()) return {};
        std::filesystem::path p(s);
        return p.is_absolute() || base.empty() ? p : base / p;
    };
    try {
        if (j.contains("paths")) {
            const auto& p = j.at("paths");
            c.source_manifest = path(p.value("source_manifest", std::string()));
            c.target_manifest = path(p.value("target_manifest", std::string()));
            if (p.contains("out")) c.out_dir = path(p.at("out").get<std::string>());
        }
        if (j.contains("source_activities") && !j.at("source_activities").is_null()) {
            const auto& a = j.at("source_activities");
            c.source_activities = a.is_string() ? activity_filter_preset(a.get<std::string>())
                                                : a.get<std::vector<std::string>>();
        }
        if (j.contains("class_names")) c.class_names = j.at("class_names").get<std::vector<std::string>>();
        if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
        if (j.contains("autoencoder")) c.autoencoder = autoencoder_config_from_json(j.at("autoencoder"));
        if (j.contains("variant")) c.variant = feature_kind_from_string(j.at("variant").get<std::string>());
        if (j.contains("classifier")) c.classifier = classifier_from_string(j.at("classifier").get<std::string>());
        c.pca_k = j.value("pca_k", c.pca_k);
        c.n_splits = j.value("splits", c.n_splits);
        if (j.contains("sensors")) {
            c.sensors.clear();
            for (const auto& s : j.at("sensors")) c.sensors.push_back(placement_or_throw(s.get<std::string>()));
        }
        if (j.contains("mlp")) c.mlp = mlp_config_from_json(j.at("mlp"));
        if (j.contains("svm")) c.svm = svm_config_from_json(j.at("svm"));
        c.pca_on_all_frames = j.value("pca_on_all_frames", c.pca_on_all_frames);
        c.statistics_per_trial = j.value("statistics_per_trial", c.statistics_per_trial);
        if (j.contains("synth")) c.synth = synth_spec_from_json(j.at("synth"));
    } catch (const nlohmann::json::exception& e) {
        throw std::invalid_argument(std::string("config: ") + e.what());
    }
    c.sensors = canonical_order(c.sensors);
    c.validate();
    return c;
}

inline PipelineConfig load_pipeline_config(const std::filesystem::path& file)
{
    std::ifstream in(file);
    if (!in) throw std::invalid_argument("cannot open config '" + file.string() + "'");
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw std::invalid_argument("config '" + file.string() + "' is not valid JSON: " + e.what());
    }
    return pipeline_config_from_json(j, file.parent_path());
}

/// Hash of the settings that define the data, the encoder and the splits.
/// Variant, classifier, sensors, PCA size and paths are excluded; every
/// report records those separately.
inline std::string config_fingerprint(const PipelineConfig& c)
{
    nlohmann::ordered_json j;
    j["seed"] = c.seed;
    j["class_names"] = c.class_names;
    j["source_activities"] = c.source_activities ? nlohmann::ordered_json(*c.source_activities) : nlohmann::ordered_json();
    j["autoencoder"] = to_json(c.effective_autoencoder());
    j["splits"] = c.n_splits;
    j["pca_on_all_frames"] = c.pca_on_all_frames;
    return sha256_hex(j.dump());
}

/// Sets the log level from GAITXFER_LOG_LEVEL (trace, debug, info, warn, err, critical, off).
inline void configure_logging()
{
    if (const char* v = std::getenv("GAITXFER_LOG_LEVEL")) spdlog::set_level(spdlog::level::from_str(v));
}

// Artifact layout under the output directory.
struct ArtifactPaths {
    std::filesystem::path out;

    std::filesystem::path data() const { return out / "data"; }
    std::filesystem::path source_frames() const { return out / "frames" / "source.gxa"; }
    std::filesystem::path target_frames() const { return out / "frames" / "target.gxa"; }
    std::filesystem::path autoencoder() const { return out / "models" / "autoencoder.gxa"; }
    std::filesystem::path features(FeatureKind k) const
    {
        return out / "features" / (std::string(to_string(k)) + ".gxa");
    }
    std::filesystem::path pca(FeatureKind k, std::size_t split) const
    {
        return out / "models" / ("pca_" + std::string(to_string(k)) + "_split" + std::to_string(split) + ".gxa");
    }
    std::filesystem::path classifier(FeatureKind k, ClassifierKind c, std::size_t split) const
    {
        return out / "models" /
               (std::string(to_string(c)) + "_" + std::string(to_string(k)) + "_split" + std::to_string(split) + ".gxa");
    }
    std::filesystem::path reports() const { return out / "reports"; }
    std::filesystem::path evaluation(FeatureKind k, ClassifierKind c) const
    {
        return reports() / ("eval_" + std::string(to_string(k)) + "_" + std::string(to_string(c)) + ".json");
    }
    std::filesystem::path sweep(FeatureKind k, ClassifierKind c) const
    {
        return reports() / ("sweep_" + std::string(to_string(k)) + "_" + std::string(to_string(c)));
    }
};

namespace pipeline_detail {

inline Archive require(const std::filesystem::path& p, const std::string& stage)
{
    if (!std::filesystem::exists(p)) throw StageError("missing '" + p.string() + "': run " + stage + " first");
    return load_archive(p);
}

/// Upstream artifacts must come from the same config and seed.
inline Provenance check_provenance(const Archive& a, const PipelineConfig& cfg, const std::string& stage)
{
    const Provenance p = provenance_from_json(a.provenance);
    if (p.config_fingerprint != config_fingerprint(cfg) || p.seed != cfg.seed)
        throw StageError("artifact of kind '" + a.kind + "' was produced with a different config or seed: rerun " +
                         stage);
    return p;
}

inline void write_text(const std::filesystem::path& p, const std::string& text)
{
    if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
    const std::filesystem::path tmp = p.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw StageError("cannot write '" + p.string() + "'");
        out << text;
    }
    std::filesystem::rename(tmp, p);
}

inline nlohmann::ordered_json read_json(const std::filesystem::path& p, const std::string& stage)
{
    std::ifstream in(p);
    if (!in) throw StageError("missing '" + p.string() + "': run " + stage + " first");
    return nlohmann::ordered_json::parse(in);
}

class Timer {
public:
    explicit Timer(std::string what) : what_(std::move(what)), start_(std::chrono::steady_clock::now()) {}
    ~Timer()
    {
        const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
        spdlog::info("{} took {:.1f} s", what_, s);
    }

private:
    std::string what_;
    std::chrono::steady_clock::time_point start_;
};

} // namespace pipeline_detail

// Frame preparation.

/// Normalized single-sensor frames of every recording; all recordings must
/// share one placement.
inline FrameSet source_frameset(const std::vector<Recording>& recordings)
{
    if (recordings.empty()) throw StageError("source dataset selected no recordings");
    FrameSet fs;
    fs.sensors = {recordings.front().placement};
    fs.class_names = {"source"};
    for (std::size_t i = 0; i < recordings.size(); ++i) {
        if (recordings[i].placement != fs.sensors.front())
            throw StageError("source recordings mix placements '" + std::string(to_string(fs.sensors.front())) +
                             "' and '" + std::string(to_string(recordings[i].placement)) + "'");
        auto frames = extract_frames(normalize(recordings[i]), i, 0);
        for (auto& f : frames) fs.frames.push_back(std::move(f));
    }
    if (fs.frames.empty()) throw StageError("source recordings are all shorter than one frame");
    return fs;
}

/// Target recordings of one subject, activity and occurrence, keyed by placement.
struct RecordingGroup {
    std::string subject_id;
    std::string activity;
    std::size_t occurrence = 0;
    std::map<Placement, const Recording*> sensors;
};

inline std::vector<RecordingGroup> group_recordings(const std::vector<Recording>& recordings)
{
    std::map<std::tuple<std::string, std::string, std::size_t>, RecordingGroup> groups;
    std::map<std::tuple<std::string, std::string, Placement>, std::size_t> seen;
    for (const auto& r : recordings) {
        const std::size_t k = seen[{r.subject_id, r.activity, r.placement}]++;
        auto& g = groups[{r.subject_id, r.activity, k}];
        g.subject_id = r.subject_id;
        g.activity = r.activity;
        g.occurrence = k;
        g.sensors[r.placement] = &r;
    }
    std::vector<RecordingGroup> out;
    for (auto& [_, g] : groups) out.push_back(std::move(g));
    return out;
}

/// Normalized stacked frames over the placements common to every group.
inline FrameSet target_frameset(const std::vector<Recording>& recordings, const std::vector<std::string>& class_names)
{
    const auto groups = group_recordings(recordings);
    if (groups.empty()) throw StageError("target dataset selected no recordings");
    std::vector<Placement> sensors;
    for (const auto& [p, _] : groups.front().sensors) sensors.push_back(p);
    sensors = canonical_order(sensors);
    FrameSet fs;
    fs.sensors = sensors;
    fs.class_names = class_names;
    for (std::size_t gi = 0; gi < groups.size(); ++gi) {
        const auto& g = groups[gi];
        if (g.sensors.size() != sensors.size() ||
            !std::all_of(sensors.begin(), sensors.end(), [&](Placement p) { return g.sensors.count(p) != 0; }))
            throw StageError("subject '" + g.subject_id + "' activity '" + g.activity +
                             "' does not carry the same sensors as the other recordings");
        const std::string& label = g.sensors.begin()->second->class_label;
        const auto it = std::find(class_names.begin(), class_names.end(), label);
        if (it == class_names.end()) throw StageError("class label '" + label + "' is not among the configured class names");
        const int cls = static_cast<int>(it - class_names.begin());
        std::map<Placement, std::vector<Frame>> per_sensor;
        std::size_t windows = SIZE_MAX;
        for (Placement p : sensors) {
            const Recording& r = *g.sensors.at(p);
            if (r.class_label != label) throw StageError("subject '" + g.subject_id + "' has conflicting class labels");
            per_sensor[p] = extract_frames(normalize(r), gi, cls);
            windows = std::min(windows, per_sensor[p].size());
        }
        for (std::size_t w = 0; w < windows; ++w) {
            std::map<Placement, Frame> one;
            for (Placement p : sensors) one.emplace(p, per_sensor[p][w]);
            fs.frames.push_back(stack_sensors(one, sensors));
        }
    }
    if (fs.frames.empty()) throw StageError("target recordings are all shorter than one frame");
    return fs;
}

/// Per-sensor latents of every frame of a stacked frame set.
using LatentCache = std::map<Placement, std::vector<nx::Tensor<float>>>;

inline LatentCache encode_frameset(const AutoencoderModel& ae, const FrameSet& fs, std::span<const Placement> sensors)
{
    LatentCache cache;
    for (Placement p : sensors) {
        const std::size_t idx = static_cast<std::size_t>(
            std::find(fs.sensors.begin(), fs.sensors.end(), p) - fs.sensors.begin());
        if (idx == fs.sensors.size())
            throw StageError("sensor '" + std::string(to_string(p)) + "' is not present in the target frames");
        std::vector<Frame> single;
        single.reserve(fs.frames.size());
        for (const auto& f : fs.frames) single.push_back(slice_sensor(f, idx));
        cache[p] = encode_frames(ae, single);
    }
    return cache;
}

/// Feature rows of `kind` over the given sensors; latent variants read `latents`.
inline FeatureTable build_feature_table(FeatureKind kind, const FrameSet& fs, std::span<const Placement> sensors,
                                        const LatentCache* latents)
{
    const std::vector<Placement> order = canonical_order({sensors.begin(), sensors.end()});
    std::vector<std::size_t> index;
    for (Placement p : order) {
        const auto it = std::find(fs.sensors.begin(), fs.sensors.end(), p);
        if (it == fs.sensors.end())
            throw StageError("sensor '" + std::string(to_string(p)) + "' is not present in the target frames");
        index.push_back(static_cast<std::size_t>(it - fs.sensors.begin()));
    }
    const bool latent = kind == FeatureKind::pca_latent || kind == FeatureKind::gap_latent;
    if (latent && !latents) throw std::invalid_argument("latent feature variants need encoded frames");
    FeatureTable t;
    t.kind = kind;
    t.sensors = order;
    t.class_names = fs.class_names;
    const std::size_t d = pre_reduction_dim(kind, order.size());
    t.x.resize(static_cast<Eigen::Index>(fs.frames.size()), static_cast<Eigen::Index>(d));
    for (std::size_t i = 0; i < fs.frames.size(); ++i) {
        const Frame& f = fs.frames[i];
        std::vector<double> row;
        if (latent) {
            LatentMap m;
            for (Placement p : order) m.emplace(p, latents->at(p).at(i));
            row = kind == FeatureKind::pca_latent ? vectorize_latents(m, order) : gap_features(m, order);
        } else {
            std::map<Placement, Frame> by;
            for (std::size_t s = 0; s < order.size(); ++s) by.emplace(order[s], slice_sensor(f, index[s]));
            const Frame sub = stack_sensors(by, order);
            row = kind == FeatureKind::pca_raw ? raw_baseline(sub) : stacked_stat_features(sub);
        }
        if (row.size() != d) throw std::logic_error("feature row has unexpected length");
        t.x.row(static_cast<Eigen::Index>(i)) = Eigen::Map<const Eigen::RowVectorXd>(row.data(), static_cast<Eigen::Index>(d));
        t.labels.push_back(f.label);
        t.subjects.push_back(f.origin.subject_id);
    }
    return t;
}

inline std::vector<SubjectSplit> splits_for(const FeatureTable& t, const PipelineConfig& cfg)
{
    return make_subject_splits(t.subject_classes(), cfg.n_splits, cfg.seed);
}

inline std::vector<std::string> architecture_deltas(const AutoencoderConfig& c)
{
    std::vector<std::string> out;
    out.push_back("bottleneck conv inside each composite layer has width " + std::to_string(c.bottleneck_kernel_width));
    out.push_back(c.pooling == PoolMode::stride1 ? "pooling layers use stride 1 (length preserving)"
                                                 : "pooling layers omitted");
    if (c.use_batchnorm) out.push_back("batch-norm scale and shift are counted as trainable parameters");
    return out;
}

inline nlohmann::ordered_json autoencoder_summary(const AutoencoderModel& ae)
{
    const double count = static_cast<double>(ae.parameter_count());
    nlohmann::ordered_json j;
    j["parameter_count"] = ae.parameter_count();
    j["reference_parameter_count"] = kReferenceParameterCount;
    j["relative_delta"] = (count - static_cast<double>(kReferenceParameterCount)) / static_cast<double>(kReferenceParameterCount);
    j["architecture_deltas"] = architecture_deltas(ae.config());
    j["final_training_loss"] = ae.loss_history().empty() ? 0.0 : ae.loss_history().back();
    return j;
}

// Stages.

inline void run_synth(const PipelineConfig& cfg)
{
    pipeline_detail::Timer timer("synth");
    const ArtifactPaths paths{cfg.out_dir};
    const SynthOutput data = synth_generate(cfg.effective_synth());
    const auto [src, tgt] = write_synth(paths.data(), data);
    spdlog::info("synthetic data: {} source and {} target recordings ({}, {})", data.source.size(), data.target.size(),
                 src.string(), tgt.string());
}

inline void run_preprocess(const PipelineConfig& cfg)
{
    pipeline_detail::Timer timer("preprocess");
    const ArtifactPaths paths{cfg.out_dir};
    for (const auto& m : {cfg.source_manifest_path(), cfg.target_manifest_path()})
        if (!std::filesystem::exists(m))
            throw StageError("missing manifest '" + m.string() + "': run synth first or set the manifest paths");
    DatasetManifest src = read_manifest(cfg.source_manifest_path(), DatasetRole::source);
    src.activity_filter = cfg.source_activities;
    const DatasetManifest tgt = read_manifest(cfg.target_manifest_path(), DatasetRole::target);
    Sha256 h;
    h.field(dataset_fingerprint(src)).field(dataset_fingerprint(tgt));
    const Provenance prov{cfg.seed, to_hex(h.finish()), config_fingerprint(cfg)};

    const auto source = load_dataset(src);
    const auto target = load_dataset(tgt);
    const FrameSet sfs = source_frameset(source);
    const FrameSet tfs = target_frameset(target, cfg.class_names);
    save_archive(paths.source_frames(), frameset_archive(sfs, prov));
    save_archive(paths.target_frames(), frameset_archive(tfs, prov));
    spdlog::info("preprocess: {} source frames, {} target frames over {} sensors", sfs.frames.size(), tfs.frames.size(),
                 tfs.sensors.size());

    // Joint statistics on the un-normalized signals.
    std::vector<StatSample> samples;
    for (const auto& r : target) {
        if (cfg.statistics_per_trial) {
            samples.push_back({r.placement, r.class_label, stat_features(r)});
        } else {
            for (const auto& f : extract_frames(r, 0, 0)) samples.push_back({r.placement, r.class_label, stat_features(f)});
        }
    }
    const auto rows = joint_statistics_table(samples, tfs.sensors, cfg.class_names);
    std::ostringstream os;
    write_joint_statistics_tsv(os, rows);
    pipeline_detail::write_text(paths.reports() / "joint_statistics.tsv", os.str());
}

inline void run_train_ae(const PipelineConfig& cfg)
{
    pipeline_detail::Timer timer("train-ae");
    const ArtifactPaths paths{cfg.out_dir};
    const Archive fa = pipeline_detail::require(paths.source_frames(), "preprocess");
    const Provenance prov = pipeline_detail::check_provenance(fa, cfg, "preprocess");
    const FrameSet fs = frameset_from_archive(fa);
    if (fs.sensors.size() != 1) throw StageError("source frames must be single-sensor");
    AutoencoderModel ae = build_autoencoder(cfg.effective_autoencoder(), cfg.seed);
    spdlog::info("autoencoder: {} trainable parameters (reference {}), training on {} frames for {} epochs",
                 ae.parameter_count(), kReferenceParameterCount, fs.frames.size(), ae.config().epochs);
    train_autoencoder(ae, fs.frames);
    ae.set_trained_on(prov.dataset_fingerprint);
    save_archive(paths.autoencoder(), autoencoder_archive(ae, prov));
    if (!ae.loss_history().empty()) spdlog::info("autoencoder final training loss {:.6f}", ae.loss_history().back());
}

/// Loads the target frames and, for latent variants, the encoder latents.
inline std::pair<FrameSet, Provenance> load_target(const PipelineConfig& cfg)
{
    const ArtifactPaths paths{cfg.out_dir};
    const Archive fa = pipeline_detail::require(paths.target_frames(), "preprocess");
    const Provenance prov = pipeline_detail::check_provenance(fa, cfg, "preprocess");
    return {frameset_from_archive(fa), prov};
}

inline AutoencoderModel load_encoder(const PipelineConfig& cfg, const Provenance& data)
{
    const ArtifactPaths paths{cfg.out_dir};
    const Archive aa = pipeline_detail::require(paths.autoencoder(), "train-ae");
    const Provenance p = pipeline_detail::check_provenance(aa, cfg, "train-ae");
    if (p.dataset_fingerprint != data.dataset_fingerprint)
        throw StageError("autoencoder was trained on a different dataset: rerun train-ae");
    return autoencoder_from_archive(aa);
}

inline FeatureTable extract_features(const PipelineConfig& cfg, FeatureKind kind, const FrameSet& fs,
                                     const Provenance& prov)
{
    std::optional<LatentCache> latents;
    if (kind == FeatureKind::pca_latent || kind == FeatureKind::gap_latent)
        latents = encode_frameset(load_encoder(cfg, prov), fs, cfg.sensors);
    return build_feature_table(kind, fs, cfg.sensors, latents ? &*latents : nullptr);
}

inline void run_extract(const PipelineConfig& cfg)
{
    pipeline_detail::Timer timer("extract");
    const ArtifactPaths paths{cfg.out_dir};
    const auto [fs, prov] = load_target(cfg);
    const FeatureTable t = extract_features(cfg, cfg.variant, fs, prov);
    save_archive(paths.features(cfg.variant), features_archive(t, prov));
    spdlog::info("extract {}: {} rows of length {}", to_string(cfg.variant), t.rows(), t.x.cols());
    if (needs_pca(cfg.variant)) {
        const auto splits = splits_for(t, cfg);
        const auto train = partition_rows(t, splits.front()).train.size();
        spdlog::info("extract {}: PCA will reduce to {} components (split 0 has {} training rows)",
                     to_string(cfg.variant), std::min(cfg.pca_k, train - 1), train);
    }
}

inline std::pair<FeatureTable, Provenance> load_features(const PipelineConfig& cfg)
{
    const ArtifactPaths paths{cfg.out_dir};
    const Archive a = pipeline_detail::require(paths.features(cfg.variant), "extract --variant " + std::string(to_string(cfg.variant)));
    const Provenance p = pipeline_detail::check_provenance(a, cfg, "extract");
    FeatureTable t = features_from_archive(a);
    if (t.sensors != cfg.sensors) throw StageError("features were extracted for a different sensor list: rerun extract");
    return {std::move(t), p};
}

inline void run_fit_pca(const PipelineConfig& cfg)
{
    pipeline_detail::Timer timer("fit-pca");
    if (!needs_pca(cfg.variant)) {
        spdlog::info("variant {} does not use PCA; nothing to fit", to_string(cfg.variant));
        return;
    }
    const ArtifactPaths paths{cfg.out_dir};
    const auto [t, prov] = load_features(cfg);
    const EvalSettings settings = cfg.eval_settings();
    for (const auto& s : splits_for(t, cfg)) {
        const PcaModel pca = fit_split_pca(t, s, settings);
        spdlog::info("split {}: PCA {} -> {} components, {:.2f}% variance retained", s.split_id, pca.dim(), pca.k(),
                     100.0 * pca.retained_ratio());
        save_archive(paths.pca(cfg.variant, s.split_id), pca_archive(pca, prov));
    }
}

inline std::optional<PcaModel> load_split_pca(const PipelineConfig& cfg, const SubjectSplit& s)
{
    if (!needs_pca(cfg.variant)) return std::nullopt;
    const ArtifactPaths paths{cfg.out_dir};
    const Archive a = pipeline_detail::require(paths.pca(cfg.variant, s.split_id), "fit-pca");
    pipeline_detail::check_provenance(a, cfg, "fit-pca");
    return pca_from_archive(a);
}

inline void run_train_clf(const PipelineConfig& cfg)
{
    pipeline_detail::Timer timer("train-clf");
    const ArtifactPaths paths{cfg.out_dir};
    const auto [t, prov] = load_features(cfg);
    const EvalSettings settings = cfg.eval_settings();
    for (const auto& s : splits_for(t, cfg)) {
        const SplitModels m = train_split_models(t, s, settings, load_split_pca(cfg, s));
        save_archive(paths.classifier(cfg.variant, cfg.classifier, s.split_id), split_models_archive(m, s, prov));
    }
}

inline nlohmann::ordered_json evaluation_report(const Evaluation& e, const PipelineConfig& cfg, const Provenance& prov)
{
    nlohmann::ordered_json j;
    j["seed"] = cfg.seed;
    j["config_fingerprint"] = prov.config_fingerprint;
    j["dataset_fingerprint"] = prov.dataset_fingerprint;
    j["pca_k_requested"] = cfg.pca_k;
    const auto body = to_json(e);
    for (const auto& [k, v] : body.items()) j[k] = v;
    return j;
}

inline Evaluation run_evaluate(const PipelineConfig& cfg)
{
    pipeline_detail::Timer timer("evaluate");
    const ArtifactPaths paths{cfg.out_dir};
    const auto [t, prov] = load_features(cfg);
    std::vector<SplitResult> results;
    for (const auto& s : splits_for(t, cfg)) {
        const Archive a = pipeline_detail::require(paths.classifier(cfg.variant, cfg.classifier, s.split_id), "train-clf");
        pipeline_detail::check_provenance(a, cfg, "train-clf");
        if (a.kind != to_string(cfg.classifier)) throw StageError("classifier archive kind mismatch: rerun train-clf");
        results.push_back(score_split(t, s, split_models_from_archive(a, load_split_pca(cfg, s))));
    }
    const Evaluation e = summarize(t.kind, cfg.classifier, t.sensors, std::move(results));
    pipeline_detail::write_text(paths.evaluation(cfg.variant, cfg.classifier),
                                evaluation_report(e, cfg, prov).dump(2) + "\n");
    std::ostringstream os;
    write_table_tsv(os, std::span<const Evaluation>(&e, 1));
    std::string tsv = paths.evaluation(cfg.variant, cfg.classifier).string();
    tsv.replace(tsv.size() - 5, 5, ".tsv");
    pipeline_detail::write_text(tsv, os.str());
    spdlog::info("{} / {}: accuracy {}  precision {}  recall {}  F1 {}", to_string(e.kind), to_string(e.classifier),
                 format_percent(e.aggregate.accuracy), format_percent(e.aggregate.precision),
                 format_percent(e.aggregate.recall), format_percent(e.aggregate.f1));
    return e;
}

inline std::vector<SweepRow> run_sweep_sensors(const PipelineConfig& cfg)
{
    pipeline_detail::Timer timer("sweep-sensors");
    const ArtifactPaths paths{cfg.out_dir};
    const auto [fs, prov] = load_target(cfg);
    std::optional<LatentCache> latents;
    if (cfg.variant == FeatureKind::pca_latent || cfg.variant == FeatureKind::gap_latent)
        latents = encode_frameset(load_encoder(cfg, prov), fs, cfg.sensors);
    const LatentCache* lp = latents ? &*latents : nullptr;
    auto build = [&](std::span<const Placement> sensors) { return build_feature_table(cfg.variant, fs, sensors, lp); };
    // Splits come from the full table so every sensor row sees the same subjects.
    const auto splits = splits_for(build(cfg.sensors), cfg);
    const auto rows = per_sensor_sweep(build, cfg.sensors, splits, cfg.eval_settings());
    std::ostringstream os;
    write_sweep_tsv(os, rows);
    const auto base = paths.sweep(cfg.variant, cfg.classifier);
    pipeline_detail::write_text(base.string() + ".tsv", os.str());
    nlohmann::ordered_json j;
    j["seed"] = cfg.seed;
    j["config_fingerprint"] = prov.config_fingerprint;
    j["dataset_fingerprint"] = prov.dataset_fingerprint;
    j["variant"] = to_string(cfg.variant);
    j["classifier"] = to_string(cfg.classifier);
    auto& arr = j["rows"] = nlohmann::ordered_json::array();
    for (const auto& r : rows) arr.push_back({{"sensor", r.label}, {"f1", to_json(r.f1)}, {"evaluation", to_json(r.evaluation)}});
    pipeline_detail::write_text(base.string() + ".json", j.dump(2) + "\n");
    return rows;
}

/// Combines every evaluation report under reports/ into table.tsv and
/// summary.json. Reports from different configs, seeds or datasets are refused.
inline void run_report(const PipelineConfig& cfg)
{
    pipeline_detail::Timer timer("report");
    const ArtifactPaths paths{cfg.out_dir};
    std::vector<std::filesystem::path> files;
    if (std::filesystem::exists(paths.reports()))
        for (const auto& e : std::filesystem::directory_iterator(paths.reports())) {
            const auto name = e.path().filename().string();
            if (name.rfind("eval_", 0) == 0 && e.path().extension() == ".json") files.push_back(e.path());
        }
    if (files.empty()) throw StageError("no evaluation reports under '" + paths.reports().string() + "': run evaluate first");
    std::sort(files.begin(), files.end());
    nlohmann::ordered_json summary;
    summary["seed"] = cfg.seed;
    summary["config_fingerprint"] = config_fingerprint(cfg);
    std::string dataset;
    std::ostringstream table;
    table << "variant\tclassifier\tsensors\taccuracy\tprecision\trecall\tf1\n";
    auto& evals = summary["evaluations"] = nlohmann::ordered_json::array();
    for (const auto& f : files) {
        const auto j = pipeline_detail::read_json(f, "evaluate");
        const auto fp = j.at("config_fingerprint").get<std::string>();
        const auto ds = j.at("dataset_fingerprint").get<std::string>();
        if (fp != config_fingerprint(cfg) || j.at("seed").get<std::uint64_t>() != cfg.seed)
            throw StageError("report '" + f.filename().string() + "' was produced with a different config or seed");
        if (dataset.empty()) dataset = ds;
        if (ds != dataset) throw StageError("report '" + f.filename().string() + "' was produced from a different dataset");
        const auto& agg = j.at("aggregate");
        std::string sensors;
        for (const auto& s : j.at("sensors")) sensors += (sensors.empty() ? "" : ",") + s.get<std::string>();
        table << j.at("variant").get<std::string>() << '\t' << j.at("classifier").get<std::string>() << '\t' << sensors;
        for (const char* m : {"accuracy", "precision", "recall", "f1"})
            table << '\t' << agg.at(m).at("formatted").get<std::string>();
        table << '\n';
        evals.push_back({{"file", f.filename().string()},
                         {"variant", j.at("variant")},
                         {"classifier", j.at("classifier")},
                         {"sensors", j.at("sensors")},
                         {"aggregate", agg}});
    }
    summary["dataset_fingerprint"] = dataset;
    if (std::filesystem::exists(paths.autoencoder())) {
        const Archive a = load_archive(paths.autoencoder());
        pipeline_detail::check_provenance(a, cfg, "train-ae");
        summary["autoencoder"] = autoencoder_summary(autoencoder_from_archive(a));
    }
    pipeline_detail::write_text(paths.reports() / "table.tsv", table.str());
    pipeline_detail::write_text(paths.reports() / "summary.json", summary.dump(2) + "\n");
    std::cout << table.str();
}

inline const std::vector<std::string>& subcommands()
{
    static const std::vector<std::string> v = {"synth",     "preprocess", "train-ae",      "extract", "fit-pca",
                                               "train-clf", "evaluate",   "sweep-sensors", "report"};
    return v;
}

inline void run_subcommand(const std::string& name, const PipelineConfig& cfg)
{
    cfg.validate();
    if (name == "synth") run_synth(cfg);
    else if (name == "preprocess") run_preprocess(cfg);
    else if (name == "train-ae") run_train_ae(cfg);
    else if (name == "extract") run_extract(cfg);
    else if (name == "fit-pca") run_fit_pca(cfg);
    else if (name == "train-clf") run_train_clf(cfg);
    else if (name == "evaluate") run_evaluate(cfg);
    else if (name == "sweep-sensors") run_sweep_sensors(cfg);
    else if (name == "report") run_report(cfg);
    else throw std::invalid_argument("unknown subcommand '" + name + "'");
}

} // namespace gaitxfer
