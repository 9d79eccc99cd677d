#pragma once

#include "gaitxfer/classify.hpp"
#include "gaitxfer/dataio/fingerprint.hpp"
#include "gaitxfer/numerics/rng.hpp"
#include "gaitxfer/numerics/summary.hpp"
#include "gaitxfer/reduce.hpp"

#include <Eigen/Dense>
#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace gaitxfer {

struct SubjectSplit {
    std::size_t split_id = 0;
    std::set<std::string> train_subjects;
    std::set<std::string> test_subjects;
    std::uint64_t seed = 0;

    bool in_train(const std::string& s) const { return train_subjects.count(s) != 0; }
    bool in_test(const std::string& s) const { return test_subjects.count(s) != 0; }
};

/// Fingerprint of a subject set; PCA fits are stamped with it.
inline std::string subjects_fingerprint(const std::set<std::string>& subjects)
{
    Sha256 h;
    for (const auto& s : subjects) h.field(s);
    return to_hex(h.finish());
}

/// For each split, m = floor(min class size / 2) subjects of every class go
/// to training and the rest to test. Split i shuffles with sub-seed i.
inline std::vector<SubjectSplit> make_subject_splits(const std::map<std::string, int>& subject_class,
                                                     std::size_t n_splits, std::uint64_t seed)
{
    if (n_splits == 0) throw std::invalid_argument("make_subject_splits: need at least one split");
    std::map<int, std::vector<std::string>> by_class;
    for (const auto& [subject, cls] : subject_class) by_class[cls].push_back(subject);
    if (by_class.size() < 2) throw std::invalid_argument("make_subject_splits: need subjects from at least 2 classes");
    std::size_t min_count = SIZE_MAX;
    for (const auto& [cls, subjects] : by_class) {
        if (subjects.size() < 2)
            throw std::invalid_argument("make_subject_splits: class " + std::to_string(cls) + " has " +
                                        std::to_string(subjects.size()) + " subject(s), at least 2 required");
        min_count = std::min(min_count, subjects.size());
    }
    const std::size_t m = min_count / 2;
    std::vector<SubjectSplit> splits;
    for (std::size_t i = 0; i < n_splits; ++i) {
        SubjectSplit s;
        s.split_id = i;
        s.seed = nx::derive_seed(seed, "split." + std::to_string(i));
        nx::Rng rng(s.seed);
        for (const auto& [cls, subjects] : by_class) {
            std::vector<std::string> order = subjects;
            rng.shuffle(order);
            for (std::size_t j = 0; j < order.size(); ++j)
                (j < m ? s.train_subjects : s.test_subjects).insert(order[j]);
        }
        splits.push_back(std::move(s));
    }
    return splits;
}

struct Metrics {
    double accuracy = 0.0;
    /// Support-weighted over classes.
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    /// confusion[true][predicted]
    std::vector<std::vector<std::size_t>> confusion;
    std::vector<double> class_precision, class_recall, class_f1;
    std::vector<std::size_t> support;

    std::size_t total() const
    {
        std::size_t n = 0;
        for (const auto& r : confusion)
            for (std::size_t v : r) n += v;
        return n;
    }
};

/// Per-class precision/recall/F1 (0 where undefined), combined by true-class
/// support; accuracy = trace / total.
inline Metrics compute_metrics(std::span<const int> predictions, std::span<const int> labels, int classes = 2)
{
    if (predictions.empty()) throw std::invalid_argument("compute_metrics: empty input");
    if (predictions.size() != labels.size())
        throw std::invalid_argument("compute_metrics: " + std::to_string(predictions.size()) + " predictions for " +
                                    std::to_string(labels.size()) + " labels");
    if (classes < 2) throw std::invalid_argument("compute_metrics: need at least 2 classes");
    const auto k = static_cast<std::size_t>(classes);
    Metrics m;
    m.confusion.assign(k, std::vector<std::size_t>(k, 0));
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const int y = labels[i], p = predictions[i];
        if (y < 0 || y >= classes || p < 0 || p >= classes)
            throw std::out_of_range("compute_metrics: class index outside [0, " + std::to_string(classes) + ")");
        ++m.confusion[static_cast<std::size_t>(y)][static_cast<std::size_t>(p)];
    }
    const double n = static_cast<double>(labels.size());
    std::size_t trace = 0;
    m.class_precision.resize(k);
    m.class_recall.resize(k);
    m.class_f1.resize(k);
    m.support.resize(k);
    for (std::size_t c = 0; c < k; ++c) {
        trace += m.confusion[c][c];
        std::size_t predicted = 0, actual = 0;
        for (std::size_t j = 0; j < k; ++j) {
            predicted += m.confusion[j][c];
            actual += m.confusion[c][j];
        }
        const double tp = static_cast<double>(m.confusion[c][c]);
        const double pr = predicted ? tp / static_cast<double>(predicted) : 0.0;
        const double rc = actual ? tp / static_cast<double>(actual) : 0.0;
        m.class_precision[c] = pr;
        m.class_recall[c] = rc;
        m.class_f1[c] = pr + rc > 0.0 ? 2.0 * pr * rc / (pr + rc) : 0.0;
        m.support[c] = actual;
        const double w = static_cast<double>(actual) / n;
        m.precision += w * pr;
        m.recall += w * rc;
        m.f1 += w * m.class_f1[c];
    }
    m.accuracy = static_cast<double>(trace) / n;
    return m;
}

/// Formats a 0-1 statistic on the 0-100 scale as "xx.xx±x.xx".
inline std::string format_percent(const MeanStd& v)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.2f\xC2\xB1%.2f", 100.0 * v.mean, 100.0 * v.std);
    return buf;
}

struct AggregateRow {
    MeanStd accuracy, precision, recall, f1;
    std::size_t splits = 0;
};

inline AggregateRow aggregate_splits(std::span<const Metrics> per_split)
{
    if (per_split.empty()) throw std::invalid_argument("aggregate_splits: no splits");
    auto column = [&](auto member) {
        std::vector<double> v;
        for (const auto& m : per_split) v.push_back(m.*member);
        return mean_std(v);
    };
    return {column(&Metrics::accuracy), column(&Metrics::precision), column(&Metrics::recall),
            column(&Metrics::f1), per_split.size()};
}

/// Feature rows for one variant together with the row metadata the
/// harness needs.
struct FeatureTable {
    FeatureKind kind = FeatureKind::gap_latent;
    std::vector<Placement> sensors;
    std::vector<std::string> class_names;
    Eigen::MatrixXd x;
    std::vector<int> labels;
    std::vector<std::string> subjects;

    std::size_t rows() const noexcept { return labels.size(); }

    std::map<std::string, int> subject_classes() const
    {
        std::map<std::string, int> out;
        for (std::size_t i = 0; i < subjects.size(); ++i) {
            auto [it, inserted] = out.emplace(subjects[i], labels[i]);
            if (!inserted && it->second != labels[i])
                throw std::invalid_argument("subject '" + subjects[i] + "' appears under more than one class");
        }
        return out;
    }

    void validate() const
    {
        if (static_cast<std::size_t>(x.rows()) != labels.size() || subjects.size() != labels.size())
            throw std::invalid_argument("feature table: row metadata does not match the feature matrix");
        if (class_names.size() < 2) throw std::invalid_argument("feature table: need at least 2 class names");
    }
};

inline bool needs_pca(FeatureKind k) { return k == FeatureKind::pca_latent || k == FeatureKind::pca_raw; }

struct EvalSettings {
    ClassifierKind classifier = ClassifierKind::mlp;
    std::size_t pca_k = 1600;
    /// Compatibility reading: fit PCA once on all frames instead of per training split.
    bool pca_on_all_frames = false;
    MlpConfig mlp;
    SvmConfig svm;
    std::uint64_t seed = 42;
};

struct SplitResult {
    SubjectSplit split;
    Metrics frame_metrics;
    /// One vote per test subject (majority of its frame predictions, ties to class 0).
    Metrics subject_metrics;
    std::size_t train_rows = 0, test_rows = 0;
    std::size_t feature_dim = 0;
    std::optional<std::size_t> pca_k;
    std::optional<double> pca_retained;
};

namespace harness_detail {

inline Eigen::MatrixXd select_rows(const Eigen::MatrixXd& x, std::span<const std::size_t> idx)
{
    Eigen::MatrixXd out(static_cast<Eigen::Index>(idx.size()), x.cols());
    for (std::size_t i = 0; i < idx.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = x.row(static_cast<Eigen::Index>(idx[i]));
    return out;
}

} // namespace harness_detail

/// Majority vote of frame predictions per subject.
inline std::pair<std::vector<int>, std::vector<int>> subject_votes(std::span<const std::string> subjects,
                                                                   std::span<const int> predictions,
                                                                   std::span<const int> labels, int classes)
{
    std::map<std::string, std::vector<std::size_t>> counts;
    std::map<std::string, int> truth;
    for (std::size_t i = 0; i < subjects.size(); ++i) {
        auto& c = counts[subjects[i]];
        c.resize(static_cast<std::size_t>(classes), 0);
        ++c[static_cast<std::size_t>(predictions[i])];
        truth[subjects[i]] = labels[i];
    }
    std::vector<int> pred, lab;
    for (const auto& [subject, c] : counts) {
        pred.push_back(static_cast<int>(std::max_element(c.begin(), c.end()) - c.begin()));
        lab.push_back(truth[subject]);
    }
    return {pred, lab};
}

/// Row indices of a split's training and test subjects. Throws if a subject
/// sits on both sides.
struct SplitRows {
    std::vector<std::size_t> train;
    std::vector<std::size_t> test;
};

inline SplitRows partition_rows(const FeatureTable& table, const SubjectSplit& split)
{
    table.validate();
    SplitRows r;
    for (std::size_t i = 0; i < table.rows(); ++i) {
        const bool tr = split.in_train(table.subjects[i]), te = split.in_test(table.subjects[i]);
        if (tr && te) throw std::logic_error("subject '" + table.subjects[i] + "' is on both sides of a split");
        if (tr) r.train.push_back(i);
        if (te) r.test.push_back(i);
    }
    if (r.train.empty() || r.test.empty()) throw std::invalid_argument("split has an empty train or test side");
    return r;
}

/// PCA for a split, k = min(pca_k, n_fit - 1), fitted on the training rows
/// (or on every row in the compatibility reading) and stamped accordingly.
inline PcaModel fit_split_pca(const FeatureTable& table, const SubjectSplit& split, const EvalSettings& settings)
{
    if (settings.pca_on_all_frames) {
        PcaModel pca = fit_pca(table.x, std::min(settings.pca_k, table.rows() - 1));
        pca.fit_fingerprint = "all-frames";
        return pca;
    }
    const SplitRows rows = partition_rows(table, split);
    PcaModel pca = fit_pca(harness_detail::select_rows(table.x, rows.train), std::min(settings.pca_k, rows.train.size() - 1));
    pca.fit_fingerprint = subjects_fingerprint(split.train_subjects);
    return pca;
}

/// Everything fitted on one split's training side.
struct SplitModels {
    std::optional<PcaModel> pca;
    FeatureScaler scaler;
    ClassifierKind classifier = ClassifierKind::mlp;
    std::optional<MlpModel> mlp;
    std::optional<SvmModel> svm;
    std::string train_fingerprint;
};

namespace harness_detail {

inline Eigen::MatrixXd project(const SplitModels& m, const Eigen::MatrixXd& x)
{
    return m.scaler.apply(m.pca ? pca_transform(*m.pca, x) : x);
}

inline void check_pca_stamp(const PcaModel& pca, const SubjectSplit& split)
{
    if (pca.fit_fingerprint != "all-frames" && pca.fit_fingerprint != subjects_fingerprint(split.train_subjects))
        throw std::logic_error("PCA was not fitted on this split's training subjects");
}

} // namespace harness_detail

/// Fits scaler and classifier on the split's training rows. PCA variants
/// need `pca`; it must carry this split's training-subject stamp.
inline SplitModels train_split_models(const FeatureTable& table, const SubjectSplit& split,
                                      const EvalSettings& settings, std::optional<PcaModel> pca)
{
    if (needs_pca(table.kind) && !pca) throw std::invalid_argument("variant " + std::string(to_string(table.kind)) + " needs a fitted PCA");
    if (!needs_pca(table.kind)) pca.reset();
    if (pca) harness_detail::check_pca_stamp(*pca, split);
    const SplitRows rows = partition_rows(table, split);
    SplitModels m;
    m.pca = std::move(pca);
    m.classifier = settings.classifier;
    m.train_fingerprint = subjects_fingerprint(split.train_subjects);
    Eigen::MatrixXd xtr = harness_detail::select_rows(table.x, rows.train);
    if (m.pca) xtr = pca_transform(*m.pca, xtr);
    m.scaler = fit_scaler(xtr, m.pca ? ScaleMode::global : ScaleMode::per_feature);
    xtr = m.scaler.apply(xtr);
    std::vector<int> ytr;
    for (std::size_t i : rows.train) ytr.push_back(table.labels[i]);
    const int classes = static_cast<int>(table.class_names.size());
    if (settings.classifier == ClassifierKind::mlp) {
        m.mlp = build_mlp(static_cast<std::size_t>(xtr.cols()), classes, nx::derive_seed(split.seed, "mlp"), settings.mlp);
        train_mlp(*m.mlp, xtr, ytr);
    } else {
        if (classes != 2) throw std::invalid_argument("linear SVM supports binary tasks only");
        m.svm = train_linear_svm(xtr, ytr, settings.svm);
    }
    return m;
}

/// Scores the split's test subjects with models fitted on its training side.
inline SplitResult score_split(const FeatureTable& table, const SubjectSplit& split, const SplitModels& models)
{
    if (models.train_fingerprint != subjects_fingerprint(split.train_subjects))
        throw std::logic_error("models were trained on a different subject split");
    if (models.pca) harness_detail::check_pca_stamp(*models.pca, split);
    const SplitRows rows = partition_rows(table, split);
    for (std::size_t i : rows.test)
        if (split.in_train(table.subjects[i])) throw std::logic_error("test subject leaked into training");
    const Eigen::MatrixXd xte = harness_detail::project(models, harness_detail::select_rows(table.x, rows.test));
    std::vector<int> yte;
    std::vector<std::string> ste;
    for (std::size_t i : rows.test) {
        yte.push_back(table.labels[i]);
        ste.push_back(table.subjects[i]);
    }
    const int classes = static_cast<int>(table.class_names.size());
    const std::vector<int> pred = models.classifier == ClassifierKind::mlp ? mlp_predict(*models.mlp, xte)
                                                                           : svm_predict(*models.svm, xte);
    SplitResult r;
    r.split = split;
    r.train_rows = rows.train.size();
    r.test_rows = rows.test.size();
    r.feature_dim = static_cast<std::size_t>(xte.cols());
    if (models.pca) {
        r.pca_k = models.pca->k();
        r.pca_retained = models.pca->retained_ratio();
    }
    r.frame_metrics = compute_metrics(pred, yte, classes);
    const auto [vp, vl] = subject_votes(ste, pred, yte, classes);
    r.subject_metrics = compute_metrics(vp, vl, classes);
    spdlog::info("split {}: {} train / {} test frames, accuracy {:.4f}, F1 {:.4f}", split.split_id, r.train_rows,
                 r.test_rows, r.frame_metrics.accuracy, r.frame_metrics.f1);
    return r;
}

/// Fits on the split's training subjects and scores its test subjects.
inline SplitResult evaluate_split(const FeatureTable& table, const SubjectSplit& split, const EvalSettings& settings)
{
    std::optional<PcaModel> pca;
    if (needs_pca(table.kind)) pca = fit_split_pca(table, split, settings);
    return score_split(table, split, train_split_models(table, split, settings, std::move(pca)));
}

struct Evaluation {
    FeatureKind kind = FeatureKind::gap_latent;
    ClassifierKind classifier = ClassifierKind::mlp;
    std::vector<Placement> sensors;
    std::vector<SplitResult> splits;
    AggregateRow aggregate;
    AggregateRow subject_aggregate;
};

/// Aggregates per-split results in split order.
inline Evaluation summarize(FeatureKind kind, ClassifierKind classifier, std::vector<Placement> sensors,
                            std::vector<SplitResult> results)
{
    Evaluation e;
    e.kind = kind;
    e.classifier = classifier;
    e.sensors = std::move(sensors);
    e.splits = std::move(results);
    std::vector<Metrics> frame, subject;
    for (const auto& r : e.splits) {
        frame.push_back(r.frame_metrics);
        subject.push_back(r.subject_metrics);
    }
    e.aggregate = aggregate_splits(frame);
    e.subject_aggregate = aggregate_splits(subject);
    return e;
}

inline Evaluation evaluate(const FeatureTable& table, std::span<const SubjectSplit> splits, const EvalSettings& settings)
{
    std::vector<SplitResult> results;
    for (const auto& s : splits) results.push_back(evaluate_split(table, s, settings));
    return summarize(table.kind, settings.classifier, table.sensors, std::move(results));
}

struct SweepRow {
    std::string label;
    MeanStd f1;
    Evaluation evaluation;
};

/// Evaluates each single sensor and then all of them together. `build`
/// produces the feature table for a sensor subset (PCA is refit per subset
/// inside evaluate_split).
inline std::vector<SweepRow> per_sensor_sweep(const std::function<FeatureTable(std::span<const Placement>)>& build,
                                              std::span<const Placement> sensors,
                                              std::span<const SubjectSplit> splits, const EvalSettings& settings)
{
    if (sensors.empty()) throw std::invalid_argument("per_sensor_sweep: empty sensor list");
    std::vector<SweepRow> rows;
    for (Placement p : sensors) {
        const Placement one[] = {p};
        Evaluation e = evaluate(build(one), splits, settings);
        rows.push_back({std::string(to_string(p)), e.aggregate.f1, std::move(e)});
    }
    Evaluation all = evaluate(build(sensors), splits, settings);
    rows.push_back({"All Sensors", all.aggregate.f1, std::move(all)});
    return rows;
}

// Reports.

inline nlohmann::ordered_json to_json(const MeanStd& v)
{
    return {{"mean", v.mean}, {"std", v.std}, {"formatted", format_percent(v)}};
}

inline nlohmann::ordered_json to_json(const Metrics& m)
{
    nlohmann::ordered_json j;
    j["accuracy"] = m.accuracy;
    j["precision"] = m.precision;
    j["recall"] = m.recall;
    j["f1"] = m.f1;
    j["confusion"] = m.confusion;
    j["support"] = m.support;
    return j;
}

inline nlohmann::ordered_json to_json(const AggregateRow& a)
{
    return {{"splits", a.splits},
            {"accuracy", to_json(a.accuracy)},
            {"precision", to_json(a.precision)},
            {"recall", to_json(a.recall)},
            {"f1", to_json(a.f1)}};
}

inline nlohmann::ordered_json to_json(const Evaluation& e)
{
    nlohmann::ordered_json j;
    j["variant"] = to_string(e.kind);
    j["classifier"] = to_string(e.classifier);
    std::vector<std::string> sensors;
    for (Placement p : e.sensors) sensors.emplace_back(to_string(p));
    j["sensors"] = sensors;
    j["aggregate"] = to_json(e.aggregate);
    j["subject_vote_aggregate"] = to_json(e.subject_aggregate);
    auto& arr = j["splits"] = nlohmann::ordered_json::array();
    for (const auto& s : e.splits) {
        nlohmann::ordered_json sj;
        sj["split_id"] = s.split.split_id;
        sj["train_subjects"] = s.split.train_subjects;
        sj["test_subjects"] = s.split.test_subjects;
        sj["train_frames"] = s.train_rows;
        sj["test_frames"] = s.test_rows;
        sj["feature_dim"] = s.feature_dim;
        if (s.pca_k) sj["pca_k"] = *s.pca_k;
        if (s.pca_retained) sj["pca_retained_variance"] = *s.pca_retained;
        sj["frame_metrics"] = to_json(s.frame_metrics);
        sj["subject_vote_metrics"] = to_json(s.subject_metrics);
        arr.push_back(std::move(sj));
    }
    return j;
}

/// Table-II style rows: variant, classifier, accuracy, precision, recall, F1.
inline void write_table_tsv(std::ostream& os, std::span<const Evaluation> rows)
{
    os << "variant\tclassifier\taccuracy\tprecision\trecall\tf1\n";
    for (const auto& e : rows)
        os << to_string(e.kind) << '\t' << to_string(e.classifier) << '\t' << format_percent(e.aggregate.accuracy)
           << '\t' << format_percent(e.aggregate.precision) << '\t' << format_percent(e.aggregate.recall) << '\t'
           << format_percent(e.aggregate.f1) << '\n';
}

/// Plot-ready per-sensor F1 (0-100 scale).
inline void write_sweep_tsv(std::ostream& os, std::span<const SweepRow> rows)
{
    os << "sensor\tf1_mean\tf1_std\n";
    char buf[96];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof buf, "%.4f\t%.4f", 100.0 * r.f1.mean, 100.0 * r.f1.std);
        os << r.label << '\t' << buf << '\n';
    }
}

} // namespace gaitxfer
