#include "gaitxfer/pipeline.hpp"

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include <iostream>
#include <string>
#include <vector>

namespace {

std::vector<gaitxfer::Placement> parse_sensor_list(const std::string& text)
{
    std::vector<gaitxfer::Placement> out;
    std::size_t start = 0;
    while (start <= text.size()) {
        const std::size_t comma = text.find(',', start);
        const std::string item = text.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
        if (item == "all") {
            out.assign(gaitxfer::kCanonicalSensors.begin(), gaitxfer::kCanonicalSensors.end());
        } else if (!item.empty()) {
            out.push_back(gaitxfer::placement_or_throw(item));
        }
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    return gaitxfer::canonical_order(out);
}

} // namespace

int main(int argc, char** argv)
{
    gaitxfer::configure_logging();

    CLI::App app{"Gait transfer-learning pipeline: synthetic data, autoencoder pre-training, feature extraction "
                 "and subject-wise evaluation"};
    app.require_subcommand(1, 1);

    std::string config_file, variant, classifier, sensors, out;
    std::uint64_t seed = 0;
    std::size_t pca_k = 0, splits = 0;

    app.add_option("--config", config_file, "JSON pipeline config")->check(CLI::ExistingFile);
    app.add_option("--seed", seed, "master seed");
    app.add_option("--variant", variant, "feature variant")
        ->check(CLI::IsMember({"unconstrained_pca", "constrained_gap", "statfeat", "raw_pca"}));
    app.add_option("--classifier", classifier, "classifier")->check(CLI::IsMember({"mlp", "svm"}));
    app.add_option("--sensors", sensors, "comma-separated placements or 'all'");
    app.add_option("--pca-k", pca_k, "PCA components (clamped to n_train - 1)")->check(CLI::PositiveNumber);
    app.add_option("--splits", splits, "number of subject splits")->check(CLI::PositiveNumber);
    app.add_option("--out", out, "output directory");
    app.fallthrough();

    const std::vector<std::pair<std::string, std::string>> commands = {
        {"synth", "write the synthetic source and target datasets"},
        {"preprocess", "normalize and frame the datasets; write the joint statistics table"},
        {"train-ae", "train the autoencoder on the source frames"},
        {"extract", "compute feature rows of the configured variant"},
        {"fit-pca", "fit PCA per split on training subjects"},
        {"train-clf", "train the classifier per split"},
        {"evaluate", "score the test subjects and write the metrics report"},
        {"sweep-sensors", "per-sensor F1 sweep"},
        {"report", "combine evaluation reports"}};
    for (const auto& [name, help] : commands) app.add_subcommand(name, help);

    CLI11_PARSE(app, argc, argv);

    try {
        gaitxfer::PipelineConfig cfg =
            config_file.empty() ? gaitxfer::PipelineConfig{} : gaitxfer::load_pipeline_config(config_file);
        if (app.count("--seed")) cfg.seed = seed;
        if (!variant.empty()) cfg.variant = gaitxfer::feature_kind_from_string(variant);
        if (!classifier.empty()) cfg.classifier = gaitxfer::classifier_from_string(classifier);
        if (!sensors.empty()) cfg.sensors = parse_sensor_list(sensors);
        if (pca_k) cfg.pca_k = pca_k;
        if (splits) cfg.n_splits = splits;
        if (!out.empty()) cfg.out_dir = out;
        cfg.validate();
        gaitxfer::run_subcommand(app.get_subcommands().front()->get_name(), cfg);
    } catch (const gaitxfer::StageError& e) {
        spdlog::error("{}", e.what());
        return 2;
    } catch (const std::invalid_argument& e) {
        spdlog::error("{}", e.what());
        std::cerr << app.help();
        return 64;
    } catch (const std::exception& e) {
        spdlog::error("{}", e.what());
        return 1;
    }
    return 0;
}
