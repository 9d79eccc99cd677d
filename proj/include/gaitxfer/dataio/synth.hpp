#pragma once

#include "gaitxfer/dataio/dataset.hpp"
#include "gaitxfer/numerics/rng.hpp"
#include "gaitxfer/sigprep.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <map>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

namespace gaitxfer {

/// Class-conditional parameters of the synthetic gait signal.
struct ClassSignal {
    /// Gain on all stride harmonics.
    double gait_amplitude = 1.0;
    /// Extra gain on the 2nd and 3rd harmonics.
    double harmonic_gain = 1.0;
    /// Amplitude of the 4-6 Hz tremor component.
    double tremor_amplitude = 0.0;
    /// Relative standard deviation of the stride period.
    double stride_jitter = 0.02;
};

struct SynthSpec {
    std::size_t source_subjects = 40;
    std::size_t source_recordings_per_subject = 2;
    double source_duration_s = 30.0;
    double source_rate_hz = 100.0;
    std::vector<std::string> source_activities = subset1_activities();

    std::size_t target_subjects_per_class = 10;
    std::size_t target_recordings_per_subject = 1;
    double target_duration_s = 60.0;
    double target_rate_hz = 128.0;
    std::vector<Placement> target_sensors{kCanonicalSensors.begin(), kCanonicalSensors.end()};
    std::array<std::string, 2> class_names{"healthy", "pd"};

    double stride_hz = 0.95;
    /// Per-subject stride frequency is uniform in stride_hz +- stride_hz_spread.
    double stride_hz_spread = 0.1;
    std::array<double, 3> harmonic_amplitudes{1.0, 0.45, 0.2};
    /// Per-subject amplitude scale is uniform in [1 - s, 1 + s].
    double subject_scale_spread = 0.15;
    /// Std (radians) of the per-subject perturbation of each placement's
    /// harmonic phase template.
    double harmonic_phase_jitter = 0.3;
    ClassSignal healthy{1.0, 1.0, 0.0, 0.02};
    ClassSignal pd{0.8, 0.5, 0.35, 0.08};
    double tremor_low_hz = 4.0;
    double tremor_high_hz = 6.0;
    double noise = 0.05;
    /// When non-empty, only these target sensors carry class differences;
    /// the others use the healthy parameters for both classes.
    std::vector<Placement> class_signal_sensors;
    std::uint64_t seed = 42;

    const ClassSignal& signal(int cls, Placement p) const
    {
        if (cls == 0) return healthy;
        if (!class_signal_sensors.empty() &&
            std::find(class_signal_sensors.begin(), class_signal_sensors.end(), p) == class_signal_sensors.end())
            return healthy;
        return pd;
    }

    void validate() const
    {
        auto positive = [](double v, const char* name) {
            if (!(v > 0.0) || !std::isfinite(v))
                throw std::invalid_argument(std::string("synth spec: ") + name + " must be positive");
        };
        positive(source_duration_s, "source_duration_s");
        positive(source_rate_hz, "source_rate_hz");
        positive(target_duration_s, "target_duration_s");
        positive(target_rate_hz, "target_rate_hz");
        positive(stride_hz, "stride_hz");
        positive(tremor_low_hz, "tremor_low_hz");
        if (tremor_high_hz < tremor_low_hz) throw std::invalid_argument("synth spec: tremor band is inverted");
        if (stride_hz_spread < 0.0 || stride_hz_spread >= stride_hz)
            throw std::invalid_argument("synth spec: stride_hz_spread must lie in [0, stride_hz)");
        if (subject_scale_spread < 0.0 || subject_scale_spread >= 1.0)
            throw std::invalid_argument("synth spec: subject_scale_spread must lie in [0, 1)");
        if (noise < 0.0) throw std::invalid_argument("synth spec: noise must be non-negative");
        if (harmonic_phase_jitter < 0.0) throw std::invalid_argument("synth spec: harmonic_phase_jitter must be non-negative");
        if (source_subjects == 0 || source_recordings_per_subject == 0 || source_activities.empty())
            throw std::invalid_argument("synth spec: source set needs subjects, recordings and activities");
        if (target_subjects_per_class == 0 || target_recordings_per_subject == 0 || target_sensors.empty())
            throw std::invalid_argument("synth spec: target set needs subjects, recordings and sensors");
        canonical_order(target_sensors);
        for (Placement p : class_signal_sensors)
            if (std::find(target_sensors.begin(), target_sensors.end(), p) == target_sensors.end())
                throw std::invalid_argument("synth spec: class-signal sensor '" + std::string(to_string(p)) +
                                            "' is not a target sensor");
    }
};

struct SynthOutput {
    std::vector<Recording> source;
    std::vector<Recording> target;
};

namespace synth_detail {

struct PlacementProfile {
    std::array<double, 3> gain;
    std::array<double, 3> gravity;
    double phase;
    double tremor_gain;
};

inline PlacementProfile profile(Placement p)
{
    constexpr double pi = std::numbers::pi;
    switch (p) {
    case Placement::sternum: return {{0.6, 1.0, 0.4}, {0.0, 1.0, 0.0}, 0.0, 0.4};
    case Placement::lumbar: return {{0.7, 1.0, 0.5}, {0.0, 1.0, 0.0}, 0.2, 0.4};
    case Placement::left_ankle: return {{1.6, 1.2, 0.8}, {0.0, 1.0, 0.0}, 0.0, 0.6};
    case Placement::right_ankle: return {{1.6, 1.2, 0.8}, {0.0, 1.0, 0.0}, pi, 0.6};
    case Placement::left_wrist: return {{0.9, 0.6, 0.7}, {0.0, 0.0, 1.0}, pi, 1.0};
    case Placement::right_wrist: return {{0.9, 0.6, 0.7}, {0.0, 0.0, 1.0}, 0.0, 1.0};
    case Placement::wrist_single: return {{0.9, 0.6, 0.7}, {0.0, 0.0, 1.0}, 0.0, 1.0};
    }
    return {{1, 1, 1}, {0, 0, 0}, 0.0, 1.0};
}

/// Characteristic waveform of a placement: phase of harmonic h on axis a,
/// fixed per placement.
inline std::array<std::array<double, 3>, 3> phase_template(Placement p)
{
    std::array<std::array<double, 3>, 3> out{};
    nx::Rng rng(nx::derive_seed(0x5eed, "phase_template." + std::string(to_string(p))));
    for (auto& axis : out)
        for (auto& v : axis) v = rng.uniform(0.0, 2.0 * std::numbers::pi);
    return out;
}

inline std::array<std::array<double, 3>, 3> subject_phases(Placement p, double jitter, nx::Rng& rng)
{
    auto theta = phase_template(p);
    for (auto& axis : theta)
        for (auto& v : axis) v += jitter * rng.normal();
    return theta;
}

/// Stride frequency for a treadmill activity name ("Treadmill 3mph ..."),
/// or 0 for non-ambulatory activities.
inline double treadmill_stride_hz(const std::string& activity)
{
    if (activity.rfind("Treadmill", 0) != 0) return 0.0;
    const auto pos = activity.find("mph");
    if (pos == std::string::npos) return 0.95;
    std::size_t b = pos;
    while (b > 0 && (std::isdigit(static_cast<unsigned char>(activity[b - 1])) || activity[b - 1] == '.')) --b;
    const double mph = b < pos ? std::stod(activity.substr(b, pos - b)) : 3.0;
    return 0.7 + 0.08 * mph;
}

/// Stride phase per sample: each stride lasts (1 / f) * (1 + jitter * N(0, 1)),
/// clipped to [0.5, 1.5] of the nominal period.
inline std::vector<double> stride_phase(std::size_t n, double rate, double f, double jitter, nx::Rng& rng)
{
    constexpr double two_pi = 2.0 * std::numbers::pi;
    std::vector<double> phi(n);
    const double nominal = 1.0 / f;
    double t_start = -rng.uniform() * nominal, k = 0.0;
    double period = nominal;
    for (std::size_t i = 0; i < n; ++i) {
        const double t = static_cast<double>(i) / rate;
        while (t >= t_start + period) {
            t_start += period;
            k += 1.0;
            period = nominal * std::clamp(1.0 + jitter * rng.normal(), 0.5, 1.5);
        }
        phi[i] = two_pi * (k + (t - t_start) / period);
    }
    return phi;
}

} // namespace synth_detail

/// Expected mean of x^2 on one axis of a target recording (before
/// normalization), averaged over the subject scale distribution.
inline double expected_mean_square(const SynthSpec& spec, const ClassSignal& cls, Placement p, std::size_t axis)
{
    const auto prof = synth_detail::profile(p);
    const double s = spec.subject_scale_spread;
    const double e_scale2 = ((1 - s) * (1 - s) + (1 - s) * (1 + s) + (1 + s) * (1 + s)) / 3.0;
    const auto& a = spec.harmonic_amplitudes;
    const double harm = a[0] * a[0] + cls.harmonic_gain * cls.harmonic_gain * (a[1] * a[1] + a[2] * a[2]);
    const double g = prof.gain[axis] * cls.gait_amplitude;
    const double tremor = cls.tremor_amplitude * prof.tremor_gain;
    return e_scale2 * g * g * harm / 2.0 + tremor * tremor / 2.0 + spec.noise * spec.noise +
           prof.gravity[axis] * prof.gravity[axis];
}

inline SynthOutput synth_generate(const SynthSpec& spec)
{
    spec.validate();
    constexpr double two_pi = 2.0 * std::numbers::pi;
    SynthOutput out;
    char id[32];

    for (std::size_t i = 0; i < spec.source_subjects; ++i) {
        std::snprintf(id, sizeof id, "S%03zu", i + 1);
        nx::Rng subj(nx::derive_seed(spec.seed, std::string("source/") + id));
        const double scale = subj.uniform(1.0 - spec.subject_scale_spread, 1.0 + spec.subject_scale_spread);
        const double cadence = subj.uniform(0.9, 1.1);
        const auto theta = synth_detail::subject_phases(Placement::wrist_single, spec.harmonic_phase_jitter, subj);
        for (std::size_t r = 0; r < spec.source_recordings_per_subject; ++r) {
            const std::string& activity =
                spec.source_activities[(i * spec.source_recordings_per_subject + r) % spec.source_activities.size()];
            nx::Rng rng(nx::derive_seed(spec.seed, std::string("source/") + id + "/" + std::to_string(r)));
            const auto n = static_cast<std::size_t>(std::llround(spec.source_duration_s * spec.source_rate_hz));
            Recording rec;
            rec.subject_id = id;
            rec.class_label = spec.class_names[0];
            rec.activity = activity;
            rec.placement = Placement::wrist_single;
            rec.sampling_rate_hz = spec.source_rate_hz;
            rec.samples.resize(n);
            const auto prof = synth_detail::profile(Placement::wrist_single);
            const double f = synth_detail::treadmill_stride_hz(activity) * cadence;
            if (f > 0.0) {
                const auto phi = synth_detail::stride_phase(n, spec.source_rate_hz, f, spec.healthy.stride_jitter, rng);
                for (std::size_t t = 0; t < n; ++t)
                    for (std::size_t a = 0; a < 3; ++a) {
                        double v = 0.0;
                        for (std::size_t h = 0; h < 3; ++h)
                            v += spec.harmonic_amplitudes[h] *
                                 std::sin(static_cast<double>(h + 1) * phi[t] + theta[a][h]);
                        rec.samples[t][a] = scale * prof.gain[a] * v + prof.gravity[a] + spec.noise * rng.normal();
                    }
            } else {
                // non-ambulatory: a few slow random oscillations per axis
                std::array<std::array<double, 4>, 3> freq{}, amp{}, ph{};
                for (std::size_t a = 0; a < 3; ++a)
                    for (std::size_t c = 0; c < 4; ++c) {
                        freq[a][c] = rng.uniform(0.1, 2.0);
                        amp[a][c] = rng.uniform(0.05, 0.4);
                        ph[a][c] = rng.uniform(0.0, two_pi);
                    }
                for (std::size_t t = 0; t < n; ++t) {
                    const double time = static_cast<double>(t) / spec.source_rate_hz;
                    for (std::size_t a = 0; a < 3; ++a) {
                        double v = 0.0;
                        for (std::size_t c = 0; c < 4; ++c) v += amp[a][c] * std::sin(two_pi * freq[a][c] * time + ph[a][c]);
                        rec.samples[t][a] = scale * v + prof.gravity[a] + spec.noise * rng.normal();
                    }
                }
            }
            out.source.push_back(std::move(rec));
        }
    }

    for (int cls = 0; cls < 2; ++cls) {
        for (std::size_t i = 0; i < spec.target_subjects_per_class; ++i) {
            std::snprintf(id, sizeof id, "%s_%02zu", spec.class_names[static_cast<std::size_t>(cls)].c_str(), i + 1);
            nx::Rng subj(nx::derive_seed(spec.seed, std::string("target/") + id));
            const double scale = subj.uniform(1.0 - spec.subject_scale_spread, 1.0 + spec.subject_scale_spread);
            const double f = subj.uniform(spec.stride_hz - spec.stride_hz_spread, spec.stride_hz + spec.stride_hz_spread);
            for (std::size_t r = 0; r < spec.target_recordings_per_subject; ++r) {
                const std::string tag = std::string("target/") + id + "/" + std::to_string(r);
                nx::Rng timing(nx::derive_seed(spec.seed, tag));
                const auto n = static_cast<std::size_t>(std::llround(spec.target_duration_s * spec.target_rate_hz));
                // one stride sequence per jitter level, shared by all sensors of the recording
                nx::Rng timing_copy = timing;
                const auto phi_healthy =
                    synth_detail::stride_phase(n, spec.target_rate_hz, f, spec.healthy.stride_jitter, timing);
                const auto phi_pd = synth_detail::stride_phase(n, spec.target_rate_hz, f, spec.pd.stride_jitter, timing_copy);
                const double tremor_hz = timing.uniform(spec.tremor_low_hz, spec.tremor_high_hz);
                for (Placement p : spec.target_sensors) {
                    const ClassSignal& sig = spec.signal(cls, p);
                    const auto& phi = &sig == &spec.pd ? phi_pd : phi_healthy;
                    const auto prof = synth_detail::profile(p);
                    nx::Rng rng(nx::derive_seed(spec.seed, tag + "/" + std::string(to_string(p))));
                    const auto theta = synth_detail::subject_phases(p, spec.harmonic_phase_jitter, rng);
                    std::array<double, 3> tremor_phase{};
                    for (auto& t : tremor_phase) t = rng.uniform(0.0, two_pi);
                    Recording rec;
                    rec.subject_id = id;
                    rec.class_label = spec.class_names[static_cast<std::size_t>(cls)];
                    rec.activity = "walk";
                    rec.placement = p;
                    rec.sampling_rate_hz = spec.target_rate_hz;
                    rec.samples.resize(n);
                    for (std::size_t t = 0; t < n; ++t) {
                        const double time = static_cast<double>(t) / spec.target_rate_hz;
                        const double ph = phi[t] + prof.phase;
                        for (std::size_t a = 0; a < 3; ++a) {
                            double v = spec.harmonic_amplitudes[0] * std::sin(ph + theta[a][0]);
                            for (std::size_t h = 1; h < 3; ++h)
                                v += sig.harmonic_gain * spec.harmonic_amplitudes[h] *
                                     std::sin(static_cast<double>(h + 1) * ph + theta[a][h]);
                            const double tremor = sig.tremor_amplitude * prof.tremor_gain *
                                                  std::sin(two_pi * tremor_hz * time + tremor_phase[a]);
                            rec.samples[t][a] = scale * prof.gain[a] * sig.gait_amplitude * v + tremor +
                                                prof.gravity[a] + spec.noise * rng.normal();
                        }
                    }
                    out.target.push_back(std::move(rec));
                }
            }
        }
    }
    return out;
}

/// Writes recordings under `dir/recordings/` plus source_manifest.csv and
/// target_manifest.csv. Returns the two manifest paths.
inline std::pair<std::filesystem::path, std::filesystem::path> write_synth(const std::filesystem::path& dir,
                                                                          const SynthOutput& data)
{
    auto dump = [&](const std::vector<Recording>& recs, const std::string& role) {
        std::vector<ManifestEntry> entries;
        std::map<std::pair<std::string, Placement>, std::size_t> counter;
        for (const auto& r : recs) {
            const std::size_t k = counter[{r.subject_id, r.placement}]++;
            const std::string rel = "recordings/" + role + "/" + r.subject_id + "_r" + std::to_string(k) + "_" +
                                    std::string(to_string(r.placement)) + ".csv";
            write_recording_file(dir / rel, r.samples);
            entries.push_back({rel, r.subject_id, r.class_label, r.activity, r.placement, r.sampling_rate_hz, 0});
        }
        const auto manifest = dir / (role + "_manifest.csv");
        write_manifest(manifest, entries);
        return manifest;
    };
    return {dump(data.source, "source"), dump(data.target, "target")};
}

inline nlohmann::ordered_json to_json(const ClassSignal& c)
{
    return {{"gait_amplitude", c.gait_amplitude},
            {"harmonic_gain", c.harmonic_gain},
            {"tremor_amplitude", c.tremor_amplitude},
            {"stride_jitter", c.stride_jitter}};
}

inline ClassSignal class_signal_from_json(const nlohmann::json& j, ClassSignal c)
{
    c.gait_amplitude = j.value("gait_amplitude", c.gait_amplitude);
    c.harmonic_gain = j.value("harmonic_gain", c.harmonic_gain);
    c.tremor_amplitude = j.value("tremor_amplitude", c.tremor_amplitude);
    c.stride_jitter = j.value("stride_jitter", c.stride_jitter);
    return c;
}

inline nlohmann::ordered_json to_json(const SynthSpec& s)
{
    nlohmann::ordered_json j;
    j["source_subjects"] = s.source_subjects;
    j["source_recordings_per_subject"] = s.source_recordings_per_subject;
    j["source_duration_s"] = s.source_duration_s;
    j["source_rate_hz"] = s.source_rate_hz;
    j["source_activities"] = s.source_activities;
    j["target_subjects_per_class"] = s.target_subjects_per_class;
    j["target_recordings_per_subject"] = s.target_recordings_per_subject;
    j["target_duration_s"] = s.target_duration_s;
    j["target_rate_hz"] = s.target_rate_hz;
    std::vector<std::string> sensors, signal_sensors;
    for (Placement p : s.target_sensors) sensors.emplace_back(to_string(p));
    for (Placement p : s.class_signal_sensors) signal_sensors.emplace_back(to_string(p));
    j["target_sensors"] = sensors;
    j["class_names"] = s.class_names;
    j["stride_hz"] = s.stride_hz;
    j["stride_hz_spread"] = s.stride_hz_spread;
    j["harmonic_amplitudes"] = s.harmonic_amplitudes;
    j["subject_scale_spread"] = s.subject_scale_spread;
    j["harmonic_phase_jitter"] = s.harmonic_phase_jitter;
    j["healthy"] = to_json(s.healthy);
    j["pd"] = to_json(s.pd);
    j["tremor_low_hz"] = s.tremor_low_hz;
    j["tremor_high_hz"] = s.tremor_high_hz;
    j["noise"] = s.noise;
    j["class_signal_sensors"] = signal_sensors;
    j["seed"] = s.seed;
    return j;
}

inline SynthSpec synth_spec_from_json(const nlohmann::json& j)
{
    SynthSpec s;
    s.source_subjects = j.value("source_subjects", s.source_subjects);
    s.source_recordings_per_subject = j.value("source_recordings_per_subject", s.source_recordings_per_subject);
    s.source_duration_s = j.value("source_duration_s", s.source_duration_s);
    s.source_rate_hz = j.value("source_rate_hz", s.source_rate_hz);
    if (j.contains("source_activities")) {
        const auto& a = j.at("source_activities");
        if (a.is_string()) s.source_activities = activity_filter_preset(a.get<std::string>());
        else s.source_activities = a.get<std::vector<std::string>>();
    }
    s.target_subjects_per_class = j.value("target_subjects_per_class", s.target_subjects_per_class);
    s.target_recordings_per_subject = j.value("target_recordings_per_subject", s.target_recordings_per_subject);
    s.target_duration_s = j.value("target_duration_s", s.target_duration_s);
    s.target_rate_hz = j.value("target_rate_hz", s.target_rate_hz);
    if (j.contains("target_sensors")) {
        s.target_sensors.clear();
        for (const auto& n : j.at("target_sensors")) s.target_sensors.push_back(placement_or_throw(n.get<std::string>()));
    }
    if (j.contains("class_names")) s.class_names = j.at("class_names").get<std::array<std::string, 2>>();
    s.stride_hz = j.value("stride_hz", s.stride_hz);
    s.stride_hz_spread = j.value("stride_hz_spread", s.stride_hz_spread);
    if (j.contains("harmonic_amplitudes")) s.harmonic_amplitudes = j.at("harmonic_amplitudes").get<std::array<double, 3>>();
    s.subject_scale_spread = j.value("subject_scale_spread", s.subject_scale_spread);
    s.harmonic_phase_jitter = j.value("harmonic_phase_jitter", s.harmonic_phase_jitter);
    if (j.contains("healthy")) s.healthy = class_signal_from_json(j.at("healthy"), s.healthy);
    if (j.contains("pd")) s.pd = class_signal_from_json(j.at("pd"), s.pd);
    s.tremor_low_hz = j.value("tremor_low_hz", s.tremor_low_hz);
    s.tremor_high_hz = j.value("tremor_high_hz", s.tremor_high_hz);
    s.noise = j.value("noise", s.noise);
    if (j.contains("class_signal_sensors")) {
        s.class_signal_sensors.clear();
        for (const auto& n : j.at("class_signal_sensors"))
            s.class_signal_sensors.push_back(placement_or_throw(n.get<std::string>()));
    }
    s.seed = j.value("seed", s.seed);
    s.validate();
    return s;
}

} // namespace gaitxfer
