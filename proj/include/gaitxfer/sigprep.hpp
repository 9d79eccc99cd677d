#pragma once

#include <spdlog/spdlog.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace gaitxfer {

inline constexpr std::size_t kFrameLength = 250;
inline constexpr std::size_t kAxes = 3;

enum class Placement { sternum, lumbar, left_ankle, right_ankle, left_wrist, right_wrist, wrist_single };

/// Canonical multi-sensor stacking order of the gait corpus.
inline constexpr std::array<Placement, 6> kCanonicalSensors = {
    Placement::sternum,    Placement::lumbar,     Placement::left_ankle,
    Placement::right_ankle, Placement::left_wrist, Placement::right_wrist};

inline std::string_view to_string(Placement p)
{
    switch (p) {
    case Placement::sternum: return "sternum";
    case Placement::lumbar: return "lumbar";
    case Placement::left_ankle: return "left_ankle";
    case Placement::right_ankle: return "right_ankle";
    case Placement::left_wrist: return "left_wrist";
    case Placement::right_wrist: return "right_wrist";
    case Placement::wrist_single: return "wrist_single";
    }
    return "?";
}

inline std::optional<Placement> parse_placement(std::string_view s)
{
    for (Placement p : {Placement::sternum, Placement::lumbar, Placement::left_ankle, Placement::right_ankle,
                        Placement::left_wrist, Placement::right_wrist, Placement::wrist_single})
        if (to_string(p) == s) return p;
    return std::nullopt;
}

inline Placement placement_or_throw(std::string_view s)
{
    if (auto p = parse_placement(s)) return *p;
    throw std::invalid_argument("unknown sensor placement '" + std::string(s) + "'");
}

/// Sorts placements into canonical order and rejects duplicates.
inline std::vector<Placement> canonical_order(std::vector<Placement> sensors)
{
    auto rank = [](Placement p) { return static_cast<int>(p); };
    std::sort(sensors.begin(), sensors.end(), [&](Placement a, Placement b) { return rank(a) < rank(b); });
    if (std::adjacent_find(sensors.begin(), sensors.end()) != sensors.end())
        throw std::invalid_argument("sensor list names a placement more than once");
    return sensors;
}

/// One sensor's tri-axial accelerometer series.
struct Recording {
    std::string subject_id;
    std::string class_label;
    std::string activity;
    Placement placement = Placement::wrist_single;
    double sampling_rate_hz = 100.0;
    std::vector<std::array<double, 3>> samples;

    std::size_t length() const noexcept { return samples.size(); }

    void validate() const
    {
        if (samples.empty()) throw std::invalid_argument("recording for '" + subject_id + "' has no samples");
        if (!(sampling_rate_hz > 0.0))
            throw std::invalid_argument("recording for '" + subject_id + "' has non-positive sampling rate");
    }
};

struct FrameOrigin {
    std::string subject_id;
    std::size_t recording_index = 0;
    std::size_t window_index = 0;
    std::vector<Placement> sensors;
};

/// Fixed-length window, channels x 250, row-major. Channels come in groups
/// of three (x, y, z) per sensor listed in `origin.sensors`.
struct Frame {
    std::size_t channels = kAxes;
    std::vector<double> values;
    FrameOrigin origin;
    int label = 0;

    std::size_t steps() const noexcept { return channels ? values.size() / channels : 0; }
    double at(std::size_t c, std::size_t t) const { return values[c * kFrameLength + t]; }
    std::span<const double> channel(std::size_t c) const
    {
        return std::span<const double>(values).subspan(c * kFrameLength, kFrameLength);
    }

    void validate(int class_count) const
    {
        if (values.size() != channels * kFrameLength)
            throw std::invalid_argument("frame must span exactly 250 steps per channel");
        if (channels % kAxes != 0 || channels / kAxes != origin.sensors.size())
            throw std::invalid_argument("frame channel count must be 3 per listed sensor");
        if (label < 0 || label >= class_count) throw std::invalid_argument("frame label out of range");
    }
};

/// Per-channel z-score over the whole recording with population std.
/// Channels whose std falls below 1e-8 are only centered.
inline Recording normalize(Recording rec)
{
    const std::size_t n = rec.samples.size();
    if (n == 0) return rec;
    for (std::size_t a = 0; a < kAxes; ++a) {
        double mean = 0.0;
        for (const auto& s : rec.samples) mean += s[a];
        mean /= static_cast<double>(n);
        double ss = 0.0;
        for (const auto& s : rec.samples) ss += (s[a] - mean) * (s[a] - mean);
        const double sd = std::sqrt(ss / static_cast<double>(n));
        const double scale = sd < 1e-8 ? 1.0 : 1.0 / sd;
        for (auto& s : rec.samples) s[a] = (s[a] - mean) * scale;
    }
    return rec;
}

/// Non-overlapping windows [250 i, 250 (i + 1)); the trailing remainder is dropped.
inline std::vector<Frame> extract_frames(const Recording& rec, std::size_t recording_index, int label,
                                         std::size_t frame_len = kFrameLength)
{
    if (frame_len != kFrameLength)
        throw std::invalid_argument("frame length is fixed at 250 steps");
    std::vector<Frame> frames;
    const std::size_t count = rec.length() / frame_len;
    if (count == 0) {
        spdlog::warn("recording {} of subject '{}' has {} samples, shorter than one frame", recording_index,
                     rec.subject_id, rec.length());
        return frames;
    }
    frames.reserve(count);
    for (std::size_t w = 0; w < count; ++w) {
        Frame f;
        f.channels = kAxes;
        f.values.resize(kAxes * frame_len);
        for (std::size_t t = 0; t < frame_len; ++t)
            for (std::size_t a = 0; a < kAxes; ++a) f.values[a * frame_len + t] = rec.samples[w * frame_len + t][a];
        f.origin = FrameOrigin{rec.subject_id, recording_index, w, {rec.placement}};
        f.label = label;
        frames.push_back(std::move(f));
    }
    return frames;
}

/// Concatenates single-sensor frames of one window in the given order.
inline Frame stack_sensors(const std::map<Placement, Frame>& frames_by_sensor, std::span<const Placement> order)
{
    if (order.empty()) throw std::invalid_argument("stack_sensors: empty sensor order");
    std::vector<Placement> seen;
    Frame out;
    out.channels = 0;
    const Frame* first = nullptr;
    for (Placement p : order) {
        if (std::find(seen.begin(), seen.end(), p) != seen.end())
            throw std::invalid_argument("stack_sensors: placement '" + std::string(to_string(p)) + "' listed twice");
        seen.push_back(p);
        auto it = frames_by_sensor.find(p);
        if (it == frames_by_sensor.end())
            throw std::invalid_argument("stack_sensors: missing frame for placement '" + std::string(to_string(p)) +
                                        "'");
        const Frame& f = it->second;
        if (f.values.size() != f.channels * kFrameLength)
            throw std::invalid_argument("stack_sensors: frame for '" + std::string(to_string(p)) +
                                        "' does not span 250 steps");
        if (!first) {
            first = &f;
        } else if (f.origin.subject_id != first->origin.subject_id ||
                   f.origin.window_index != first->origin.window_index) {
            throw std::invalid_argument("stack_sensors: frames disagree on subject or window index");
        }
        out.values.insert(out.values.end(), f.values.begin(), f.values.end());
        out.channels += f.channels;
        out.origin.sensors.insert(out.origin.sensors.end(), f.origin.sensors.begin(), f.origin.sensors.end());
    }
    out.origin.subject_id = first->origin.subject_id;
    out.origin.recording_index = first->origin.recording_index;
    out.origin.window_index = first->origin.window_index;
    out.label = first->label;
    return out;
}

/// Three-channel frame of the `index`-th sensor of a stacked frame.
inline Frame slice_sensor(const Frame& stacked, std::size_t index)
{
    if (index >= stacked.origin.sensors.size())
        throw std::out_of_range("slice_sensor: sensor index " + std::to_string(index) + " out of range");
    Frame f;
    f.channels = kAxes;
    const auto begin = stacked.values.begin() + static_cast<std::ptrdiff_t>(index * kAxes * kFrameLength);
    f.values.assign(begin, begin + static_cast<std::ptrdiff_t>(kAxes * kFrameLength));
    f.origin = stacked.origin;
    f.origin.sensors = {stacked.origin.sensors[index]};
    f.label = stacked.label;
    return f;
}

/// Index of `p` within the frame's sensor list.
inline std::size_t sensor_index(const Frame& frame, Placement p)
{
    const auto& s = frame.origin.sensors;
    auto it = std::find(s.begin(), s.end(), p);
    if (it == s.end())
        throw std::invalid_argument("frame does not contain sensor '" + std::string(to_string(p)) + "'");
    return static_cast<std::size_t>(it - s.begin());
}

} // namespace gaitxfer
