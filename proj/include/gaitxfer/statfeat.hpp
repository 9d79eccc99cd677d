#pragma once

#include "gaitxfer/numerics/summary.hpp"
#include "gaitxfer/sigprep.hpp"

#include <spdlog/spdlog.h>

#include <array>
#include <cmath>
#include <cstdio>
#include <map>
#include <ostream>
#include <span>
#include <string>
#include <vector>

namespace gaitxfer {

/// The 19 hand-engineered statistics of one tri-axial window, in frozen order:
/// mean x/y/z, variance x/y/z, RMS x/y/z, Pearson rho xy/yz/xz,
/// max-min range dx/dy/dz, then sqrt(dx²+dy²), sqrt(dy²+dz²), sqrt(dx²+dz²),
/// sqrt(dx²+dy²+dz²).
struct StatFeatureVector {
    static constexpr std::size_t kSize = 19;
    static constexpr std::array<const char*, kSize> kNames = {
        "mean_x", "mean_y", "mean_z", "var_x",  "var_y",  "var_z",   "rms_x",   "rms_y",   "rms_z",  "rho_xy",
        "rho_yz", "rho_xz", "dx",     "dy",     "dz",     "d_xy",    "d_yz",    "d_xz",    "d_xyz"};

    std::array<double, kSize> values{};

    double mean(std::size_t axis) const { return values[axis]; }
    double var(std::size_t axis) const { return values[3 + axis]; }
    double rms(std::size_t axis) const { return values[6 + axis]; }
    double rho_xy() const { return values[9]; }
    double rho_yz() const { return values[10]; }
    double rho_xz() const { return values[11]; }
    double range(std::size_t axis) const { return values[12 + axis]; }
};

/// Statistics over three equal-length axis series (a window or a whole trial).
inline StatFeatureVector stat_features(std::span<const double> x, std::span<const double> y, std::span<const double> z)
{
    const std::array<std::span<const double>, 3> axes{x, y, z};
    const std::size_t n = x.size();
    if (n == 0 || y.size() != n || z.size() != n)
        throw std::invalid_argument("stat_features: axes must be non-empty and of equal length");
    StatFeatureVector f;
    std::array<double, 3> mean{}, var{}, range{};
    for (std::size_t a = 0; a < 3; ++a) {
        double s = 0.0, sq = 0.0, lo = axes[a][0], hi = axes[a][0];
        for (double v : axes[a]) {
            s += v;
            sq += v * v;
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
        mean[a] = s / static_cast<double>(n);
        double ss = 0.0;
        for (double v : axes[a]) ss += (v - mean[a]) * (v - mean[a]);
        var[a] = ss / static_cast<double>(n);
        range[a] = hi - lo;
        f.values[a] = mean[a];
        f.values[3 + a] = var[a];
        f.values[6 + a] = std::sqrt(sq / static_cast<double>(n));
        f.values[12 + a] = range[a];
    }
    auto pearson = [&](std::size_t a, std::size_t b) {
        if (var[a] <= 0.0 || var[b] <= 0.0) return 0.0;
        double c = 0.0;
        for (std::size_t i = 0; i < n; ++i) c += (axes[a][i] - mean[a]) * (axes[b][i] - mean[b]);
        c /= static_cast<double>(n);
        const double r = c / std::sqrt(var[a] * var[b]);
        return std::clamp(r, -1.0, 1.0);
    };
    f.values[9] = pearson(0, 1);
    f.values[10] = pearson(1, 2);
    f.values[11] = pearson(0, 2);
    const double dx = range[0], dy = range[1], dz = range[2];
    f.values[15] = std::sqrt(dx * dx + dy * dy);
    f.values[16] = std::sqrt(dy * dy + dz * dz);
    f.values[17] = std::sqrt(dx * dx + dz * dz);
    f.values[18] = std::sqrt(dx * dx + dy * dy + dz * dz);
    return f;
}

inline StatFeatureVector stat_features(const Frame& frame)
{
    if (frame.channels != kAxes || frame.values.size() != kAxes * kFrameLength)
        throw std::invalid_argument("stat_features: expected a single-sensor 3x250 frame");
    return stat_features(frame.channel(0), frame.channel(1), frame.channel(2));
}

/// Statistics over a whole recording (per-trial mode of the statistics table).
inline StatFeatureVector stat_features(const Recording& rec)
{
    if (rec.samples.empty()) throw std::invalid_argument("stat_features: recording has no samples");
    std::array<std::vector<double>, 3> axes;
    for (auto& a : axes) a.reserve(rec.samples.size());
    for (const auto& s : rec.samples)
        for (std::size_t a = 0; a < 3; ++a) axes[a].push_back(s[a]);
    return stat_features(axes[0], axes[1], axes[2]);
}

/// Per-sensor 19-dim vectors of a stacked frame, concatenated (19 per sensor).
inline std::vector<double> stacked_stat_features(const Frame& frame)
{
    std::vector<double> out;
    out.reserve(frame.origin.sensors.size() * StatFeatureVector::kSize);
    for (std::size_t s = 0; s < frame.origin.sensors.size(); ++s) {
        const auto f = stat_features(slice_sensor(frame, s));
        out.insert(out.end(), f.values.begin(), f.values.end());
    }
    return out;
}

/// One window or trial entering the joint statistics table.
struct StatSample {
    Placement placement;
    std::string class_label;
    StatFeatureVector features;
};

/// One (placement, class) row: RMS x/y/z, rho xy/yz/xz, dx/dy/dz.
struct JointStatisticsRow {
    static constexpr std::array<const char*, 9> kColumns = {"rms_x", "rms_y", "rms_z", "rho_xy", "rho_yz",
                                                            "rho_xz", "dx",    "dy",    "dz"};
    Placement placement;
    std::string class_label;
    std::size_t count = 0;
    std::array<MeanStd, 9> columns{};
};

inline std::array<double, 9> joint_columns(const StatFeatureVector& f)
{
    return {f.rms(0), f.rms(1), f.rms(2), f.rho_xy(), f.rho_yz(), f.rho_xz(), f.range(0), f.range(1), f.range(2)};
}

/// Mean and population std per (placement, class) group, in the order given
/// by `placements` x `classes`. Empty groups are omitted with a warning.
inline std::vector<JointStatisticsRow> joint_statistics_table(std::span<const StatSample> samples,
                                                              std::span<const Placement> placements,
                                                              std::span<const std::string> classes)
{
    std::vector<JointStatisticsRow> rows;
    for (Placement p : placements) {
        for (const std::string& cls : classes) {
            std::vector<std::array<double, 9>> group;
            for (const auto& s : samples)
                if (s.placement == p && s.class_label == cls) group.push_back(joint_columns(s.features));
            if (group.empty()) {
                spdlog::warn("joint statistics: no samples for {} / {}", to_string(p), cls);
                continue;
            }
            JointStatisticsRow row{p, cls, group.size(), {}};
            for (std::size_t c = 0; c < 9; ++c) {
                std::vector<double> column;
                for (const auto& g : group) column.push_back(g[c]);
                row.columns[c] = mean_std(column);
            }
            rows.push_back(std::move(row));
        }
    }
    return rows;
}

/// Tab-separated table with "mean±std" cells.
inline void write_joint_statistics_tsv(std::ostream& os, std::span<const JointStatisticsRow> rows)
{
    os << "placement\tclass\tcount";
    for (const char* c : JointStatisticsRow::kColumns) os << '\t' << c;
    os << '\n';
    char buf[64];
    for (const auto& r : rows) {
        os << to_string(r.placement) << '\t' << r.class_label << '\t' << r.count;
        for (const auto& c : r.columns) {
            std::snprintf(buf, sizeof buf, "%.4f\xC2\xB1%.4f", c.mean, c.std);
            os << '\t' << buf;
        }
        os << '\n';
    }
}

} // namespace gaitxfer
