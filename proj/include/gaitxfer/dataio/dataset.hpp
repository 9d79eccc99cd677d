#pragma once

#include "gaitxfer/dataio/fingerprint.hpp"
#include "gaitxfer/sigprep.hpp"

#include <spdlog/spdlog.h>

#include <array>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace gaitxfer {

/// Raised for malformed manifests or recording files; the message names the
/// offending file and line.
class DatasetError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class DatasetRole { source, target };

inline std::string_view to_string(DatasetRole r) { return r == DatasetRole::source ? "source" : "target"; }

inline const std::vector<std::string>& subset1_activities()
{
    static const std::vector<std::string> v = {
        "Treadmill 1mph (0% grade)", "Treadmill 2mph (0% grade)", "Treadmill 3mph (0% grade)",
        "Treadmill 3mph (5% grade)", "Treadmill 4mph (0% grade)", "Treadmill 5mph (0% grade)",
        "Treadmill 6mph (0% grade)", "Treadmill 6mph (5% grade)"};
    return v;
}

inline const std::vector<std::string>& subset2_activities()
{
    static const std::vector<std::string> v = {
        "Seated-folding/stacking laundry", "Standing/fidgeting with hands", "1min brush teeth/1min brush hair",
        "Driving car", "Treadmill 1mph (0% grade)", "Treadmill 3mph (0% grade)", "Treadmill 5mph (0% grade)",
        "Treadmill 6mph (5% grade)"};
    return v;
}

/// Resolves "subset1" / "subset2" presets; anything else is a single activity name.
inline std::vector<std::string> activity_filter_preset(std::string_view name)
{
    if (name == "subset1") return subset1_activities();
    if (name == "subset2") return subset2_activities();
    return {std::string(name)};
}

struct ManifestEntry {
    std::string path;
    std::string subject_id;
    std::string class_label;
    std::string activity;
    Placement placement = Placement::wrist_single;
    double rate_hz = 0.0;
    std::size_t line = 0;
};

struct DatasetManifest {
    DatasetRole role = DatasetRole::target;
    std::filesystem::path file;
    std::vector<ManifestEntry> entries;
    /// Entries whose activity is not listed are skipped when set. A filter
    /// name also matches the same name followed by a parenthesised
    /// qualifier: "Treadmill 1mph" matches "Treadmill 1mph (0% grade)".
    std::optional<std::vector<std::string>> activity_filter;

    std::filesystem::path resolve(const ManifestEntry& e) const
    {
        std::filesystem::path p(e.path);
        return p.is_absolute() ? p : file.parent_path() / p;
    }

    bool selected(const ManifestEntry& e) const
    {
        if (!activity_filter) return true;
        for (const auto& a : *activity_filter) {
            if (a == e.activity) return true;
            if (e.activity.size() > a.size() + 1 && e.activity.compare(0, a.size(), a) == 0 &&
                e.activity.compare(a.size(), 2, " (") == 0)
                return true;
        }
        return false;
    }
};

inline constexpr std::string_view kManifestHeader = "path,subject_id,class_label,activity,placement,rate_hz";

namespace dataset_detail {

inline std::string_view trim(std::string_view s)
{
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

/// Comma-separated fields; a field may be double-quoted to contain commas.
inline std::vector<std::string> split_fields(std::string_view line)
{
    std::vector<std::string> out;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                cur += '"';
                ++i;
            } else if (c == '"') {
                quoted = false;
            } else {
                cur += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            out.emplace_back(trim(cur));
            cur.clear();
        } else {
            cur += c;
        }
    }
    out.emplace_back(trim(cur));
    return out;
}

inline std::string quote_field(std::string_view s)
{
    if (s.find_first_of(",\"") == std::string_view::npos) return std::string(s);
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + '"';
}

inline bool parse_double(std::string_view s, double& v)
{
    s = trim(s);
    if (s.empty()) return false;
    if (s.front() == '+') s.remove_prefix(1);
    const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    return ec == std::errc{} && p == s.data() + s.size();
}

} // namespace dataset_detail

inline DatasetManifest read_manifest(const std::filesystem::path& file, DatasetRole role)
{
    std::ifstream in(file);
    if (!in) throw DatasetError("cannot open manifest '" + file.string() + "'");
    DatasetManifest m;
    m.role = role;
    m.file = file;
    std::string line;
    std::size_t lineno = 0;
    auto fail = [&](const std::string& msg) {
        throw DatasetError(file.string() + ":" + std::to_string(lineno) + ": " + msg);
    };
    if (!std::getline(in, line)) {
        lineno = 1;
        fail("empty manifest");
    }
    ++lineno;
    if (dataset_detail::trim(line) != kManifestHeader)
        fail("header must be '" + std::string(kManifestHeader) + "'");
    while (std::getline(in, line)) {
        ++lineno;
        if (dataset_detail::trim(line).empty()) continue;
        const auto f = dataset_detail::split_fields(line);
        if (f.size() != 6) fail("expected 6 fields, found " + std::to_string(f.size()));
        ManifestEntry e;
        e.path = f[0];
        e.subject_id = f[1];
        e.class_label = f[2];
        e.activity = f[3];
        e.line = lineno;
        if (e.path.empty()) fail("empty path");
        if (e.subject_id.empty()) fail("empty subject_id");
        if (e.class_label.empty()) fail("empty class_label");
        const auto p = parse_placement(f[4]);
        if (!p) fail("unknown placement '" + f[4] + "'");
        e.placement = *p;
        if (!dataset_detail::parse_double(f[5], e.rate_hz) || !(e.rate_hz > 0.0) || !std::isfinite(e.rate_hz))
            fail("rate_hz must be a positive number, got '" + f[5] + "'");
        m.entries.push_back(std::move(e));
    }
    return m;
}

inline void write_manifest(const std::filesystem::path& file, const std::vector<ManifestEntry>& entries)
{
    if (file.has_parent_path()) std::filesystem::create_directories(file.parent_path());
    std::ofstream out(file, std::ios::trunc);
    if (!out) throw DatasetError("cannot write manifest '" + file.string() + "'");
    out << kManifestHeader << '\n';
    for (const auto& e : entries) {
        char rate[32];
        const auto r = std::to_chars(rate, rate + sizeof rate, e.rate_hz);
        out << dataset_detail::quote_field(e.path) << ',' << dataset_detail::quote_field(e.subject_id) << ','
            << dataset_detail::quote_field(e.class_label) << ',' << dataset_detail::quote_field(e.activity) << ','
            << to_string(e.placement) << ',' << std::string_view(rate, static_cast<std::size_t>(r.ptr - rate))
            << '\n';
    }
}

/// Parses one recording file of "x,y,z" lines.
inline std::vector<std::array<double, 3>> read_recording_file(const std::filesystem::path& file)
{
    std::ifstream in(file);
    if (!in) throw DatasetError(file.string() + ": cannot open recording file");
    std::vector<std::array<double, 3>> samples;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string_view t = dataset_detail::trim(line);
        if (t.empty()) continue;
        std::array<double, 3> s{};
        std::size_t axis = 0, start = 0;
        for (std::size_t i = 0; i <= t.size(); ++i) {
            if (i == t.size() || t[i] == ',') {
                const std::string_view tok = t.substr(start, i - start);
                if (axis >= 3)
                    throw DatasetError(file.string() + ":" + std::to_string(lineno) + ": more than 3 values");
                if (!dataset_detail::parse_double(tok, s[axis]))
                    throw DatasetError(file.string() + ":" + std::to_string(lineno) + ": non-numeric value '" +
                                       std::string(dataset_detail::trim(tok)) + "'");
                if (!std::isfinite(s[axis]))
                    throw DatasetError(file.string() + ":" + std::to_string(lineno) + ": non-finite value");
                ++axis;
                start = i + 1;
            }
        }
        if (axis != 3)
            throw DatasetError(file.string() + ":" + std::to_string(lineno) + ": expected x,y,z, found " +
                               std::to_string(axis) + " value(s)");
        samples.push_back(s);
    }
    if (samples.empty()) throw DatasetError(file.string() + ": recording has no samples");
    return samples;
}

inline void write_recording_file(const std::filesystem::path& file, const std::vector<std::array<double, 3>>& samples)
{
    if (file.has_parent_path()) std::filesystem::create_directories(file.parent_path());
    std::ofstream out(file, std::ios::trunc | std::ios::binary);
    if (!out) throw DatasetError("cannot write recording '" + file.string() + "'");
    std::string buf;
    buf.reserve(samples.size() * 32);
    char tmp[40];
    for (const auto& s : samples) {
        for (std::size_t a = 0; a < 3; ++a) {
            const auto r = std::to_chars(tmp, tmp + sizeof tmp, s[a], std::chars_format::fixed, 6);
            buf.append(tmp, r.ptr);
            buf += a < 2 ? ',' : '\n';
        }
    }
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
}

/// Loads every selected entry. All entry errors are collected and reported together.
inline std::vector<Recording> load_dataset(const DatasetManifest& m)
{
    std::vector<Recording> out;
    std::vector<std::string> errors;
    for (const auto& e : m.entries) {
        if (!m.selected(e)) continue;
        try {
            Recording r;
            r.subject_id = e.subject_id;
            r.class_label = e.class_label;
            r.activity = e.activity;
            r.placement = e.placement;
            r.sampling_rate_hz = e.rate_hz;
            r.samples = read_recording_file(m.resolve(e));
            out.push_back(std::move(r));
        } catch (const std::exception& ex) {
            errors.push_back(m.file.string() + ":" + std::to_string(e.line) + ": " + ex.what());
        }
    }
    if (!errors.empty()) {
        std::string msg = std::to_string(errors.size()) + " dataset error(s):";
        for (const auto& s : errors) msg += "\n  " + s;
        throw DatasetError(msg);
    }
    if (out.empty()) spdlog::warn("manifest '{}' selected no recordings", m.file.string());
    return out;
}

/// Content hash of the selected manifest entries and the bytes of their files.
inline std::string dataset_fingerprint(const DatasetManifest& m)
{
    Sha256 h;
    h.field(to_string(m.role));
    for (const auto& e : m.entries) {
        if (!m.selected(e)) continue;
        h.field(e.subject_id).field(e.class_label).field(e.activity).field(to_string(e.placement));
        char rate[32];
        const auto r = std::to_chars(rate, rate + sizeof rate, e.rate_hz);
        h.field(std::string_view(rate, static_cast<std::size_t>(r.ptr - rate)));
        h.field(file_sha256_hex(m.resolve(e).string()));
    }
    return to_hex(h.finish());
}

} // namespace gaitxfer
