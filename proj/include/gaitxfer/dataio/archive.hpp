#pragma once

#include "gaitxfer/dataio/fingerprint.hpp"
#include "gaitxfer/numerics/tensor.hpp"

#include <nlohmann/json.hpp>

#include <bit>
#include <cstdint>
#include <cstdlib>
#include <cstring>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace gaitxfer {

/// Raised for unreadable, truncated, tampered or incompatible archives.
class ArchiveError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline constexpr std::uint32_t kArchiveVersion = 1;
inline constexpr char kArchiveMagic[8] = {'G', 'X', 'F', 'R', 'A', 'R', 'C', 'H'};

enum class DType : std::uint8_t { f32 = 1, f64 = 2 };

inline std::size_t dtype_size(DType t) { return t == DType::f32 ? 4 : 8; }

/// One named little-endian blob.
struct ArchiveRecord {
    std::string name;
    DType dtype = DType::f32;
    std::vector<std::uint64_t> shape;
    std::vector<std::uint8_t> bytes;

    std::uint64_t elements() const
    {
        std::uint64_t n = 1;
        for (auto d : shape) n *= d;
        return n;
    }
};

/// Container layout:
///   magic[8] | u32 version | u64 header length | header JSON {kind, config, provenance}
///   | u32 record count | records...
/// record: u32 name length | name | u8 dtype | u32 rank | u64 dims[rank]
///   | u64 byte length | blob | 8-byte checksum (SHA-256 prefix of everything
///   in the record before it).
struct Archive {
    std::string kind;
    nlohmann::ordered_json config = nlohmann::ordered_json::object();
    nlohmann::ordered_json provenance = nlohmann::ordered_json::object();
    std::vector<ArchiveRecord> records;

    const ArchiveRecord& record(const std::string& name) const
    {
        for (const auto& r : records)
            if (r.name == name) return r;
        throw ArchiveError("archive of kind '" + kind + "' has no record '" + name + "'");
    }

    bool has(const std::string& name) const
    {
        for (const auto& r : records)
            if (r.name == name) return true;
        return false;
    }

    void add_f32(const std::string& name, std::vector<std::uint64_t> shape, std::span<const float> values)
    {
        add(name, DType::f32, std::move(shape), values.data(), values.size());
    }
    void add_f64(const std::string& name, std::vector<std::uint64_t> shape, std::span<const double> values)
    {
        add(name, DType::f64, std::move(shape), values.data(), values.size());
    }
    void add_tensor(const std::string& name, const nx::Tensor<float>& t)
    {
        add_f32(name, {t.shape().begin(), t.shape().end()}, t.data());
    }

    std::vector<float> f32(const std::string& name) const { return values<float>(record(name), DType::f32); }
    std::vector<double> f64(const std::string& name) const { return values<double>(record(name), DType::f64); }

    nx::Tensor<float> tensor(const std::string& name) const
    {
        const auto& r = record(name);
        nx::Shape shape(r.shape.begin(), r.shape.end());
        return nx::Tensor<float>(std::move(shape), values<float>(r, DType::f32));
    }

private:
    template <class T>
    void add(const std::string& name, DType dtype, std::vector<std::uint64_t> shape, const T* data, std::size_t n)
    {
        static_assert(std::endian::native == std::endian::little, "archive blobs assume a little-endian host");
        if (has(name)) throw ArchiveError("duplicate archive record '" + name + "'");
        ArchiveRecord r{name, dtype, std::move(shape), {}};
        if (r.elements() != n)
            throw ArchiveError("record '" + name + "': shape holds " + std::to_string(r.elements()) +
                               " elements but " + std::to_string(n) + " were given");
        r.bytes.resize(n * sizeof(T));
        if (n) std::memcpy(r.bytes.data(), data, r.bytes.size());
        records.push_back(std::move(r));
    }

    template <class T>
    static std::vector<T> values(const ArchiveRecord& r, DType expected)
    {
        if (r.dtype != expected)
            throw ArchiveError("record '" + r.name + "' has dtype " + std::to_string(static_cast<int>(r.dtype)) +
                               ", expected " + std::to_string(static_cast<int>(expected)));
        std::vector<T> out(r.bytes.size() / sizeof(T));
        if (!out.empty()) std::memcpy(out.data(), r.bytes.data(), r.bytes.size());
        return out;
    }
};

/// Creation time in seconds: SOURCE_DATE_EPOCH when set (reproducible
/// outputs), otherwise the wall clock.
inline std::int64_t creation_time()
{
    if (const char* s = std::getenv("SOURCE_DATE_EPOCH")) {
        char* end = nullptr;
        const long long v = std::strtoll(s, &end, 10);
        if (end != s && *end == '\0') return v;
    }
    return static_cast<std::int64_t>(std::time(nullptr));
}

namespace archive_detail {

class Writer {
public:
    void bytes(const void* p, std::size_t n)
    {
        const auto* b = static_cast<const std::uint8_t*>(p);
        buf_.insert(buf_.end(), b, b + n);
    }
    template <class T>
    void le(T v)
    {
        for (std::size_t i = 0; i < sizeof(T); ++i) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    std::size_t size() const { return buf_.size(); }
    const std::vector<std::uint8_t>& data() const { return buf_; }

private:
    std::vector<std::uint8_t> buf_;
};

class Reader {
public:
    Reader(const std::vector<std::uint8_t>& buf, std::string path) : buf_(buf), path_(std::move(path)) {}

    const std::uint8_t* take(std::size_t n, const char* what)
    {
        if (n > buf_.size() - pos_)
            throw ArchiveError("archive '" + path_ + "' is truncated while reading " + what + " (offset " +
                               std::to_string(pos_) + ")");
        const std::uint8_t* p = buf_.data() + pos_;
        pos_ += n;
        return p;
    }
    template <class T>
    T le(const char* what)
    {
        const std::uint8_t* p = take(sizeof(T), what);
        T v = 0;
        for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(static_cast<T>(p[i]) << (8 * i));
        return v;
    }
    std::size_t pos() const { return pos_; }
    bool done() const { return pos_ == buf_.size(); }

private:
    const std::vector<std::uint8_t>& buf_;
    std::string path_;
    std::size_t pos_ = 0;
};

} // namespace archive_detail

inline std::vector<std::uint8_t> serialize_archive(const Archive& a)
{
    archive_detail::Writer w;
    w.bytes(kArchiveMagic, sizeof kArchiveMagic);
    w.le<std::uint32_t>(kArchiveVersion);
    nlohmann::ordered_json header;
    header["kind"] = a.kind;
    header["config"] = a.config;
    header["provenance"] = a.provenance;
    const std::string text = header.dump();
    w.le<std::uint64_t>(text.size());
    w.bytes(text.data(), text.size());
    w.le<std::uint32_t>(static_cast<std::uint32_t>(a.records.size()));
    for (const auto& r : a.records) {
        if (r.bytes.size() != r.elements() * dtype_size(r.dtype))
            throw ArchiveError("record '" + r.name + "': byte length disagrees with its shape");
        const std::size_t start = w.size();
        w.le<std::uint32_t>(static_cast<std::uint32_t>(r.name.size()));
        w.bytes(r.name.data(), r.name.size());
        w.le<std::uint8_t>(static_cast<std::uint8_t>(r.dtype));
        w.le<std::uint32_t>(static_cast<std::uint32_t>(r.shape.size()));
        for (auto d : r.shape) w.le<std::uint64_t>(d);
        w.le<std::uint64_t>(r.bytes.size());
        w.bytes(r.bytes.data(), r.bytes.size());
        const Digest d = Sha256().update(w.data().data() + start, w.size() - start).finish();
        w.bytes(d.data(), 8);
    }
    return w.data();
}

inline Archive deserialize_archive(const std::vector<std::uint8_t>& buf, const std::string& path = "<memory>")
{
    archive_detail::Reader rd(buf, path);
    if (std::memcmp(rd.take(sizeof kArchiveMagic, "magic"), kArchiveMagic, sizeof kArchiveMagic) != 0)
        throw ArchiveError("'" + path + "' is not a gaitxfer archive (bad magic)");
    const auto version = rd.le<std::uint32_t>("version");
    if (version != kArchiveVersion)
        throw ArchiveError("archive '" + path + "' has schema version " + std::to_string(version) +
                           "; this build reads version " + std::to_string(kArchiveVersion));
    const auto header_len = rd.le<std::uint64_t>("header length");
    const auto* hp = rd.take(header_len, "header");
    Archive a;
    try {
        const auto header = nlohmann::ordered_json::parse(hp, hp + header_len);
        a.kind = header.at("kind").get<std::string>();
        a.config = header.at("config");
        a.provenance = header.at("provenance");
    } catch (const nlohmann::json::exception& e) {
        throw ArchiveError("archive '" + path + "' has a malformed header: " + e.what());
    }
    const auto count = rd.le<std::uint32_t>("record count");
    for (std::uint32_t i = 0; i < count; ++i) {
        const std::size_t start = rd.pos();
        ArchiveRecord r;
        const auto name_len = rd.le<std::uint32_t>("record name length");
        const auto* np = rd.take(name_len, "record name");
        r.name.assign(reinterpret_cast<const char*>(np), name_len);
        const auto dt = rd.le<std::uint8_t>("record dtype");
        if (dt != static_cast<std::uint8_t>(DType::f32) && dt != static_cast<std::uint8_t>(DType::f64))
            throw ArchiveError("record '" + r.name + "' has unknown dtype " + std::to_string(dt));
        r.dtype = static_cast<DType>(dt);
        const auto rank = rd.le<std::uint32_t>("record rank");
        if (rank > 16) throw ArchiveError("record '" + r.name + "' has implausible rank " + std::to_string(rank));
        for (std::uint32_t k = 0; k < rank; ++k) r.shape.push_back(rd.le<std::uint64_t>("record shape"));
        const auto byte_len = rd.le<std::uint64_t>("record byte length");
        if (byte_len != r.elements() * dtype_size(r.dtype))
            throw ArchiveError("record '" + r.name + "': shape header implies " +
                               std::to_string(r.elements() * dtype_size(r.dtype)) + " bytes but " +
                               std::to_string(byte_len) + " are declared");
        const auto* bp = rd.take(byte_len, "record blob");
        r.bytes.assign(bp, bp + byte_len);
        const std::size_t end = rd.pos();
        const auto* stored = rd.take(8, "record checksum");
        const Digest d = Sha256().update(buf.data() + start, end - start).finish();
        if (std::memcmp(stored, d.data(), 8) != 0)
            throw ArchiveError("checksum mismatch in record '" + r.name + "' of '" + path + "'");
        a.records.push_back(std::move(r));
    }
    if (!rd.done()) throw ArchiveError("archive '" + path + "' has trailing bytes");
    return a;
}

/// Writes to a temporary sibling and renames it into place.
inline void save_archive(const std::filesystem::path& path, const Archive& a)
{
    const auto bytes = serialize_archive(a);
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    const std::filesystem::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw ArchiveError("cannot write '" + tmp.string() + "'");
        out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
        if (!out) throw ArchiveError("write to '" + tmp.string() + "' failed");
    }
    std::filesystem::rename(tmp, path);
}

inline Archive load_archive(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ArchiveError("cannot open archive '" + path.string() + "'");
    std::vector<std::uint8_t> buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return deserialize_archive(buf, path.string());
}

} // namespace gaitxfer
