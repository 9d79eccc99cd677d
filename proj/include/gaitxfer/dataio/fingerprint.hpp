#pragma once

#include <openssl/evp.h>

#include <array>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <memory>
#include <stdexcept>
#include <string>
#include <string_view>

namespace gaitxfer {

using Digest = std::array<std::uint8_t, 32>;

/// Incremental SHA-256.
class Sha256 {
public:
    Sha256() : ctx_(EVP_MD_CTX_new(), &EVP_MD_CTX_free)
    {
        if (!ctx_ || EVP_DigestInit_ex(ctx_.get(), EVP_sha256(), nullptr) != 1)
            throw std::runtime_error("SHA-256 initialisation failed");
    }

    Sha256& update(const void* data, std::size_t n)
    {
        if (n && EVP_DigestUpdate(ctx_.get(), data, n) != 1) throw std::runtime_error("SHA-256 update failed");
        return *this;
    }
    Sha256& update(std::string_view s) { return update(s.data(), s.size()); }

    /// Length-prefixed field, so ("ab", "c") and ("a", "bc") differ.
    Sha256& field(std::string_view s)
    {
        const std::uint64_t n = s.size();
        update(&n, sizeof n);
        return update(s);
    }

    Digest finish()
    {
        Digest d{};
        unsigned int len = 0;
        if (EVP_DigestFinal_ex(ctx_.get(), d.data(), &len) != 1 || len != d.size())
            throw std::runtime_error("SHA-256 finalisation failed");
        return d;
    }

private:
    std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx_;
};

inline std::string to_hex(const std::uint8_t* p, std::size_t n)
{
    static constexpr char kDigits[] = "0123456789abcdef";
    std::string s(2 * n, '0');
    for (std::size_t i = 0; i < n; ++i) {
        s[2 * i] = kDigits[p[i] >> 4];
        s[2 * i + 1] = kDigits[p[i] & 15];
    }
    return s;
}

inline std::string to_hex(const Digest& d) { return to_hex(d.data(), d.size()); }

inline std::string sha256_hex(std::string_view s) { return to_hex(Sha256().update(s).finish()); }

inline std::string file_sha256_hex(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open '" + path + "' for hashing");
    Sha256 h;
    char buf[1 << 16];
    while (in) {
        in.read(buf, sizeof buf);
        h.update(buf, static_cast<std::size_t>(in.gcount()));
    }
    return to_hex(h.finish());
}

} // namespace gaitxfer
