#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>

#include <openssl/evp.h>

#include "canekit/errors.hpp"

namespace canekit {

using Md5Digest = std::array<std::uint8_t, 16>;

/// Standard MD5 of a byte buffer (OpenSSL EVP).
inline Md5Digest md5(std::span<const std::uint8_t> bytes) {
    Md5Digest out{};
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), out.data(), &len, EVP_md5(), nullptr) != 1 || len != out.size())
        throw std::runtime_error("MD5 digest failed");
    return out;
}

inline std::string to_hex(std::span<const std::uint8_t> bytes) {
    static constexpr char digits[] = "0123456789abcdef";
    std::string s;
    s.reserve(bytes.size() * 2);
    for (auto b : bytes) {
        s.push_back(digits[b >> 4]);
        s.push_back(digits[b & 0xF]);
    }
    return s;
}

inline std::string md5_hex(std::span<const std::uint8_t> bytes) { return to_hex(md5(bytes)); }

}  // namespace canekit
