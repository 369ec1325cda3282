// SPDX-License-Identifier: Apache-2.0
#include "gensynth/digest.hpp"

#include <array>
#include <cstdio>

#include <openssl/sha.h>

namespace gensynth {

std::string sha256_hex(std::string_view bytes) {
    std::array<unsigned char, SHA256_DIGEST_LENGTH> md{};
    SHA256(reinterpret_cast<const unsigned char*>(bytes.data()), bytes.size(), md.data());
    std::string hex(md.size() * 2, '0');
    static constexpr char digits[] = "0123456789abcdef";
    for (std::size_t i = 0; i < md.size(); ++i) {
        hex[2 * i] = digits[md[i] >> 4];
        hex[2 * i + 1] = digits[md[i] & 0xF];
    }
    return hex;
}

}  // namespace gensynth
