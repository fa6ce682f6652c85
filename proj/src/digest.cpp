#include "rankforge/digest.hpp"

#include <array>
#include <cstdio>

#include <openssl/sha.h>

namespace rankforge {

std::string sha256_hex(std::string_view bytes) {
    std::array<unsigned char, SHA256_DIGEST_LENGTH> digest{};
    SHA256(reinterpret_cast<const unsigned char*>(bytes.data()), bytes.size(), digest.data());
    std::string hex(digest.size() * 2, '0');
    for (std::size_t i = 0; i < digest.size(); ++i) {
        std::snprintf(&hex[2 * i], 3, "%02x", digest[i]);
    }
    return hex;
}

}  // namespace rankforge
