#include "crashfix/hash.hpp"

#include <openssl/evp.h>

#include <array>
#include <memory>
#include <stdexcept>

namespace crashfix {

    std::string sha256_hex(std::string_view data) {
        std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx{EVP_MD_CTX_new(), &EVP_MD_CTX_free};
        std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
        unsigned int len = 0;
        if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1 ||
            EVP_DigestUpdate(ctx.get(), data.data(), data.size()) != 1 ||
            EVP_DigestFinal_ex(ctx.get(), digest.data(), &len) != 1)
            throw std::runtime_error("sha256 failed");

        static constexpr char hex[] = "0123456789abcdef";
        std::string out;
        out.reserve(len * 2);
        for (unsigned int i = 0; i < len; ++i) {
            out += hex[digest[i] >> 4];
            out += hex[digest[i] & 0xf];
        }
        return out;
    }

}  // namespace crashfix
