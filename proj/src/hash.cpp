#include "lwipsm/hash.hpp"

#include <openssl/evp.h>
#include <openssl/hmac.h>
#include <openssl/sha.h>

#include "lwipsm/errors.hpp"

namespace lwipsm {

Digest sha256(ByteView data) {
    Digest out{};
    SHA256(data.data(), data.size(), out.data());
    return out;
}

Digest sha256(ByteView a, ByteView b) {
    EVP_MD_CTX* ctx = EVP_MD_CTX_new();
    Digest out{};
    const bool ok = ctx && EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr) &&
                    EVP_DigestUpdate(ctx, a.data(), a.size()) && EVP_DigestUpdate(ctx, b.data(), b.size()) &&
                    EVP_DigestFinal_ex(ctx, out.data(), nullptr);
    EVP_MD_CTX_free(ctx);
    if (!ok) throw Error("SHA-256 failed");
    return out;
}

Digest hmac_sha256(ByteView key, ByteView message) {
    Digest out{};
    unsigned int len = 0;
    if (!HMAC(EVP_sha256(), key.data(), static_cast<int>(key.size()), message.data(), message.size(),
              out.data(), &len) ||
        len != out.size())
        throw Error("HMAC-SHA-256 failed");
    return out;
}

}  // namespace lwipsm
