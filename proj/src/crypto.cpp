#include "lwipsm/crypto.hpp"

#include <openssl/crypto.h>
#include <openssl/evp.h>

#include <algorithm>
#include <memory>

#include "lwipsm/errors.hpp"
#include "lwipsm/hash.hpp"
#include "lwipsm/rng.hpp"

namespace lwipsm {

namespace {

constexpr std::uint64_t public_exponent = 65537;

BigInt find_prime(int bits, const BigInt& e, Rng& rng) {
    for (;;) {
        BigInt candidate = BigInt::random_odd_top2(bits, rng);
        // Walk odd numbers from the random start; restart if we overflow the width.
        for (int step = 0; step < 4096 && candidate.num_bits() == bits; ++step) {
            if (candidate.is_probable_prime() && (candidate - 1).gcd(e).is_one()) return candidate;
            candidate = candidate + 2;
        }
    }
}

struct CipherCtxFree {
    void operator()(EVP_CIPHER_CTX* c) const { EVP_CIPHER_CTX_free(c); }
};
using CipherCtx = std::unique_ptr<EVP_CIPHER_CTX, CipherCtxFree>;

struct SessionKeys {
    Digest key;
    std::array<std::uint8_t, 12> iv;
};

SessionKeys derive_session(const BigInt& x, std::size_t width) {
    const auto xb = x.to_bytes(width);
    SessionKeys s{};
    s.key = sha256(view(std::string_view("lwipsm-envelope-key")), view(xb));
    const auto ivd = sha256(view(std::string_view("lwipsm-envelope-iv")), view(xb));
    std::copy_n(ivd.begin(), s.iv.size(), s.iv.begin());
    return s;
}

void gcm_check(int ok) {
    if (ok != 1) throw Error("AES-256-GCM operation failed");
}

// Sizes of everything in an encoded envelope except the body bytes.
std::size_t envelope_overhead(std::size_t wrapped_len) {
    return 4 + wrapped_len + 4 + Envelope::tag_size;
}

// Body plaintext = u32 length || plaintext || zero padding.
constexpr std::size_t body_header = 4;

}  // namespace

bool supported_modulus_bits(int bits) {
    return bits == 128 || bits == 256 || bits == 512 || bits == 1024 || bits == 2048;
}

KeyPair keygen(int bits, Rng& rng, std::string key_id) {
    if (!supported_modulus_bits(bits))
        throw ConfigError("unsupported RSA modulus size: " + std::to_string(bits));
    const BigInt e(public_exponent);
    KeyPair kp;
    kp.modulus_bits = bits;
    for (;;) {
        kp.p = find_prime(bits / 2, e, rng);
        kp.q = find_prime(bits / 2, e, rng);
        if (kp.p == kp.q) continue;
        BigInt n = kp.p * kp.q;
        if (n.num_bits() != bits) continue;
        BigInt d = e.mod_inverse(kp.phi());
        kp.pub = PublicKey{e, n, key_id};
        kp.priv = PrivateKey{std::move(d), std::move(n), std::move(key_id)};
        return kp;
    }
}

BigInt fdh(ByteView message, const BigInt& n) {
    const std::size_t want = n.num_bytes() + 8;
    Bytes expanded;
    expanded.reserve(want + 32);
    for (std::uint32_t counter = 0; expanded.size() < want; ++counter) {
        Encoder prefix;
        prefix.str("lwipsm-fdh").u32(counter);
        auto block = sha256(view(prefix.data()), message);
        expanded.insert(expanded.end(), block.begin(), block.end());
    }
    expanded.resize(want);
    return BigInt::from_bytes(view(expanded)) % n;
}

Signature sign(const PrivateKey& sk, ByteView message) {
    return Signature{fdh(message, sk.n).mod_exp(sk.d, sk.n), sk.key_id};
}

bool verify(const PublicKey& pk, ByteView message, const Signature& sig) {
    if (sig.value >= pk.n) return false;
    return sig.value.mod_exp(pk.e, pk.n) == fdh(message, pk.n);
}

BlindedMessage blind(ByteView message, const PublicKey& pk, Rng& rng) {
    BlindingFactor bf;
    bf.n = pk.n;
    const BigInt two(2);
    for (;;) {
        bf.r = BigInt::random_below(pk.n, rng);
        if (bf.r < two) continue;
        if (bf.r.gcd(pk.n).is_one()) break;
    }
    bf.r_inv = bf.r.mod_inverse(pk.n);
    bf.r_e = bf.r.mod_exp(pk.e, pk.n);
    BigInt blinded = fdh(message, pk.n).mod_mul(bf.r_e, pk.n);
    return BlindedMessage{std::move(blinded), std::move(bf)};
}

Signature sign_blinded(const BigInt& blinded, const PrivateKey& sk) {
    return Signature{blinded.mod_exp(sk.d, sk.n), sk.key_id};
}

Signature unblind(const Signature& blind_sig, const BlindingFactor& bf) {
    return Signature{blind_sig.value.mod_mul(bf.r_inv, bf.n), blind_sig.signer_key_id};
}

SharedKey generate_shared_key(Rng& rng) { return SharedKey{rng.bytes<32>()}; }

MacTag mac(const SharedKey& key, ByteView message) {
    return MacTag{hmac_sha256(view(key.bytes), message)};
}

bool mac_equal(const MacTag& a, const MacTag& b) {
    return CRYPTO_memcmp(a.bytes.data(), b.bytes.data(), a.bytes.size()) == 0;
}

Bytes Envelope::encode() const {
    Encoder e;
    encode_bigint(e, wrapped_key);
    e.bytes(view(body)).fixed(tag);
    return std::move(e).take();
}

Envelope Envelope::decode(ByteView bytes) {
    Decoder d(bytes);
    Envelope env;
    env.wrapped_key = decode_bigint(d);
    env.body = d.bytes();
    env.tag = d.fixed<tag_size>();
    d.expect_done();
    return env;
}

std::size_t Envelope::encoded_size() const { return envelope_overhead(wrapped_key.num_bytes()) + body.size(); }

std::size_t envelope_min_size(std::size_t plaintext_len, const PublicKey& pk) {
    return envelope_overhead(pk.modulus_bytes()) + body_header + plaintext_len;
}

std::size_t envelope_block_size(std::size_t plaintext_len, const PublicKey& pk, std::size_t blocks) {
    const std::size_t k = pk.modulus_bytes();
    const std::size_t need = envelope_min_size(plaintext_len, pk);
    std::size_t size = blocks * k;
    while (size < need) size += k;
    return size;
}

Envelope envelope_encrypt(const PublicKey& pk, ByteView plaintext, Rng& rng, std::size_t target_size) {
    const std::size_t width = pk.modulus_bytes();
    BigInt x;
    do {
        x = BigInt::random_below(pk.n, rng);
    } while (x < BigInt(2));

    Envelope env;
    env.wrapped_key = x.mod_exp(pk.e, pk.n);

    std::size_t body_len = body_header + plaintext.size();
    if (target_size != 0) {
        const std::size_t fixed = envelope_overhead(env.wrapped_key.num_bytes());
        if (target_size < fixed + body_len)
            throw InvalidParameter("envelope target size too small for plaintext");
        body_len = target_size - fixed;
    }
    Bytes padded;
    padded.reserve(body_len);
    Encoder header;
    header.u32(static_cast<std::uint32_t>(plaintext.size()));
    padded = std::move(header).take();
    padded.insert(padded.end(), plaintext.begin(), plaintext.end());
    padded.resize(body_len, 0);

    const auto keys = derive_session(x, width);
    CipherCtx ctx(EVP_CIPHER_CTX_new());
    if (!ctx) throw std::bad_alloc();
    gcm_check(EVP_EncryptInit_ex(ctx.get(), EVP_aes_256_gcm(), nullptr, keys.key.data(), keys.iv.data()));
    env.body.resize(padded.size());
    int len = 0;
    gcm_check(EVP_EncryptUpdate(ctx.get(), env.body.data(), &len, padded.data(),
                                static_cast<int>(padded.size())));
    int fin = 0;
    gcm_check(EVP_EncryptFinal_ex(ctx.get(), env.body.data() + len, &fin));
    gcm_check(EVP_CIPHER_CTX_ctrl(ctx.get(), EVP_CTRL_GCM_GET_TAG, static_cast<int>(Envelope::tag_size),
                                  env.tag.data()));
    OPENSSL_cleanse(padded.data(), padded.size());
    return env;
}

Bytes envelope_decrypt(const PrivateKey& sk, const Envelope& env) {
    if (env.wrapped_key >= sk.n) throw DecryptionError("wrapped key out of range");
    const BigInt x = env.wrapped_key.mod_exp(sk.d, sk.n);
    const auto keys = derive_session(x, sk.n.num_bytes());

    CipherCtx ctx(EVP_CIPHER_CTX_new());
    if (!ctx) throw std::bad_alloc();
    gcm_check(EVP_DecryptInit_ex(ctx.get(), EVP_aes_256_gcm(), nullptr, keys.key.data(), keys.iv.data()));
    Bytes padded(env.body.size());
    int len = 0;
    gcm_check(EVP_DecryptUpdate(ctx.get(), padded.data(), &len, env.body.data(),
                                static_cast<int>(env.body.size())));
    auto tag = env.tag;
    gcm_check(EVP_CIPHER_CTX_ctrl(ctx.get(), EVP_CTRL_GCM_SET_TAG, static_cast<int>(tag.size()), tag.data()));
    int fin = 0;
    if (EVP_DecryptFinal_ex(ctx.get(), padded.data() + len, &fin) != 1)
        throw DecryptionError("envelope authentication failed");

    Decoder d(view(padded));
    const auto n = d.u32();
    if (n > d.remaining()) throw DecryptionError("envelope length header out of range");
    auto body = d.raw(n);
    d.expect_zero_padding();
    return Bytes(body.begin(), body.end());
}

bool chain_extends(const Digest& presented, const Digest& last_validated) {
    return sha256(view(presented)) == last_validated;
}

bool ChainVerifier::accept(const Digest& presented) {
    if (!chain_extends(presented, current_)) return false;
    current_ = presented;
    ++accepted_;
    return true;
}

CredentialChain build_chain(const Digest& seed, std::size_t n) {
    if (n == 0) throw InvalidParameter("credential chain length must be at least 1");
    CredentialChain chain;
    chain.links.reserve(n);
    chain.links.push_back(seed);
    for (std::size_t i = 1; i < n; ++i) chain.links.push_back(sha256(view(chain.links[i - 1])));
    return chain;
}

void encode_bigint(Encoder& e, const BigInt& v) { e.bytes(view(v.to_bytes())); }

BigInt decode_bigint(Decoder& d) {
    auto b = d.bytes();
    if (!b.empty() && b.front() == 0) throw DecodeError("non-minimal integer encoding");
    return BigInt::from_bytes(view(b));
}

Signature decode_signature(Decoder& d, std::string signer_key_id) {
    return Signature{decode_bigint(d), std::move(signer_key_id)};
}

}  // namespace lwipsm
