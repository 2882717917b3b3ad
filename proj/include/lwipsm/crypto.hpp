#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "lwipsm/bigint.hpp"
#include "lwipsm/bytes.hpp"

namespace lwipsm {

class Rng;

// ---------------------------------------------------------------------------
// RSA keys
// ---------------------------------------------------------------------------

/// Supported modulus sizes. 128 and 256 bits are breakable and exist only to
/// reproduce the benchmark axis; never use them for anything real.
bool supported_modulus_bits(int bits);

struct PublicKey {
    BigInt e;
    BigInt n;
    std::string key_id;

    int bits() const { return n.num_bits(); }
    std::size_t modulus_bytes() const { return n.num_bytes(); }
};

struct PrivateKey {
    BigInt d;
    BigInt n;
    std::string key_id;
};

struct KeyPair {
    int modulus_bits = 0;
    PublicKey pub;
    PrivateKey priv;
    // Retained so the invariants e*d = 1 (mod phi) can be checked.
    BigInt p;
    BigInt q;

    BigInt phi() const { return (p - 1) * (q - 1); }
};

/// Throws ConfigError for bit lengths outside supported_modulus_bits().
KeyPair keygen(int bits, Rng& rng, std::string key_id = {});

// ---------------------------------------------------------------------------
// Signatures (RSA-FDH) and blind signatures
// ---------------------------------------------------------------------------

struct Signature {
    BigInt value;
    std::string signer_key_id;
};

/// Full-domain hash of `message` into Z_n.
BigInt fdh(ByteView message, const BigInt& n);

Signature sign(const PrivateKey& sk, ByteView message);
/// Never throws; any malformed input simply fails to verify.
bool verify(const PublicKey& pk, ByteView message, const Signature& sig);

struct BlindingFactor {
    BigInt r;
    BigInt r_inv;
    /// r^e mod n: the multiplicative blind applied to FDH(m).
    BigInt r_e;
    BigInt n;
};

struct BlindedMessage {
    BigInt blinded;
    BlindingFactor bf;
};

/// blinded = FDH(m) * r^e mod n with r sampled coprime to n.
BlindedMessage blind(ByteView message, const PublicKey& pk, Rng& rng);
/// The signer only ever sees an integer.
Signature sign_blinded(const BigInt& blinded, const PrivateKey& sk);
Signature unblind(const Signature& blind_sig, const BlindingFactor& bf);

// ---------------------------------------------------------------------------
// Symmetric: MAC and shared keys
// ---------------------------------------------------------------------------

struct SharedKey {
    Digest bytes{};
    friend bool operator==(const SharedKey&, const SharedKey&) = default;
};

struct MacTag {
    Digest bytes{};
    friend bool operator==(const MacTag&, const MacTag&) = default;
};

SharedKey generate_shared_key(Rng& rng);
/// HMAC-SHA-256 over the message.
MacTag mac(const SharedKey& key, ByteView message);
/// Constant-time comparison.
bool mac_equal(const MacTag& a, const MacTag& b);

// ---------------------------------------------------------------------------
// Public-key envelopes
// ---------------------------------------------------------------------------

/// Hybrid encryption: an RSA-wrapped random integer x (RSA-KEM) keys
/// AES-256-GCM over the body. Works for every supported modulus size.
struct Envelope {
    static constexpr std::size_t tag_size = 16;

    BigInt wrapped_key;
    Bytes body;
    std::array<std::uint8_t, tag_size> tag{};

    Bytes encode() const;
    static Envelope decode(ByteView bytes);
    std::size_t encoded_size() const;
};

/// Encoded envelope size needed to carry `plaintext_len` bytes under `pk`.
std::size_t envelope_min_size(std::size_t plaintext_len, const PublicKey& pk);

/// Envelope size for a message class that occupies `blocks` modulus-sized
/// blocks on the wire, growing by whole blocks if the plaintext does not fit.
std::size_t envelope_block_size(std::size_t plaintext_len, const PublicKey& pk, std::size_t blocks);

/// Encrypts `plaintext` to `pk`. With a non-zero `target_size` the body is
/// zero-padded so that encode().size() == target_size exactly.
Envelope envelope_encrypt(const PublicKey& pk, ByteView plaintext, Rng& rng, std::size_t target_size = 0);
/// Throws DecryptionError on a wrong key or any corruption.
Bytes envelope_decrypt(const PrivateKey& sk, const Envelope& env);

// ---------------------------------------------------------------------------
// Hash-chain credentials
// ---------------------------------------------------------------------------

struct CredentialChain {
    std::vector<Digest> links;

    std::size_t size() const { return links.size(); }
    const Digest& seed() const { return links.front(); }
    const Digest& last() const { return links.back(); }
};

/// links[0] = seed, links[i] = H(links[i-1]). Throws InvalidParameter for n == 0.
CredentialChain build_chain(const Digest& seed, std::size_t n);

/// True when `presented` is the link just before `last_validated`, i.e. H(presented) == last_validated.
bool chain_extends(const Digest& presented, const Digest& last_validated);

/// Walks a chain back to front from its signed last link.
class ChainVerifier {
public:
    explicit ChainVerifier(const Digest& anchor) : current_(anchor) {}
    /// Advances on success; a rejected link leaves the state unchanged.
    bool accept(const Digest& presented);
    const Digest& current() const { return current_; }
    std::size_t accepted() const { return accepted_; }

private:
    Digest current_;
    std::size_t accepted_ = 0;
};

// Canonical encoding helpers for crypto values.
void encode_bigint(Encoder& e, const BigInt& v);
BigInt decode_bigint(Decoder& d);
inline void encode_signature(Encoder& e, const Signature& s) { encode_bigint(e, s.value); }
Signature decode_signature(Decoder& d, std::string signer_key_id = {});

}  // namespace lwipsm
