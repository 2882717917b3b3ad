#include <doctest.h>

#include "lwipsm/crypto.hpp"
#include "lwipsm/errors.hpp"
#include "lwipsm/hash.hpp"
#include "lwipsm/rng.hpp"

using namespace lwipsm;

namespace {

const KeyPair& test_keys() {
    static const KeyPair kp = [] {
        Rng r(2024);
        return keygen(512, r, "test");
    }();
    return kp;
}

}  // namespace

TEST_SUITE("crypto") {
    TEST_CASE("key generation invariants") {
        const auto& kp = test_keys();
        CHECK(kp.pub.bits() == 512);
        CHECK(kp.p * kp.q == kp.pub.n);
        CHECK((kp.pub.e * kp.priv.d % kp.phi()).is_one());
        CHECK(kp.p.is_probable_prime());
        CHECK(kp.q.is_probable_prime());
    }

    TEST_CASE("supported sizes") {
        for (int b : {128, 256, 512, 1024, 2048}) CHECK(supported_modulus_bits(b));
        CHECK_FALSE(supported_modulus_bits(100));
        Rng r(1);
        CHECK_THROWS_AS(keygen(100, r), ConfigError);
        for (int b : {128, 256}) CHECK(keygen(b, r).pub.bits() == b);
    }

    TEST_CASE("sign and verify") {
        const auto& kp = test_keys();
        const Bytes msg{1, 2, 3};
        const auto sig = sign(kp.priv, view(msg));
        CHECK(verify(kp.pub, view(msg), sig));
        CHECK_FALSE(verify(kp.pub, view(Bytes{1, 2, 4}), sig));
        Signature bad = sig;
        bad.value = bad.value + BigInt(1);
        CHECK_FALSE(verify(kp.pub, view(msg), bad));
        bad.value = kp.pub.n + BigInt(5);
        CHECK_FALSE(verify(kp.pub, view(msg), bad));
    }

    TEST_CASE("signature is FDH(m)^d, checked with raw modular arithmetic") {
        const auto& kp = test_keys();
        const Bytes msg{9, 9};
        const auto h = fdh(view(msg), kp.pub.n);
        CHECK(h < kp.pub.n);
        CHECK(sign(kp.priv, view(msg)).value == h.mod_exp(kp.priv.d, kp.priv.n));
    }

    TEST_CASE("unblinded signature equals the direct signature") {
        const auto& kp = test_keys();
        Rng r(77);
        const Bytes msg{4, 5, 6};
        const auto bm = blind(view(msg), kp.pub, r);
        CHECK(bm.bf.r_e == bm.bf.r.mod_exp(kp.pub.e, kp.pub.n));
        CHECK((bm.bf.r * bm.bf.r_inv % kp.pub.n).is_one());
        CHECK(bm.blinded != fdh(view(msg), kp.pub.n));
        const auto sig = unblind(sign_blinded(bm.blinded, kp.priv), bm.bf);
        CHECK(verify(kp.pub, view(msg), sig));
        CHECK(sig.value == sign(kp.priv, view(msg)).value);
    }

    TEST_CASE("envelope round trip and exact sizing") {
        const auto& kp = test_keys();
        Rng r(3);
        const Bytes plain(100, 0x5a);
        const auto env = envelope_encrypt(kp.pub, view(plain), r);
        CHECK(envelope_decrypt(kp.priv, env) == plain);
        CHECK(env.encode().size() == env.encoded_size());
        CHECK(Envelope::decode(view(env.encode())).encode() == env.encode());

        const std::size_t target = envelope_block_size(plain.size(), kp.pub, 4);
        CHECK(target == 4 * kp.pub.modulus_bytes());
        const auto padded = envelope_encrypt(kp.pub, view(plain), r, target);
        CHECK(padded.encode().size() == target);
        CHECK(envelope_decrypt(kp.priv, padded) == plain);
        CHECK(envelope_block_size(1000, kp.pub, 2) % kp.pub.modulus_bytes() == 0);
        CHECK(envelope_block_size(1000, kp.pub, 2) >= envelope_min_size(1000, kp.pub));
    }

    TEST_CASE("envelope rejects the wrong key and corruption") {
        const auto& kp = test_keys();
        Rng r(4);
        const auto other = keygen(512, r, "other");
        const Bytes plain{1, 2, 3};
        const auto env = envelope_encrypt(kp.pub, view(plain), r);
        CHECK_THROWS_AS(envelope_decrypt(other.priv, env), DecryptionError);
        auto bad = env;
        bad.body[0] ^= 1;
        CHECK_THROWS_AS(envelope_decrypt(kp.priv, bad), DecryptionError);
        bad = env;
        bad.tag[3] ^= 0x80;
        CHECK_THROWS_AS(envelope_decrypt(kp.priv, bad), DecryptionError);
    }

    TEST_CASE("MAC is HMAC-SHA-256 under the shared key") {
        Rng r(8);
        const auto k = generate_shared_key(r);
        const Bytes msg{7, 7, 7};
        const auto tag = mac(k, view(msg));
        CHECK(tag.bytes == hmac_sha256(view(k.bytes), view(msg)));
        CHECK(mac_equal(tag, tag));
        MacTag other = tag;
        other.bytes[31] ^= 1;
        CHECK_FALSE(mac_equal(tag, other));
    }

    TEST_CASE("hash chain links") {
        Digest seed{};
        seed[0] = 1;
        const auto c = build_chain(seed, 5);
        REQUIRE(c.size() == 5);
        CHECK(c.seed() == seed);
        for (std::size_t i = 1; i < 5; ++i) CHECK(c.links[i] == sha256(view(c.links[i - 1])));
        CHECK_THROWS_AS(build_chain(seed, 0), InvalidParameter);
    }

    TEST_CASE("chain verifier walks back from the anchor") {
        Digest seed{};
        const auto c = build_chain(seed, 4);
        ChainVerifier v(c.last());
        CHECK_FALSE(v.accept(c.links[1]));
        CHECK(v.accept(c.links[2]));
        CHECK_FALSE(v.accept(c.links[2]));
        CHECK(v.accept(c.links[1]));
        CHECK(v.accept(c.links[0]));
        CHECK(v.accepted() == 3);
    }

    TEST_CASE("bigint and signature encoding") {
        Encoder e;
        encode_bigint(e, BigInt(0x1234));
        CHECK(e.data() == Bytes{0, 0, 0, 2, 0x12, 0x34});
        Decoder d(view(e.data()));
        CHECK(decode_bigint(d) == BigInt(0x1234));
    }
}
