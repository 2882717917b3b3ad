#include <doctest.h>

#include <gmp.h>

#include "lwipsm/bigint.hpp"
#include "lwipsm/errors.hpp"
#include "lwipsm/rng.hpp"

using namespace lwipsm;

namespace {

struct Mpz {
    mpz_t v;
    Mpz() { mpz_init(v); }
    explicit Mpz(const Bytes& be) {
        mpz_init(v);
        if (!be.empty()) mpz_import(v, be.size(), 1, 1, 1, 0, be.data());
    }
    ~Mpz() { mpz_clear(v); }
    Mpz(const Mpz&) = delete;
    Bytes bytes() const {
        Bytes out((mpz_sizeinbase(v, 2) + 7) / 8);
        size_t count = 0;
        if (mpz_sgn(v) != 0) mpz_export(out.data(), &count, 1, 1, 1, 0, v);
        out.resize(count);
        return out;
    }
};

Bytes random_bytes(Rng& r, std::size_t n) {
    auto b = r.bytes(n);
    if (b[0] == 0) b[0] = 1;
    return b;
}

}  // namespace

TEST_SUITE("bigint") {
    TEST_CASE("arithmetic agrees with GMP") {
        Rng r(11);
        for (int i = 0; i < 200; ++i) {
            const auto ab = random_bytes(r, 1 + r.uniform(64));
            const auto bb = random_bytes(r, 1 + r.uniform(64));
            auto mb = random_bytes(r, 1 + r.uniform(48));
            mb.back() |= 1;
            const BigInt a = BigInt::from_bytes(view(ab)), b = BigInt::from_bytes(view(bb)),
                         m = BigInt::from_bytes(view(mb));
            Mpz A(ab), B(bb), M(mb), out;

            mpz_add(out.v, A.v, B.v);
            CHECK((a + b).to_bytes() == out.bytes());
            mpz_mul(out.v, A.v, B.v);
            CHECK((a * b).to_bytes() == out.bytes());
            mpz_mod(out.v, A.v, M.v);
            CHECK((a % m).to_bytes() == out.bytes());
            mpz_powm(out.v, A.v, B.v, M.v);
            CHECK(a.mod_exp(b, m).to_bytes() == out.bytes());
            mpz_gcd(out.v, A.v, B.v);
            CHECK(a.gcd(b).to_bytes() == out.bytes());
            if (a >= b) {
                mpz_sub(out.v, A.v, B.v);
                CHECK((a - b).to_bytes() == out.bytes());
            }
            if (mpz_invert(out.v, A.v, M.v) != 0 && mpz_cmp_ui(M.v, 1) > 0)
                CHECK(a.mod_inverse(m).to_bytes() == out.bytes());
        }
    }

    TEST_CASE("primality agrees with GMP") {
        Rng r(5);
        int primes = 0;
        for (int i = 0; i < 300; ++i) {
            const auto xb = random_bytes(r, 8);
            Mpz X(xb);
            const bool gmp_prime = mpz_probab_prime_p(X.v, 40) != 0;
            CHECK(BigInt::from_bytes(view(xb)).is_probable_prime() == gmp_prime);
            primes += gmp_prime;
        }
        CHECK(primes > 0);
    }

    TEST_CASE("encoding") {
        CHECK(BigInt(0).to_bytes().empty());
        CHECK(BigInt(0x0102).to_bytes() == Bytes{1, 2});
        CHECK(BigInt(0x0102).to_bytes(4) == Bytes{0, 0, 1, 2});
        CHECK_THROWS(BigInt(0x010203).to_bytes(2));
        CHECK(BigInt::from_hex("ff") == BigInt(255));
        CHECK(BigInt(255).num_bits() == 8);
        CHECK_THROWS_AS(BigInt(4).mod_inverse(BigInt(8)), InvalidParameter);
    }

    TEST_CASE("random_below stays below the bound") {
        Rng r(9);
        const BigInt bound(1000);
        for (int i = 0; i < 500; ++i) CHECK(BigInt::random_below(bound, r) < bound);
        const auto v = BigInt::random_odd_top2(64, r);
        CHECK(v.num_bits() == 64);
        CHECK(v.is_odd());
    }
}
