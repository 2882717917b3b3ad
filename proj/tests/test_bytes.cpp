#include <doctest.h>

#include <cstring>
#include <set>

#include "lwipsm/bytes.hpp"
#include "lwipsm/errors.hpp"
#include "lwipsm/hash.hpp"
#include "lwipsm/rng.hpp"

using namespace lwipsm;

TEST_SUITE("bytes") {
    TEST_CASE("hex round trip") {
        const Bytes b{0x00, 0x01, 0xab, 0xff};
        CHECK(to_hex(view(b)) == "0001abff");
        CHECK(from_hex("0001ABFF") == b);
        CHECK_THROWS_AS(from_hex("abc"), DecodeError);
        CHECK_THROWS_AS(from_hex("zz"), DecodeError);
    }

    TEST_CASE("encoder writes big-endian fixed-width scalars") {
        Encoder e;
        e.u8(0x7f).u16(0x0102).u32(0x03040506).u64(0x0708090a0b0c0d0eULL);
        const Bytes expect{0x7f, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13, 14};
        CHECK(e.data() == expect);
    }

    TEST_CASE("f64 is the IEEE-754 bit pattern, most significant byte first") {
        const double v = -2.5;
        std::uint64_t bits;
        std::memcpy(&bits, &v, 8);
        Encoder e;
        e.f64(v);
        REQUIRE(e.size() == 8);
        for (int i = 0; i < 8; ++i) CHECK(e.data()[i] == static_cast<std::uint8_t>(bits >> (56 - 8 * i)));
        Decoder d(view(e.data()));
        CHECK(d.f64() == v);
    }

    TEST_CASE("variable strings carry a 4-byte length") {
        Encoder e;
        e.str("ab");
        CHECK(e.data() == Bytes{0, 0, 0, 2, 'a', 'b'});
        Decoder d(view(e.data()));
        CHECK(d.str() == "ab");
        CHECK(d.done());
    }

    TEST_CASE("decoder rejects truncation and trailing bytes") {
        const Bytes b{0, 0, 0, 9, 'x'};
        Decoder d(view(b));
        CHECK_THROWS_AS(d.bytes(), DecodeError);
        const Bytes c{1, 2};
        Decoder d2(view(c));
        d2.u8();
        CHECK_THROWS_AS(d2.expect_done(), DecodeError);
        Decoder d3(view(c));
        CHECK_THROWS_AS(d3.u32(), DecodeError);
    }

    TEST_CASE("contains") {
        const Bytes h{1, 2, 3, 4, 5};
        CHECK(contains(view(h), view(Bytes{3, 4})));
        CHECK_FALSE(contains(view(h), view(Bytes{4, 3})));
        CHECK(contains(view(h), view(Bytes{})));
    }
}

TEST_SUITE("hash") {
    TEST_CASE("SHA-256 known answer") {
        CHECK(to_hex(view(sha256(view(std::string_view("abc"))))) ==
              "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
        CHECK(sha256(view(std::string_view("ab")), view(std::string_view("c"))) ==
              sha256(view(std::string_view("abc"))));
    }

    TEST_CASE("HMAC-SHA-256 test vectors") {
        const Bytes key1(20, 0x0b);
        CHECK(to_hex(view(hmac_sha256(view(key1), view(std::string_view("Hi There"))))) ==
              "b0344c61d8db38535ca8afceaf0bf12b881dc200c9833da726e9376c2e32cff7");
        CHECK(to_hex(view(hmac_sha256(view(std::string_view("Jefe")),
                                      view(std::string_view("what do ya want for nothing?"))))) ==
              "5bdcc146bf60754e6a042426089575c75a003f089d2739839dec58b964ec3843");
    }
}

TEST_SUITE("rng") {
    TEST_CASE("same seed, same stream") {
        Rng a(42), b(42), c(43);
        const auto x = a.next_u64();
        CHECK(x == b.next_u64());
        CHECK(x != c.next_u64());
    }

    TEST_CASE("forks are independent of the parent's position") {
        Rng a(7);
        Rng f1 = a.fork("x");
        a.next_u64();
        Rng f2 = a.fork("x");
        CHECK(f1.next_u64() == f2.next_u64());
        CHECK(a.fork("x").next_u64() != a.fork("y").next_u64());
    }

    TEST_CASE("uniform stays in range and covers it") {
        Rng r(1);
        std::set<std::uint64_t> seen;
        for (int i = 0; i < 2000; ++i) {
            auto v = r.uniform(10);
            REQUIRE(v < 10);
            seen.insert(v);
        }
        CHECK(seen.size() == 10);
        for (int i = 0; i < 1000; ++i) {
            const double u = r.uniform01();
            REQUIRE(u >= 0.0);
            REQUIRE(u < 1.0);
        }
        CHECK_FALSE(r.chance(0.0));
        CHECK(r.chance(1.0));
    }

    TEST_CASE("normal draws have the requested moments") {
        Rng r(3);
        double s = 0, s2 = 0;
        const int n = 200000;
        for (int i = 0; i < n; ++i) {
            const double x = r.normal(1.0, 2.0);
            s += x;
            s2 += x * x;
        }
        const double mean = s / n;
        const double var = s2 / n - mean * mean;
        CHECK(mean == doctest::Approx(1.0).epsilon(0.02));
        CHECK(var == doctest::Approx(4.0).epsilon(0.02));
    }
}
