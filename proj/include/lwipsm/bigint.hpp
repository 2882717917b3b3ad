#pragma once

#include <cstdint>
#include <memory>
#include <string>

#include "lwipsm/bytes.hpp"

struct bignum_st;

namespace lwipsm {

class Rng;

/// Arbitrary-precision non-negative integer; a value-semantic wrapper over an
/// OpenSSL BIGNUM.
class BigInt {
public:
    BigInt();
    BigInt(std::uint64_t v);  // NOLINT(google-explicit-constructor)
    BigInt(const BigInt& other);
    BigInt(BigInt&&) noexcept = default;
    BigInt& operator=(const BigInt& other);
    BigInt& operator=(BigInt&&) noexcept = default;
    ~BigInt();

    static BigInt from_bytes(ByteView big_endian);
    static BigInt from_hex(const std::string& hex);
    /// Uniform in [0, bound).
    static BigInt random_below(const BigInt& bound, Rng& rng);
    /// Uniform with exactly `bits` bits where the top two bits are set and the value is odd.
    static BigInt random_odd_top2(int bits, Rng& rng);

    /// Minimal big-endian magnitude (empty for zero).
    Bytes to_bytes() const;
    /// Left-zero-padded to `width` bytes; throws if it does not fit.
    Bytes to_bytes(std::size_t width) const;
    std::string to_hex() const;

    int num_bits() const;
    std::size_t num_bytes() const { return static_cast<std::size_t>((num_bits() + 7) / 8); }
    bool is_zero() const;
    bool is_one() const;
    bool is_odd() const;

    BigInt operator+(const BigInt& rhs) const;
    BigInt operator-(const BigInt& rhs) const;
    BigInt operator*(const BigInt& rhs) const;
    BigInt operator%(const BigInt& mod) const;

    BigInt mod_mul(const BigInt& rhs, const BigInt& mod) const;
    BigInt mod_exp(const BigInt& exp, const BigInt& mod) const;
    /// Throws InvalidParameter when no inverse exists.
    BigInt mod_inverse(const BigInt& mod) const;
    BigInt gcd(const BigInt& rhs) const;
    /// Probabilistic primality (OpenSSL's default round count).
    bool is_probable_prime() const;

    friend int compare(const BigInt& a, const BigInt& b);
    friend bool operator==(const BigInt& a, const BigInt& b) { return compare(a, b) == 0; }
    friend bool operator<(const BigInt& a, const BigInt& b) { return compare(a, b) < 0; }
    friend bool operator<=(const BigInt& a, const BigInt& b) { return compare(a, b) <= 0; }
    friend bool operator>(const BigInt& a, const BigInt& b) { return compare(a, b) > 0; }
    friend bool operator>=(const BigInt& a, const BigInt& b) { return compare(a, b) >= 0; }

    const bignum_st* raw() const { return bn_.get(); }

private:
    struct Free {
        void operator()(bignum_st* p) const;
    };
    std::unique_ptr<bignum_st, Free> bn_;
};

}  // namespace lwipsm
