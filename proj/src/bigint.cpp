#include "lwipsm/bigint.hpp"

#include <openssl/bn.h>

#include <memory>

#include "lwipsm/errors.hpp"
#include "lwipsm/rng.hpp"

namespace lwipsm {

namespace {

struct CtxFree {
    void operator()(BN_CTX* c) const { BN_CTX_free(c); }
};

BN_CTX* ctx() {
    thread_local std::unique_ptr<BN_CTX, CtxFree> c(BN_CTX_new());
    return c.get();
}

void check(int ok, const char* what) {
    if (!ok) throw Error(std::string("bignum operation failed: ") + what);
}

}  // namespace

void BigInt::Free::operator()(bignum_st* p) const { BN_clear_free(p); }

BigInt::BigInt() : bn_(BN_new()) {
    if (!bn_) throw std::bad_alloc();
}

BigInt::BigInt(std::uint64_t v) : BigInt() { check(BN_set_word(bn_.get(), v), "set_word"); }

BigInt::BigInt(const BigInt& other) : bn_(BN_dup(other.bn_.get())) {
    if (!bn_) throw std::bad_alloc();
}

BigInt& BigInt::operator=(const BigInt& other) {
    if (this != &other) check(BN_copy(bn_.get(), other.bn_.get()) != nullptr, "copy");
    return *this;
}

BigInt::~BigInt() = default;

BigInt BigInt::from_bytes(ByteView big_endian) {
    BigInt r;
    check(BN_bin2bn(big_endian.data(), static_cast<int>(big_endian.size()), r.bn_.get()) != nullptr,
          "bin2bn");
    return r;
}

BigInt BigInt::from_hex(const std::string& hex) {
    BIGNUM* p = nullptr;
    if (!BN_hex2bn(&p, hex.c_str())) throw DecodeError("invalid hex integer");
    BigInt r;
    r.bn_.reset(p);
    return r;
}

BigInt BigInt::random_below(const BigInt& bound, Rng& rng) {
    if (bound.is_zero()) throw InvalidParameter("random_below: zero bound");
    // 64 extra bits make the modular bias negligible.
    const auto width = bound.num_bytes() + 8;
    auto buf = rng.bytes(width);
    return from_bytes(view(buf)) % bound;
}

BigInt BigInt::random_odd_top2(int bits, Rng& rng) {
    if (bits < 2) throw InvalidParameter("random_odd_top2: need at least 2 bits");
    const auto width = static_cast<std::size_t>((bits + 7) / 8);
    auto buf = rng.bytes(width);
    const int excess = static_cast<int>(width * 8) - bits;
    buf[0] &= static_cast<std::uint8_t>(0xff >> excess);
    BigInt r = from_bytes(view(buf));
    check(BN_set_bit(r.bn_.get(), bits - 1), "set_bit");
    check(BN_set_bit(r.bn_.get(), bits - 2), "set_bit");
    check(BN_set_bit(r.bn_.get(), 0), "set_bit");
    return r;
}

Bytes BigInt::to_bytes() const {
    Bytes out(num_bytes());
    BN_bn2bin(bn_.get(), out.data());
    return out;
}

Bytes BigInt::to_bytes(std::size_t width) const {
    if (num_bytes() > width) throw InvalidParameter("integer does not fit requested width");
    Bytes out(width);
    check(BN_bn2binpad(bn_.get(), out.data(), static_cast<int>(width)) >= 0, "bn2binpad");
    return out;
}

std::string BigInt::to_hex() const {
    char* s = BN_bn2hex(bn_.get());
    std::string r(s);
    OPENSSL_free(s);
    return r;
}

int BigInt::num_bits() const { return BN_num_bits(bn_.get()); }
bool BigInt::is_zero() const { return BN_is_zero(bn_.get()); }
bool BigInt::is_one() const { return BN_is_one(bn_.get()); }
bool BigInt::is_odd() const { return BN_is_odd(bn_.get()); }

BigInt BigInt::operator+(const BigInt& rhs) const {
    BigInt r;
    check(BN_add(r.bn_.get(), bn_.get(), rhs.bn_.get()), "add");
    return r;
}

BigInt BigInt::operator-(const BigInt& rhs) const {
    if (*this < rhs) throw InvalidParameter("BigInt subtraction would go negative");
    BigInt r;
    check(BN_sub(r.bn_.get(), bn_.get(), rhs.bn_.get()), "sub");
    return r;
}

BigInt BigInt::operator*(const BigInt& rhs) const {
    BigInt r;
    check(BN_mul(r.bn_.get(), bn_.get(), rhs.bn_.get(), ctx()), "mul");
    return r;
}

BigInt BigInt::operator%(const BigInt& mod) const {
    BigInt r;
    check(BN_nnmod(r.bn_.get(), bn_.get(), mod.bn_.get(), ctx()), "nnmod");
    return r;
}

BigInt BigInt::mod_mul(const BigInt& rhs, const BigInt& mod) const {
    BigInt r;
    check(BN_mod_mul(r.bn_.get(), bn_.get(), rhs.bn_.get(), mod.bn_.get(), ctx()), "mod_mul");
    return r;
}

BigInt BigInt::mod_exp(const BigInt& exp, const BigInt& mod) const {
    BigInt r;
    check(BN_mod_exp(r.bn_.get(), bn_.get(), exp.bn_.get(), mod.bn_.get(), ctx()), "mod_exp");
    return r;
}

BigInt BigInt::mod_inverse(const BigInt& mod) const {
    BigInt r;
    if (!BN_mod_inverse(r.bn_.get(), bn_.get(), mod.bn_.get(), ctx()))
        throw InvalidParameter("no modular inverse");
    return r;
}

BigInt BigInt::gcd(const BigInt& rhs) const {
    BigInt r;
    check(BN_gcd(r.bn_.get(), bn_.get(), rhs.bn_.get(), ctx()), "gcd");
    return r;
}

bool BigInt::is_probable_prime() const {
    int res = BN_check_prime(bn_.get(), ctx(), nullptr);
    if (res < 0) throw Error("primality test failed");
    return res == 1;
}

int compare(const BigInt& a, const BigInt& b) { return BN_cmp(a.bn_.get(), b.bn_.get()); }

}  // namespace lwipsm
