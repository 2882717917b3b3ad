#include "lwipsm/bytes.hpp"

#include <algorithm>
#include <bit>
#include <cstring>

#include "lwipsm/errors.hpp"

namespace lwipsm {

std::string to_hex(ByteView data) {
    static constexpr char digits[] = "0123456789abcdef";
    std::string s;
    s.reserve(data.size() * 2);
    for (auto b : data) {
        s.push_back(digits[b >> 4]);
        s.push_back(digits[b & 0x0f]);
    }
    return s;
}

Bytes from_hex(std::string_view hex) {
    auto nibble = [](char c) -> int {
        if (c >= '0' && c <= '9') return c - '0';
        if (c >= 'a' && c <= 'f') return c - 'a' + 10;
        if (c >= 'A' && c <= 'F') return c - 'A' + 10;
        throw DecodeError("invalid hex digit");
    };
    if (hex.size() % 2 != 0) throw DecodeError("odd-length hex string");
    Bytes out(hex.size() / 2);
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = static_cast<std::uint8_t>(nibble(hex[2 * i]) << 4 | nibble(hex[2 * i + 1]));
    return out;
}

bool contains(ByteView haystack, ByteView needle) {
    if (needle.empty()) return true;
    return std::search(haystack.begin(), haystack.end(), needle.begin(), needle.end()) !=
           haystack.end();
}

Encoder& Encoder::u8(std::uint8_t v) {
    out_.push_back(v);
    return *this;
}

Encoder& Encoder::u16(std::uint16_t v) {
    out_.push_back(static_cast<std::uint8_t>(v >> 8));
    out_.push_back(static_cast<std::uint8_t>(v));
    return *this;
}

Encoder& Encoder::u32(std::uint32_t v) {
    for (int shift = 24; shift >= 0; shift -= 8) out_.push_back(static_cast<std::uint8_t>(v >> shift));
    return *this;
}

Encoder& Encoder::u64(std::uint64_t v) {
    for (int shift = 56; shift >= 0; shift -= 8) out_.push_back(static_cast<std::uint8_t>(v >> shift));
    return *this;
}

Encoder& Encoder::i64(std::int64_t v) { return u64(static_cast<std::uint64_t>(v)); }

Encoder& Encoder::f64(double v) { return u64(std::bit_cast<std::uint64_t>(v)); }

Encoder& Encoder::bytes(ByteView v) {
    u32(static_cast<std::uint32_t>(v.size()));
    return raw(v);
}

Encoder& Encoder::raw(ByteView v) {
    out_.insert(out_.end(), v.begin(), v.end());
    return *this;
}

ByteView Decoder::need(std::size_t n) {
    if (remaining() < n) throw DecodeError("truncated encoding");
    auto r = in_.subspan(pos_, n);
    pos_ += n;
    return r;
}

std::uint8_t Decoder::u8() { return need(1)[0]; }

std::uint16_t Decoder::u16() {
    auto b = need(2);
    return static_cast<std::uint16_t>(b[0] << 8 | b[1]);
}

std::uint32_t Decoder::u32() {
    auto b = need(4);
    std::uint32_t v = 0;
    for (auto x : b) v = v << 8 | x;
    return v;
}

std::uint64_t Decoder::u64() {
    auto b = need(8);
    std::uint64_t v = 0;
    for (auto x : b) v = v << 8 | x;
    return v;
}

std::int64_t Decoder::i64() { return static_cast<std::int64_t>(u64()); }

double Decoder::f64() { return std::bit_cast<double>(u64()); }

Bytes Decoder::bytes() {
    auto n = u32();
    auto b = need(n);
    return Bytes(b.begin(), b.end());
}

std::string Decoder::str() {
    auto n = u32();
    auto b = need(n);
    return std::string(b.begin(), b.end());
}

ByteView Decoder::raw(std::size_t n) { return need(n); }

void Decoder::expect_done() const {
    if (!done()) throw DecodeError("trailing bytes after encoding");
}

void Decoder::expect_zero_padding() const {
    auto rest = in_.subspan(pos_);
    if (std::any_of(rest.begin(), rest.end(), [](std::uint8_t b) { return b != 0; }))
        throw DecodeError("non-zero padding");
}

}  // namespace lwipsm
