#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace lwipsm {

using Bytes = std::vector<std::uint8_t>;
using ByteView = std::span<const std::uint8_t>;
using Digest = std::array<std::uint8_t, 32>;

std::string to_hex(ByteView data);
Bytes from_hex(std::string_view hex);

inline ByteView view(const Bytes& b) { return {b.data(), b.size()}; }
template <std::size_t N>
ByteView view(const std::array<std::uint8_t, N>& a) { return {a.data(), a.size()}; }
inline ByteView view(std::string_view s) {
    return {reinterpret_cast<const std::uint8_t*>(s.data()), s.size()};
}

/// True if `needle` occurs anywhere in `haystack`.
bool contains(ByteView haystack, ByteView needle);

/// Canonical binary encoder.
///
/// Field order is declaration order. Fixed-width scalars are big-endian;
/// arbitrary-precision integers are a 4-byte length followed by the minimal
/// big-endian magnitude; variable byte strings carry a 4-byte big-endian
/// length prefix; fixed-size arrays (digests, UUIDs) are written raw.
class Encoder {
public:
    Encoder& u8(std::uint8_t v);
    Encoder& u16(std::uint16_t v);
    Encoder& u32(std::uint32_t v);
    Encoder& u64(std::uint64_t v);
    Encoder& i64(std::int64_t v);
    /// IEEE-754 binary64, big-endian bit pattern.
    Encoder& f64(double v);
    Encoder& bytes(ByteView v);
    Encoder& str(std::string_view v) { return bytes(view(v)); }
    Encoder& raw(ByteView v);
    template <std::size_t N>
    Encoder& fixed(const std::array<std::uint8_t, N>& a) { return raw(view(a)); }

    std::size_t size() const { return out_.size(); }
    const Bytes& data() const& { return out_; }
    Bytes take() && { return std::move(out_); }

private:
    Bytes out_;
};

class Decoder {
public:
    explicit Decoder(ByteView in) : in_(in) {}

    std::uint8_t u8();
    std::uint16_t u16();
    std::uint32_t u32();
    std::uint64_t u64();
    std::int64_t i64();
    double f64();
    Bytes bytes();
    std::string str();
    ByteView raw(std::size_t n);
    template <std::size_t N>
    std::array<std::uint8_t, N> fixed() {
        std::array<std::uint8_t, N> a{};
        auto r = raw(N);
        std::copy(r.begin(), r.end(), a.begin());
        return a;
    }

    std::size_t remaining() const { return in_.size() - pos_; }
    bool done() const { return remaining() == 0; }
    /// Throws DecodeError unless every byte was consumed.
    void expect_done() const;
    /// Throws DecodeError unless all remaining bytes are zero padding.
    void expect_zero_padding() const;

private:
    ByteView need(std::size_t n);

    ByteView in_;
    std::size_t pos_ = 0;
};

}  // namespace lwipsm
