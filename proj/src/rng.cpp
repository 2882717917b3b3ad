#include "lwipsm/rng.hpp"

#include <cmath>
#include <numbers>

#include "lwipsm/hash.hpp"

namespace lwipsm {

Rng::Rng(std::uint64_t seed) {
    Encoder e;
    e.str("lwipsm-rng").u64(seed);
    key_ = sha256(view(e.data()));
}

Rng Rng::fork(std::string_view label) const {
    Encoder e;
    e.str("fork").raw(view(key_)).str(label);
    return Rng(sha256(view(e.data())));
}

void Rng::refill() {
    Encoder e;
    e.raw(view(key_)).u64(counter_++);
    block_ = sha256(view(e.data()));
    used_ = 0;
}

void Rng::fill(std::span<std::uint8_t> out) {
    for (auto& b : out) {
        if (used_ == block_.size()) refill();
        b = block_[used_++];
    }
}

Bytes Rng::bytes(std::size_t n) {
    Bytes b(n);
    fill(b);
    return b;
}

std::uint64_t Rng::next_u64() {
    std::array<std::uint8_t, 8> b{};
    fill(b);
    std::uint64_t v = 0;
    for (auto x : b) v = v << 8 | x;
    return v;
}

std::uint64_t Rng::uniform(std::uint64_t bound) {
    const std::uint64_t limit = max() - max() % bound;
    for (;;) {
        auto v = next_u64();
        if (v < limit) return v % bound;
    }
}

double Rng::uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

bool Rng::chance(double p) {
    if (p <= 0.0) return false;
    if (p >= 1.0) return true;
    return uniform01() < p;
}

double Rng::normal(double mean, double stddev) {
    if (has_spare_) {
        has_spare_ = false;
        return mean + stddev * spare_;
    }
    double u1 = 0.0;
    do {
        u1 = uniform01();
    } while (u1 <= 0.0);
    const double u2 = uniform01();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * std::numbers::pi * u2;
    spare_ = radius * std::sin(theta);
    has_spare_ = true;
    return mean + stddev * radius * std::cos(theta);
}

}  // namespace lwipsm
