#pragma once

#include <cstdint>
#include <limits>
#include <span>
#include <string_view>

#include "lwipsm/bytes.hpp"

namespace lwipsm {

/// Deterministic seeded generator: SHA-256 in counter mode over a 32-byte key.
///
/// Every random value in a simulation (primes, blinding factors, pseudonyms,
/// noise, relay paths) is drawn from one of these, so a fixed seed replays a
/// run bit for bit. Satisfies UniformRandomBitGenerator.
class Rng {
public:
    using result_type = std::uint64_t;

    explicit Rng(std::uint64_t seed);
    explicit Rng(const Digest& key) : key_(key) {}

    /// Independent child stream; depends only on this stream's key and the label.
    Rng fork(std::string_view label) const;

    void fill(std::span<std::uint8_t> out);
    template <std::size_t N>
    std::array<std::uint8_t, N> bytes() {
        std::array<std::uint8_t, N> a{};
        fill(a);
        return a;
    }
    Bytes bytes(std::size_t n);

    std::uint64_t next_u64();
    result_type operator()() { return next_u64(); }
    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

    /// Uniform integer in [0, bound), rejection-sampled; bound must be > 0.
    std::uint64_t uniform(std::uint64_t bound);
    /// Uniform double in [0, 1) with 53 random bits.
    double uniform01();
    /// Bernoulli(p).
    bool chance(double p);
    /// Gaussian draw by Box-Muller (stdlib-independent, so reproducible everywhere).
    double normal(double mean, double stddev);

private:
    void refill();

    Digest key_{};
    std::uint64_t counter_ = 0;
    Digest block_{};
    std::size_t used_ = block_.size();
    bool has_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace lwipsm
