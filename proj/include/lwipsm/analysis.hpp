#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "lwipsm/bytes.hpp"

namespace lwipsm {

struct SampleStats {
    std::size_t n = 0;
    double mean = 0.0;
    /// Sample standard deviation (n - 1 denominator).
    double stddev = 0.0;
};

/// Welford's single-pass mean and variance.
SampleStats sample_stats(std::span<const double> xs);

struct ChiSquare {
    double statistic = 0.0;
    std::size_t dof = 0;
    double p_value = 1.0;
};

/// Goodness of fit of `counts` against the uniform distribution.
ChiSquare chi_square_uniform(std::span<const std::size_t> counts);

/// Plug-in estimate, in bits, of I(X;Y) from observed (x, y) pairs.
double mutual_information(std::span<const std::pair<std::string, std::string>> pairs);

struct LeakScan {
    std::size_t id_hits = 0;
    std::size_t value_hits = 0;
    std::vector<std::string> leaked_ids;
};

/// Looks for every id string and every 8-byte value pattern in each transcript entry.
LeakScan scan_transcript(std::span<const Bytes> transcript, std::span<const std::string> ids,
                         std::span<const std::uint64_t> value_patterns);

/// Big-endian IEEE-754 bits of `v`, as they appear in canonical encodings.
std::uint64_t f64_pattern(double v);

}  // namespace lwipsm
