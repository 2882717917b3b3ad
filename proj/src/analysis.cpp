#include "lwipsm/analysis.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <set>
#include <unordered_set>

#include <boost/math/special_functions/gamma.hpp>

#include "lwipsm/errors.hpp"

namespace lwipsm {

SampleStats sample_stats(std::span<const double> xs) {
    SampleStats s;
    double m2 = 0.0;
    for (double x : xs) {
        ++s.n;
        const double d = x - s.mean;
        s.mean += d / static_cast<double>(s.n);
        m2 += d * (x - s.mean);
    }
    if (s.n > 1) s.stddev = std::sqrt(m2 / static_cast<double>(s.n - 1));
    return s;
}

ChiSquare chi_square_uniform(std::span<const std::size_t> counts) {
    if (counts.size() < 2) throw InvalidParameter("chi-square needs at least two categories");
    double total = 0.0;
    for (auto c : counts) total += static_cast<double>(c);
    if (total <= 0.0) throw InvalidParameter("chi-square needs observations");
    const double expect = total / static_cast<double>(counts.size());
    ChiSquare r;
    for (auto c : counts) r.statistic += std::pow(static_cast<double>(c) - expect, 2) / expect;
    r.dof = counts.size() - 1;
    r.p_value = boost::math::gamma_q(static_cast<double>(r.dof) / 2.0, r.statistic / 2.0);
    return r;
}

double mutual_information(std::span<const std::pair<std::string, std::string>> pairs) {
    if (pairs.empty()) return 0.0;
    std::map<std::string, double> px, py;
    std::map<std::pair<std::string, std::string>, double> pxy;
    const double n = static_cast<double>(pairs.size());
    for (const auto& [x, y] : pairs) {
        px[x] += 1.0;
        py[y] += 1.0;
        pxy[{x, y}] += 1.0;
    }
    double mi = 0.0;
    for (const auto& [xy, c] : pxy) {
        const double p = c / n;
        mi += p * std::log2(p / ((px[xy.first] / n) * (py[xy.second] / n)));
    }
    return std::max(mi, 0.0);
}

std::uint64_t f64_pattern(double v) {
    const auto bits = std::bit_cast<std::uint64_t>(v);
    std::uint64_t be = 0;
    for (int i = 0; i < 8; ++i) be = (be << 8) | ((bits >> (8 * i)) & 0xff);
    return be;  // bytes of the big-endian encoding, read little-endian
}

LeakScan scan_transcript(std::span<const Bytes> transcript, std::span<const std::string> ids,
                         std::span<const std::uint64_t> value_patterns) {
    LeakScan out;
    const std::unordered_set<std::uint64_t> needles(value_patterns.begin(), value_patterns.end());
    std::set<std::string> leaked;
    for (const auto& msg : transcript) {
        for (const auto& id : ids)
            if (contains(view(msg), view(id))) {
                ++out.id_hits;
                leaked.insert(id);
            }
        if (msg.size() < 8 || needles.empty()) continue;
        std::uint64_t window = 0;
        for (std::size_t i = 0; i < msg.size(); ++i) {
            // little-endian read of msg[i-7..i]
            window = (window >> 8) | (static_cast<std::uint64_t>(msg[i]) << 56);
            if (i >= 7 && needles.count(window)) ++out.value_hits;
        }
    }
    out.leaked_ids.assign(leaked.begin(), leaked.end());
    return out;
}

}  // namespace lwipsm
