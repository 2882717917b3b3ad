#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace lwipsm {

/// Per-entity tallies of the cost-model operations.
struct OperationCounters {
    std::uint64_t asym_ops = 0;        // encrypt, decrypt, sign, verify
    std::uint64_t hashes = 0;          // credential hash H
    std::uint64_t macs = 0;
    std::uint64_t arithmetic = 0;      // blind, unblind, noise addition, equality checks
    std::uint64_t random_generations = 0;
    std::uint64_t db_ops = 0;          // consumption archive select/insert/update
    std::uint64_t ledger_ops = 0;      // token ledger insert/select/update
    std::uint64_t asym_keygens = 0;
    std::uint64_t sym_keygens = 0;
    std::uint64_t token_generations = 0;
    std::uint64_t program_list_generations = 0;

    OperationCounters& operator+=(const OperationCounters& o);
    friend OperationCounters operator+(OperationCounters a, const OperationCounters& b) { return a += b; }
    friend bool operator==(const OperationCounters&, const OperationCounters&) = default;

    /// (name, value) pairs in a fixed order, for reports and diffs.
    std::vector<std::pair<std::string, std::uint64_t>> fields() const;
};

}  // namespace lwipsm

#include <chrono>

namespace lwipsm {

/// Accumulates wall-clock time spent inside an entity's handlers.
class ScopedTimer {
public:
    explicit ScopedTimer(double& sink) : sink_(sink), start_(std::chrono::steady_clock::now()) {}
    ~ScopedTimer() {
        sink_ += std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }
    ScopedTimer(const ScopedTimer&) = delete;
    ScopedTimer& operator=(const ScopedTimer&) = delete;

private:
    double& sink_;
    std::chrono::steady_clock::time_point start_;
};

}  // namespace lwipsm
