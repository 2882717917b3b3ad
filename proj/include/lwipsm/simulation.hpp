#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <queue>
#include <string>
#include <vector>

#include "lwipsm/counters.hpp"
#include "lwipsm/dataset.hpp"
#include "lwipsm/netmodel.hpp"
#include "lwipsm/scenario.hpp"
#include "lwipsm/utility.hpp"

namespace lwipsm {

/// Time-ordered callbacks; ties run in scheduling order.
class EventQueue {
public:
    void at(double t, std::function<void()> fn);
    /// Runs until empty. `after_each` fires after every event.
    void run(const std::function<void()>& after_each = {});
    double now() const { return now_; }
    std::size_t processed() const { return processed_; }
    bool empty() const { return q_.empty(); }

private:
    struct Ev {
        double t;
        std::uint64_t seq;
        std::function<void()> fn;
    };
    struct Later {
        bool operator()(const Ev& a, const Ev& b) const { return a.t != b.t ? a.t > b.t : a.seq > b.seq; }
    };
    std::priority_queue<Ev, std::vector<Ev>, Later> q_;
    std::uint64_t seq_ = 0;
    double now_ = 0.0;
    std::size_t processed_ = 0;
};

OperationCounters operator-(const OperationCounters& a, const OperationCounters& b);

struct CounterPrediction {
    OperationCounters meter_designated;  // the meter that generates the shared key
    OperationCounters meter_other;
    OperationCounters aggregator;
    /// One meter's flow at the utility plus the program-wide work.
    OperationCounters utility_flow;
};

/// Worst-case tallies for one program with `participants` meters and n = freq * pd.
CounterPrediction predict_counters(std::uint32_t freq, std::uint32_t pd, std::size_t participants, bool noisy = true);

/// Empty when equal; otherwise one "<field>: measured X, predicted Y" line per mismatch.
std::vector<std::string> counter_diffs(const OperationCounters& measured, const OperationCounters& predicted);

/// Component sizes in bytes for the analytic memory model.
struct MemoryComponents {
    std::size_t program_list = 0;
    std::size_t random_value = 0;
    std::size_t signature = 0;
    std::size_t ciphertext = 0;
    std::size_t mac = 0;
    std::size_t reading = 0;
    std::size_t credential = 0;
    std::size_t shared_key = 0;
    std::size_t key_pair = 0;
    std::size_t other_public_keys = 0;
    std::size_t token = 0;

    /// Sizes implied by this implementation's encodings.
    static MemoryComponents for_protocol(int rsa_bits, std::size_t n);
};

struct MemoryEstimate {
    std::size_t meter = 0;
    std::size_t aggregator = 0;
    std::size_t utility = 0;
    std::size_t total = 0;
    std::size_t meter_ciphertext_slots = 0;
    std::size_t meter_random_values = 0;
};

MemoryEstimate estimate_memory(const MemoryComponents& c, std::size_t n, std::size_t participants);

struct LinkTotals {
    std::size_t messages = 0;
    std::uint64_t payload_bytes = 0;
    std::uint64_t packet_bytes = 0;
};

struct ProgramRun {
    std::uint32_t id = 0;
    std::uint32_t freq = 0;
    std::uint32_t pd = 0;
    std::size_t n = 0;
    std::size_t participants = 0;
    ThresholdDecision decision = ThresholdDecision::Cancel;
    bool key_established = false;
};

struct FlowTally {
    std::size_t sent = 0;
    std::size_t accepted = 0;
    std::size_t rejected = 0;
    std::size_t dropped = 0;

    bool conserved() const { return sent == accepted + rejected + dropped; }
};

struct ReportStats {
    std::size_t sent = 0;
    std::size_t delivered = 0;
    std::size_t dropped = 0;
    std::size_t accepted = 0;
    std::size_t rejected = 0;
    std::size_t integrity_rejections = 0;
    std::size_t collateral_rejections = 0;
    std::size_t confirmed = 0;
    std::size_t unconfirmed = 0;
    std::map<std::string, std::size_t> by_reason;
    std::map<MeterId, FlowTally> per_meter;

    /// sent = accepted + rejected + dropped, globally and for every meter.
    bool conserved() const;
};

struct AdversaryStats {
    AdversaryMode mode = AdversaryMode::None;
    /// Deliveries whose bytes differ from what was sent.
    std::size_t tampered = 0;
    /// Rejections of tampered deliveries, over every message kind.
    std::size_t tampered_rejected = 0;
    /// Tampered deliveries that were accepted anyway.
    std::size_t tampered_accepted = 0;
    std::size_t observed_messages = 0;
    std::uint64_t observed_bytes = 0;
    std::size_t id_leaks = 0;
    std::size_t value_leaks = 0;
    /// Value patterns skipped because they also occur in public broadcasts.
    std::size_t public_patterns_excluded = 0;
};

struct PeakMemory {
    std::size_t meter = 0;  // largest single meter
    std::size_t meters = 0;
    std::size_t aggregator = 0;
    std::size_t utility = 0;
    std::size_t total = 0;
};

struct MetricsReport {
    std::uint64_t seed = 0;
    int rsa_bits = 0;
    std::size_t meters = 0;
    bool optimized = false;
    std::vector<ProgramRun> programs;

    std::map<MeterId, OperationCounters> meter_counters;
    OperationCounters aggregator_counters;
    OperationCounters utility_counters;
    std::map<MeterId, OperationCounters> utility_flow_counters;

    std::map<LinkStack, LinkTotals> links;

    std::size_t enrollments_accepted = 0;
    std::size_t enrollments_rejected = 0;
    std::size_t grants_processed = 0;
    std::size_t meters_aborted = 0;
    std::size_t meters_cancelled = 0;
    ReportStats reports;
    std::size_t archived_records = 0;
    std::size_t tokens_issued = 0;
    std::map<std::string, std::size_t> redemptions;
    std::size_t clamp_events = 0;
    std::size_t interpolated_windows = 0;

    AdversaryStats adversary;
    PeakMemory peak_memory;
    MemoryEstimate memory_estimate;

    bool counter_check_applicable = false;
    std::vector<std::string> counter_mismatches;

    bool utility_state_has_meter_id = false;
    bool aggregator_state_has_meter_id = false;
    std::size_t events = 0;

    std::string to_json() const;
};

/// Wall-clock seconds inside each entity's handlers, key generation included.
struct Timings {
    std::map<MeterId, double> meters;
    double meter_total = 0.0;
    double meter_mean = 0.0;
    double aggregator = 0.0;
    double utility = 0.0;
    /// meter_total + aggregator + utility
    double total = 0.0;

    std::string to_json() const;
};

struct RunResult {
    MetricsReport metrics;
    Timings timings;
    std::string metrics_json;
    std::string dataset_csv;
    std::string events_ndjson;
    std::string ledger_ndjson;
    std::string overlay_trace_csv;

    /// metrics.json, timings.json, dataset.csv, events.ndjson, ledger.ndjson, overlay_trace.csv
    void write(const std::filesystem::path& dir) const;
};

/// Runs every phase for every meter and program. Throws ConfigError on bad
/// configuration and ProtocolError when an invariant is violated.
RunResult run_scenario(const ScenarioConfig& cfg, const FramingTable& framing = FramingTable::builtin());

struct BenchRow {
    int rsa_bits = 0;
    double meter = 0.0;
    double aggregator = 0.0;
    double utility = 0.0;
    double total = 0.0;
};

/// One meter through a whole program per key size (threshold 0, direct relay).
/// Each row keeps the fastest of `repeats` runs.
std::vector<BenchRow> benchmark(const std::vector<int>& key_bits, ScenarioConfig base, int repeats = 1);
std::string benchmark_table(const std::vector<BenchRow>& rows);
/// True when total time strictly increases with key size.
bool strictly_increasing(const std::vector<BenchRow>& rows);

}  // namespace lwipsm
