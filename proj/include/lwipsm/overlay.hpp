#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "lwipsm/counters.hpp"
#include "lwipsm/crypto.hpp"
#include "lwipsm/messages.hpp"
#include "lwipsm/rng.hpp"

namespace lwipsm {

/// Bloom filter over packet digests, double hashing from one SHA-256.
class DeliveryFilter {
public:
    explicit DeliveryFilter(std::size_t m_bits = 16384, unsigned k = 7);

    void insert(const Digest& d);
    bool query(const Digest& d) const;
    void clear();

    std::size_t bits() const { return m_; }
    unsigned hashes() const { return k_; }
    std::size_t inserted() const { return inserted_; }
    /// (1 - e^{-kn/m})^k
    double analytic_fpr(std::size_t n) const;
    /// Broadcast form: the raw bit array.
    const Bytes& bytes() const { return bits_; }

private:
    std::size_t m_;
    unsigned k_;
    Bytes bits_;
    std::size_t inserted_ = 0;
};

Digest packet_digest(ByteView envelope_bytes);

/// Undirected graph over meters plus the aggregator sink.
class Topology {
public:
    static constexpr const char* sink = "aggregator";

    /// Meters on a ring, each linked to `reach` neighbours per side; the sink is adjacent to all.
    static Topology ring(const std::vector<MeterId>& meters, std::size_t reach = 1);
    /// Every pair of meters adjacent; the sink is adjacent to all.
    static Topology clique(const std::vector<MeterId>& meters);
    /// One "a b" edge per line; '#' starts a comment. Throws ConfigError.
    static Topology parse_edge_list(std::string_view text);
    static Topology load_edge_list(const std::filesystem::path& path);

    void add_edge(const std::string& a, const std::string& b);
    bool adjacent(const std::string& a, const std::string& b) const;
    const std::vector<std::string>& neighbors(const std::string& node) const;
    std::vector<MeterId> meters() const;
    bool contains(const std::string& node) const { return adj_.count(node) != 0; }
    /// Throws ConfigError unless the sink exists and every meter reaches it.
    void validate() const;
    /// Hop distance to the sink, or nullopt if unreachable.
    std::optional<std::size_t> distance_to_sink(const std::string& node) const;

private:
    std::map<std::string, std::vector<std::string>> adj_;
};

struct RelayPath {
    /// Source first, sink last.
    std::vector<std::string> hops;

    std::size_t length() const { return hops.empty() ? 0 : hops.size() - 1; }
    const std::string& source() const { return hops.front(); }
    /// The neighbour the sink sees the packet arrive from.
    const std::string& last_hop() const { return hops[hops.size() - 2]; }
};

struct OverlayConfig {
    std::size_t min_hops = 2;
    std::size_t max_hops = 3;
    double drop_probability = 0.0;
};

struct HopEvent {
    double time = 0.0;
    std::string from;
    std::string to;
    std::size_t bytes = 0;
};

struct RelayResult {
    bool delivered = false;
    Bytes payload;
    double arrival_time = 0.0;
    std::string observed_from;
};

/// Unidirectional relay of anonymous reports towards the sink.
class Overlay {
public:
    /// `hop_latency` maps payload bytes to seconds on one NAN hop.
    Overlay(Topology topology, OverlayConfig cfg, Rng rng, std::function<double(std::size_t)> hop_latency = {});

    /// Self-avoiding random walk with a length drawn from [min_hops, max_hops].
    RelayPath random_path(const MeterId& source);
    /// Throws InvalidParameter if hops are not adjacent, the path does not end
    /// at the sink, or it is shorter than min_hops.
    void check_path(const RelayPath& path) const;
    /// Forwards the bytes unchanged. A dropped packet is lost without notice.
    RelayResult relay(ByteView payload, const RelayPath& path, double send_time);

    const Topology& topology() const { return topo_; }
    const OverlayConfig& config() const { return cfg_; }
    const std::vector<HopEvent>& trace() const { return trace_; }
    /// Apparent sender of every delivered packet, in arrival order.
    const std::vector<std::string>& observations() const { return observed_; }
    /// Header: time,hop_from,hop_to,bytes
    std::string trace_csv() const;
    std::size_t delivered() const { return delivered_; }
    std::size_t dropped() const { return dropped_; }

private:
    Topology topo_;
    OverlayConfig cfg_;
    Rng rng_;
    std::function<double(std::size_t)> latency_;
    std::vector<HopEvent> trace_;
    std::vector<std::string> observed_;
    std::size_t delivered_ = 0;
    std::size_t dropped_ = 0;
};

/// Aggregator entity: shared-key designation and distribution, delivery filter.
class Aggregator {
public:
    static constexpr const char* key_id = "aggregator";

    Aggregator(int rsa_bits, Rng rng, bool optimized = false);
    Aggregator(KeyPair keys, Rng rng, bool optimized = false);

    const PublicKey& public_key() const { return keys_.pub; }
    void connect(std::shared_ptr<const KeyDirectory> directory) { directory_ = std::move(directory); }

    /// Uniform choice; throws InvalidParameter on an empty set.
    MeterId designate_key_generator(std::span<const MeterId> participants);
    /// Verifies the proposal and re-encrypts it for every other participant and
    /// for `utility_id`. Throws ProtocolError, logging the event, on failure.
    std::vector<std::pair<std::string, Envelope>> distribute_shared_key(const Envelope& proposal,
                                                                        std::span<const MeterId> participants,
                                                                        const std::string& utility_id);
    std::vector<std::pair<std::string, Envelope>> distribute_shared_key(ByteView wire,
                                                                        std::span<const MeterId> participants,
                                                                        const std::string& utility_id);

    void on_delivery(ByteView envelope_bytes);
    const DeliveryFilter& filter() const { return filter_; }
    /// Snapshot for broadcast, then start a fresh epoch.
    DeliveryFilter broadcast_filter();

    const std::vector<std::string>& events() const { return events_; }
    const OperationCounters& counters() const { return counters_; }
    double elapsed_seconds() const { return elapsed_; }
    /// Delivery filter and event log.
    Bytes persistent_state() const;
    std::size_t state_bytes() const;

private:
    KeyPair keys_;
    Rng rng_;
    bool optimized_;
    std::shared_ptr<const KeyDirectory> directory_;
    std::optional<SharedKey> key_;
    std::size_t sig_bytes_ = 0;
    std::vector<Bytes> outgoing_;
    DeliveryFilter filter_;
    std::vector<std::string> events_;
    OperationCounters counters_;
    double elapsed_ = 0.0;
};

}  // namespace lwipsm
