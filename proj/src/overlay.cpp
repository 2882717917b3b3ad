#include "lwipsm/overlay.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <fstream>
#include <set>
#include <sstream>

#include "lwipsm/errors.hpp"
#include "lwipsm/hash.hpp"

namespace lwipsm {

DeliveryFilter::DeliveryFilter(std::size_t m_bits, unsigned k) : m_(m_bits), k_(k) {
    if (m_ == 0 || m_ % 8 != 0) throw ConfigError("bloom filter size must be a positive multiple of 8");
    if (k_ == 0) throw ConfigError("bloom filter needs at least one hash");
    bits_.assign(m_ / 8, 0);
}

namespace {

std::uint64_t be64(const Digest& d, std::size_t off) {
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < 8; ++i) v = (v << 8) | d[off + i];
    return v;
}

}  // namespace

void DeliveryFilter::insert(const Digest& d) {
    const auto h1 = be64(d, 0), h2 = be64(d, 8) | 1;
    for (unsigned i = 0; i < k_; ++i) {
        const auto bit = (h1 + i * h2) % m_;
        bits_[bit / 8] |= static_cast<std::uint8_t>(1u << (bit % 8));
    }
    ++inserted_;
}

bool DeliveryFilter::query(const Digest& d) const {
    const auto h1 = be64(d, 0), h2 = be64(d, 8) | 1;
    for (unsigned i = 0; i < k_; ++i) {
        const auto bit = (h1 + i * h2) % m_;
        if (!(bits_[bit / 8] & (1u << (bit % 8)))) return false;
    }
    return true;
}

void DeliveryFilter::clear() {
    std::fill(bits_.begin(), bits_.end(), 0);
    inserted_ = 0;
}

double DeliveryFilter::analytic_fpr(std::size_t n) const {
    const double k = k_;
    return std::pow(1.0 - std::exp(-k * static_cast<double>(n) / static_cast<double>(m_)), k);
}

Digest packet_digest(ByteView envelope_bytes) { return sha256(envelope_bytes); }

Topology Topology::ring(const std::vector<MeterId>& meters, std::size_t reach) {
    Topology t;
    t.adj_[sink];
    const auto n = meters.size();
    for (const auto& m : meters) t.adj_[m];
    for (std::size_t i = 0; i < n; ++i) {
        t.add_edge(meters[i], sink);
        for (std::size_t r = 1; r <= reach && r < n; ++r) {
            const auto j = (i + r) % n;
            if (j != i && !t.adjacent(meters[i], meters[j])) t.add_edge(meters[i], meters[j]);
        }
    }
    return t;
}

Topology Topology::clique(const std::vector<MeterId>& meters) {
    Topology t;
    t.adj_[sink];
    for (std::size_t i = 0; i < meters.size(); ++i) {
        t.add_edge(meters[i], sink);
        for (std::size_t j = i + 1; j < meters.size(); ++j) t.add_edge(meters[i], meters[j]);
    }
    return t;
}

Topology Topology::parse_edge_list(std::string_view text) {
    Topology t;
    std::istringstream in{std::string(text)};
    std::string line;
    std::size_t row = 0;
    while (std::getline(in, line)) {
        ++row;
        if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
        std::istringstream ls(line);
        std::string a, b, extra;
        if (!(ls >> a)) continue;
        if (!(ls >> b) || (ls >> extra)) throw ConfigError("edge list line " + std::to_string(row) + ": expected two nodes");
        if (a == b) throw ConfigError("edge list line " + std::to_string(row) + ": self loop");
        if (!t.adjacent(a, b)) t.add_edge(a, b);
    }
    t.validate();
    return t;
}

Topology Topology::load_edge_list(const std::filesystem::path& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot open topology " + path.string());
    std::stringstream ss;
    ss << f.rdbuf();
    return parse_edge_list(ss.str());
}

void Topology::add_edge(const std::string& a, const std::string& b) {
    adj_[a].push_back(b);
    adj_[b].push_back(a);
}

bool Topology::adjacent(const std::string& a, const std::string& b) const {
    auto it = adj_.find(a);
    return it != adj_.end() && std::find(it->second.begin(), it->second.end(), b) != it->second.end();
}

const std::vector<std::string>& Topology::neighbors(const std::string& node) const {
    auto it = adj_.find(node);
    if (it == adj_.end()) throw InvalidParameter("unknown overlay node " + node);
    return it->second;
}

std::vector<MeterId> Topology::meters() const {
    std::vector<MeterId> out;
    for (const auto& [n, _] : adj_)
        if (n != sink) out.push_back(n);
    return out;
}

std::optional<std::size_t> Topology::distance_to_sink(const std::string& node) const {
    if (!contains(node) || !contains(sink)) return std::nullopt;
    std::map<std::string, std::size_t> dist{{sink, 0}};
    std::deque<std::string> q{sink};
    while (!q.empty()) {
        auto cur = q.front();
        q.pop_front();
        if (cur == node) return dist[cur];
        for (const auto& nb : adj_.at(cur))
            if (!dist.count(nb)) {
                dist[nb] = dist[cur] + 1;
                q.push_back(nb);
            }
    }
    return std::nullopt;
}

void Topology::validate() const {
    if (!contains(sink)) throw ConfigError("topology has no aggregator node");
    for (const auto& m : meters())
        if (!distance_to_sink(m)) throw ConfigError("meter " + m + " cannot reach the aggregator");
}

Overlay::Overlay(Topology topology, OverlayConfig cfg, Rng rng, std::function<double(std::size_t)> hop_latency)
    : topo_(std::move(topology)), cfg_(cfg), rng_(std::move(rng)), latency_(std::move(hop_latency)) {
    if (cfg_.min_hops == 0 || cfg_.max_hops < cfg_.min_hops) throw ConfigError("invalid relay hop bounds");
    if (!(cfg_.drop_probability >= 0.0 && cfg_.drop_probability <= 1.0))
        throw ConfigError("drop probability must lie in [0, 1]");
    topo_.validate();
}

RelayPath Overlay::random_path(const MeterId& source) {
    if (!topo_.contains(source) || source == Topology::sink) throw InvalidParameter("unknown relay source " + source);
    for (int attempt = 0; attempt < 64; ++attempt) {
        const auto target = cfg_.min_hops + rng_.uniform(cfg_.max_hops - cfg_.min_hops + 1);
        RelayPath p{{source}};
        std::set<std::string> seen{source};
        while (p.length() + 1 < target) {
            std::vector<std::string> next;
            for (const auto& nb : topo_.neighbors(p.hops.back()))
                if (nb != Topology::sink && !seen.count(nb)) next.push_back(nb);
            if (next.empty()) break;
            const auto& pick = next[rng_.uniform(next.size())];
            p.hops.push_back(pick);
            seen.insert(pick);
        }
        // Shortest way home from wherever the walk stopped.
        while (!topo_.adjacent(p.hops.back(), Topology::sink)) {
            const auto d = *topo_.distance_to_sink(p.hops.back());
            for (const auto& nb : topo_.neighbors(p.hops.back()))
                if (topo_.distance_to_sink(nb) == d - 1) {
                    p.hops.push_back(nb);
                    break;
                }
        }
        p.hops.push_back(Topology::sink);
        if (p.length() >= cfg_.min_hops) return p;
    }
    throw ConfigError("topology cannot provide a " + std::to_string(cfg_.min_hops) + "-hop path from " + source);
}

void Overlay::check_path(const RelayPath& path) const {
    if (path.hops.size() < 2 || path.hops.back() != Topology::sink)
        throw InvalidParameter("relay path must end at the aggregator");
    if (path.length() < cfg_.min_hops)
        throw InvalidParameter("relay path has " + std::to_string(path.length()) + " hops, minimum is " +
                               std::to_string(cfg_.min_hops));
    for (std::size_t i = 0; i + 1 < path.hops.size(); ++i)
        if (!topo_.adjacent(path.hops[i], path.hops[i + 1]))
            throw InvalidParameter("relay hop " + path.hops[i] + " -> " + path.hops[i + 1] + " is not a link");
}

RelayResult Overlay::relay(ByteView payload, const RelayPath& path, double send_time) {
    check_path(path);
    RelayResult r;
    double t = send_time;
    for (std::size_t i = 0; i + 1 < path.hops.size(); ++i) {
        if (cfg_.drop_probability > 0.0 && rng_.chance(cfg_.drop_probability)) {
            ++dropped_;
            return r;
        }
        if (latency_) t += latency_(payload.size());
        trace_.push_back(HopEvent{t, path.hops[i], path.hops[i + 1], payload.size()});
    }
    r.delivered = true;
    r.payload.assign(payload.begin(), payload.end());
    r.arrival_time = t;
    r.observed_from = path.last_hop();
    observed_.push_back(r.observed_from);
    ++delivered_;
    return r;
}

std::string Overlay::trace_csv() const {
    std::string out = "time,hop_from,hop_to,bytes\n";
    char buf[32];
    for (const auto& e : trace_) {
        std::snprintf(buf, sizeof buf, "%.5f", e.time);
        out += std::string(buf) + ',' + e.from + ',' + e.to + ',' + std::to_string(e.bytes) + '\n';
    }
    return out;
}

Aggregator::Aggregator(int rsa_bits, Rng rng, bool optimized) : rng_(std::move(rng)), optimized_(optimized) {
    ScopedTimer t(elapsed_);
    keys_ = keygen(rsa_bits, rng_, key_id);
    ++counters_.asym_keygens;
}

Aggregator::Aggregator(KeyPair keys, Rng rng, bool optimized)
    : keys_(std::move(keys)), rng_(std::move(rng)), optimized_(optimized) {
    keys_.pub.key_id = key_id;
    keys_.priv.key_id = key_id;
}

MeterId Aggregator::designate_key_generator(std::span<const MeterId> participants) {
    if (participants.empty()) throw InvalidParameter("no participants to designate a key generator from");
    return participants[rng_.uniform(participants.size())];
}

std::vector<std::pair<std::string, Envelope>> Aggregator::distribute_shared_key(
    const Envelope& proposal, std::span<const MeterId> participants, const std::string& utility_id) {
    ScopedTimer t(elapsed_);
    ++counters_.asym_ops;
    KeyShare share;
    try {
        share = KeyShare::decode(view(envelope_decrypt(keys_.priv, proposal)));
    } catch (const Error& e) {
        events_.push_back(std::string("key distribution aborted: ") + e.what());
        throw ProtocolError(std::string("shared key proposal rejected: ") + e.what());
    }
    ++counters_.asym_ops;
    if (!directory_ || !directory_->contains(share.generator) ||
        !verify(directory_->at(share.generator), view(share.key.bytes), share.sig)) {
        events_.push_back("key distribution aborted: generator signature does not verify");
        throw ProtocolError("shared key signature does not verify");
    }

    std::vector<std::string> recipients;
    for (const auto& m : participants)
        if (m != share.generator) recipients.push_back(m);
    recipients.push_back(utility_id);

    const auto plain = share.encode();
    std::vector<std::pair<std::string, Envelope>> out;
    outgoing_.clear();
    for (const auto& r : recipients) {
        const auto& pk = directory_->at(r);
        auto env = envelope_encrypt(
            pk, view(plain), rng_,
            envelope_block_size(plain.size(), pk, envelope_blocks(MessageKind::KeyDistribution)));
        ++counters_.asym_ops;
        if (!optimized_) outgoing_.push_back(env.encode());
        out.emplace_back(r, std::move(env));
    }
    if (!optimized_) {
        key_ = share.key;
        sig_bytes_ = share.sig.value.num_bytes();
    }
    events_.push_back("shared key distributed to " + std::to_string(out.size()) + " entities");
    return out;
}

std::vector<std::pair<std::string, Envelope>> Aggregator::distribute_shared_key(
    ByteView wire, std::span<const MeterId> participants, const std::string& utility_id) {
    Envelope e;
    try {
        e = Envelope::decode(wire);
    } catch (const DecodeError& err) {
        ++counters_.asym_ops;
        events_.push_back(std::string("key distribution aborted: ") + err.what());
        throw ProtocolError(std::string("shared key proposal rejected: ") + err.what());
    }
    return distribute_shared_key(e, participants, utility_id);
}

void Aggregator::on_delivery(ByteView envelope_bytes) { filter_.insert(packet_digest(envelope_bytes)); }

DeliveryFilter Aggregator::broadcast_filter() {
    DeliveryFilter snap = filter_;
    filter_.clear();
    return snap;
}

Bytes Aggregator::persistent_state() const {
    Encoder e;
    e.bytes(view(filter_.bytes()));
    for (const auto& ev : events_) e.str(ev);
    return std::move(e).take();
}

std::size_t Aggregator::state_bytes() const {
    const std::size_t k = keys_.pub.modulus_bytes();
    std::size_t total = 5 * k + filter_.bytes().size();
    if (key_) total += sizeof(Digest) + sig_bytes_;
    for (const auto& b : outgoing_) total += b.size();
    return total;
}

}  // namespace lwipsm
