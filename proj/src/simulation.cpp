#include "lwipsm/simulation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <memory>
#include <set>
#include <unordered_set>

#include <json.hpp>

#include "lwipsm/analysis.hpp"
#include "lwipsm/errors.hpp"
#include "lwipsm/meter.hpp"
#include "lwipsm/overlay.hpp"

namespace lwipsm {

using json = nlohmann::json;

void EventQueue::at(double t, std::function<void()> fn) { q_.push(Ev{t, seq_++, std::move(fn)}); }

void EventQueue::run(const std::function<void()>& after_each) {
    while (!q_.empty()) {
        Ev ev = q_.top();
        q_.pop();
        now_ = ev.t;
        ev.fn();
        ++processed_;
        if (after_each) after_each();
    }
}

OperationCounters operator-(const OperationCounters& a, const OperationCounters& b) {
    OperationCounters r;
    r.asym_ops = a.asym_ops - b.asym_ops;
    r.hashes = a.hashes - b.hashes;
    r.macs = a.macs - b.macs;
    r.arithmetic = a.arithmetic - b.arithmetic;
    r.random_generations = a.random_generations - b.random_generations;
    r.db_ops = a.db_ops - b.db_ops;
    r.ledger_ops = a.ledger_ops - b.ledger_ops;
    r.asym_keygens = a.asym_keygens - b.asym_keygens;
    r.sym_keygens = a.sym_keygens - b.sym_keygens;
    r.token_generations = a.token_generations - b.token_generations;
    r.program_list_generations = a.program_list_generations - b.program_list_generations;
    return r;
}

CounterPrediction predict_counters(std::uint32_t freq, std::uint32_t pd, std::size_t participants, bool noisy) {
    const std::uint64_t n = static_cast<std::uint64_t>(freq) * pd;
    if (n == 0) throw InvalidParameter("a program needs at least one report");
    CounterPrediction p;

    auto& m = p.meter_other;
    m.asym_ops = n + 8;
    m.hashes = n - 1;
    m.macs = n;
    m.arithmetic = noisy ? n + 2 : 2;
    m.random_generations = noisy ? n + 3 : 3;
    m.asym_keygens = 1;
    p.meter_designated = m;
    p.meter_designated.sym_keygens = 1;

    p.aggregator.asym_ops = participants + 2;
    p.aggregator.asym_keygens = 1;

    auto& u = p.utility_flow;
    u.asym_ops = n + 12;
    u.hashes = n - 1;
    u.macs = n;
    u.arithmetic = 2 * n - 1;
    u.db_ops = 3 * n - 1;
    u.ledger_ops = 3;
    u.token_generations = 1;
    u.program_list_generations = 1;
    u.asym_keygens = 1;
    return p;
}

std::vector<std::string> counter_diffs(const OperationCounters& measured, const OperationCounters& predicted) {
    std::vector<std::string> out;
    const auto a = measured.fields();
    const auto b = predicted.fields();
    for (std::size_t i = 0; i < a.size(); ++i)
        if (a[i].second != b[i].second)
            out.push_back(a[i].first + ": measured " + std::to_string(a[i].second) + ", predicted " +
                          std::to_string(b[i].second));
    return out;
}

MemoryComponents MemoryComponents::for_protocol(int rsa_bits, std::size_t) {
    const std::size_t k = static_cast<std::size_t>(rsa_bits) / 8;
    MemoryComponents c;
    c.program_list = program_record_size;
    c.random_value = k;
    c.signature = k;
    c.ciphertext = envelope_blocks(MessageKind::Report) * k;
    c.mac = sizeof(Digest);
    c.reading = sizeof(double);
    c.credential = sizeof(Digest);
    c.shared_key = sizeof(Digest);
    c.key_pair = 5 * k;
    c.other_public_keys = 4 * k;
    c.token = 40;
    return c;
}

MemoryEstimate estimate_memory(const MemoryComponents& c, std::size_t n, std::size_t participants) {
    MemoryEstimate e;
    e.meter_ciphertext_slots = n + 3;
    e.meter_random_values = n + 4;
    e.meter = c.program_list + e.meter_random_values * c.random_value + c.signature +
              e.meter_ciphertext_slots * c.ciphertext + c.mac + c.reading + n * c.credential + c.token +
              c.shared_key + c.key_pair + c.other_public_keys;
    e.aggregator = participants * c.ciphertext + c.shared_key + c.signature + c.key_pair + c.other_public_keys;
    e.utility = c.program_list + c.ciphertext + 3 * c.random_value + 2 * c.mac + c.token + c.signature +
                n * c.reading + c.shared_key + c.key_pair + c.other_public_keys;
    e.total = e.meter + e.aggregator + e.utility;
    return e;
}

bool ReportStats::conserved() const {
    if (sent != accepted + rejected + dropped) return false;
    return std::all_of(per_meter.begin(), per_meter.end(), [](const auto& kv) { return kv.second.conserved(); });
}

namespace {

json counters_json(const OperationCounters& c) {
    json j = json::object();
    for (const auto& [k, v] : c.fields()) j[k] = v;
    return j;
}

std::string_view decision_name(ThresholdDecision d) { return d == ThresholdDecision::Execute ? "execute" : "cancel"; }

}  // namespace

std::string MetricsReport::to_json() const {
    json j;
    j["seed"] = seed;
    j["rsa_bits"] = rsa_bits;
    j["meters"] = meters;
    j["optimized"] = optimized;

    json progs = json::array();
    for (const auto& p : programs)
        progs.push_back({{"id", p.id},
                         {"freq", p.freq},
                         {"pd", p.pd},
                         {"n", p.n},
                         {"participants", p.participants},
                         {"decision", decision_name(p.decision)},
                         {"key_established", p.key_established}});
    j["programs"] = progs;

    json mc = json::object();
    for (const auto& [id, c] : meter_counters) mc[id] = counters_json(c);
    json uf = json::object();
    for (const auto& [id, c] : utility_flow_counters) uf[id] = counters_json(c);
    j["counters"] = {{"meters", mc},
                     {"aggregator", counters_json(aggregator_counters)},
                     {"utility", counters_json(utility_counters)},
                     {"utility_flows", uf}};

    json lk = json::object();
    for (const auto& [s, t] : links)
        lk[std::string(to_string(s))] = {
            {"messages", t.messages}, {"payload_bytes", t.payload_bytes}, {"packet_bytes", t.packet_bytes}};
    j["links"] = lk;

    j["enrollment"] = {{"accepted", enrollments_accepted},
                       {"rejected", enrollments_rejected},
                       {"grants_processed", grants_processed},
                       {"meters_aborted", meters_aborted},
                       {"meters_cancelled", meters_cancelled}};
    j["reports"] = {{"sent", reports.sent},
                    {"delivered", reports.delivered},
                    {"dropped", reports.dropped},
                    {"accepted", reports.accepted},
                    {"rejected", reports.rejected},
                    {"integrity_rejections", reports.integrity_rejections},
                    {"collateral_rejections", reports.collateral_rejections},
                    {"confirmed", reports.confirmed},
                    {"unconfirmed", reports.unconfirmed},
                    {"by_reason", reports.by_reason},
                    {"conserved", reports.conserved()}};
    j["archived_records"] = archived_records;
    j["tokens_issued"] = tokens_issued;
    j["redemptions"] = redemptions;
    j["clamp_events"] = clamp_events;
    j["interpolated_windows"] = interpolated_windows;

    j["adversary"] = {{"mode", to_string(adversary.mode)},
                      {"tampered", adversary.tampered},
                      {"tampered_rejected", adversary.tampered_rejected},
                      {"tampered_accepted", adversary.tampered_accepted},
                      {"observed_messages", adversary.observed_messages},
                      {"observed_bytes", adversary.observed_bytes},
                      {"id_leaks", adversary.id_leaks},
                      {"value_leaks", adversary.value_leaks},
                      {"public_patterns_excluded", adversary.public_patterns_excluded}};
    j["memory"] = {{"peak",
                    {{"meter", peak_memory.meter},
                     {"meters", peak_memory.meters},
                     {"aggregator", peak_memory.aggregator},
                     {"utility", peak_memory.utility},
                     {"total", peak_memory.total}}},
                   {"estimate",
                    {{"meter", memory_estimate.meter},
                     {"aggregator", memory_estimate.aggregator},
                     {"utility", memory_estimate.utility},
                     {"total", memory_estimate.total}}}};
    j["counter_check"] = {{"applicable", counter_check_applicable}, {"mismatches", counter_mismatches}};
    j["privacy"] = {{"utility_state_has_meter_id", utility_state_has_meter_id},
                    {"aggregator_state_has_meter_id", aggregator_state_has_meter_id}};
    j["events"] = events;
    return j.dump(2) + "\n";
}

std::string Timings::to_json() const {
    json j;
    j["meters"] = meters;
    j["meter_total"] = meter_total;
    j["meter_mean"] = meter_mean;
    j["aggregator"] = aggregator;
    j["utility"] = utility;
    j["total"] = total;
    return j.dump(2) + "\n";
}

void RunResult::write(const std::filesystem::path& dir) const {
    std::filesystem::create_directories(dir);
    auto put = [&](const char* name, const std::string& body) {
        std::ofstream f(dir / name, std::ios::binary);
        if (!f) throw ConfigError("cannot write " + (dir / name).string());
        f << body;
    };
    put("metrics.json", metrics_json);
    put("timings.json", timings.to_json());
    put("dataset.csv", dataset_csv);
    put("events.ndjson", events_ndjson);
    put("ledger.ndjson", ledger_ndjson);
    put("overlay_trace.csv", overlay_trace_csv);
}

namespace {

DateTime sim_instant(double t) { return DateTime{static_cast<std::int64_t>(std::floor(t))}; }

/// 8-byte windows in the same convention as scan_transcript.
void collect_windows(ByteView msg, std::unordered_set<std::uint64_t>& out) {
    std::uint64_t window = 0;
    for (std::size_t i = 0; i < msg.size(); ++i) {
        window = (window >> 8) | (static_cast<std::uint64_t>(msg[i]) << 56);
        if (i >= 7) out.insert(window);
    }
}

class Simulation {
public:
    Simulation(const ScenarioConfig& cfg, const FramingTable& framing)
        : cfg_(cfg), framing_(framing), root_(cfg.seed), adv_rng_(root_.fork("adversary")) {}

    RunResult run();

private:
    // --- links -----------------------------------------------------------
    double hop(LinkStack s, std::size_t payload) {
        auto& t = metrics_.links[s];
        const auto packet = framing_.frame_size(payload, s);
        ++t.messages;
        t.payload_bytes += payload;
        t.packet_bytes += packet;
        return transmission_time(packet, default_link(s, cfg_.meters_sharing_link).per_meter_bw()).value();
    }
    double nan_hop(std::size_t payload) { return hop(LinkStack::WiSUN, payload); }
    double wan(std::size_t payload) {
        return hop(LinkStack::LTE_PDCP, payload) + hop(LinkStack::Ethernet_eNB_PGW, payload) +
               hop(LinkStack::Ethernet_PGW_UP, payload);
    }

    // --- adversary ---------------------------------------------------------
    Bytes intercept(LinkClass c, Bytes b, bool tamperable, bool is_public) {
        if (!cfg_.adversary.targets_link(c)) return b;
        if (cfg_.adversary.mode == AdversaryMode::Eavesdrop) {
            ++metrics_.adversary.observed_messages;
            metrics_.adversary.observed_bytes += b.size();
            if (is_public) public_transcript_.push_back(b);
            transcript_.push_back(b);
        } else if (cfg_.adversary.mode == AdversaryMode::Tamper && tamperable && !b.empty() &&
                   adv_rng_.chance(cfg_.adversary.tamper_rate)) {
            const auto bit = adv_rng_.uniform(b.size() * 8);
            b[bit / 8] ^= static_cast<std::uint8_t>(1u << (bit % 8));
        }
        return b;
    }

    /// Accounts one delivery outcome. An untampered rejection is a protocol fault.
    void settle(const Bytes& sent, const Bytes& received, bool rejected, const std::string& what) {
        if (sent != received) {
            ++metrics_.adversary.tampered;
            if (rejected) {
                ++metrics_.adversary.tampered_rejected;
            } else {
                ++metrics_.adversary.tampered_accepted;
                log("tampered-accepted", {{"message", what}});
            }
        } else if (rejected) {
            throw ProtocolError("invariant violated: unaltered " + what + " was rejected");
        }
    }

    void log(const std::string& kind, json fields = json::object()) {
        fields["t"] = sim_instant(queue_.now()).iso();
        fields["kind"] = kind;
        events_.push_back(fields.dump());
    }

    // --- phases ------------------------------------------------------------
    void setup();
    void publish_catalog();
    void on_catalog(const MeterId& id, const Bytes& sent, Bytes received);
    void on_enrollment(const MeterId& id, const Bytes& sent, Bytes received);
    void close_program(std::uint32_t pid);
    void key_phase(std::uint32_t pid);
    void send_report(const MeterId& id, std::size_t i);
    void broadcast_filter();
    void redeem(const MeterId& id);
    void finish(RunResult& out);
    void sample_memory();

    const ScenarioConfig& cfg_;
    const FramingTable& framing_;
    Rng root_;
    Rng adv_rng_;
    EventQueue queue_;
    MetricsReport metrics_;

    std::vector<MeterId> ids_;
    std::shared_ptr<KeyDirectory> directory_;
    std::unique_ptr<UtilityProvider> up_;
    std::unique_ptr<Aggregator> agg_;
    std::map<MeterId, std::unique_ptr<MeterAgent>> meters_;
    std::unique_ptr<Overlay> overlay_;
    Dataset dataset_;
    DateTime pat_;

    std::map<MeterId, std::uint32_t> program_of_;
    std::map<MeterId, OperationCounters> flows_;
    std::map<MeterId, OperationCounters*> flow_ptrs_;
    std::map<std::uint32_t, std::vector<MeterId>> recipients_;
    std::map<std::uint32_t, MeterId> generator_;
    std::map<MeterId, std::vector<Digest>> awaiting_confirmation_;

    std::vector<Bytes> transcript_;
    std::vector<Bytes> public_transcript_;
    std::vector<std::string> events_;
};

void Simulation::setup() {
    cfg_.validate();
    ids_ = meter_ids(cfg_.meters);
    pat_ = cfg_.start.next_midnight();
    if (cfg_.start + cfg_.enrollment_window + Duration::hours(1) > pat_)
        throw ConfigError("enrollment and key distribution must finish before the next midnight");

    UtilityConfig ucfg;
    ucfg.anonymity_threshold = cfg_.anonymity_threshold;
    ucfg.optimized = cfg_.optimized;
    up_ = std::make_unique<UtilityProvider>(cfg_.rsa_bits, root_.fork("utility"), ucfg);
    agg_ = std::make_unique<Aggregator>(cfg_.rsa_bits, root_.fork("aggregator"), cfg_.optimized);

    MeterConfig mcfg;
    mcfg.epsilon = cfg_.epsilon;
    mcfg.p_max_kwh_per_h = cfg_.p_max_kwh_per_h;
    mcfg.missing = cfg_.missing;
    mcfg.optimized = cfg_.optimized;

    directory_ = std::make_shared<KeyDirectory>();
    directory_->add(UtilityProvider::key_id, up_->public_key());
    directory_->add(Aggregator::key_id, agg_->public_key());
    for (const auto& id : ids_) {
        auto m = std::make_unique<MeterAgent>(id, cfg_.rsa_bits, root_.fork("meter/" + id), mcfg);
        directory_->add(id, m->public_key());
        meters_.emplace(id, std::move(m));
    }
    up_->connect(directory_);
    agg_->connect(directory_);
    for (auto& [id, m] : meters_) m->connect(up_->public_key(), agg_->public_key(), directory_);

    std::size_t next = 0;
    for (const auto& p : cfg_.participation)
        for (std::size_t k = 0; k < p.meters; ++k) program_of_[ids_[next++]] = p.program_id;
    for (const auto& id : ids_) flow_ptrs_[id] = &flows_[id];

    // Readings
    std::uint32_t max_pd = 0;
    for (const auto& s : cfg_.catalog) max_pd = std::max(max_pd, s.pd);
    const DateTime day0{cfg_.start.epoch - cfg_.start.epoch % 86400};
    if (cfg_.dataset) {
        auto loaded = load_dataset(*cfg_.dataset, cfg_.missing == MissingDataPolicy::Strict);
        bool named = std::all_of(ids_.begin(), ids_.end(), [&](const MeterId& id) { return loaded.count(id); });
        if (named) {
            for (const auto& id : ids_) dataset_[id] = std::move(loaded[id]);
        } else {
            if (loaded.size() < ids_.size())
                throw ConfigError("dataset has " + std::to_string(loaded.size()) + " meters, scenario needs " +
                                  std::to_string(ids_.size()));
            auto it = loaded.begin();
            for (const auto& id : ids_) dataset_[id] = std::move((it++)->second);
        }
    } else {
        SyntheticParams sp;
        sp.meters = cfg_.meters;
        sp.start = day0;
        sp.days = max_pd + 2;
        sp.mean_kw = cfg_.synthetic_mean_kw;
        Rng drng = root_.fork("dataset");
        dataset_ = synthetic_dataset(sp, drng);
    }
    for (auto& [id, m] : meters_) m->load_readings(dataset_[id]);

    Topology topo = cfg_.topology_file ? Topology::load_edge_list(*cfg_.topology_file)
                    : cfg_.topology == "clique" ? Topology::clique(ids_)
                                                : Topology::ring(ids_);
    for (const auto& id : ids_)
        if (!topo.contains(id)) throw ConfigError("topology lacks meter " + id);
    topo.validate();
    const auto nan_bw = default_link(LinkStack::WiSUN, cfg_.meters_sharing_link).per_meter_bw();
    auto latency = [this, nan_bw](std::size_t bytes) {
        return transmission_time(framing_.frame_size(bytes, LinkStack::WiSUN), nan_bw).value();
    };
    overlay_ = std::make_unique<Overlay>(std::move(topo), cfg_.overlay, root_.fork("overlay"), latency);

    metrics_.seed = cfg_.seed;
    metrics_.rsa_bits = cfg_.rsa_bits;
    metrics_.meters = cfg_.meters;
    metrics_.optimized = cfg_.optimized;
    metrics_.adversary.mode = cfg_.adversary.mode;
    for (auto s : all_stacks) metrics_.links[s];
}

void Simulation::publish_catalog() {
    const Bytes catalog = up_->publish_programs(cfg_.catalog, cfg_.start);
    log("catalog-published", {{"programs", up_->programs().size()}, {"bytes", catalog.size()}});
    const double t_wan = wan(catalog.size());
    const Bytes relayed = intercept(LinkClass::Wan, catalog, true, true);
    for (const auto& id : ids_) {
        const double t = queue_.now() + t_wan + nan_hop(catalog.size());
        Bytes copy = intercept(LinkClass::Nan, relayed, true, true);
        queue_.at(t, [this, id, catalog, copy = std::move(copy)]() mutable { on_catalog(id, catalog, std::move(copy)); });
    }
    for (const auto& p : cfg_.participation) {
        if (p.meters == 0) continue;
        const auto pid = p.program_id;
        const double close = static_cast<double>((cfg_.start + cfg_.enrollment_window).epoch);
        queue_.at(close, [this, pid] { close_program(pid); });
        queue_.at(close + 1800.0, [this, pid] { key_phase(pid); });
    }
}

void Simulation::on_catalog(const MeterId& id, const Bytes& sent, Bytes received) {
    auto& m = *meters_.at(id);
    std::vector<Program> programs;
    bool rejected = false;
    try {
        programs = m.receive_catalog(view(received));
    } catch (const Error& e) {
        rejected = true;
        log("catalog-rejected", {{"meter", id}, {"reason", e.what()}});
    }
    settle(sent, received, rejected, "catalog");
    if (rejected) return;

    auto want = program_of_.find(id);
    if (want == program_of_.end()) return;
    auto pr = std::find_if(programs.begin(), programs.end(), [&](const Program& p) { return p.id == want->second; });
    if (pr == programs.end()) {
        log("program-missing", {{"meter", id}, {"program", want->second}});
        return;
    }
    const Bytes req = m.enroll(*pr).encode();
    log("enroll", {{"meter", id}, {"program", pr->id}});
    double t = queue_.now() + nan_hop(req.size());
    Bytes wire = intercept(LinkClass::Nan, req, true, false);
    t += wan(req.size());
    wire = intercept(LinkClass::Wan, std::move(wire), true, false);
    queue_.at(t, [this, id, req, wire = std::move(wire)]() mutable { on_enrollment(id, req, std::move(wire)); });
}

void Simulation::on_enrollment(const MeterId& id, const Bytes& sent, Bytes received) {
    up_->attribute_to(&flows_[id]);
    const auto verdict = up_->accept_enrollment(view(received));
    up_->attribute_to(nullptr);
    if (verdict.accepted) {
        ++metrics_.enrollments_accepted;
    } else {
        ++metrics_.enrollments_rejected;
        log("enrollment-rejected", {{"reason", verdict.reason}});
    }
    settle(sent, received, !verdict.accepted, "enrollment");
}

void Simulation::close_program(std::uint32_t pid) {
    auto close = up_->close_enrollment(pid, &flow_ptrs_);
    const auto& pr = up_->program(pid);
    ProgramRun run;
    run.id = pid;
    run.freq = pr.freq;
    run.pd = pr.pd;
    run.n = pr.reports();
    run.participants = close.participants;
    run.decision = close.decision;
    metrics_.programs.push_back(run);
    log("enrollment-closed",
        {{"program", pid}, {"participants", close.participants}, {"decision", decision_name(close.decision)}});

    if (close.decision == ThresholdDecision::Cancel) {
        Encoder e;
        e.u32(pid);
        const Bytes notice = std::move(e).take();
        const double t_wan = wan(notice.size());
        const Bytes relayed = intercept(LinkClass::Wan, notice, false, true);
        for (const auto& id : close.cancelled) {
            const double t = queue_.now() + t_wan + nan_hop(notice.size());
            intercept(LinkClass::Nan, relayed, false, true);
            queue_.at(t, [this, id] {
                meters_.at(id)->cancel();
                ++metrics_.meters_cancelled;
                log("cancelled", {{"meter", id}});
            });
        }
        return;
    }

    auto& rcpt = recipients_[pid];
    for (auto& [id, env] : close.grants) {
        rcpt.push_back(id);
        const Bytes grant = env.encode();
        double t = queue_.now() + wan(grant.size());
        Bytes wire = intercept(LinkClass::Wan, grant, true, false);
        t += nan_hop(grant.size());
        wire = intercept(LinkClass::Nan, std::move(wire), true, false);
        queue_.at(t, [this, id = id, grant, wire = std::move(wire)] {
            bool rejected = false;
            try {
                meters_.at(id)->process_grant(view(wire));
                ++metrics_.grants_processed;
            } catch (const ProtocolError& e) {
                rejected = true;
                ++metrics_.meters_aborted;
                log("grant-rejected", {{"meter", id}, {"reason", e.what()}});
            }
            settle(grant, wire, rejected, "grant");
        });
    }
}

void Simulation::key_phase(std::uint32_t pid) {
    auto it = recipients_.find(pid);
    if (it == recipients_.end() || it->second.empty()) return;
    const auto participants = it->second;
    auto candidates = participants;
    std::optional<Envelope> proposal;
    MeterId generator;
    while (!candidates.empty()) {
        generator = agg_->designate_key_generator(candidates);
        auto& m = *meters_.at(generator);
        if (m.phase() == MeterPhase::Reporting) {
            proposal = m.generate_shared_key();
            break;
        }
        log("designation-unanswered", {{"program", pid}});
        std::erase(candidates, generator);
    }
    if (!proposal) {
        log("no-key-generator", {{"program", pid}});
        return;
    }
    generator_[pid] = generator;
    log("key-generator", {{"program", pid}, {"meter", generator}});

    const Bytes sent = proposal->encode();
    const double t = queue_.now() + nan_hop(sent.size());
    Bytes wire = intercept(LinkClass::Nan, sent, true, false);
    queue_.at(t, [this, pid, participants, sent, wire = std::move(wire)] {
        std::vector<std::pair<std::string, Envelope>> dist;
        bool rejected = false;
        try {
            dist = agg_->distribute_shared_key(view(wire), participants, UtilityProvider::key_id);
        } catch (const ProtocolError& e) {
            rejected = true;
            log("key-proposal-rejected", {{"program", pid}, {"reason", e.what()}});
        }
        settle(sent, wire, rejected, "key proposal");
        if (rejected) return;

        for (auto& [to, env] : dist) {
            const Bytes msg = env.encode();
            const bool to_up = to == UtilityProvider::key_id;
            const double at = queue_.now() + (to_up ? wan(msg.size()) : nan_hop(msg.size()));
            Bytes got = intercept(to_up ? LinkClass::Wan : LinkClass::Nan, msg, true, false);
            queue_.at(at, [this, pid, to = to, to_up, msg, got = std::move(got)] {
                bool bad = false;
                try {
                    if (to_up)
                        up_->receive_shared_key(pid, view(got));
                    else
                        meters_.at(to)->receive_shared_key(view(got));
                } catch (const ProtocolError& e) {
                    bad = true;
                    log("key-distribution-rejected", {{"program", pid}, {"to", to}, {"reason", e.what()}});
                }
                settle(msg, got, bad, "key distribution");
            });
        }
    });

    const auto& pr = up_->program(pid);
    for (std::size_t i = 0; i < pr.reports(); ++i) {
        const double at = static_cast<double>((pr.pat + pr.window() * static_cast<std::int64_t>(i + 1)).epoch);
        queue_.at(at, [this, participants, i] {
            for (const auto& id : participants) send_report(id, i);
        });
    }
}

void Simulation::send_report(const MeterId& id, std::size_t i) {
    auto& m = *meters_.at(id);
    if (m.phase() != MeterPhase::Reporting || !m.shared_key() || m.next_report() != i) return;
    const Bytes sent = m.build_report(i).encode();
    ++metrics_.reports.sent;
    ++metrics_.reports.per_meter[id].sent;
    awaiting_confirmation_[id].push_back(packet_digest(view(sent)));
    if (m.phase() == MeterPhase::Done) {
        const auto& pr = *m.program();
        const DateTime when = pr.final_report_time() + pr.tokinf.activation_delay + Duration{60};
        queue_.at(static_cast<double>(when.epoch), [this, id] { redeem(id); });
    }

    const auto path = overlay_->random_path(id);
    Bytes wire = intercept(LinkClass::Nan, sent, true, false);
    for (std::size_t h = 0; h < path.length(); ++h) nan_hop(sent.size());
    auto relayed = overlay_->relay(view(wire), path, queue_.now());
    if (!relayed.delivered) {
        ++metrics_.reports.dropped;
        ++metrics_.reports.per_meter[id].dropped;
        return;
    }
    queue_.at(relayed.arrival_time, [this, id, sent, wire = std::move(relayed.payload)]() mutable {
        ++metrics_.reports.delivered;
        agg_->on_delivery(view(wire));
        const double t = queue_.now() + wan(wire.size());
        wire = intercept(LinkClass::Wan, std::move(wire), true, false);
        queue_.at(t, [this, id, sent, wire = std::move(wire)] {
            up_->attribute_to(&flows_[id]);
            const auto v = up_->receive_report(view(wire), sim_instant(queue_.now()));
            up_->attribute_to(nullptr);
            auto& rs = metrics_.reports;
            ++rs.by_reason[std::string(to_string(v.outcome))];
            if (v.accepted()) {
                ++rs.accepted;
                ++rs.per_meter[id].accepted;
            } else {
                ++rs.rejected;
                ++rs.per_meter[id].rejected;
                if (is_integrity_failure(v.outcome))
                    ++rs.integrity_rejections;
                else
                    ++rs.collateral_rejections;
                log("report-rejected", {{"reason", to_string(v.outcome)}});
            }
            if (sent == wire && !v.accepted() && is_integrity_failure(v.outcome))
                throw ProtocolError("invariant violated: unaltered report failed integrity checks");
            if (sent != wire) {
                ++metrics_.adversary.tampered;
                if (v.accepted())
                    ++metrics_.adversary.tampered_accepted;
                else
                    ++metrics_.adversary.tampered_rejected;
            }
        });
    });
}

void Simulation::broadcast_filter() {
    const DeliveryFilter f = agg_->broadcast_filter();
    const Bytes bits = f.bytes();
    for (std::size_t k = 0; k < ids_.size(); ++k) {
        nan_hop(bits.size());
        intercept(LinkClass::Nan, bits, false, true);
    }
    std::size_t ok = 0, missing = 0;
    for (auto& [id, digests] : awaiting_confirmation_) {
        for (const auto& d : digests) f.query(d) ? ++ok : ++missing;
        digests.clear();
    }
    metrics_.reports.confirmed += ok;
    metrics_.reports.unconfirmed += missing;
    log("filter-broadcast", {{"inserted", f.inserted()}, {"confirmed", ok}, {"unconfirmed", missing}});
}

void Simulation::redeem(const MeterId& id) {
    auto rel = meters_.at(id)->release_token(sim_instant(queue_.now()));
    if (!rel) {
        log("token-unavailable", {{"meter", id}});
        return;
    }
    RedemptionRequest req{rel->token, rel->sig};
    const Bytes plain = req.encode();
    Rng crng = root_.fork("customer/" + id);
    const auto& pk = up_->public_key();
    const Bytes sent =
        envelope_encrypt(pk, view(plain), crng,
                         envelope_block_size(plain.size(), pk, envelope_blocks(MessageKind::Redemption)))
            .encode();
    double t = queue_.now() + nan_hop(sent.size());
    Bytes wire = intercept(LinkClass::Nan, sent, true, false);
    t += wan(sent.size());
    wire = intercept(LinkClass::Wan, std::move(wire), true, false);
    queue_.at(t, [this, id, sent, wire = std::move(wire)] {
        up_->attribute_to(&flows_[id]);
        const auto rc = up_->redeem(view(wire), sim_instant(queue_.now()));
        up_->attribute_to(nullptr);
        ++metrics_.redemptions[std::string(to_string(rc.result))];
        log("redemption", {{"result", to_string(rc.result)}});
        settle(sent, wire, rc.result != RedemptionResult::Granted, "redemption");
    });
}

void Simulation::sample_memory() {
    auto& pk = metrics_.peak_memory;
    std::size_t sum = 0;
    for (const auto& [id, m] : meters_) {
        const auto b = m->state_bytes();
        pk.meter = std::max(pk.meter, b);
        sum += b;
    }
    const auto a = agg_->state_bytes();
    const auto u = up_->state_bytes();
    pk.meters = std::max(pk.meters, sum);
    pk.aggregator = std::max(pk.aggregator, a);
    pk.utility = std::max(pk.utility, u);
    pk.total = std::max(pk.total, sum + a + u);
}

void Simulation::finish(RunResult& out) {
    auto& mt = metrics_;
    for (const auto& [id, m] : meters_) {
        mt.meter_counters[id] = m->counters();
        mt.clamp_events += m->clamp_events();
        mt.interpolated_windows += m->interpolated_windows();
        out.timings.meters[id] = m->elapsed_seconds();
        out.timings.meter_total += m->elapsed_seconds();
    }
    mt.aggregator_counters = agg_->counters();
    mt.utility_counters = up_->counters();
    for (const auto& [id, pid] : program_of_) mt.utility_flow_counters[id] = flows_[id];
    mt.archived_records = up_->store().size();
    mt.tokens_issued = up_->ledger().size();
    for (auto& p : mt.programs) p.key_established = generator_.count(p.id) && up_->has_shared_key(p.id);

    // Counter itemization holds for a single undisturbed program.
    const bool undisturbed = cfg_.adversary.mode != AdversaryMode::Tamper && cfg_.overlay.drop_probability == 0.0;
    if (undisturbed && mt.programs.size() == 1 && mt.programs[0].decision == ThresholdDecision::Execute &&
        mt.programs[0].key_established) {
        mt.counter_check_applicable = true;
        const auto& run = mt.programs[0];
        const auto& pr = up_->program(run.id);
        const auto pred = predict_counters(pr.freq, pr.pd, run.participants, pr.nsc > 0.0);
        auto add = [&](const std::string& who, const std::vector<std::string>& diffs) {
            for (const auto& d : diffs) mt.counter_mismatches.push_back(who + " " + d);
        };
        OperationCounters flows_total;
        for (const auto& [id, c] : flows_) flows_total += c;
        const auto scope = mt.utility_counters - flows_total;
        for (const auto& id : recipients_[run.id]) {
            const bool designated = generator_[run.id] == id;
            add(id, counter_diffs(mt.meter_counters[id], designated ? pred.meter_designated : pred.meter_other));
            add("utility/" + id, counter_diffs(flows_[id] + scope, pred.utility_flow));
        }
        add("aggregator", counter_diffs(mt.aggregator_counters, pred.aggregator));
        mt.memory_estimate =
            estimate_memory(MemoryComponents::for_protocol(cfg_.rsa_bits, run.n), run.n, run.participants);
    }

    const std::vector<std::string> idv(ids_.begin(), ids_.end());
    const std::vector<Bytes> up_state{up_->persistent_state()};
    const std::vector<Bytes> agg_state{agg_->persistent_state()};
    mt.utility_state_has_meter_id = scan_transcript(up_state, idv, {}).id_hits > 0;
    mt.aggregator_state_has_meter_id = scan_transcript(agg_state, idv, {}).id_hits > 0;

    if (cfg_.adversary.mode == AdversaryMode::Eavesdrop) {
        std::unordered_set<std::uint64_t> candidates;
        for (const auto& r : up_->store().records()) candidates.insert(f64_pattern(r.value));
        for (const auto& p : mt.programs) {
            if (p.decision != ThresholdDecision::Execute) continue;
            const auto& pr = up_->program(p.id);
            const DateTime begin = pr.pat, end = pr.final_report_time();
            for (const auto& id : recipients_[p.id]) {
                std::map<std::int64_t, double> windows;
                for (const auto& r : dataset_[id]) {
                    if (r.timestamp < begin || !(r.timestamp < end)) continue;
                    candidates.insert(f64_pattern(r.active_kwh));
                    windows[(r.timestamp - begin).seconds / pr.window().seconds] += r.active_kwh;
                }
                for (const auto& [w, v] : windows) candidates.insert(f64_pattern(v));
            }
        }
        std::unordered_set<std::uint64_t> public_windows;
        std::set<Bytes> distinct(public_transcript_.begin(), public_transcript_.end());
        for (const auto& b : distinct) collect_windows(view(b), public_windows);
        std::vector<std::uint64_t> needles;
        for (auto v : candidates) {
            if (public_windows.count(v))
                ++mt.adversary.public_patterns_excluded;
            else
                needles.push_back(v);
        }
        std::sort(needles.begin(), needles.end());
        const auto scan = scan_transcript(transcript_, idv, needles);
        mt.adversary.id_leaks = scan.id_hits;
        mt.adversary.value_leaks = scan.value_hits;
    }
    mt.events = queue_.processed();

    out.timings.meter_mean = meters_.empty() ? 0.0 : out.timings.meter_total / static_cast<double>(meters_.size());
    out.timings.aggregator = agg_->elapsed_seconds();
    out.timings.utility = up_->elapsed_seconds();
    out.timings.total = out.timings.meter_total + out.timings.aggregator + out.timings.utility;

    out.metrics = mt;
    out.metrics_json = mt.to_json();
    out.dataset_csv = up_->store().to_csv();
    std::string ev;
    for (const auto& e : events_) ev += e + "\n";
    out.events_ndjson = std::move(ev);
    out.ledger_ndjson = up_->ledger().journal();
    out.overlay_trace_csv = overlay_->trace_csv();
}

RunResult Simulation::run() {
    setup();
    queue_.at(static_cast<double>(cfg_.start.epoch), [this] { publish_catalog(); });

    std::set<std::int64_t> epochs;
    for (const auto& p : cfg_.participation) {
        if (p.meters == 0) continue;
        const auto& s = cfg_.catalog.at(p.program_id - 1);
        const std::int64_t window = 86400 / static_cast<std::int64_t>(s.freq);
        for (std::uint64_t i = 1; i <= static_cast<std::uint64_t>(s.freq) * s.pd; ++i)
            epochs.insert(pat_.epoch + static_cast<std::int64_t>(i) * window);
    }
    for (auto e : epochs) queue_.at(static_cast<double>(e + 1800), [this] { broadcast_filter(); });

    queue_.run([this] { sample_memory(); });
    RunResult out;
    finish(out);
    return out;
}

}  // namespace

RunResult run_scenario(const ScenarioConfig& cfg, const FramingTable& framing) {
    Simulation sim(cfg, framing);
    return sim.run();
}

std::vector<BenchRow> benchmark(const std::vector<int>& key_bits, ScenarioConfig base, int repeats) {
    base.meters = 1;
    base.participation = {{2, 1}};
    base.anonymity_threshold = 0;
    base.topology = "clique";
    base.topology_file.reset();
    base.overlay.min_hops = 1;
    base.overlay.max_hops = 1;
    base.overlay.drop_probability = 0.0;
    base.adversary = AdversarySpec{};
    base.dataset.reset();
    std::vector<BenchRow> rows;
    for (int bits : key_bits) {
        ScenarioConfig c = base;
        c.rsa_bits = bits;
        std::optional<BenchRow> best;
        for (int r = 0; r < std::max(1, repeats); ++r) {
            const auto res = run_scenario(c);
            BenchRow row{bits, res.timings.meter_total, res.timings.aggregator, res.timings.utility,
                         res.timings.total};
            if (!best || row.total < best->total) best = row;
        }
        rows.push_back(*best);
    }
    return rows;
}

std::string benchmark_table(const std::vector<BenchRow>& rows) {
    std::string out = "bits        t_sm       t_agg        t_up       t_vas\n";
    char buf[128];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof buf, "%4d  %10.6f  %10.6f  %10.6f  %10.6f\n", r.rsa_bits, r.meter, r.aggregator,
                      r.utility, r.total);
        out += buf;
    }
    return out;
}

bool strictly_increasing(const std::vector<BenchRow>& rows) {
    for (std::size_t i = 1; i < rows.size(); ++i)
        if (!(rows[i].total > rows[i - 1].total)) return false;
    return true;
}

}  // namespace lwipsm
