#include "lwipsm/utility.hpp"

#include <algorithm>
#include <sstream>

#include <json.hpp>

#include "lwipsm/errors.hpp"
#include "lwipsm/hash.hpp"

namespace lwipsm {

using nlohmann::json;

std::string_view to_string(LedgerStatus s) { return s == LedgerStatus::Issued ? "Issued" : "Spent"; }

namespace {

json entry_json(const char* event, const TokenLedgerEntry& e) {
    return json{{"event", event},
                {"uid", to_hex(view(e.token.uid))},
                {"value", e.token.value},
                {"active", e.token.active.iso()},
                {"exp", e.token.exp.iso()},
                {"sig", e.sig.value.to_hex()},
                {"status", std::string(to_string(e.status))}};
}

Uuid uid_from_hex(const std::string& s) {
    auto b = from_hex(s);
    if (b.size() != 16) throw DecodeError("bad uid in ledger journal");
    Uuid u{};
    std::copy(b.begin(), b.end(), u.begin());
    return u;
}

}  // namespace

TokenLedger::TokenLedger(std::filesystem::path log) { open_log(log); }

void TokenLedger::open_log(const std::filesystem::path& log) {
    std::lock_guard lk(mu_);
    log_.emplace(log, std::ios::app);
    if (!*log_) throw ConfigError("cannot open ledger log " + log.string());
}

void TokenLedger::record(const std::string& line) {
    journal_.push_back(line);
    if (log_) {
        *log_ << line << '\n';
        log_->flush();
    }
}

bool TokenLedger::contains(const Uuid& uid) const {
    std::lock_guard lk(mu_);
    return entries_.count(uid) != 0;
}

void TokenLedger::issue(const Token& token, const Signature& sig) {
    std::lock_guard lk(mu_);
    if (entries_.count(token.uid)) throw ProtocolError("duplicate token uid " + to_hex(view(token.uid)));
    auto& e = entries_[token.uid] = TokenLedgerEntry{token, sig, LedgerStatus::Issued};
    record(entry_json("issue", e).dump());
}

std::optional<TokenLedgerEntry> TokenLedger::find(const Uuid& uid) const {
    std::lock_guard lk(mu_);
    auto it = entries_.find(uid);
    if (it == entries_.end()) return std::nullopt;
    return it->second;
}

bool TokenLedger::try_spend(const Uuid& uid) {
    std::lock_guard lk(mu_);
    auto it = entries_.find(uid);
    if (it == entries_.end() || it->second.status != LedgerStatus::Issued) return false;
    it->second.status = LedgerStatus::Spent;
    record(json{{"event", "spend"}, {"uid", to_hex(view(uid))}}.dump());
    return true;
}

std::size_t TokenLedger::size() const {
    std::lock_guard lk(mu_);
    return entries_.size();
}

std::size_t TokenLedger::count(LedgerStatus s) const {
    std::lock_guard lk(mu_);
    return static_cast<std::size_t>(
        std::count_if(entries_.begin(), entries_.end(), [s](const auto& kv) { return kv.second.status == s; }));
}

std::vector<TokenLedgerEntry> TokenLedger::entries() const {
    std::lock_guard lk(mu_);
    std::vector<TokenLedgerEntry> out;
    out.reserve(entries_.size());
    for (const auto& [_, e] : entries_) out.push_back(e);
    return out;
}

std::string TokenLedger::journal() const {
    std::lock_guard lk(mu_);
    std::string out;
    for (const auto& l : journal_) out += l + '\n';
    return out;
}

std::string TokenLedger::snapshot() const {
    std::lock_guard lk(mu_);
    std::string out;
    for (const auto& [_, e] : entries_) out += entry_json("state", e).dump() + '\n';
    return out;
}

void TokenLedger::write_snapshot(const std::filesystem::path& path) const {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw ConfigError("cannot write ledger snapshot " + path.string());
    f << snapshot();
}

void TokenLedger::replay(std::string_view journal) {
    auto& l = *this;
    std::istringstream in{std::string(journal)};
    std::string line;
    std::size_t row = 0;
    while (std::getline(in, line)) {
        ++row;
        if (line.empty()) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception& e) {
            throw DecodeError("ledger journal line " + std::to_string(row) + ": " + e.what());
        }
        const auto ev = j.at("event").get<std::string>();
        const auto uid = uid_from_hex(j.at("uid").get<std::string>());
        if (ev == "issue" || ev == "state") {
            Token t;
            t.uid = uid;
            t.value = j.at("value").get<double>();
            t.active = DateTime::parse(j.at("active").get<std::string>());
            t.exp = DateTime::parse(j.at("exp").get<std::string>());
            l.issue(t, Signature{BigInt::from_hex(j.at("sig").get<std::string>()), UtilityProvider::key_id});
            if (j.at("status").get<std::string>() == "Spent") l.try_spend(uid);
        } else if (ev == "spend") {
            if (!l.try_spend(uid)) throw DecodeError("ledger journal line " + std::to_string(row) + ": bad spend");
        } else {
            throw DecodeError("ledger journal line " + std::to_string(row) + ": unknown event " + ev);
        }
    }
}

void ConsumptionStore::append(ConsumptionRecord r) {
    if (!keys_.emplace(r.pseudonym, r.interval_index).second)
        throw ProtocolError("duplicate archive record for interval " + std::to_string(r.interval_index));
    records_.push_back(std::move(r));
}

std::string ConsumptionStore::to_csv() const {
    std::string out = "pseudonym,interval_index,window_start,value,noisy,program_id\n";
    char buf[64];
    for (const auto& r : records_) {
        std::snprintf(buf, sizeof buf, "%.17g", r.value);
        out += r.pseudonym.hex() + ',' + std::to_string(r.interval_index) + ',' + r.window_start.iso() + ',' + buf +
               ',' + (r.noisy ? "1" : "0") + ',' + std::to_string(r.program_id) + '\n';
    }
    return out;
}

std::string_view to_string(ReportOutcome o) {
    switch (o) {
        case ReportOutcome::Accepted: return "accepted";
        case ReportOutcome::RejectDecrypt: return "decrypt";
        case ReportOutcome::RejectMalformed: return "malformed";
        case ReportOutcome::RejectCredential: return "credential";
        case ReportOutcome::RejectIntegrity: return "integrity";
        case ReportOutcome::RejectUnknownProgram: return "unknown-program";
        case ReportOutcome::RejectReplay: return "replay";
        case ReportOutcome::RejectUnknownPseudonym: return "unknown-pseudonym";
        case ReportOutcome::RejectChainBreak: return "chain-break";
        case ReportOutcome::RejectOverReport: return "over-report";
        case ReportOutcome::RejectOutOfOrder: return "out-of-order";
    }
    return "?";
}

bool is_integrity_failure(ReportOutcome o) {
    return o == ReportOutcome::RejectDecrypt || o == ReportOutcome::RejectMalformed ||
           o == ReportOutcome::RejectCredential || o == ReportOutcome::RejectIntegrity;
}

UtilityProvider::UtilityProvider(int rsa_bits, Rng rng, UtilityConfig cfg)
    : rng_(std::move(rng)), cfg_(std::move(cfg)) {
    ScopedTimer t(elapsed_);
    keys_ = keygen(rsa_bits, rng_, key_id);
    bump(&OperationCounters::asym_keygens);
    if (cfg_.ledger_log) ledger_.open_log(*cfg_.ledger_log);
    cfg_.weights.validate();
}

UtilityProvider::UtilityProvider(KeyPair keys, Rng rng, UtilityConfig cfg)
    : keys_(std::move(keys)), rng_(std::move(rng)), cfg_(std::move(cfg)) {
    keys_.pub.key_id = key_id;
    keys_.priv.key_id = key_id;
    if (cfg_.ledger_log) ledger_.open_log(*cfg_.ledger_log);
    cfg_.weights.validate();
}

void UtilityProvider::bump(std::uint64_t OperationCounters::*field, std::uint64_t k) {
    std::lock_guard lk(counters_mu_);
    counters_.*field += k;
    if (sink_) (*sink_).*field += k;
}

Bytes UtilityProvider::publish_programs(std::span<const ProgramSpec> specs, DateTime now) {
    ScopedTimer t(elapsed_);
    programs_ = generate_program_list(specs, cfg_.weights, now);
    bump(&OperationCounters::program_list_generations);
    roster_.clear();
    closed_.clear();
    return encode_catalog(programs_);
}

const Program& UtilityProvider::program(std::uint32_t id) const {
    for (const auto& p : programs_)
        if (p.id == id) return p;
    throw ProtocolError("unknown program " + std::to_string(id));
}

EnrollmentVerdict UtilityProvider::accept_enrollment(const Envelope& request) {
    ScopedTimer t(elapsed_);
    EnrollmentVerdict v;
    if (!cfg_.optimized) received_.assign(1, request.encode());
    EnrollmentRequest req;
    bump(&OperationCounters::asym_ops);
    try {
        req = EnrollmentRequest::decode(view(envelope_decrypt(keys_.priv, request)));
    } catch (const DecryptionError&) {
        v.reason = "decrypt";
        return v;
    } catch (const DecodeError&) {
        v.reason = "malformed";
        return v;
    }
    bump(&OperationCounters::asym_ops);
    if (!directory_ || !directory_->contains(req.meter_id) ||
        !verify(directory_->at(req.meter_id), view(req.signed_part()), req.sig)) {
        v.reason = "signature";
        return v;
    }
    v.meter_id = req.meter_id;
    v.program_id = req.program.id;
    const auto it = std::find(programs_.begin(), programs_.end(), req.program);
    if (it == programs_.end()) {
        v.reason = "unknown-program";
        return v;
    }
    if (closed_.count(req.program.id)) {
        v.reason = "closed";
        return v;
    }
    auto& pending = roster_[req.program.id];
    if (std::any_of(pending.begin(), pending.end(), [&](const Pending& p) { return p.meter_id == req.meter_id; })) {
        v.reason = "duplicate";
        return v;
    }
    if (req.blinded.is_zero() || !(req.blinded < keys_.pub.n)) {
        v.reason = "malformed";
        return v;
    }
    pending.push_back(Pending{req.meter_id, std::move(req)});
    v.accepted = true;
    return v;
}

EnrollmentVerdict UtilityProvider::accept_enrollment(ByteView wire) {
    Envelope e;
    try {
        e = Envelope::decode(wire);
    } catch (const DecodeError&) {
        bump(&OperationCounters::asym_ops);
        return EnrollmentVerdict{false, "malformed", std::nullopt, std::nullopt};
    }
    return accept_enrollment(e);
}

std::size_t UtilityProvider::pending_enrollments(std::uint32_t program_id) const {
    auto it = roster_.find(program_id);
    return it == roster_.end() ? 0 : it->second.size();
}

Uuid UtilityProvider::fresh_uid() {
    for (;;) {
        auto u = rng_.bytes<16>();
        if (!ledger_.contains(u)) return u;
    }
}

std::pair<Envelope, Token> UtilityProvider::grant(const EnrollmentRequest& req) {
    const Program& pr = program(req.program.id);
    Token tok;
    tok.value = pr.tokinf.value;
    const DateTime frdt = pr.final_report_time();
    tok.active = frdt + pr.tokinf.activation_delay;
    tok.exp = tok.active + Duration::days(pr.tokinf.valid_days);
    tok.uid = fresh_uid();
    bump(&OperationCounters::token_generations);

    GrantMessage g;
    g.token = tok;
    g.token_sig = sign(keys_.priv, view(tok.bytes()));
    bump(&OperationCounters::asym_ops);
    g.blinded_sig = sign_blinded(req.blinded, keys_.priv);
    bump(&OperationCounters::asym_ops);
    g.sig = sign(keys_.priv, view(g.signed_part()));
    bump(&OperationCounters::asym_ops);

    const PublicKey& mpk = directory_->at(req.meter_id);
    const auto plain = g.encode();
    auto env =
        envelope_encrypt(mpk, view(plain), rng_, envelope_block_size(plain.size(), mpk, envelope_blocks(MessageKind::Grant)));
    bump(&OperationCounters::asym_ops);

    ledger_.issue(tok, g.token_sig);
    bump(&OperationCounters::ledger_ops);
    return {std::move(env), tok};
}

EnrollmentClose UtilityProvider::close_enrollment(std::uint32_t program_id,
                                                  const std::map<MeterId, OperationCounters*>* sinks) {
    ScopedTimer t(elapsed_);
    EnrollmentClose out;
    out.program_id = program_id;
    auto pending = std::move(roster_[program_id]);
    roster_.erase(program_id);
    closed_.insert(program_id);
    out.participants = pending.size();
    out.decision = check_anonymity_threshold(pending.size(), cfg_.anonymity_threshold);
    for (auto& p : pending) {
        if (out.decision == ThresholdDecision::Execute) {
            OperationCounters* saved = sink_;
            if (sinks)
                if (auto it = sinks->find(p.meter_id); it != sinks->end()) sink_ = it->second;
            out.grants.emplace_back(p.meter_id, grant(p.request).first);
            sink_ = saved;
        } else {
            out.cancelled.push_back(p.meter_id);
        }
    }
    return out;
}

Envelope UtilityProvider::handle_enrollment(const Envelope& request) {
    auto v = accept_enrollment(request);
    if (!v.accepted) throw ProtocolError("enrollment rejected: " + v.reason);
    ScopedTimer t(elapsed_);
    auto& pending = roster_[*v.program_id];
    auto req = std::move(pending.back().request);
    pending.pop_back();
    if (pending.empty()) roster_.erase(*v.program_id);
    return grant(req).first;
}

void UtilityProvider::receive_shared_key(std::uint32_t program_id, const Envelope& distribution) {
    ScopedTimer t(elapsed_);
    bump(&OperationCounters::asym_ops);
    KeyShare share;
    try {
        share = KeyShare::decode(view(envelope_decrypt(keys_.priv, distribution)));
    } catch (const DecryptionError& e) {
        throw ProtocolError(std::string("shared key could not be decrypted: ") + e.what());
    } catch (const DecodeError& e) {
        throw ProtocolError(std::string("shared key message is malformed: ") + e.what());
    }
    bump(&OperationCounters::asym_ops);
    if (!directory_ || !directory_->contains(share.generator) ||
        !verify(directory_->at(share.generator), view(share.key.bytes), share.sig))
        throw ProtocolError("shared key signature does not verify");
    shared_keys_[program_id] = share.key;
}

void UtilityProvider::receive_shared_key(std::uint32_t program_id, ByteView wire) {
    Envelope e;
    try {
        e = Envelope::decode(wire);
    } catch (const DecodeError& err) {
        bump(&OperationCounters::asym_ops);
        throw ProtocolError(std::string("shared key message is malformed: ") + err.what());
    }
    receive_shared_key(program_id, e);
}

ReportVerdict UtilityProvider::receive_report(ByteView wire, DateTime now) {
    Envelope e;
    try {
        e = Envelope::decode(wire);
    } catch (const DecodeError&) {
        bump(&OperationCounters::asym_ops);
        return ReportVerdict{ReportOutcome::RejectMalformed, std::nullopt, 0, 0};
    }
    return receive_report(e, now);
}

ReportVerdict UtilityProvider::receive_report(const Envelope& report, DateTime now) {
    AnonymousReport r;
    {
        ScopedTimer t(elapsed_);
        if (!cfg_.optimized) {
            std::lock_guard lk(records_mu_);
            received_.assign(1, report.encode());
        }
        bump(&OperationCounters::asym_ops);
        try {
            r = AnonymousReport::decode(view(envelope_decrypt(keys_.priv, report)));
        } catch (const DecryptionError&) {
            return ReportVerdict{ReportOutcome::RejectDecrypt, std::nullopt, 0, 0};
        } catch (const DecodeError&) {
            return ReportVerdict{ReportOutcome::RejectMalformed, std::nullopt, 0, 0};
        }
    }
    return verify_report(r, now);
}

ReportVerdict UtilityProvider::verify_report(const AnonymousReport& r, DateTime now) {
    ScopedTimer t(elapsed_);
    ReportVerdict v;
    v.pseudonym = r.pseudonym();
    v.program_id = r.program_id;
    v.interval_index = r.reading.interval_index;
    auto reject = [&](ReportOutcome o) {
        v.outcome = o;
        return v;
    };

    const Program* pr = nullptr;
    for (const auto& p : programs_)
        if (p.id == r.program_id) pr = &p;
    auto key = shared_keys_.find(r.program_id);
    if (!pr || key == shared_keys_.end()) return reject(ReportOutcome::RejectUnknownProgram);
    const auto n = static_cast<std::uint32_t>(pr->reports());

    auto mac_ok = [&] {
        const auto expect = mac(key->second, view(report_mac_input(r.reading.value, r.pseudonym())));
        bump(&OperationCounters::macs);
        bump(&OperationCounters::arithmetic);
        return mac_equal(expect, r.tag);
    };
    auto archive = [&] {
        ConsumptionRecord c;
        c.pseudonym = r.pseudonym();
        c.interval_index = r.reading.interval_index;
        c.window_start = pr->pat + pr->window() * static_cast<std::int64_t>(r.reading.interval_index);
        c.value = r.reading.value;
        c.noisy = r.reading.noisy;
        c.program_id = r.program_id;
        c.accepted_at = now;
        store_.append(std::move(c));
        bump(&OperationCounters::db_ops);
    };

    std::lock_guard lk(records_mu_);
    auto rec = records_.find(r.pseudonym());
    if (r.up_signature) {
        bump(&OperationCounters::asym_ops);
        if (!verify(keys_.pub, view(r.credential), *r.up_signature)) return reject(ReportOutcome::RejectCredential);
        if (!mac_ok()) return reject(ReportOutcome::RejectIntegrity);
        if (rec != records_.end()) return reject(ReportOutcome::RejectReplay);
        if (r.reading.interval_index != 0) return reject(ReportOutcome::RejectOutOfOrder);
        records_[r.pseudonym()] = ParticipantRecord{r.pseudonym(), r.credential, 1, r.program_id};
        bump(&OperationCounters::db_ops);
        archive();
        v.outcome = ReportOutcome::Accepted;
        return v;
    }

    if (rec == records_.end() || rec->second.program_id != r.program_id)
        return reject(ReportOutcome::RejectUnknownPseudonym);
    bump(&OperationCounters::db_ops);  // select
    auto& p = rec->second;
    if (p.reports_accepted >= n) return reject(ReportOutcome::RejectOverReport);
    bump(&OperationCounters::hashes);
    bump(&OperationCounters::arithmetic);
    if (!chain_extends(r.credential, p.last_validated_credential)) return reject(ReportOutcome::RejectChainBreak);
    if (!mac_ok()) return reject(ReportOutcome::RejectIntegrity);
    if (r.reading.interval_index != p.reports_accepted) return reject(ReportOutcome::RejectOutOfOrder);
    p.last_validated_credential = r.credential;
    ++p.reports_accepted;
    bump(&OperationCounters::db_ops);  // update
    archive();
    v.outcome = ReportOutcome::Accepted;
    return v;
}

RedemptionReceipt UtilityProvider::redeem(const Envelope& request, DateTime now) {
    RedemptionRequest req;
    {
        ScopedTimer t(elapsed_);
        bump(&OperationCounters::asym_ops);
        try {
            req = RedemptionRequest::decode(view(envelope_decrypt(keys_.priv, request)));
        } catch (const Error&) {
            RedemptionReceipt rc;
            rc.result = RedemptionResult::BadSignature;
            rc.at = now;
            rc.sig = sign(keys_.priv, view(rc.signed_part()));
            bump(&OperationCounters::asym_ops);
            return rc;
        }
    }
    return redeem_token(req.token, req.token_sig, now);
}

RedemptionReceipt UtilityProvider::redeem(ByteView wire, DateTime now) {
    Envelope e;
    try {
        e = Envelope::decode(wire);
    } catch (const DecodeError&) {
        RedemptionReceipt rc;
        rc.result = RedemptionResult::BadSignature;
        rc.at = now;
        bump(&OperationCounters::asym_ops);
        rc.sig = sign(keys_.priv, view(rc.signed_part()));
        bump(&OperationCounters::asym_ops);
        return rc;
    }
    return redeem(e, now);
}

RedemptionReceipt UtilityProvider::redeem_token(const Token& token, const Signature& sig, DateTime now) {
    RedemptionReceipt rc;
    rc.uid = token.uid;
    rc.at = now;
    bump(&OperationCounters::asym_ops);
    if (!verify(keys_.pub, view(token.bytes()), sig)) {
        rc.result = RedemptionResult::BadSignature;
    } else {
        bump(&OperationCounters::ledger_ops);
        auto entry = ledger_.find(token.uid);
        if (!entry || !(entry->token == token)) {
            rc.result = RedemptionResult::UnknownUid;
        } else if (now < token.active) {
            rc.result = RedemptionResult::NotActive;
        } else if (now > token.exp) {
            rc.result = RedemptionResult::Expired;
        } else {
            bump(&OperationCounters::ledger_ops);
            rc.result = ledger_.try_spend(token.uid) ? RedemptionResult::Granted : RedemptionResult::AlreadySpent;
        }
    }
    rc.sig = sign(keys_.priv, view(rc.signed_part()));
    bump(&OperationCounters::asym_ops);
    return rc;
}

std::vector<ParticipantRecord> UtilityProvider::participants() const {
    std::lock_guard lk(records_mu_);
    std::vector<ParticipantRecord> out;
    for (const auto& [_, r] : records_) out.push_back(r);
    return out;
}

const std::optional<ParticipantRecord> UtilityProvider::participant(const Pseudonym& p) const {
    std::lock_guard lk(records_mu_);
    auto it = records_.find(p);
    if (it == records_.end()) return std::nullopt;
    return it->second;
}

Bytes UtilityProvider::persistent_state() const {
    Encoder e;
    {
        std::lock_guard lk(records_mu_);
        e.u32(static_cast<std::uint32_t>(records_.size()));
        for (const auto& [_, r] : records_)
            e.fixed(r.pseudonym.uuid).fixed(r.last_validated_credential).u32(r.reports_accepted).u32(r.program_id);
    }
    e.str(store_.to_csv());
    e.str(ledger_.snapshot());
    e.u32(static_cast<std::uint32_t>(roster_.size()));
    for (const auto& [id, pend] : roster_)
        for (const auto& p : pend) e.u32(id).str(p.meter_id);
    return std::move(e).take();
}

std::size_t UtilityProvider::state_bytes() const {
    const std::size_t k = keys_.pub.modulus_bytes();
    std::size_t total = 5 * k;
    total += programs_.size() * (program_record_size + 4);
    for (const auto& [_, pend] : roster_)
        for (const auto& p : pend) total += p.meter_id.size() + p.request.blinded.num_bytes() + program_record_size + k;
    total += shared_keys_.size() * (sizeof(Digest) + 4);
    {
        std::lock_guard lk(records_mu_);
        total += records_.size() * (sizeof(Uuid) + sizeof(Digest) + 8);
        for (const auto& b : received_) total += b.size();
    }
    total += store_.size() * (sizeof(Uuid) + 4 + 8 + 8 + 1 + 4 + 8);
    total += ledger_.size() * (40 + k + 1);
    return total;
}

}  // namespace lwipsm
