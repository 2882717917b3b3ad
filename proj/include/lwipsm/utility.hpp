#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "lwipsm/counters.hpp"
#include "lwipsm/crypto.hpp"
#include "lwipsm/messages.hpp"
#include "lwipsm/program.hpp"
#include "lwipsm/rng.hpp"

namespace lwipsm {

enum class LedgerStatus : std::uint8_t { Issued, Spent };
std::string_view to_string(LedgerStatus s);

struct TokenLedgerEntry {
    Token token;
    Signature sig;
    LedgerStatus status = LedgerStatus::Issued;
};

/// Issued tokens keyed by uid. Thread-safe; every spend is linearizable per uid.
/// With a log path, each event is appended as one JSON line.
class TokenLedger {
public:
    TokenLedger() = default;
    explicit TokenLedger(std::filesystem::path log);

    /// Appends subsequent events to `log`.
    void open_log(const std::filesystem::path& log);

    bool contains(const Uuid& uid) const;
    /// Throws ProtocolError if the uid is already present.
    void issue(const Token& token, const Signature& sig);
    std::optional<TokenLedgerEntry> find(const Uuid& uid) const;
    /// Issued -> Spent in one step. False if unknown or already spent.
    bool try_spend(const Uuid& uid);

    std::size_t size() const;
    std::size_t count(LedgerStatus s) const;
    std::vector<TokenLedgerEntry> entries() const;

    /// Every event so far, one JSON object per line.
    std::string journal() const;
    /// Current state, one JSON object per line, sorted by uid.
    std::string snapshot() const;
    void write_snapshot(const std::filesystem::path& path) const;
    /// Applies a journal's events to this ledger.
    void replay(std::string_view journal);

private:
    void record(const std::string& line);

    mutable std::mutex mu_;
    std::map<Uuid, TokenLedgerEntry> entries_;
    std::vector<std::string> journal_;
    std::optional<std::ofstream> log_;
};

struct ParticipantRecord {
    Pseudonym pseudonym;
    Digest last_validated_credential{};
    std::uint32_t reports_accepted = 0;
    std::uint32_t program_id = 0;
};

struct ConsumptionRecord {
    Pseudonym pseudonym;
    std::uint32_t interval_index = 0;
    DateTime window_start;
    double value = 0.0;
    bool noisy = false;
    std::uint32_t program_id = 0;
    DateTime accepted_at;
};

/// Append-only archive of accepted readings, one per (pseudonym, interval).
class ConsumptionStore {
public:
    /// Throws ProtocolError on a duplicate (pseudonym, interval).
    void append(ConsumptionRecord r);
    std::size_t size() const { return records_.size(); }
    const std::vector<ConsumptionRecord>& records() const { return records_; }
    /// Header: pseudonym,interval_index,window_start,value,noisy,program_id
    std::string to_csv() const;

private:
    std::vector<ConsumptionRecord> records_;
    std::set<std::pair<Pseudonym, std::uint32_t>> keys_;
};

enum class ReportOutcome : std::uint8_t {
    Accepted,
    RejectDecrypt,
    RejectMalformed,
    RejectCredential,
    RejectIntegrity,
    RejectUnknownProgram,
    RejectReplay,
    RejectUnknownPseudonym,
    RejectChainBreak,
    RejectOverReport,
    RejectOutOfOrder,
};
std::string_view to_string(ReportOutcome o);
/// True for rejections caused by the message itself being altered or forged.
bool is_integrity_failure(ReportOutcome o);

struct ReportVerdict {
    ReportOutcome outcome = ReportOutcome::RejectMalformed;
    std::optional<Pseudonym> pseudonym;
    std::uint32_t program_id = 0;
    std::uint32_t interval_index = 0;

    bool accepted() const { return outcome == ReportOutcome::Accepted; }
};

struct EnrollmentVerdict {
    bool accepted = false;
    std::string reason;
    std::optional<MeterId> meter_id;
    std::optional<std::uint32_t> program_id;
};

struct EnrollmentClose {
    ThresholdDecision decision = ThresholdDecision::Cancel;
    std::uint32_t program_id = 0;
    std::size_t participants = 0;
    std::vector<std::pair<MeterId, Envelope>> grants;
    std::vector<MeterId> cancelled;
};

struct UtilityConfig {
    std::size_t anonymity_threshold = 10;
    RewardWeights weights = RewardWeights::defaults();
    /// Discard the received ciphertext once decrypted.
    bool optimized = false;
    std::optional<std::filesystem::path> ledger_log;
};

/// Utility-provider side of the protocol.
class UtilityProvider {
public:
    UtilityProvider(int rsa_bits, Rng rng, UtilityConfig cfg = {});
    UtilityProvider(KeyPair keys, Rng rng, UtilityConfig cfg = {});

    static constexpr const char* key_id = "utility";

    const PublicKey& public_key() const { return keys_.pub; }
    void connect(std::shared_ptr<const KeyDirectory> directory) { directory_ = std::move(directory); }

    /// Builds the program list and returns the broadcast catalog bytes.
    Bytes publish_programs(std::span<const ProgramSpec> specs, DateTime now);
    const std::vector<Program>& programs() const { return programs_; }
    const Program& program(std::uint32_t id) const;

    /// Decrypts and verifies an enrollment request and queues it until close.
    EnrollmentVerdict accept_enrollment(const Envelope& request);
    EnrollmentVerdict accept_enrollment(ByteView wire);
    std::size_t pending_enrollments(std::uint32_t program_id) const;
    /// Applies the anonymity threshold; on Execute mints tokens and builds grants.
    /// The roster of meter ids is purged either way.
    /// `sinks` optionally credits each grant's operations to that meter's flow.
    EnrollmentClose close_enrollment(std::uint32_t program_id,
                                     const std::map<MeterId, OperationCounters*>* sinks = nullptr);
    /// Accept and grant immediately, bypassing the threshold. Throws ProtocolError on rejection.
    Envelope handle_enrollment(const Envelope& request);

    /// Decrypts the aggregator's key distribution and verifies the generator's signature.
    void receive_shared_key(std::uint32_t program_id, const Envelope& distribution);
    void receive_shared_key(std::uint32_t program_id, ByteView wire);
    bool has_shared_key(std::uint32_t program_id) const { return shared_keys_.count(program_id) != 0; }

    ReportVerdict receive_report(const Envelope& report, DateTime now);
    ReportVerdict receive_report(ByteView wire, DateTime now);
    /// Verification on an already decrypted report.
    ReportVerdict verify_report(const AnonymousReport& r, DateTime now);

    RedemptionReceipt redeem(const Envelope& request, DateTime now);
    RedemptionReceipt redeem(ByteView wire, DateTime now);
    RedemptionReceipt redeem_token(const Token& token, const Signature& sig, DateTime now);

    TokenLedger& ledger() { return ledger_; }
    const TokenLedger& ledger() const { return ledger_; }
    const ConsumptionStore& store() const { return store_; }
    std::vector<ParticipantRecord> participants() const;
    const std::optional<ParticipantRecord> participant(const Pseudonym& p) const;

    /// Serialized persistent state (records, archive, ledger).
    Bytes persistent_state() const;
    std::size_t state_bytes() const;

    const OperationCounters& counters() const { return counters_; }
    /// Additionally credits counted operations to `sink` (nullptr to stop).
    void attribute_to(OperationCounters* sink) { sink_ = sink; }
    double elapsed_seconds() const { return elapsed_; }

private:
    void bump(std::uint64_t OperationCounters::*field, std::uint64_t k = 1);
    Uuid fresh_uid();
    std::pair<Envelope, Token> grant(const EnrollmentRequest& req);

    struct Pending {
        MeterId meter_id;
        EnrollmentRequest request;
    };

    KeyPair keys_;
    Rng rng_;
    UtilityConfig cfg_;
    std::shared_ptr<const KeyDirectory> directory_;

    std::vector<Program> programs_;
    std::map<std::uint32_t, std::vector<Pending>> roster_;
    std::set<std::uint32_t> closed_;
    std::map<std::uint32_t, SharedKey> shared_keys_;
    std::map<Pseudonym, ParticipantRecord> records_;
    mutable std::mutex records_mu_;
    ConsumptionStore store_;
    TokenLedger ledger_;
    std::vector<Bytes> received_;

    std::mutex counters_mu_;
    OperationCounters counters_;
    OperationCounters* sink_ = nullptr;
    double elapsed_ = 0.0;
};

}  // namespace lwipsm
