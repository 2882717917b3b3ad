#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>

#include "lwipsm/bytes.hpp"
#include "lwipsm/crypto.hpp"
#include "lwipsm/datetime.hpp"
#include "lwipsm/program.hpp"
#include "lwipsm/reading.hpp"

namespace lwipsm {

using MeterId = std::string;

/// Pre-provisioned public keys of every legitimate entity, by identifier.
class KeyDirectory {
public:
    void add(const std::string& id, PublicKey pk) { keys_.insert_or_assign(id, std::move(pk)); }
    /// Throws ProtocolError for an unknown identifier.
    const PublicKey& at(const std::string& id) const;
    bool contains(const std::string& id) const { return keys_.count(id) != 0; }

private:
    std::map<std::string, PublicKey> keys_;
};

/// Every message exchanged by the protocol, for size and link accounting.
enum class MessageKind : std::uint8_t {
    ProgramList,        // catalog broadcast
    Enrollment,         // blinded credential + chosen program, to the utility
    Grant,              // blind signature + token, back to the meter
    SharedKeyProposal,  // designated meter -> aggregator
    FirstReport,        // first anonymous report (carries the credential signature)
    Report,             // subsequent anonymous reports
    KeyDistribution,    // aggregator -> each legitimate entity
    CancelNotice,
    FilterBroadcast,
    Redemption,
};

std::string_view to_string(MessageKind k);

/// Wire size of an enveloped message class, in modulus-sized blocks.
/// Grows by whole blocks when a payload does not fit (see envelope_block_size).
std::size_t envelope_blocks(MessageKind k);

/// Spendable reward.
struct Token {
    double value = 0.0;
    DateTime exp;
    DateTime active;
    Uuid uid{};

    void encode(Encoder& e) const;
    static Token decode(Decoder& d);
    Bytes bytes() const;
    friend bool operator==(const Token&, const Token&) = default;
};

/// Plaintext of the enrollment envelope: m = blinded || program, signed by the meter.
struct EnrollmentRequest {
    BigInt blinded;
    Program program;
    MeterId meter_id;
    Signature sig;

    Bytes signed_part() const;
    Bytes encode() const;
    static EnrollmentRequest decode(ByteView b);
};

/// Plaintext of the grant envelope: M = sig(blinded) || token || sig(token), signed by the utility.
struct GrantMessage {
    Signature blinded_sig;
    Token token;
    Signature token_sig;
    Signature sig;

    Bytes signed_part() const;
    Bytes encode() const;
    static GrantMessage decode(ByteView b);
};

/// Shared MAC key plus the generating meter's signature over it.
struct KeyShare {
    SharedKey key;
    MeterId generator;
    Signature sig;

    Bytes encode() const;
    static KeyShare decode(ByteView b);
};

/// Plaintext of an anonymous report.
struct AnonymousReport {
    Digest credential{};
    std::optional<Signature> up_signature;  // first report only
    std::uint32_t program_id = 0;
    CoarseReading reading;
    MacTag tag;

    const Pseudonym& pseudonym() const { return reading.pseudonym; }
    Bytes encode() const;
    static AnonymousReport decode(ByteView b);
};

/// The exact bytes covered by a report MAC: value || pseudonym.
Bytes report_mac_input(double value, const Pseudonym& p);

enum class RedemptionResult : std::uint8_t {
    Granted,
    BadSignature,
    NotActive,
    Expired,
    AlreadySpent,
    UnknownUid,
};

std::string_view to_string(RedemptionResult r);

struct RedemptionRequest {
    Token token;
    Signature token_sig;

    Bytes encode() const;
    static RedemptionRequest decode(ByteView b);
};

/// Signed outcome returned to the customer.
struct RedemptionReceipt {
    Uuid uid{};
    RedemptionResult result = RedemptionResult::UnknownUid;
    DateTime at;
    Signature sig;

    Bytes signed_part() const;
};

}  // namespace lwipsm
