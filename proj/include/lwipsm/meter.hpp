#pragma once

#include <map>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "lwipsm/counters.hpp"
#include "lwipsm/crypto.hpp"
#include "lwipsm/messages.hpp"
#include "lwipsm/program.hpp"
#include "lwipsm/reading.hpp"
#include "lwipsm/rng.hpp"

namespace lwipsm {

/// Gaussian mechanism parameters: sigma_hat = nsc * delta_c / epsilon.
struct NoiseParams {
    double epsilon = 1.0;
    double delta_c = 1.0;  // sensitivity, kWh per window
    double nsc = 0.0;

    double sigma_base() const { return delta_c / epsilon; }
    double sigma_hat() const { return nsc * sigma_base(); }
    /// Throws InvalidParameter unless epsilon > 0, delta_c > 0 and nsc >= 0.
    void validate() const;

    /// Sensitivity = window hours * peak household draw.
    static NoiseParams for_program(const Program& pr, double epsilon, double p_max_kwh_per_h);
};

/// One draw of the calibrated noise, N(0, sigma_hat^2).
double sample_noise(const NoiseParams& np, Rng& rng);

/// Adds noise when nsc > 0; negative results are clamped to zero and flagged.
/// With nsc == 0 the reading is returned unchanged.
CoarseReading perturb(const CoarseReading& c, const NoiseParams& np, Rng& rng);

enum class MissingDataPolicy { Strict, Interpolate };

/// Sums the fine readings of one reporting window [window_start, window_start + 24h/freq).
/// Strict mode throws ProtocolError on any missing 15-minute slot; Interpolate
/// fills gaps linearly and marks the result.
CoarseReading aggregate(std::span<const Reading> window, std::uint32_t freq, DateTime window_start,
                        std::uint32_t interval_index, MissingDataPolicy policy = MissingDataPolicy::Strict);

/// Optional fields retained per data-collection purpose.
using PurposeFieldMap = std::map<Purpose, std::uint8_t>;
PurposeFieldMap default_purpose_fields();

/// Drops every optional field the purpose does not need. Idempotent.
CoarseReading minimize(const CoarseReading& reading, Purpose prp,
                       const PurposeFieldMap& fields = default_purpose_fields());

enum class MeterPhase { Idle, Enrolled, AwaitingGrant, Reporting, Done, Aborted, Cancelled };
std::string_view to_string(MeterPhase p);

struct MeterConfig {
    double epsilon = 1.0;
    double p_max_kwh_per_h = 8.0;
    MissingDataPolicy missing = MissingDataPolicy::Strict;
    PurposeFieldMap fields = default_purpose_fields();
    /// Free ciphertexts after sending and the catalog after selection.
    bool optimized = false;
};

struct TokenRelease {
    Token token;
    Signature sig;
};

/// Smart-meter side of the protocol. Single-owner; not thread-safe.
class MeterAgent {
public:
    /// Generates the meter's own key pair (counted as an asymmetric key generation).
    MeterAgent(MeterId id, int rsa_bits, Rng rng, MeterConfig cfg = {});
    /// Uses a pre-generated key pair.
    MeterAgent(MeterId id, KeyPair keys, Rng rng, MeterConfig cfg = {});

    /// Wires in the utility and aggregator keys plus the key directory.
    void connect(PublicKey up, PublicKey agg, std::shared_ptr<const KeyDirectory> directory);

    const MeterId& id() const { return id_; }
    const PublicKey& public_key() const { return keys_.pub; }
    MeterPhase phase() const { return phase_; }
    const std::vector<MeterPhase>& phase_history() const { return history_; }
    std::size_t next_report() const { return next_report_; }
    const std::optional<Program>& program() const { return program_; }

    /// Decodes the broadcast catalog and keeps the valid entries.
    std::vector<Program> receive_catalog(ByteView catalog);
    /// Builds the credential chain, blinds its last link and sends the signed request.
    Envelope enroll(const Program& pr);
    /// Verifies the grant and unblinds the credential signature. Any failure
    /// aborts enrollment with ProtocolError.
    void process_grant(const Envelope& grant);
    /// Wire form; undecodable bytes abort like a failed decryption.
    void process_grant(ByteView wire);
    /// Runs when the aggregator designates this meter.
    Envelope generate_shared_key();
    void receive_shared_key(const Envelope& distribution);
    void receive_shared_key(ByteView wire);
    void cancel();

    /// Fine readings covering at least the program span, sorted by time.
    void load_readings(std::vector<Reading> readings);
    /// Report `i` must be the next one due.
    Envelope build_report(std::size_t i);

    std::optional<TokenRelease> release_token(DateTime now) const;

    bool has_blinding_factor() const { return bf_.has_value(); }
    const std::optional<CredentialChain>& chain() const { return chain_; }
    const std::optional<Pseudonym>& pseudonym() const { return pseudonym_; }
    const std::optional<SharedKey>& shared_key() const { return shared_key_; }
    const std::optional<Signature>& credential_signature() const { return up_sig_on_last_; }
    /// The last report before encryption.
    const std::optional<AnonymousReport>& last_report() const { return last_report_; }
    const OperationCounters& counters() const { return counters_; }
    std::size_t clamp_events() const { return clamp_events_; }
    std::size_t interpolated_windows() const { return interpolated_; }
    double elapsed_seconds() const { return elapsed_; }
    /// Bytes of protocol state currently held.
    std::size_t state_bytes() const;

private:
    void transition(MeterPhase next);
    void abort(const std::string& why);
    std::size_t retained(const Envelope& e);

    MeterId id_;
    KeyPair keys_;
    Rng rng_;
    MeterConfig cfg_;
    PublicKey up_pk_;
    PublicKey agg_pk_;
    std::shared_ptr<const KeyDirectory> directory_;

    MeterPhase phase_ = MeterPhase::Idle;
    std::vector<MeterPhase> history_{MeterPhase::Idle};
    std::vector<Program> catalog_;
    std::optional<Program> program_;
    std::optional<CredentialChain> chain_;
    std::optional<BlindingFactor> bf_;
    std::optional<Signature> up_sig_on_last_;
    std::optional<Token> token_;
    std::optional<Signature> token_sig_;
    std::optional<Pseudonym> pseudonym_;
    std::optional<SharedKey> shared_key_;
    std::vector<Reading> readings_;
    std::size_t next_report_ = 0;
    std::optional<AnonymousReport> last_report_;
    std::vector<Bytes> sent_;

    OperationCounters counters_;
    std::size_t clamp_events_ = 0;
    std::size_t interpolated_ = 0;
    double elapsed_ = 0.0;
};

}  // namespace lwipsm
