#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "lwipsm/bytes.hpp"
#include "lwipsm/datetime.hpp"

namespace lwipsm {

enum class Purpose : std::uint8_t {
    DataDrivenServices = 0,
    TariffSpecification = 1,
    OperationalServices = 2,
    Advertisement = 3,
};

inline constexpr std::array<Purpose, 4> all_purposes = {
    Purpose::DataDrivenServices, Purpose::TariffSpecification, Purpose::OperationalServices,
    Purpose::Advertisement};

std::string_view to_string(Purpose p);
/// Accepts the enum names and short forms (datadriven, tariff, operational, advertisement).
Purpose parse_purpose(std::string_view s);

inline constexpr std::array<std::uint32_t, 5> allowed_frequencies = {4, 6, 8, 12, 16};
inline constexpr std::uint32_t min_duration_days = 7;
inline constexpr std::uint32_t max_duration_days = 21;

struct TokenInfo {
    double value = 0.0;
    double valid_days = 0.0;
    Duration activation_delay = Duration::hours(24);

    friend bool operator==(const TokenInfo&, const TokenInfo&) = default;
};

/// Linear reward model: each program parameter contributes a weighted term to
/// the token value and to its validity period; noise scale subtracts.
struct RewardWeights {
    double base_incentive = 0.0;
    double freq_weight_val = 0.0;
    double pd_weight_val = 0.0;
    std::map<Purpose, double> prp_weight_val;
    double noise_weight_val = 0.0;

    double base_valid_day = 0.0;
    double freq_weight_exp = 0.0;
    double pd_weight_exp = 0.0;
    std::map<Purpose, double> prp_weight_exp;
    double noise_weight_exp = 0.0;

    Duration activation_delay = Duration::hours(24);

    /// Calibrated so that (12/day, 7 days, data-driven, noise 5) earns 15 units valid 45 days.
    static RewardWeights defaults();
    /// All-zero weights with every purpose present.
    static RewardWeights zero();
    /// Throws ConfigError on negative/non-finite weights or a missing purpose.
    void validate() const;
};

struct Program {
    std::uint32_t id = 0;
    std::uint32_t freq = 0;
    TokenInfo tokinf;
    std::uint32_t pd = 0;
    DateTime pat;
    Purpose prp = Purpose::DataDrivenServices;
    double nsc = 0.0;
    std::string description;

    /// Number of anonymous reports (and credentials) over the whole program.
    std::size_t reports() const { return static_cast<std::size_t>(freq) * pd; }
    Duration window() const { return Duration{86400 / static_cast<std::int64_t>(freq)}; }
    /// End of the last reporting window.
    DateTime final_report_time() const { return pat + Duration::days(static_cast<std::int64_t>(pd)); }

    friend bool operator==(const Program&, const Program&) = default;
};

/// Throws ConfigError when the configured weights give a non-positive value or validity.
TokenInfo compute_reward(std::uint32_t freq, std::uint32_t pd, Purpose prp, double nsc, const RewardWeights& w);

bool validate_program(const Program& pr);

/// One row of a catalog configuration.
struct ProgramSpec {
    std::uint32_t freq = 0;
    std::uint32_t pd = 0;
    Purpose prp = Purpose::DataDrivenServices;
    double nsc = 0.0;
};

/// Ten programs spanning every frequency and purpose; includes (12, 7, data-driven, 5).
std::vector<ProgramSpec> default_catalog_specs();

/// Reads "freq,pd,purpose,nsc" rows (header and '#' comments allowed).
std::vector<ProgramSpec> load_catalog_config(const std::filesystem::path& path);
std::vector<ProgramSpec> parse_catalog_config(std::string_view text);

/// Builds and validates programs; activation is the next midnight after `now`.
/// Throws InvalidParameter naming the first bad row.
std::vector<Program> generate_program_list(std::span<const ProgramSpec> specs, const RewardWeights& w,
                                           DateTime now);

enum class ThresholdDecision { Execute, Cancel };

/// Execute only when strictly more than `threshold` meters participate.
ThresholdDecision check_anonymity_threshold(std::size_t participant_count, std::size_t threshold);

/// Every program record occupies this many bytes (before its length prefix);
/// the description field is padded to fit.
inline constexpr std::size_t program_record_size = 544;

/// Fixed-size record: scalar fields, zero-padded description, SHA-256 checksum.
Bytes program_record(const Program& pr);
/// Throws DecodeError on a bad size or checksum.
Program parse_program_record(ByteView record);
/// Length-prefixed record.
void encode_program(Encoder& e, const Program& pr);
Program decode_program(Decoder& d);
Bytes encode_catalog(std::span<const Program> programs);
std::vector<Program> decode_catalog(ByteView bytes);

}  // namespace lwipsm
