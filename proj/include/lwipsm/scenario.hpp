#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "lwipsm/datetime.hpp"
#include "lwipsm/meter.hpp"
#include "lwipsm/overlay.hpp"
#include "lwipsm/program.hpp"

namespace lwipsm {

enum class AdversaryMode : std::uint8_t { None, Eavesdrop, Tamper };
std::string_view to_string(AdversaryMode m);

enum class LinkClass : std::uint8_t { Nan, Wan };
std::string_view to_string(LinkClass c);

struct AdversarySpec {
    AdversaryMode mode = AdversaryMode::None;
    std::vector<LinkClass> targets = {LinkClass::Nan};
    double tamper_rate = 0.0;

    /// "none", "eavesdrop" or "tamper:<rate>".
    static AdversarySpec parse(std::string_view s);
    /// Link names must be "nan" or "wan"; anything inside the trusted zone is a ConfigError.
    static std::vector<LinkClass> parse_targets(const std::vector<std::string>& names);
    bool targets_link(LinkClass c) const;
    void validate() const;
};

struct Participation {
    std::uint32_t program_id = 0;
    std::size_t meters = 0;
};

inline constexpr int scenario_schema_version = 1;

struct ScenarioConfig {
    int schema_version = scenario_schema_version;
    std::uint64_t seed = 42;
    int rsa_bits = 1024;
    std::size_t meters = 20;
    DateTime start = DateTime::from_civil(2024, 1, 1, 9);
    std::vector<ProgramSpec> catalog = default_catalog_specs();
    /// Meters are assigned to programs in order; the rest do not enroll.
    std::vector<Participation> participation = {{2, 20}};
    std::size_t anonymity_threshold = 10;
    Duration enrollment_window = Duration::hours(1);

    std::string topology = "ring";  // ring | clique
    std::optional<std::filesystem::path> topology_file;
    OverlayConfig overlay;
    std::int64_t meters_sharing_link = 20;

    AdversarySpec adversary;

    std::optional<std::filesystem::path> dataset;
    double synthetic_mean_kw = 0.6;

    double epsilon = 1.0;
    double p_max_kwh_per_h = 8.0;
    MissingDataPolicy missing = MissingDataPolicy::Strict;
    bool optimized = false;

    /// Throws ConfigError on any inconsistency.
    void validate() const;

    /// Unknown keys and schema mismatches are ConfigErrors. Relative paths
    /// resolve against `base_dir`.
    static ScenarioConfig from_json(std::string_view text, const std::filesystem::path& base_dir = {});
    static ScenarioConfig load(const std::filesystem::path& path);
    std::string to_json() const;
};

}  // namespace lwipsm
