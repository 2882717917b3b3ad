#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>

#include "lwipsm/bytes.hpp"
#include "lwipsm/datetime.hpp"

namespace lwipsm {

using Uuid = std::array<std::uint8_t, 16>;

/// Random 128-bit identifier used in place of the meter id while reporting.
struct Pseudonym {
    Uuid uuid{};

    std::string hex() const { return to_hex(view(uuid)); }
    friend bool operator==(const Pseudonym&, const Pseudonym&) = default;
    friend auto operator<=>(const Pseudonym&, const Pseudonym&) = default;
};

/// Native 15-minute cadence of the metering dataset.
inline constexpr Duration reading_interval = Duration::minutes(15);

/// One fine-grained 15-minute measurement.
struct Reading {
    DateTime timestamp;
    double active_kwh = 0.0;
    double reactive_kvarh = 0.0;
    std::optional<std::uint8_t> quality;
    std::optional<std::string> firmware;

    friend bool operator==(const Reading&, const Reading&) = default;
};

/// Optional fields a coarse reading may carry; value and interval index are always kept.
enum FieldBits : std::uint8_t {
    field_window = 1u << 0,
    field_quality = 1u << 1,
    field_reactive = 1u << 2,
    field_firmware = 1u << 3,
};
inline constexpr std::uint8_t all_fields = field_window | field_quality | field_reactive | field_firmware;

/// Sum of the fine readings in one reporting window, possibly perturbed.
struct CoarseReading {
    std::uint32_t interval_index = 0;
    DateTime window_start;
    DateTime window_end;
    double value = 0.0;
    bool noisy = false;
    Pseudonym pseudonym;

    std::uint8_t fields = all_fields;
    std::optional<double> reactive_kvarh;
    std::optional<std::uint8_t> quality;
    std::optional<std::string> firmware;

    // Local bookkeeping, never transmitted.
    bool clamped = false;
    bool interpolated = false;

    bool has(std::uint8_t bit) const { return (fields & bit) != 0; }
};

}  // namespace lwipsm
