#pragma once

#include <compare>
#include <cstdint>
#include <string>
#include <string_view>

namespace lwipsm {

/// Signed span in whole seconds.
struct Duration {
    std::int64_t seconds = 0;

    static constexpr Duration hours(std::int64_t h) { return {h * 3600}; }
    static constexpr Duration minutes(std::int64_t m) { return {m * 60}; }
    static constexpr Duration days(std::int64_t d) { return {d * 86400}; }
    /// Fractional days rounded to the nearest second.
    static Duration days(double d);

    friend constexpr Duration operator+(Duration a, Duration b) { return {a.seconds + b.seconds}; }
    friend constexpr Duration operator-(Duration a, Duration b) { return {a.seconds - b.seconds}; }
    friend constexpr Duration operator*(Duration a, std::int64_t k) { return {a.seconds * k}; }
    friend constexpr auto operator<=>(Duration, Duration) = default;
};

/// UTC instant with one-second resolution (seconds since 1970-01-01T00:00:00Z).
struct DateTime {
    std::int64_t epoch = 0;

    static DateTime from_civil(int year, unsigned month, unsigned day, unsigned hour = 0, unsigned minute = 0,
                               unsigned second = 0);
    /// Accepts "YYYY-MM-DDTHH:MM:SS" with optional trailing 'Z' or a space separator.
    static DateTime parse(std::string_view iso);
    std::string iso() const;

    /// The first 00:00:00 strictly after this instant.
    DateTime next_midnight() const;

    friend constexpr DateTime operator+(DateTime t, Duration d) { return {t.epoch + d.seconds}; }
    friend constexpr DateTime operator-(DateTime t, Duration d) { return {t.epoch - d.seconds}; }
    friend constexpr Duration operator-(DateTime a, DateTime b) { return {a.epoch - b.epoch}; }
    friend constexpr auto operator<=>(DateTime, DateTime) = default;
};

}  // namespace lwipsm
