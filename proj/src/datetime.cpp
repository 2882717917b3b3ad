#include "lwipsm/datetime.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>

#include "lwipsm/errors.hpp"

namespace lwipsm {

namespace {

// Days since 1970-01-01 for a proleptic Gregorian date (H. Hinnant's algorithm).
std::int64_t days_from_civil(std::int64_t y, unsigned m, unsigned d) {
    y -= m <= 2;
    const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
    const auto yoe = static_cast<unsigned>(y - era * 400);
    const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
    const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

struct Civil {
    std::int64_t y;
    unsigned m;
    unsigned d;
};

Civil civil_from_days(std::int64_t z) {
    z += 719468;
    const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
    const auto doe = static_cast<unsigned>(z - era * 146097);
    const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
    const std::int64_t y = static_cast<std::int64_t>(yoe) + era * 400;
    const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    const unsigned mp = (5 * doy + 2) / 153;
    const unsigned d = doy - (153 * mp + 2) / 5 + 1;
    const unsigned m = mp < 10 ? mp + 3 : mp - 9;
    return {y + (m <= 2), m, d};
}

std::int64_t floor_div(std::int64_t a, std::int64_t b) {
    auto q = a / b;
    if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
    return q;
}

unsigned parse_field(std::string_view s, std::size_t pos, std::size_t len, std::string_view whole) {
    unsigned v = 0;
    if (pos + len > s.size()) throw InvalidParameter("malformed date-time: " + std::string(whole));
    auto [p, ec] = std::from_chars(s.data() + pos, s.data() + pos + len, v);
    if (ec != std::errc() || p != s.data() + pos + len)
        throw InvalidParameter("malformed date-time: " + std::string(whole));
    return v;
}

}  // namespace

Duration Duration::days(double d) { return {static_cast<std::int64_t>(std::llround(d * 86400.0))}; }

DateTime DateTime::from_civil(int year, unsigned month, unsigned day, unsigned hour, unsigned minute,
                              unsigned second) {
    return {days_from_civil(year, month, day) * 86400 + hour * 3600 + minute * 60 + second};
}

DateTime DateTime::parse(std::string_view iso) {
    std::string_view s = iso;
    if (!s.empty() && (s.back() == 'Z' || s.back() == 'z')) s.remove_suffix(1);
    if (s.size() != 19 || s[4] != '-' || s[7] != '-' || (s[10] != 'T' && s[10] != ' ') || s[13] != ':' ||
        s[16] != ':')
        throw InvalidParameter("malformed date-time: " + std::string(iso));
    const auto y = parse_field(s, 0, 4, iso);
    const auto mo = parse_field(s, 5, 2, iso);
    const auto d = parse_field(s, 8, 2, iso);
    const auto h = parse_field(s, 11, 2, iso);
    const auto mi = parse_field(s, 14, 2, iso);
    const auto se = parse_field(s, 17, 2, iso);
    if (mo < 1 || mo > 12 || d < 1 || d > 31 || h > 23 || mi > 59 || se > 59)
        throw InvalidParameter("date-time field out of range: " + std::string(iso));
    return from_civil(static_cast<int>(y), mo, d, h, mi, se);
}

std::string DateTime::iso() const {
    const auto days = floor_div(epoch, 86400);
    const auto secs = epoch - days * 86400;
    const auto c = civil_from_days(days);
    char buf[64];
    std::snprintf(buf, sizeof buf, "%04lld-%02u-%02uT%02lld:%02lld:%02lldZ", static_cast<long long>(c.y), c.m, c.d,
                  static_cast<long long>(secs / 3600), static_cast<long long>(secs / 60 % 60),
                  static_cast<long long>(secs % 60));
    return buf;
}

DateTime DateTime::next_midnight() const { return {(floor_div(epoch, 86400) + 1) * 86400}; }

}  // namespace lwipsm
