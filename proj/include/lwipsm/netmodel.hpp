#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace lwipsm {

enum class LinkStack : std::uint8_t {
    WiSUN,            // SM <-> AGG, IEEE 802.15.4g
    LTE_PDCP,         // AGG <-> eNB
    Ethernet_eNB_PGW, // eNB <-> PGW, IEEE 802.3
    Ethernet_PGW_UP,  // PGW <-> UP, IEEE 802.3
};

inline constexpr std::array<LinkStack, 4> all_stacks = {LinkStack::WiSUN, LinkStack::LTE_PDCP,
                                                         LinkStack::Ethernet_eNB_PGW, LinkStack::Ethernet_PGW_UP};
std::string_view to_string(LinkStack s);
/// Throws ConfigError for an unknown name.
LinkStack parse_stack(std::string_view s);
bool is_nan(LinkStack s);

/// Exact non-negative fraction.
struct Rational {
    std::int64_t num = 0;
    std::int64_t den = 1;

    static Rational make(std::int64_t num, std::int64_t den);
    double value() const { return static_cast<double>(num) / static_cast<double>(den); }
    /// Decimal rendering rounded half-up to `decimals` places.
    std::string fixed(int decimals = 5) const;
    friend bool operator==(const Rational&, const Rational&) = default;
};

struct LinkSpec {
    LinkStack stack = LinkStack::WiSUN;
    std::int64_t available_bw = 0;  // bits/s
    std::int64_t meters_sharing = 1;

    std::int64_t per_meter_bw() const { return available_bw / meters_sharing; }
};

/// 250 kbps on the NAN and 1000 kbps on the WAN links, shared by 20 meters.
LinkSpec default_link(LinkStack s, std::int64_t meters_sharing = 20);

/// Anchor table of on-wire sizes. Between anchors the framing overhead is
/// interpolated linearly (rounded up); below the smallest anchor its overhead
/// is used as is; above the largest anchor its size ratio is applied.
class FramingTable {
public:
    static FramingTable builtin();
    /// CSV: payload,wisun,lte_pdcp,ethernet_enb_pgw,ethernet_pgw_up
    static FramingTable parse(std::string_view csv);
    static FramingTable load(const std::filesystem::path& path);

    /// 0 for an empty payload.
    std::size_t frame_size(std::size_t payload, LinkStack s) const;
    const std::map<std::size_t, std::size_t>& anchors(LinkStack s) const;

private:
    std::map<LinkStack, std::map<std::size_t, std::size_t>> table_;
};

Rational transmission_time(std::size_t packet_bytes, std::int64_t bw_bits_per_s);

struct BandwidthPolicy {
    /// Largest framed message must cross the link within this time.
    Rational deadline = Rational::make(1, 5);
    /// Result is rounded up to a multiple of this rate.
    std::int64_t granularity = 40000;
};

/// Bits/s needed for the largest framed payload in `payloads`.
std::int64_t min_required_bandwidth(std::span<const std::size_t> payloads, LinkStack s, const FramingTable& t,
                                    const BandwidthPolicy& policy = {});

struct PayloadRow {
    std::string label;
    std::size_t payload = 0;
};

/// The seven message classes of the communication model with their payload sizes.
std::vector<PayloadRow> reference_payloads();

struct NetCell {
    std::string label;
    std::size_t payload = 0;
    LinkStack stack = LinkStack::WiSUN;
    std::size_t packet = 0;
    Rational time;
};

/// Every (payload, stack) cell.
std::vector<NetCell> communication_table(const FramingTable& t, std::int64_t meters_sharing = 20);
std::string communication_table_text(const std::vector<NetCell>& cells);
std::string communication_table_csv(const std::vector<NetCell>& cells);

}  // namespace lwipsm
