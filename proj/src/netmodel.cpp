#include "lwipsm/netmodel.hpp"

#include <fstream>
#include <numeric>
#include <sstream>

#include "lwipsm/errors.hpp"
#include "lwipsm/messages.hpp"

namespace lwipsm {

std::string_view to_string(LinkStack s) {
    switch (s) {
        case LinkStack::WiSUN: return "wisun";
        case LinkStack::LTE_PDCP: return "lte_pdcp";
        case LinkStack::Ethernet_eNB_PGW: return "ethernet_enb_pgw";
        case LinkStack::Ethernet_PGW_UP: return "ethernet_pgw_up";
    }
    return "?";
}

LinkStack parse_stack(std::string_view s) {
    for (auto st : all_stacks)
        if (to_string(st) == s) return st;
    throw ConfigError("unknown link stack '" + std::string(s) + "'");
}

bool is_nan(LinkStack s) { return s == LinkStack::WiSUN; }

Rational Rational::make(std::int64_t num, std::int64_t den) {
    if (den <= 0 || num < 0) throw InvalidParameter("rational must be non-negative with a positive denominator");
    const auto g = std::gcd(num, den);
    return g == 0 ? Rational{0, 1} : Rational{num / g, den / g};
}

std::string Rational::fixed(int decimals) const {
    std::int64_t scale = 1;
    for (int i = 0; i < decimals; ++i) scale *= 10;
    // round half up on num*scale/den
    const __int128 scaled = (static_cast<__int128>(num) * scale * 2 + den) / (static_cast<__int128>(den) * 2);
    const auto whole = static_cast<std::int64_t>(scaled / scale);
    auto frac = std::to_string(static_cast<std::int64_t>(scaled % scale));
    if (decimals == 0) return std::to_string(whole);
    frac.insert(0, static_cast<std::size_t>(decimals) - frac.size(), '0');
    return std::to_string(whole) + "." + frac;
}

LinkSpec default_link(LinkStack s, std::int64_t meters_sharing) {
    if (meters_sharing <= 0) throw ConfigError("meters sharing a link must be positive");
    return LinkSpec{s, is_nan(s) ? 250000 : 1000000, meters_sharing};
}

FramingTable FramingTable::builtin() {
    return parse(
        "payload,wisun,lte_pdcp,ethernet_enb_pgw,ethernet_pgw_up\n"
        "256,345,345,345,345\n"
        "512,661,566,634,578\n"
        "768,1007,822,890,834\n"
        "1024,1323,1078,1146,1090\n"
        "5480,7099,5534,5992,5768\n");
}

FramingTable FramingTable::parse(std::string_view csv) {
    FramingTable t;
    std::istringstream in{std::string(csv)};
    std::string line;
    std::vector<LinkStack> cols;
    std::size_t row = 0;
    while (std::getline(in, line)) {
        ++row;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        std::vector<std::string> f;
        std::istringstream ls(line);
        for (std::string c; std::getline(ls, c, ',');) f.push_back(c);
        if (cols.empty()) {
            if (f.size() < 2 || f[0] != "payload") throw ConfigError("framing table: header must start with 'payload'");
            for (std::size_t i = 1; i < f.size(); ++i) cols.push_back(parse_stack(f[i]));
            continue;
        }
        if (f.size() != cols.size() + 1)
            throw ConfigError("framing table line " + std::to_string(row) + ": wrong column count");
        try {
            const auto payload = std::stoull(f[0]);
            for (std::size_t i = 0; i < cols.size(); ++i) {
                const auto packet = std::stoull(f[i + 1]);
                if (packet < payload)
                    throw ConfigError("framing table line " + std::to_string(row) + ": packet smaller than payload");
                t.table_[cols[i]][payload] = packet;
            }
        } catch (const std::logic_error&) {
            throw ConfigError("framing table line " + std::to_string(row) + ": not a number");
        }
    }
    if (t.table_.empty()) throw ConfigError("framing table is empty");
    for (const auto& [s, a] : t.table_) {
        std::size_t prev = 0;
        for (const auto& [p, k] : a) {
            if (k < prev) throw ConfigError("framing table for " + std::string(to_string(s)) + " is not monotone");
            prev = k;
        }
    }
    return t;
}

FramingTable FramingTable::load(const std::filesystem::path& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot open framing table " + path.string());
    std::stringstream ss;
    ss << f.rdbuf();
    return parse(ss.str());
}

const std::map<std::size_t, std::size_t>& FramingTable::anchors(LinkStack s) const {
    auto it = table_.find(s);
    if (it == table_.end()) throw ConfigError("no framing data for stack " + std::string(to_string(s)));
    return it->second;
}

namespace {

std::int64_t ceil_div(std::int64_t a, std::int64_t b) {
    // b > 0
    return a >= 0 ? (a + b - 1) / b : -((-a) / b);
}

}  // namespace

std::size_t FramingTable::frame_size(std::size_t payload, LinkStack s) const {
    const auto& a = anchors(s);
    if (payload == 0) return 0;
    auto hi = a.lower_bound(payload);
    if (hi != a.end() && hi->first == payload) return hi->second;
    if (hi == a.begin()) return payload + (hi->second - hi->first);
    if (hi == a.end()) {
        const auto& [p, k] = *a.rbegin();
        return static_cast<std::size_t>(ceil_div(static_cast<std::int64_t>(payload * k), static_cast<std::int64_t>(p)));
    }
    auto lo = std::prev(hi);
    const auto oh0 = static_cast<std::int64_t>(lo->second - lo->first);
    const auto oh1 = static_cast<std::int64_t>(hi->second - hi->first);
    const auto span = static_cast<std::int64_t>(hi->first - lo->first);
    const auto off = static_cast<std::int64_t>(payload - lo->first);
    return payload + static_cast<std::size_t>(oh0 + ceil_div((oh1 - oh0) * off, span));
}

Rational transmission_time(std::size_t packet_bytes, std::int64_t bw_bits_per_s) {
    if (bw_bits_per_s <= 0) throw InvalidParameter("bandwidth must be positive");
    return Rational::make(static_cast<std::int64_t>(packet_bytes) * 8, bw_bits_per_s);
}

std::int64_t min_required_bandwidth(std::span<const std::size_t> payloads, LinkStack s, const FramingTable& t,
                                    const BandwidthPolicy& policy) {
    if (payloads.empty()) throw InvalidParameter("payload set is empty");
    if (policy.deadline.num <= 0 || policy.granularity <= 0) throw ConfigError("invalid bandwidth policy");
    std::size_t largest = 0;
    for (auto p : payloads) largest = std::max(largest, t.frame_size(p, s));
    // bits / deadline = bits * den / num
    const auto need = ceil_div(static_cast<std::int64_t>(largest) * 8 * policy.deadline.den, policy.deadline.num);
    return ceil_div(need, policy.granularity) * policy.granularity;
}

std::vector<PayloadRow> reference_payloads() {
    constexpr std::size_t block = 1024 / 8;
    auto sized = [&](MessageKind k) { return envelope_blocks(k) * block; };
    return {
        {"P_PR (10 programs)", 10 * (program_record_size + 4)},
        {"P_enroll", sized(MessageKind::Enrollment)},
        {"P_grant", sized(MessageKind::Grant)},
        {"P_key_proposal", sized(MessageKind::SharedKeyProposal)},
        {"P_first_report", sized(MessageKind::FirstReport)},
        {"P_report", sized(MessageKind::Report)},
        {"P_key_distribution", sized(MessageKind::KeyDistribution)},
    };
}

std::vector<NetCell> communication_table(const FramingTable& t, std::int64_t meters_sharing) {
    std::vector<NetCell> out;
    for (const auto& row : reference_payloads())
        for (auto s : all_stacks) {
            NetCell c{row.label, row.payload, s, t.frame_size(row.payload, s), {}};
            c.time = transmission_time(c.packet, default_link(s, meters_sharing).per_meter_bw());
            out.push_back(std::move(c));
        }
    return out;
}

std::string communication_table_text(const std::vector<NetCell>& cells) {
    std::ostringstream os;
    char buf[160];
    std::snprintf(buf, sizeof buf, "%-22s %8s", "payload", "bytes");
    os << buf;
    for (auto s : all_stacks) {
        std::snprintf(buf, sizeof buf, " | %16s %9s", std::string(to_string(s)).c_str(), "time_s");
        os << buf;
    }
    os << '\n';
    for (std::size_t i = 0; i < cells.size(); i += all_stacks.size()) {
        std::snprintf(buf, sizeof buf, "%-22s %8zu", cells[i].label.c_str(), cells[i].payload);
        os << buf;
        for (std::size_t j = 0; j < all_stacks.size(); ++j) {
            const auto& c = cells[i + j];
            std::snprintf(buf, sizeof buf, " | %16zu %9s", c.packet, c.time.fixed(5).c_str());
            os << buf;
        }
        os << '\n';
    }
    return os.str();
}

std::string communication_table_csv(const std::vector<NetCell>& cells) {
    std::string out = "payload_label,payload_bytes,stack,packet_bytes,time_s\n";
    for (const auto& c : cells)
        out += c.label + ',' + std::to_string(c.payload) + ',' + std::string(to_string(c.stack)) + ',' +
               std::to_string(c.packet) + ',' + c.time.fixed(5) + '\n';
    return out;
}

}  // namespace lwipsm
