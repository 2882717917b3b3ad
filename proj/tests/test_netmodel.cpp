#include <doctest.h>

#include <array>
#include <map>

#include "lwipsm/errors.hpp"
#include "lwipsm/netmodel.hpp"

using namespace lwipsm;

namespace {

struct Expected {
    std::size_t packet;
    double seconds;
};

// Packet sizes and transmission times as published, per payload and stack.
const std::map<std::size_t, std::array<Expected, 4>> published = {
    {5480, {{{7099, 4.54336}, {5534, 0.88544}, {5992, 0.95872}, {5768, 0.92288}}}},
    {1024, {{{1323, 0.84672}, {1078, 0.17248}, {1146, 0.18336}, {1090, 0.17440}}}},
    {768, {{{1007, 0.64448}, {822, 0.13152}, {890, 0.14240}, {834, 0.13344}}}},
    {512, {{{661, 0.42304}, {566, 0.09056}, {634, 0.10144}, {578, 0.09248}}}},
    {256, {{{345, 0.22080}, {345, 0.05520}, {345, 0.05520}, {345, 0.05520}}}},
};

std::size_t stack_index(LinkStack s) {
    for (std::size_t i = 0; i < all_stacks.size(); ++i)
        if (all_stacks[i] == s) return i;
    return 99;
}

}  // namespace

TEST_SUITE("netmodel") {
    TEST_CASE("communication table reproduces every published cell") {
        const auto cells = communication_table(FramingTable::builtin());
        REQUIRE(cells.size() == 28);
        for (const auto& c : cells) {
            CAPTURE(c.label);
            CAPTURE(to_string(c.stack));
            REQUIRE(published.count(c.payload));
            const auto& e = published.at(c.payload)[stack_index(c.stack)];
            CHECK(c.packet == e.packet);
            const double bw = is_nan(c.stack) ? 12500.0 : 50000.0;
            CHECK(std::abs(c.time.value() - e.packet * 8.0 / bw) < 1e-12);
            CHECK(std::abs(c.time.value() - e.seconds) < 1e-9);
        }
    }

    TEST_CASE("payload classes") {
        std::map<std::size_t, int> sizes;
        for (const auto& r : reference_payloads()) ++sizes[r.payload];
        CHECK(sizes == std::map<std::size_t, int>{{256, 1}, {512, 3}, {768, 1}, {1024, 1}, {5480, 1}});
    }

    TEST_CASE("default links") {
        CHECK(default_link(LinkStack::WiSUN).per_meter_bw() == 12500);
        for (auto s : {LinkStack::LTE_PDCP, LinkStack::Ethernet_eNB_PGW, LinkStack::Ethernet_PGW_UP})
            CHECK(default_link(s).per_meter_bw() == 50000);
        CHECK(default_link(LinkStack::WiSUN, 10).per_meter_bw() == 25000);
        CHECK(is_nan(LinkStack::WiSUN));
        CHECK_FALSE(is_nan(LinkStack::LTE_PDCP));
    }

    TEST_CASE("framing interpolation") {
        const auto t = FramingTable::builtin();
        CHECK(t.frame_size(0, LinkStack::WiSUN) == 0);
        // Overheads 89 at 256 and 149 at 512; 44/256 of the way is 10.3125, rounded up.
        CHECK(t.frame_size(300, LinkStack::WiSUN) == 300 + 89 + 11);
        CHECK(t.frame_size(100, LinkStack::WiSUN) == 100 + 89);
        CHECK(t.frame_size(1, LinkStack::LTE_PDCP) == 1 + 89);
        // 10960 * 7099 / 5480 = 14198 exactly.
        CHECK(t.frame_size(10960, LinkStack::WiSUN) == 14198);
        // 6000 * 5534 / 5480 = 6059.12..., rounded up.
        CHECK(t.frame_size(6000, LinkStack::LTE_PDCP) == 6060);
        std::size_t prev = 0;
        for (std::size_t p = 1; p < 6000; p += 37) {
            const auto f = t.frame_size(p, LinkStack::Ethernet_eNB_PGW);
            CHECK(f >= p);
            CHECK(f >= prev);
            prev = f;
        }
    }

    TEST_CASE("minimum bandwidth") {
        const auto t = FramingTable::builtin();
        std::vector<std::size_t> payloads;
        for (const auto& r : reference_payloads()) payloads.push_back(r.payload);
        // 7099 B in 0.2 s is 283960 b/s; next multiple of 40000.
        CHECK(min_required_bandwidth(payloads, LinkStack::WiSUN, t) == 320000);
        CHECK(min_required_bandwidth(payloads, LinkStack::LTE_PDCP, t) == 240000);
        CHECK(min_required_bandwidth(payloads, LinkStack::Ethernet_eNB_PGW, t) == 240000);
        CHECK(min_required_bandwidth(payloads, LinkStack::Ethernet_PGW_UP, t) == 240000);
        const std::vector<std::size_t> none;
        CHECK_THROWS_AS(min_required_bandwidth(none, LinkStack::WiSUN, t), InvalidParameter);
    }

    TEST_CASE("rational arithmetic") {
        CHECK(Rational::make(2, 4) == Rational::make(1, 2));
        CHECK(transmission_time(7099, 12500) == Rational::make(7099 * 8, 12500));
        CHECK(transmission_time(7099, 12500).fixed(5) == "4.54336");
        CHECK(Rational::make(1, 3).fixed(3) == "0.333");
        CHECK(Rational::make(2, 3).fixed(3) == "0.667");
        CHECK(Rational::make(5, 1).fixed(2) == "5.00");
        CHECK_THROWS_AS(transmission_time(10, 0), InvalidParameter);
    }

    TEST_CASE("framing csv") {
        const auto t = FramingTable::parse("payload,wisun,lte_pdcp,ethernet_enb_pgw,ethernet_pgw_up\n100,150,120,130,110\n");
        CHECK(t.frame_size(100, LinkStack::WiSUN) == 150);
        CHECK(t.frame_size(50, LinkStack::Ethernet_PGW_UP) == 60);
        CHECK_THROWS_AS(FramingTable::parse("payload,wisun\n1,2,3\n"), ConfigError);
        CHECK_THROWS_AS(FramingTable::parse("payload,wisun,lte_pdcp,ethernet_enb_pgw,ethernet_pgw_up\n100,90,1,1,1\n"),
                        ConfigError);
        CHECK_THROWS_AS(FramingTable::parse("payload,wisun,lte_pdcp,ethernet_enb_pgw,ethernet_pgw_up\nx,1,1,1,1\n"),
                        ConfigError);
        CHECK_THROWS_AS(parse_stack("token-ring"), ConfigError);
        CHECK(parse_stack(to_string(LinkStack::LTE_PDCP)) == LinkStack::LTE_PDCP);
    }

    TEST_CASE("csv on disk matches the builtin table") {
        const auto disk = FramingTable::load(LWIPSM_DATA_DIR "/framing_table_v.csv");
        const auto builtin = FramingTable::builtin();
        for (auto s : all_stacks) CHECK(disk.anchors(s) == builtin.anchors(s));
    }
}
