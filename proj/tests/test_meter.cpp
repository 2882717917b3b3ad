#include <doctest.h>

#include <cmath>
#include <cstring>

#include "lwipsm/errors.hpp"
#include "lwipsm/meter.hpp"
#include "protocol_fixture.hpp"

using namespace lwipsm;
using fixture::flat_readings;
using fixture::Protocol;

TEST_SUITE("meter") {
    TEST_CASE("noise scale") {
        NoiseParams np{0.5, 2.0, 1.0};
        CHECK(np.sigma_base() == 4.0);
        CHECK(np.sigma_hat() == 4.0);
        np.nsc = 5.0;
        CHECK(np.sigma_hat() == 20.0);
        CHECK_THROWS_AS((NoiseParams{0.0, 1.0, 1.0}.validate()), InvalidParameter);
        CHECK_THROWS_AS((NoiseParams{1.0, 0.0, 1.0}.validate()), InvalidParameter);
        CHECK_THROWS_AS((NoiseParams{1.0, 1.0, -1.0}.validate()), InvalidParameter);
    }

    TEST_CASE("sensitivity is window hours times peak draw") {
        Program p;
        p.freq = 4;
        p.nsc = 1.0;
        const auto np = NoiseParams::for_program(p, 1.0, 8.0);
        CHECK(np.delta_c == 48.0);
        CHECK(np.nsc == 1.0);
        p.freq = 16;
        CHECK(NoiseParams::for_program(p, 1.0, 8.0).delta_c == 12.0);
    }

    TEST_CASE("zero noise scale leaves the reading bit-exact") {
        Rng r(1);
        CoarseReading c;
        c.value = 0.1 + 0.2;
        const auto out = perturb(c, NoiseParams{1.0, 1.0, 0.0}, r);
        CHECK(std::memcmp(&out.value, &c.value, sizeof(double)) == 0);
        CHECK_FALSE(out.noisy);
    }

    TEST_CASE("negative noisy values clamp to zero") {
        Rng r(2);
        CoarseReading c;
        c.value = 0.0;
        std::size_t clamped = 0;
        for (int i = 0; i < 200; ++i) {
            const auto out = perturb(c, NoiseParams{1.0, 1.0, 1.0}, r);
            CHECK(out.value >= 0.0);
            CHECK(out.noisy);
            clamped += out.clamped;
        }
        CHECK(clamped > 50);
    }

    TEST_CASE("aggregation sums one window") {
        const auto start = DateTime::from_civil(2024, 1, 2);
        const auto rs = flat_readings(start, 1, 0.25);
        const auto c = aggregate(std::span<const Reading>(rs.data(), 24), 4, start, 0);
        CHECK(c.value == doctest::Approx(6.0));
        CHECK(c.window_start == start);
        CHECK(c.window_end == start + Duration::hours(6));
        CHECK(c.reactive_kvarh.value() == doctest::Approx(2.4));
        CHECK_FALSE(c.interpolated);
    }

    TEST_CASE("missing slots: strict fails, interpolate fills linearly") {
        const auto start = DateTime::from_civil(2024, 1, 2);
        auto rs = flat_readings(start, 1, 0.25);
        rs.resize(24);
        rs[5].active_kwh = 1.0;
        rs[7].active_kwh = 2.0;
        rs.erase(rs.begin() + 6);
        CHECK_THROWS_AS(aggregate(rs, 4, start, 0, MissingDataPolicy::Strict), ProtocolError);
        const auto c = aggregate(rs, 4, start, 0, MissingDataPolicy::Interpolate);
        CHECK(c.interpolated);
        // 21 slots of 0.25, the two neighbours, and the midpoint 1.5 filled in.
        CHECK(c.value == doctest::Approx(21 * 0.25 + 1.0 + 2.0 + 1.5));
    }

    TEST_CASE("minimization drops fields the purpose does not need") {
        CoarseReading c;
        c.reactive_kvarh = 1.0;
        c.quality = 3;
        c.firmware = "v1";
        const auto ad = minimize(c, Purpose::Advertisement);
        CHECK(ad.fields == 0);
        CHECK_FALSE(ad.reactive_kvarh);
        CHECK_FALSE(ad.quality);
        CHECK_FALSE(ad.firmware);
        const auto op = minimize(c, Purpose::OperationalServices);
        CHECK(op.has(field_quality));
        CHECK(op.has(field_window));
        CHECK_FALSE(op.firmware);
        const auto again = minimize(op, Purpose::OperationalServices);
        CHECK(again.fields == op.fields);
        CHECK(again.quality == op.quality);
    }

    TEST_CASE("phases over a full program") {
        Protocol p(3, 2);
        p.enroll_all();
        p.share_key();
        CHECK(p.report_all() == 3 * 28);
        const auto& h = p.meter(0).phase_history();
        const std::vector<MeterPhase> expect{MeterPhase::Idle, MeterPhase::Enrolled, MeterPhase::AwaitingGrant,
                                             MeterPhase::Reporting, MeterPhase::Done};
        CHECK(h == expect);
        CHECK_FALSE(p.meter(0).has_blinding_factor());
        CHECK_THROWS_AS(p.meter(0).build_report(0), ProtocolError);
    }

    TEST_CASE("reports must be built in order and need a key") {
        Protocol p(2, 1);
        p.enroll_all();
        CHECK_THROWS_AS(p.meter(0).build_report(0), ProtocolError);
        p.share_key();
        CHECK_THROWS_AS(p.meter(0).build_report(1), ProtocolError);
        CHECK_NOTHROW(p.meter(0).build_report(0));
        CHECK_THROWS_AS(p.meter(0).build_report(0), ProtocolError);
    }

    TEST_CASE("a meter enrolls once") {
        Protocol p(1, 0);
        p.meter(0).enroll(p.program);
        CHECK_THROWS_AS(p.meter(0).enroll(p.program), ProtocolError);
    }

    TEST_CASE("corrupted grant aborts enrollment") {
        Protocol p(2, 1);
        for (auto& m : p.meters) p.up->accept_enrollment(m->enroll(p.program));
        auto close = p.up->close_enrollment(p.program.id);
        REQUIRE(close.grants.size() == 2);
        auto wire = close.grants[0].second.encode();
        wire[wire.size() / 2] ^= 0x10;
        auto& m = p.meter(0).id() == close.grants[0].first ? p.meter(0) : p.meter(1);
        CHECK_THROWS_AS(m.process_grant(view(wire)), ProtocolError);
        CHECK(m.phase() == MeterPhase::Aborted);
    }

    TEST_CASE("cancel clears the blinding factor") {
        Protocol p(2, 5);
        const auto close = p.enroll_all();
        CHECK(close.decision == ThresholdDecision::Cancel);
        CHECK(p.meter(0).phase() == MeterPhase::Cancelled);
        CHECK_FALSE(p.meter(0).has_blinding_factor());
    }

    TEST_CASE("counters for one meter match the itemization") {
        Protocol p(2, 1, {4, 7, Purpose::DataDrivenServices, 1.0});
        p.enroll_all();
        p.share_key();
        p.report_all();
        for (auto& m : p.meters) {
            const auto& c = m->counters();
            CHECK(c.asym_ops == 28 + 8);
            CHECK(c.hashes == 27);
            CHECK(c.macs == 28);
            CHECK(c.arithmetic == 30);
            CHECK(c.random_generations == 31);
            CHECK(c.asym_keygens == 1);
            CHECK(c.sym_keygens == (m->id() == p.generator ? 1u : 0u));
        }
    }

    TEST_CASE("optimized mode holds less state") {
        MeterConfig opt;
        opt.optimized = true;
        Protocol a(2, 1), b(2, 1, {4, 7, Purpose::DataDrivenServices, 0.0}, 512, 99, opt);
        for (auto* p : {&a, &b}) {
            p->enroll_all();
            p->share_key();
            for (std::size_t i = 0; i < 10; ++i) p->report(0, i);
        }
        CHECK(b.meter(0).state_bytes() < a.meter(0).state_bytes());
    }
}
