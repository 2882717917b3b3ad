#include <doctest.h>

#include <string>

#include "lwipsm/dataset.hpp"
#include "lwipsm/errors.hpp"
#include "lwipsm/scenario.hpp"

using namespace lwipsm;

namespace {

const std::string header = "timestamp,meter_id,active_kwh,reactive_kvarh\n";

std::size_t failing_row(const std::string& csv, bool strict = true) {
    try {
        parse_dataset(csv, strict);
    } catch (const DatasetError& e) {
        return e.row();
    }
    return 0;
}

}  // namespace

TEST_SUITE("dataset") {
    TEST_CASE("meter ids") {
        CHECK(meter_ids(3) == std::vector<MeterId>{"meter-0000", "meter-0001", "meter-0002"});
    }

    TEST_CASE("parse and render") {
        const std::string csv = header +
                                "2024-01-02T00:00:00Z,m1,0.25,0.1\n"
                                "2024-01-02T00:15:00Z,m1,0.5,0.1\n"
                                "2024-01-02T00:00:00Z,m2,1,0\n";
        const auto d = parse_dataset(csv);
        REQUIRE(d.size() == 2);
        CHECK(d.at("m1").size() == 2);
        CHECK(d.at("m1")[1].active_kwh == 0.5);
        CHECK(d.at("m1")[1].timestamp == DateTime::from_civil(2024, 1, 2, 0, 15));
        CHECK(parse_dataset(dataset_to_csv(d)) == d);
    }

    TEST_CASE("errors name the offending row") {
        CHECK(failing_row("") == 1);
        CHECK(failing_row("time,id,kwh,kvarh\n") == 1);
        CHECK(failing_row(header) == 1);
        CHECK(failing_row(header + "2024-01-02T00:00:00Z,m1,0.1\n") == 2);
        CHECK(failing_row(header + "2024-01-02T00:00:00Z,m1,0.1,0\nnot-a-time,m1,0.1,0\n") == 3);
        CHECK(failing_row(header + "2024-01-02T00:00:00Z,,0.1,0\n") == 2);
        CHECK(failing_row(header + "2024-01-02T00:00:00Z,m1,abc,0\n") == 2);
        CHECK(failing_row(header + "2024-01-02T00:00:00Z,m1,-1,0\n") == 2);
        CHECK(failing_row(header + "2024-01-02T00:07:00Z,m1,1,0\n") == 2);
        const std::string backwards = header + "2024-01-02T00:15:00Z,m1,1,0\n2024-01-02T00:00:00Z,m1,1,0\n";
        CHECK(failing_row(backwards) == 3);
        CHECK(failing_row(backwards, false) == 3);
        const std::string gap = header + "2024-01-02T00:00:00Z,m1,1,0\n2024-01-02T00:45:00Z,m1,1,0\n";
        CHECK(failing_row(gap) == 3);
        CHECK(failing_row(gap, false) == 0);
        CHECK_THROWS_AS(load_dataset("/nonexistent/readings.csv"), DatasetError);
    }

    TEST_CASE("synthetic data is deterministic and on the grid") {
        SyntheticParams p;
        p.meters = 3;
        p.days = 2;
        p.start = DateTime::from_civil(2024, 1, 1);
        Rng a(7), b(7), c(8);
        const auto da = synthetic_dataset(p, a);
        CHECK(da == synthetic_dataset(p, b));
        CHECK_FALSE(da == synthetic_dataset(p, c));
        REQUIRE(da.size() == 3);
        double total = 0.0;
        std::size_t count = 0;
        for (const auto& [id, series] : da) {
            CHECK(series.size() == 2 * 96);
            for (std::size_t i = 0; i < series.size(); ++i) {
                CHECK(series[i].timestamp == p.start + reading_interval * static_cast<std::int64_t>(i));
                CHECK(series[i].active_kwh >= 0.0);
                total += series[i].active_kwh;
                ++count;
            }
        }
        // kWh per quarter hour averages near mean_kw / 4.
        CHECK(total / count == doctest::Approx(0.6 / 4).epsilon(0.35));
        p.meters = 0;
        CHECK_THROWS_AS(synthetic_dataset(p, a), InvalidParameter);
    }
}

TEST_SUITE("scenario") {
    TEST_CASE("defaults validate") {
        ScenarioConfig c;
        CHECK_NOTHROW(c.validate());
        CHECK(c.meters == 20);
        CHECK(c.anonymity_threshold == 10);
    }

    TEST_CASE("json round trip") {
        auto c = ScenarioConfig::from_json(R"({"schema_version":1,"seed":7,"rsa_bits":512,"meters":6,
            "participation":[{"program":1,"meters":3},{"program":2,"meters":2}],
            "anonymity_threshold":2,"topology":"clique","overlay":{"min_hops":2,"max_hops":5,"drop_probability":0.1},
            "adversary":{"mode":"tamper","tamper_rate":0.25,"targets":["nan","wan"]},
            "missing_data":"interpolate","optimized":true})");
        CHECK(c.seed == 7);
        CHECK(c.rsa_bits == 512);
        CHECK(c.participation.size() == 2);
        CHECK(c.overlay.max_hops == 5);
        CHECK(c.adversary.mode == AdversaryMode::Tamper);
        CHECK(c.adversary.tamper_rate == 0.25);
        CHECK(c.adversary.targets_link(LinkClass::Wan));
        CHECK(c.missing == MissingDataPolicy::Interpolate);
        CHECK(c.optimized);
        const auto again = ScenarioConfig::from_json(c.to_json());
        CHECK(again.to_json() == c.to_json());
    }

    TEST_CASE("strict parsing") {
        CHECK_THROWS_AS(ScenarioConfig::from_json("{"), ConfigError);
        CHECK_THROWS_AS(ScenarioConfig::from_json(R"({"seed":1})"), ConfigError);
        CHECK_THROWS_AS(ScenarioConfig::from_json(R"({"schema_version":2})"), ConfigError);
        CHECK_THROWS_AS(ScenarioConfig::from_json(R"({"schema_version":1,"sead":1})"), ConfigError);
        CHECK_THROWS_AS(ScenarioConfig::from_json(R"({"schema_version":1,"seed":"x"})"), ConfigError);
        CHECK_THROWS_AS(ScenarioConfig::from_json(R"({"schema_version":1,"rsa_bits":1000})"), ConfigError);
        CHECK_THROWS_AS(ScenarioConfig::from_json(R"({"schema_version":1,"meters":0})"), ConfigError);
        CHECK_THROWS_AS(ScenarioConfig::from_json(R"({"schema_version":1,"topology":"star"})"), ConfigError);
        CHECK_THROWS_AS(ScenarioConfig::from_json(R"({"schema_version":1,"missing_data":"guess"})"), ConfigError);
        CHECK_THROWS_AS(ScenarioConfig::from_json(R"({"schema_version":1,"overlay":{"hops":2}})"), ConfigError);
        CHECK_THROWS_AS(
            ScenarioConfig::from_json(R"({"schema_version":1,"participation":[{"program":42,"meters":1}]})"),
            ConfigError);
        CHECK_THROWS_AS(
            ScenarioConfig::from_json(R"({"schema_version":1,"meters":3,"participation":[{"program":1,"meters":4}]})"),
            ConfigError);
        CHECK_THROWS_AS(ScenarioConfig::from_json(R"({"schema_version":1,"epsilon":0})"), ConfigError);
        CHECK_THROWS_AS(ScenarioConfig::load("/nonexistent/scenario.json"), ConfigError);
    }

    TEST_CASE("adversary specs") {
        CHECK(AdversarySpec::parse("none").mode == AdversaryMode::None);
        CHECK(AdversarySpec::parse("eavesdrop").mode == AdversaryMode::Eavesdrop);
        const auto t = AdversarySpec::parse("tamper:0.5");
        CHECK(t.mode == AdversaryMode::Tamper);
        CHECK(t.tamper_rate == 0.5);
        CHECK(t.targets_link(LinkClass::Nan));
        CHECK_FALSE(t.targets_link(LinkClass::Wan));
        CHECK_THROWS_AS(AdversarySpec::parse("tamper:"), ConfigError);
        CHECK_THROWS_AS(AdversarySpec::parse("tamper:0.5x"), ConfigError);
        CHECK_THROWS_AS(AdversarySpec::parse("tamper:1.5"), ConfigError);
        CHECK_THROWS_AS(AdversarySpec::parse("jam"), ConfigError);
        CHECK(AdversarySpec::parse_targets({"wan", "nan"}).size() == 2);
        CHECK_THROWS_AS(AdversarySpec::parse_targets({"utility-db"}), ConfigError);
        AdversarySpec empty;
        empty.mode = AdversaryMode::Eavesdrop;
        empty.targets.clear();
        CHECK_THROWS_AS(empty.validate(), ConfigError);
    }
}
