#include <doctest.h>

#include <cmath>
#include <cstring>
#include <vector>

#include "lwipsm/analysis.hpp"
#include "lwipsm/bytes.hpp"

using namespace lwipsm;

TEST_SUITE("analysis") {
    TEST_CASE("sample statistics") {
        const std::vector<double> xs{2, 4, 4, 4, 5, 5, 7, 9};
        const auto s = sample_stats(xs);
        CHECK(s.n == 8);
        CHECK(s.mean == doctest::Approx(5.0));
        // Sum of squared deviations is 32.
        CHECK(s.stddev == doctest::Approx(std::sqrt(32.0 / 7.0)));
        CHECK(sample_stats(std::vector<double>{}).n == 0);
        CHECK(sample_stats(std::vector<double>{3.0}).stddev == 0.0);
    }

    TEST_CASE("welford survives a large offset") {
        std::vector<double> xs;
        for (int i = 0; i < 1000; ++i) xs.push_back(1e9 + (i % 2));
        CHECK(sample_stats(xs).stddev == doctest::Approx(std::sqrt(250.0 / 999.0)).epsilon(1e-9));
    }

    TEST_CASE("chi-square against uniform") {
        const std::vector<std::size_t> skew{20, 0};
        const auto c = chi_square_uniform(skew);
        CHECK(c.statistic == doctest::Approx(20.0));
        CHECK(c.dof == 1);
        CHECK(c.p_value == doctest::Approx(std::erfc(std::sqrt(10.0))).epsilon(1e-9));
        const std::vector<std::size_t> flat{10, 10, 10, 10};
        const auto f = chi_square_uniform(flat);
        CHECK(f.statistic == 0.0);
        CHECK(f.dof == 3);
        CHECK(f.p_value == doctest::Approx(1.0));
    }

    TEST_CASE("mutual information") {
        using P = std::pair<std::string, std::string>;
        const std::vector<P> copy{{"a", "a"}, {"b", "b"}, {"a", "a"}, {"b", "b"}};
        CHECK(mutual_information(copy) == doctest::Approx(1.0));
        const std::vector<P> independent{{"a", "x"}, {"a", "y"}, {"b", "x"}, {"b", "y"}};
        CHECK(mutual_information(independent) == doctest::Approx(0.0));
        const std::vector<P> constant{{"a", "x"}, {"b", "x"}};
        CHECK(mutual_information(constant) == doctest::Approx(0.0));
    }

    TEST_CASE("f64 pattern matches the encoded bytes") {
        for (double v : {1.5, -0.0, 6.0, 1e-300}) {
            Encoder e;
            e.f64(v);
            const auto bytes = std::move(e).take();
            REQUIRE(bytes.size() == 8);
            std::uint64_t word;
            std::memcpy(&word, bytes.data(), 8);
            CHECK(f64_pattern(v) == word);
        }
    }

    TEST_CASE("transcript scan") {
        Encoder e;
        e.str("meter-0003");
        e.f64(2.75);
        const std::vector<Bytes> transcript{std::move(e).take(), Bytes{1, 2, 3}};
        const std::vector<std::string> ids{"meter-0003", "meter-0004"};
        const std::vector<std::uint64_t> values{f64_pattern(2.75), f64_pattern(9.0)};
        const auto scan = scan_transcript(transcript, ids, values);
        CHECK(scan.id_hits == 1);
        CHECK(scan.value_hits == 1);
        CHECK(scan.leaked_ids == std::vector<std::string>{"meter-0003"});
        const std::vector<Bytes> clean{Bytes(64, 0x5a)};
        const auto none = scan_transcript(clean, ids, values);
        CHECK(none.id_hits == 0);
        CHECK(none.value_hits == 0);
    }
}
