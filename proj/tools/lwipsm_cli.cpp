#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "lwipsm/dataset.hpp"
#include "lwipsm/errors.hpp"
#include "lwipsm/netmodel.hpp"
#include "lwipsm/scenario.hpp"
#include "lwipsm/simulation.hpp"

using namespace lwipsm;
using json = nlohmann::json;

namespace {

struct RunOpts {
    std::string scenario;
    std::optional<std::uint64_t> seed;
    std::optional<int> rsa_bits;
    std::string out = "out";
    bool optimized = false;
    std::string adversary;
    std::string format = "table";
};

ScenarioConfig load_config(const std::string& path) {
    return path.empty() ? ScenarioConfig{} : ScenarioConfig::load(path);
}

void print_counters_table(const OperationCounters& c, const std::string& who) {
    std::cout << who << "\n";
    for (const auto& [k, v] : c.fields()) std::printf("  %-26s %llu\n", k.c_str(), static_cast<unsigned long long>(v));
}

int cmd_run(const RunOpts& o) {
    auto cfg = load_config(o.scenario);
    if (o.seed) cfg.seed = *o.seed;
    if (o.rsa_bits) cfg.rsa_bits = *o.rsa_bits;
    if (o.optimized) cfg.optimized = true;
    if (!o.adversary.empty()) {
        const auto targets = cfg.adversary.targets;
        cfg.adversary = AdversarySpec::parse(o.adversary);
        cfg.adversary.targets = targets;
    }
    const auto res = run_scenario(cfg);
    res.write(o.out);
    const auto& m = res.metrics;
    if (o.format == "json") {
        std::cout << res.metrics_json;
        return 0;
    }
    if (o.format == "csv") {
        std::cout << "metric,value\n"
                  << "reports_sent," << m.reports.sent << "\n"
                  << "reports_accepted," << m.reports.accepted << "\n"
                  << "reports_rejected," << m.reports.rejected << "\n"
                  << "archived_records," << m.archived_records << "\n"
                  << "tokens_issued," << m.tokens_issued << "\n"
                  << "tampered," << m.adversary.tampered << "\n"
                  << "tampered_rejected," << m.adversary.tampered_rejected << "\n"
                  << "t_total," << res.timings.total << "\n";
        return 0;
    }
    for (const auto& p : m.programs)
        std::printf("program %u: freq %u, pd %u, %zu participants, %s%s\n", p.id, p.freq, p.pd, p.participants,
                    p.decision == ThresholdDecision::Execute ? "executed" : "cancelled",
                    p.key_established ? "" : " (no shared key)");
    std::printf("reports: %zu sent, %zu accepted, %zu rejected, %zu confirmed\n", m.reports.sent, m.reports.accepted,
                m.reports.rejected, m.reports.confirmed);
    std::printf("archive: %zu records; tokens issued: %zu\n", m.archived_records, m.tokens_issued);
    for (const auto& [k, v] : m.redemptions) std::printf("redemption %s: %zu\n", k.c_str(), v);
    if (m.adversary.mode != AdversaryMode::None)
        std::printf("adversary %s: %zu tampered, %zu rejected, %zu accepted; %zu id leaks, %zu value leaks\n",
                    std::string(to_string(m.adversary.mode)).c_str(), m.adversary.tampered,
                    m.adversary.tampered_rejected, m.adversary.tampered_accepted, m.adversary.id_leaks,
                    m.adversary.value_leaks);
    if (m.counter_check_applicable)
        std::printf("counter check: %s\n", m.counter_mismatches.empty() ? "matches prediction" : "MISMATCH");
    for (const auto& d : m.counter_mismatches) std::printf("  %s\n", d.c_str());
    std::printf("time: meters %.6f s, aggregator %.6f s, utility %.6f s\n", res.timings.meter_total,
                res.timings.aggregator, res.timings.utility);
    std::printf("outputs written to %s\n", o.out.c_str());
    return 0;
}

int cmd_bench(const std::string& scenario, const std::vector<int>& bits, int repeats, const std::string& format) {
    const auto rows = benchmark(bits, load_config(scenario), repeats);
    if (format == "json") {
        json j = json::array();
        for (const auto& r : rows)
            j.push_back({{"bits", r.rsa_bits}, {"t_sm", r.meter}, {"t_agg", r.aggregator}, {"t_up", r.utility},
                         {"t_vas", r.total}});
        std::cout << j.dump(2) << "\n";
    } else if (format == "csv") {
        std::cout << "bits,t_sm,t_agg,t_up,t_vas\n";
        for (const auto& r : rows)
            std::printf("%d,%.9f,%.9f,%.9f,%.9f\n", r.rsa_bits, r.meter, r.aggregator, r.utility, r.total);
    } else {
        std::cout << benchmark_table(rows);
        std::printf("strictly increasing: %s\n", strictly_increasing(rows) ? "yes" : "no");
    }
    return 0;
}

int cmd_nettable(const std::string& framing, std::int64_t sharing, const std::string& format) {
    const auto table = framing.empty() ? FramingTable::builtin() : FramingTable::load(framing);
    const auto cells = communication_table(table, sharing);
    if (format == "csv") {
        std::cout << communication_table_csv(cells);
    } else if (format == "json") {
        json j = json::array();
        for (const auto& c : cells)
            j.push_back({{"message", c.label},
                         {"payload", c.payload},
                         {"stack", to_string(c.stack)},
                         {"packet", c.packet},
                         {"time_s", c.time.fixed(5)}});
        std::cout << j.dump(2) << "\n";
    } else {
        std::cout << communication_table_text(cells);
    }
    std::vector<std::size_t> payloads;
    for (const auto& r : reference_payloads()) payloads.push_back(r.payload);
    if (format == "table")
        for (auto s : all_stacks)
            std::printf("min bandwidth %-18s %lld bit/s\n", std::string(to_string(s)).c_str(),
                        static_cast<long long>(min_required_bandwidth(payloads, s, table)));
    return 0;
}

int cmd_counters(std::uint32_t freq, std::uint32_t pd, std::size_t participants, bool noiseless, int bits,
                 std::uint64_t seed, const std::string& format) {
    ScenarioConfig cfg;
    cfg.seed = seed;
    cfg.rsa_bits = bits;
    cfg.meters = participants;
    cfg.catalog = {{freq, pd, Purpose::DataDrivenServices, noiseless ? 0.0 : 1.0}};
    cfg.participation = {{1, participants}};
    cfg.anonymity_threshold = participants - 1;
    const auto res = run_scenario(cfg);
    const auto& m = res.metrics;
    if (!m.counter_check_applicable) {
        std::cerr << "counter check not applicable: the program did not run to completion\n";
        return 1;
    }
    const auto p = predict_counters(freq, pd, participants, !noiseless);
    const bool ok = m.counter_mismatches.empty();
    if (format == "json") {
        auto obj = [](const OperationCounters& c) {
            json j = json::object();
            for (const auto& [k, v] : c.fields()) j[k] = v;
            return j;
        };
        json j = {{"predicted",
                   {{"meter_designated", obj(p.meter_designated)},
                    {"meter_other", obj(p.meter_other)},
                    {"aggregator", obj(p.aggregator)},
                    {"utility_flow", obj(p.utility_flow)}}},
                  {"mismatches", m.counter_mismatches},
                  {"all_match", ok}};
        std::cout << j.dump(2) << "\n";
    } else {
        print_counters_table(p.meter_designated, "meter (key generator)");
        print_counters_table(p.meter_other, "meter");
        print_counters_table(p.aggregator, "aggregator");
        print_counters_table(p.utility_flow, "utility (per meter, with program-wide work)");
        for (const auto& d : m.counter_mismatches) std::printf("mismatch %s\n", d.c_str());
        std::printf("%zu meters measured against prediction: %s\n", participants, ok ? "all match" : "MISMATCH");
    }
    return ok ? 0 : 1;
}

int cmd_validate(const std::string& path, bool lenient) {
    const auto d = load_dataset(path, !lenient);
    std::size_t rows = 0;
    for (const auto& [id, rs] : d) rows += rs.size();
    std::printf("ok: %zu meters, %zu readings\n", d.size(), rows);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Privacy-preserving smart-metering simulator"};
    app.require_subcommand(1);

    RunOpts ro;
    auto* run = app.add_subcommand("run", "Simulate a scenario and write outputs");
    run->add_option("--scenario", ro.scenario, "Scenario JSON file")->check(CLI::ExistingFile);
    run->add_option("--seed", ro.seed, "Override the seed");
    run->add_option("--rsa-bits", ro.rsa_bits, "Override the RSA modulus size");
    run->add_option("--out", ro.out, "Output directory");
    run->add_flag("--optimized", ro.optimized, "Free ciphertexts after use");
    run->add_option("--adversary", ro.adversary, "none | eavesdrop | tamper:<rate>");
    run->add_option("--format", ro.format, "Summary format")->check(CLI::IsMember({"json", "csv", "table"}));

    std::string bench_scenario, bench_format = "table";
    std::vector<int> bench_bits = {128, 256, 512, 1024, 2048};
    int repeats = 1;
    auto* bench = app.add_subcommand("bench", "Time one meter through a program per key size");
    bench->add_option("--scenario", bench_scenario, "Scenario JSON file")->check(CLI::ExistingFile);
    bench->add_option("--bits", bench_bits, "Key sizes")->delimiter(',');
    bench->add_option("--repeats", repeats, "Runs per key size; the fastest is kept")->check(CLI::PositiveNumber);
    bench->add_option("--format", bench_format, "Output format")->check(CLI::IsMember({"json", "csv", "table"}));

    std::string framing, net_format = "table";
    std::int64_t sharing = 20;
    auto* net = app.add_subcommand("nettable", "Packet sizes and transmission times per link");
    net->add_option("--framing", framing, "Framing anchor CSV")->check(CLI::ExistingFile);
    net->add_option("--meters-sharing", sharing, "Meters sharing each link")->check(CLI::PositiveNumber);
    net->add_option("--format", net_format, "Output format")->check(CLI::IsMember({"json", "csv", "table"}));

    std::uint32_t freq = 4, pd = 7;
    std::size_t participants = 20;
    bool noiseless = false;
    std::string cnt_format = "table";
    int cnt_bits = 1024;
    std::uint64_t cnt_seed = 42;
    auto* cnt = app.add_subcommand("counters", "Run one program and compare operation counts with the prediction");
    cnt->add_option("--rsa-bits", cnt_bits, "RSA modulus size");
    cnt->add_option("--seed", cnt_seed, "Seed");
    cnt->add_option("--freq", freq, "Reports per day");
    cnt->add_option("--pd", pd, "Program duration in days");
    cnt->add_option("--participants", participants, "Participating meters")->check(CLI::PositiveNumber);
    cnt->add_flag("--noiseless", noiseless, "Program without noise");
    cnt->add_option("--format", cnt_format, "Output format")->check(CLI::IsMember({"json", "table"}));

    std::string dataset_path;
    bool lenient = false;
    auto* val = app.add_subcommand("validate-dataset", "Check a readings CSV");
    val->add_option("file", dataset_path, "Dataset CSV")->required()->check(CLI::ExistingFile);
    val->add_flag("--lenient", lenient, "Allow whole-interval gaps");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        if (rc != 0) std::cerr << app.help();
        return rc;
    }

    try {
        if (*run) return cmd_run(ro);
        if (*bench) return cmd_bench(bench_scenario, bench_bits, repeats, bench_format);
        if (*net) return cmd_nettable(framing, sharing, net_format);
        if (*cnt) return cmd_counters(freq, pd, participants, noiseless, cnt_bits, cnt_seed, cnt_format);
        if (*val) return cmd_validate(dataset_path, lenient);
    } catch (const DatasetError& e) {
        std::cerr << "dataset error: " << e.what() << "\n";
        return 3;
    } catch (const ConfigError& e) {
        std::cerr << "configuration error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
