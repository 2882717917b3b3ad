#include "lwipsm/dataset.hpp"

#include <cmath>
#include <charconv>
#include <fstream>
#include <numbers>
#include <sstream>

#include "lwipsm/errors.hpp"

namespace lwipsm {

std::vector<MeterId> meter_ids(std::size_t count) {
    std::vector<MeterId> out;
    char buf[32];
    for (std::size_t i = 0; i < count; ++i) {
        std::snprintf(buf, sizeof buf, "meter-%04zu", i);
        out.emplace_back(buf);
    }
    return out;
}

namespace {

double parse_number(const std::string& s, const char* field, std::size_t row) {
    double v = 0.0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size() || !std::isfinite(v))
        throw DatasetError(std::string("bad ") + field + " '" + s + "'", row);
    if (v < 0.0) throw DatasetError(std::string("negative ") + field, row);
    return v;
}

}  // namespace

Dataset parse_dataset(std::string_view csv, bool strict) {
    Dataset d;
    std::istringstream in{std::string(csv)};
    std::string line;
    std::size_t row = 0;
    bool header = false;
    std::size_t rows = 0;
    while (std::getline(in, line)) {
        ++row;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<std::string> f;
        std::istringstream ls(line);
        for (std::string c; std::getline(ls, c, ',');) f.push_back(c);
        if (!header) {
            if (f != std::vector<std::string>{"timestamp", "meter_id", "active_kwh", "reactive_kvarh"})
                throw DatasetError("header must be timestamp,meter_id,active_kwh,reactive_kvarh", row);
            header = true;
            continue;
        }
        if (f.size() != 4) throw DatasetError("expected 4 columns, got " + std::to_string(f.size()), row);
        Reading r;
        try {
            r.timestamp = DateTime::parse(f[0]);
        } catch (const InvalidParameter& e) {
            throw DatasetError(e.what(), row);
        }
        if (f[1].empty()) throw DatasetError("empty meter_id", row);
        r.active_kwh = parse_number(f[2], "active_kwh", row);
        r.reactive_kvarh = parse_number(f[3], "reactive_kvarh", row);
        if (r.timestamp.epoch % reading_interval.seconds != 0)
            throw DatasetError("timestamp " + f[0] + " is off the 15-minute grid", row);

        auto& series = d[f[1]];
        if (!series.empty()) {
            const auto gap = (r.timestamp - series.back().timestamp).seconds;
            if (gap <= 0) throw DatasetError("timestamp " + f[0] + " is out of order for " + f[1], row);
            if (strict && gap != reading_interval.seconds)
                throw DatasetError("cadence of " + std::to_string(gap) + " s for " + f[1] + ", expected 900 s", row);
        }
        series.push_back(std::move(r));
        ++rows;
    }
    if (!header) throw DatasetError("empty dataset", row == 0 ? 1 : row);
    if (rows == 0) throw DatasetError("dataset has no readings", row);
    return d;
}

Dataset load_dataset(const std::filesystem::path& path, bool strict) {
    std::ifstream f(path);
    if (!f) throw DatasetError("cannot open dataset " + path.string(), 0);
    std::stringstream ss;
    ss << f.rdbuf();
    return parse_dataset(ss.str(), strict);
}

std::string dataset_to_csv(const Dataset& d) {
    std::string out = "timestamp,meter_id,active_kwh,reactive_kvarh\n";
    char buf[64];
    for (const auto& [id, series] : d)
        for (const auto& r : series) {
            std::snprintf(buf, sizeof buf, ",%.6f,%.6f\n", r.active_kwh, r.reactive_kvarh);
            out += r.timestamp.iso() + ',' + id + buf;
        }
    return out;
}

Dataset synthetic_dataset(const SyntheticParams& p, Rng& rng) {
    if (p.meters == 0 || p.days == 0) throw InvalidParameter("synthetic dataset needs meters and days");
    if (!(p.mean_kw > 0.0)) throw InvalidParameter("mean draw must be positive");
    Dataset d;
    const auto ids = meter_ids(p.meters);
    const std::size_t slots = p.days * 96;
    for (const auto& id : ids) {
        auto r = rng.fork(id);
        const double scale = 0.5 + r.uniform01();
        const double pf = 0.2 + 0.2 * r.uniform01();
        auto& series = d[id];
        series.reserve(slots);
        for (std::size_t k = 0; k < slots; ++k) {
            const double hour = static_cast<double>(k % 96) / 4.0;
            const double morning = std::exp(-0.5 * std::pow((hour - 7.5) / 1.2, 2));
            const double evening = 1.6 * std::exp(-0.5 * std::pow((hour - 19.0) / 1.8, 2));
            const double shape = 0.45 + morning + evening;
            double kw = p.mean_kw * scale * shape / 1.25 * (1.0 + 0.15 * r.normal(0.0, 1.0));
            if (kw < 0.02) kw = 0.02;
            Reading rd;
            rd.timestamp = p.start + reading_interval * static_cast<std::int64_t>(k);
            rd.active_kwh = std::round(kw / 4.0 * 1e6) / 1e6;
            rd.reactive_kvarh = std::round(rd.active_kwh * pf * 1e6) / 1e6;
            series.push_back(rd);
        }
    }
    return d;
}

}  // namespace lwipsm
