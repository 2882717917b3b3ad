#include "lwipsm/program.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>

#include "lwipsm/errors.hpp"
#include "lwipsm/hash.hpp"

namespace lwipsm {

namespace {

std::string lower(std::string_view s) {
    std::string r(s);
    std::transform(r.begin(), r.end(), r.begin(), [](unsigned char c) { return std::tolower(c); });
    return r;
}

std::string trim(std::string_view s) {
    auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

std::string describe(const Program& pr) {
    std::ostringstream os;
    os << "Program " << pr.id << ": " << pr.freq << " reports/day for " << pr.pd << " days, purpose "
       << to_string(pr.prp) << ", noise scale " << pr.nsc << "; reward " << pr.tokinf.value << " valid "
       << pr.tokinf.valid_days << " days, active " << pr.tokinf.activation_delay.seconds / 3600
       << "h after the final report";
    return os.str();
}

constexpr std::size_t scalar_bytes = 4 + 4 + 8 + 8 + 8 + 4 + 8 + 1 + 8;
constexpr std::size_t checksum_bytes = 32;
constexpr std::size_t description_bytes = program_record_size - scalar_bytes - 4 - checksum_bytes;

}  // namespace

std::string_view to_string(Purpose p) {
    switch (p) {
        case Purpose::DataDrivenServices: return "DataDrivenServices";
        case Purpose::TariffSpecification: return "TariffSpecification";
        case Purpose::OperationalServices: return "OperationalServices";
        case Purpose::Advertisement: return "Advertisement";
    }
    return "?";
}

Purpose parse_purpose(std::string_view s) {
    const auto k = lower(trim(s));
    if (k == "datadrivenservices" || k == "datadriven" || k == "data-driven services" || k == "data-driven")
        return Purpose::DataDrivenServices;
    if (k == "tariffspecification" || k == "tariff") return Purpose::TariffSpecification;
    if (k == "operationalservices" || k == "operational") return Purpose::OperationalServices;
    if (k == "advertisement" || k == "advertising") return Purpose::Advertisement;
    throw InvalidParameter("unknown purpose: " + std::string(s));
}

RewardWeights RewardWeights::defaults() {
    RewardWeights w;
    w.base_incentive = 5.0;
    w.freq_weight_val = 0.5;
    w.pd_weight_val = 1.0;
    w.noise_weight_val = 1.0;
    w.base_valid_day = 30.0;
    w.freq_weight_exp = 1.0;
    w.pd_weight_exp = 1.0;
    w.noise_weight_exp = 2.0;
    // Only the data-driven weights are pinned by the reference program (12/day, 7 days, noise 5); the rest
    // rank purposes by disclosure risk (advertisement highest).
    w.prp_weight_val = {{Purpose::DataDrivenServices, 2.0},
                        {Purpose::TariffSpecification, 1.0},
                        {Purpose::OperationalServices, 0.5},
                        {Purpose::Advertisement, 4.0}};
    w.prp_weight_exp = {{Purpose::DataDrivenServices, 6.0},
                        {Purpose::TariffSpecification, 4.0},
                        {Purpose::OperationalServices, 2.0},
                        {Purpose::Advertisement, 10.0}};
    return w;
}

RewardWeights RewardWeights::zero() {
    RewardWeights w;
    for (auto p : all_purposes) {
        w.prp_weight_val[p] = 0.0;
        w.prp_weight_exp[p] = 0.0;
    }
    return w;
}

void RewardWeights::validate() const {
    auto ok = [](double v) { return std::isfinite(v) && v >= 0.0; };
    for (double v : {base_incentive, freq_weight_val, pd_weight_val, noise_weight_val, base_valid_day,
                     freq_weight_exp, pd_weight_exp, noise_weight_exp})
        if (!ok(v)) throw ConfigError("reward weights must be finite and non-negative");
    for (auto p : all_purposes) {
        auto v = prp_weight_val.find(p);
        auto x = prp_weight_exp.find(p);
        if (v == prp_weight_val.end() || x == prp_weight_exp.end())
            throw ConfigError("reward weights missing purpose " + std::string(to_string(p)));
        if (!ok(v->second) || !ok(x->second)) throw ConfigError("reward weights must be finite and non-negative");
    }
    if (activation_delay.seconds < 0) throw ConfigError("token activation delay must be non-negative");
}

TokenInfo compute_reward(std::uint32_t freq, std::uint32_t pd, Purpose prp, double nsc, const RewardWeights& w) {
    w.validate();
    TokenInfo t;
    t.value = w.base_incentive + w.freq_weight_val * freq + w.pd_weight_val * pd + w.prp_weight_val.at(prp) -
              w.noise_weight_val * nsc;
    t.valid_days = w.base_valid_day + w.freq_weight_exp * freq + w.pd_weight_exp * pd + w.prp_weight_exp.at(prp) -
                   w.noise_weight_exp * nsc;
    t.activation_delay = w.activation_delay;
    if (!(t.value > 0.0) || !(t.valid_days > 0.0))
        throw ConfigError("reward configuration yields a non-positive token value or validity");
    return t;
}

bool validate_program(const Program& pr) {
    const bool freq_ok =
        std::find(allowed_frequencies.begin(), allowed_frequencies.end(), pr.freq) != allowed_frequencies.end();
    const bool pd_ok = pr.pd >= min_duration_days && pr.pd <= max_duration_days;
    return freq_ok && pd_ok && std::isfinite(pr.nsc) && pr.nsc >= 0.0;
}

std::vector<ProgramSpec> default_catalog_specs() {
    using P = Purpose;
    return {
        {4, 7, P::DataDrivenServices, 0.0},   {4, 7, P::DataDrivenServices, 1.0},
        {6, 14, P::TariffSpecification, 0.0}, {8, 7, P::OperationalServices, 1.0},
        {12, 7, P::DataDrivenServices, 5.0},  {12, 14, P::Advertisement, 2.0},
        {16, 21, P::DataDrivenServices, 1.0}, {6, 10, P::TariffSpecification, 2.0},
        {8, 21, P::OperationalServices, 0.0}, {16, 7, P::Advertisement, 5.0},
    };
}

std::vector<ProgramSpec> parse_catalog_config(std::string_view text) {
    std::vector<ProgramSpec> out;
    std::istringstream in{std::string(text)};
    std::string line;
    std::size_t row = 0;
    while (std::getline(in, line)) {
        ++row;
        auto t = trim(line);
        if (t.empty() || t.front() == '#') continue;
        std::vector<std::string> cols;
        std::stringstream ls(t);
        std::string cell;
        while (std::getline(ls, cell, ',')) cols.push_back(trim(cell));
        if (cols.size() != 4) throw DatasetError("catalog row needs freq,pd,purpose,nsc", row);
        if (lower(cols[0]) == "freq") continue;
        try {
            ProgramSpec s;
            s.freq = static_cast<std::uint32_t>(std::stoul(cols[0]));
            s.pd = static_cast<std::uint32_t>(std::stoul(cols[1]));
            s.prp = parse_purpose(cols[2]);
            s.nsc = std::stod(cols[3]);
            out.push_back(s);
        } catch (const InvalidParameter& e) {
            throw DatasetError(e.what(), row);
        } catch (const std::logic_error&) {
            throw DatasetError("catalog row has a non-numeric field", row);
        }
    }
    return out;
}

std::vector<ProgramSpec> load_catalog_config(const std::filesystem::path& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot open catalog config " + path.string());
    std::stringstream ss;
    ss << f.rdbuf();
    return parse_catalog_config(ss.str());
}

std::vector<Program> generate_program_list(std::span<const ProgramSpec> specs, const RewardWeights& w,
                                           DateTime now) {
    std::vector<Program> out;
    out.reserve(specs.size());
    const DateTime pat = now.next_midnight();
    for (std::size_t i = 0; i < specs.size(); ++i) {
        const auto& s = specs[i];
        Program pr;
        pr.id = static_cast<std::uint32_t>(i + 1);
        pr.freq = s.freq;
        pr.pd = s.pd;
        pr.prp = s.prp;
        pr.nsc = s.nsc;
        pr.pat = pat;
        if (!validate_program(pr))
            throw InvalidParameter("catalog entry " + std::to_string(i + 1) + " is invalid (freq " +
                                   std::to_string(s.freq) + ", pd " + std::to_string(s.pd) + ")");
        pr.tokinf = compute_reward(s.freq, s.pd, s.prp, s.nsc, w);
        pr.description = describe(pr);
        out.push_back(std::move(pr));
    }
    return out;
}

ThresholdDecision check_anonymity_threshold(std::size_t participant_count, std::size_t threshold) {
    return participant_count > threshold ? ThresholdDecision::Execute : ThresholdDecision::Cancel;
}

Bytes program_record(const Program& pr) {
    Encoder e;
    e.u32(pr.id)
        .u32(pr.freq)
        .f64(pr.tokinf.value)
        .f64(pr.tokinf.valid_days)
        .i64(pr.tokinf.activation_delay.seconds)
        .u32(pr.pd)
        .i64(pr.pat.epoch)
        .u8(static_cast<std::uint8_t>(pr.prp))
        .f64(pr.nsc);
    Bytes desc(description_bytes, 0);
    std::copy_n(pr.description.begin(), std::min(pr.description.size(), description_bytes), desc.begin());
    e.bytes(view(desc));
    auto sum = sha256(view(e.data()));
    e.fixed(sum);
    return std::move(e).take();
}

Program parse_program_record(ByteView record) {
    if (record.size() != program_record_size) throw DecodeError("program record has wrong size");
    const auto body = record.first(program_record_size - checksum_bytes);
    const auto sum = sha256(body);
    if (!std::equal(sum.begin(), sum.end(), record.begin() + static_cast<std::ptrdiff_t>(body.size())))
        throw DecodeError("program record checksum mismatch");
    Decoder d(body);
    Program pr;
    pr.id = d.u32();
    pr.freq = d.u32();
    pr.tokinf.value = d.f64();
    pr.tokinf.valid_days = d.f64();
    pr.tokinf.activation_delay = Duration{d.i64()};
    pr.pd = d.u32();
    pr.pat = DateTime{d.i64()};
    const auto prp = d.u8();
    if (prp > static_cast<std::uint8_t>(Purpose::Advertisement)) throw DecodeError("unknown purpose code");
    pr.prp = static_cast<Purpose>(prp);
    pr.nsc = d.f64();
    auto desc = d.bytes();
    if (desc.size() != description_bytes) throw DecodeError("program description has wrong size");
    auto end = std::find(desc.begin(), desc.end(), std::uint8_t{0});
    pr.description.assign(desc.begin(), end);
    d.expect_done();
    return pr;
}

void encode_program(Encoder& e, const Program& pr) { e.bytes(view(program_record(pr))); }

Program decode_program(Decoder& d) {
    auto rec = d.bytes();
    return parse_program_record(view(rec));
}

Bytes encode_catalog(std::span<const Program> programs) {
    Encoder e;
    for (const auto& p : programs) encode_program(e, p);
    return std::move(e).take();
}

std::vector<Program> decode_catalog(ByteView bytes) {
    Decoder d(bytes);
    std::vector<Program> out;
    while (!d.done()) out.push_back(decode_program(d));
    return out;
}

}  // namespace lwipsm
