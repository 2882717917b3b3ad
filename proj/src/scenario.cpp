#include "lwipsm/scenario.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "lwipsm/crypto.hpp"
#include "lwipsm/errors.hpp"

namespace lwipsm {

using nlohmann::json;

std::string_view to_string(AdversaryMode m) {
    switch (m) {
        case AdversaryMode::None: return "none";
        case AdversaryMode::Eavesdrop: return "eavesdrop";
        case AdversaryMode::Tamper: return "tamper";
    }
    return "?";
}

std::string_view to_string(LinkClass c) { return c == LinkClass::Nan ? "nan" : "wan"; }

AdversarySpec AdversarySpec::parse(std::string_view s) {
    AdversarySpec a;
    if (s == "none") return a;
    if (s == "eavesdrop") {
        a.mode = AdversaryMode::Eavesdrop;
        return a;
    }
    if (s.rfind("tamper:", 0) == 0) {
        a.mode = AdversaryMode::Tamper;
        try {
            std::size_t used = 0;
            const std::string rate(s.substr(7));
            a.tamper_rate = std::stod(rate, &used);
            if (used != rate.size()) throw std::invalid_argument("trailing");
        } catch (const std::logic_error&) {
            throw ConfigError("bad tamper rate in '" + std::string(s) + "'");
        }
        a.validate();
        return a;
    }
    throw ConfigError("adversary must be none, eavesdrop or tamper:<rate>, got '" + std::string(s) + "'");
}

std::vector<LinkClass> AdversarySpec::parse_targets(const std::vector<std::string>& names) {
    std::vector<LinkClass> out;
    for (const auto& n : names) {
        if (n == "nan") out.push_back(LinkClass::Nan);
        else if (n == "wan") out.push_back(LinkClass::Wan);
        else throw ConfigError("adversary target '" + n + "' is outside the semi-trusted zone (allowed: nan, wan)");
    }
    return out;
}

bool AdversarySpec::targets_link(LinkClass c) const {
    return mode != AdversaryMode::None && std::find(targets.begin(), targets.end(), c) != targets.end();
}

void AdversarySpec::validate() const {
    if (mode == AdversaryMode::Tamper && !(tamper_rate >= 0.0 && tamper_rate <= 1.0))
        throw ConfigError("tamper rate must lie in [0, 1]");
    if (mode != AdversaryMode::None && targets.empty()) throw ConfigError("adversary has no target links");
}

void ScenarioConfig::validate() const {
    if (schema_version != scenario_schema_version)
        throw ConfigError("unsupported scenario schema_version " + std::to_string(schema_version));
    if (!supported_modulus_bits(rsa_bits)) throw ConfigError("unsupported RSA size " + std::to_string(rsa_bits));
    if (meters == 0) throw ConfigError("scenario needs at least one meter");
    if (catalog.empty()) throw ConfigError("scenario catalog is empty");
    std::size_t assigned = 0;
    std::set<std::uint32_t> seen;
    for (const auto& p : participation) {
        if (p.program_id == 0 || p.program_id > catalog.size())
            throw ConfigError("participation names unknown program " + std::to_string(p.program_id));
        if (!seen.insert(p.program_id).second)
            throw ConfigError("program " + std::to_string(p.program_id) + " listed twice in participation");
        assigned += p.meters;
    }
    if (assigned > meters) throw ConfigError("participation assigns more meters than exist");
    if (enrollment_window.seconds <= 0) throw ConfigError("enrollment window must be positive");
    if (topology != "ring" && topology != "clique") throw ConfigError("topology must be ring or clique");
    if (overlay.min_hops == 0 || overlay.max_hops < overlay.min_hops) throw ConfigError("invalid relay hop bounds");
    if (!(overlay.drop_probability >= 0.0 && overlay.drop_probability <= 1.0))
        throw ConfigError("drop probability must lie in [0, 1]");
    if (meters_sharing_link <= 0) throw ConfigError("meters_sharing_link must be positive");
    adversary.validate();
    if (!(epsilon > 0.0)) throw ConfigError("epsilon must be positive");
    if (!(p_max_kwh_per_h > 0.0)) throw ConfigError("p_max_kwh_per_h must be positive");
    if (!(synthetic_mean_kw > 0.0)) throw ConfigError("synthetic mean must be positive");
}

namespace {

template <typename T>
T get(const json& j, const char* key) {
    try {
        return j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError(std::string("scenario field '") + key + "': " + e.what());
    }
}

void check_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
    if (!j.is_object()) throw ConfigError(where + " must be an object");
    for (const auto& [k, _] : j.items()) {
        bool ok = false;
        for (auto a : allowed) ok = ok || k == a;
        if (!ok) throw ConfigError("unknown key '" + k + "' in " + where);
    }
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
    std::filesystem::path path(p);
    return path.is_absolute() || base.empty() ? path : base / path;
}

}  // namespace

ScenarioConfig ScenarioConfig::from_json(std::string_view text, const std::filesystem::path& base_dir) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("scenario is not valid JSON: ") + e.what());
    }
    check_keys(j,
               {"schema_version", "seed", "rsa_bits", "meters", "start", "catalog", "catalog_file", "participation",
                "anonymity_threshold", "enrollment_window_s", "topology", "topology_file", "overlay",
                "meters_sharing_link", "adversary", "dataset", "synthetic_mean_kw", "epsilon", "p_max_kwh_per_h",
                "missing_data", "optimized"},
               "scenario");
    ScenarioConfig c;
    if (!j.contains("schema_version")) throw ConfigError("scenario lacks schema_version");
    c.schema_version = get<int>(j, "schema_version");
    if (c.schema_version != scenario_schema_version)
        throw ConfigError("unsupported scenario schema_version " + std::to_string(c.schema_version));
    if (j.contains("seed")) c.seed = get<std::uint64_t>(j, "seed");
    if (j.contains("rsa_bits")) c.rsa_bits = get<int>(j, "rsa_bits");
    if (j.contains("meters")) {
        c.meters = get<std::size_t>(j, "meters");
        c.participation = {{2, c.meters}};
    }
    if (j.contains("start")) {
        try {
            c.start = DateTime::parse(get<std::string>(j, "start"));
        } catch (const InvalidParameter& e) {
            throw ConfigError(e.what());
        }
    }
    if (j.contains("catalog") && j.contains("catalog_file"))
        throw ConfigError("scenario sets both catalog and catalog_file");
    if (j.contains("catalog")) {
        c.catalog.clear();
        for (const auto& e : j.at("catalog")) {
            check_keys(e, {"freq", "pd", "purpose", "nsc"}, "catalog entry");
            ProgramSpec s;
            s.freq = get<std::uint32_t>(e, "freq");
            s.pd = get<std::uint32_t>(e, "pd");
            try {
                s.prp = parse_purpose(get<std::string>(e, "purpose"));
            } catch (const Error& err) {
                throw ConfigError(err.what());
            }
            s.nsc = get<double>(e, "nsc");
            c.catalog.push_back(s);
        }
    }
    if (j.contains("catalog_file")) c.catalog = load_catalog_config(resolve(base_dir, get<std::string>(j, "catalog_file")));
    if (j.contains("participation")) {
        c.participation.clear();
        for (const auto& e : j.at("participation")) {
            check_keys(e, {"program", "meters"}, "participation entry");
            c.participation.push_back({get<std::uint32_t>(e, "program"), get<std::size_t>(e, "meters")});
        }
    }
    if (j.contains("anonymity_threshold")) c.anonymity_threshold = get<std::size_t>(j, "anonymity_threshold");
    if (j.contains("enrollment_window_s")) c.enrollment_window = Duration{get<std::int64_t>(j, "enrollment_window_s")};
    if (j.contains("topology")) c.topology = get<std::string>(j, "topology");
    if (j.contains("topology_file")) c.topology_file = resolve(base_dir, get<std::string>(j, "topology_file"));
    if (j.contains("overlay")) {
        const auto& o = j.at("overlay");
        check_keys(o, {"min_hops", "max_hops", "drop_probability"}, "overlay");
        if (o.contains("min_hops")) c.overlay.min_hops = get<std::size_t>(o, "min_hops");
        if (o.contains("max_hops")) c.overlay.max_hops = get<std::size_t>(o, "max_hops");
        else c.overlay.max_hops = c.overlay.min_hops + 1;
        if (o.contains("drop_probability")) c.overlay.drop_probability = get<double>(o, "drop_probability");
    }
    if (j.contains("meters_sharing_link")) c.meters_sharing_link = get<std::int64_t>(j, "meters_sharing_link");
    if (j.contains("adversary")) {
        const auto& a = j.at("adversary");
        if (a.is_string()) {
            c.adversary = AdversarySpec::parse(a.get<std::string>());
        } else {
            check_keys(a, {"mode", "targets", "tamper_rate"}, "adversary");
            const auto mode = get<std::string>(a, "mode");
            c.adversary = AdversarySpec::parse(mode == "tamper" ? "tamper:0" : mode);
            if (a.contains("tamper_rate")) c.adversary.tamper_rate = get<double>(a, "tamper_rate");
            if (a.contains("targets"))
                c.adversary.targets = AdversarySpec::parse_targets(get<std::vector<std::string>>(a, "targets"));
        }
    }
    if (j.contains("dataset") && !j.at("dataset").is_null()) c.dataset = resolve(base_dir, get<std::string>(j, "dataset"));
    if (j.contains("synthetic_mean_kw")) c.synthetic_mean_kw = get<double>(j, "synthetic_mean_kw");
    if (j.contains("epsilon")) c.epsilon = get<double>(j, "epsilon");
    if (j.contains("p_max_kwh_per_h")) c.p_max_kwh_per_h = get<double>(j, "p_max_kwh_per_h");
    if (j.contains("missing_data")) {
        const auto m = get<std::string>(j, "missing_data");
        if (m == "strict") c.missing = MissingDataPolicy::Strict;
        else if (m == "interpolate") c.missing = MissingDataPolicy::Interpolate;
        else throw ConfigError("missing_data must be strict or interpolate");
    }
    if (j.contains("optimized")) c.optimized = get<bool>(j, "optimized");
    c.validate();
    return c;
}

ScenarioConfig ScenarioConfig::load(const std::filesystem::path& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot open scenario " + path.string());
    std::stringstream ss;
    ss << f.rdbuf();
    return from_json(ss.str(), path.parent_path());
}

std::string ScenarioConfig::to_json() const {
    json j;
    j["schema_version"] = schema_version;
    j["seed"] = seed;
    j["rsa_bits"] = rsa_bits;
    j["meters"] = meters;
    j["start"] = start.iso();
    j["catalog"] = json::array();
    for (const auto& s : catalog)
        j["catalog"].push_back({{"freq", s.freq}, {"pd", s.pd}, {"purpose", std::string(to_string(s.prp))}, {"nsc", s.nsc}});
    j["participation"] = json::array();
    for (const auto& p : participation) j["participation"].push_back({{"program", p.program_id}, {"meters", p.meters}});
    j["anonymity_threshold"] = anonymity_threshold;
    j["enrollment_window_s"] = enrollment_window.seconds;
    j["topology"] = topology;
    if (topology_file) j["topology_file"] = topology_file->string();
    j["overlay"] = {{"min_hops", overlay.min_hops},
                    {"max_hops", overlay.max_hops},
                    {"drop_probability", overlay.drop_probability}};
    j["meters_sharing_link"] = meters_sharing_link;
    json targets = json::array();
    for (auto t : adversary.targets) targets.push_back(std::string(to_string(t)));
    j["adversary"] = {{"mode", std::string(to_string(adversary.mode))},
                      {"targets", targets},
                      {"tamper_rate", adversary.tamper_rate}};
    j["dataset"] = dataset ? json(dataset->string()) : json(nullptr);
    j["synthetic_mean_kw"] = synthetic_mean_kw;
    j["epsilon"] = epsilon;
    j["p_max_kwh_per_h"] = p_max_kwh_per_h;
    j["missing_data"] = missing == MissingDataPolicy::Strict ? "strict" : "interpolate";
    j["optimized"] = optimized;
    return j.dump(2);
}

}  // namespace lwipsm
