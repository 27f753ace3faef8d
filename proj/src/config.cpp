#include "resetfree/config.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace resetfree {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& path, const std::string& what) {
    throw ConfigError(path + ": " + what);
}

const json& require(const json& obj, const char* key, const std::string& path) {
    if (!obj.is_object()) fail(path, "expected an object");
    auto it = obj.find(key);
    if (it == obj.end()) fail(path + "." + key, "missing");
    return *it;
}

double as_number(const json& v, const std::string& path) {
    if (!v.is_number()) fail(path, "expected a number");
    return v.get<double>();
}

int as_int(const json& v, const std::string& path) {
    if (!v.is_number_integer()) fail(path, "expected an integer");
    return v.get<int>();
}

std::string as_string(const json& v, const std::string& path) {
    if (!v.is_string()) fail(path, "expected a string");
    return v.get<std::string>();
}

bool as_bool(const json& v, const std::string& path) {
    if (!v.is_boolean()) fail(path, "expected a boolean");
    return v.get<bool>();
}

std::pair<int, int> as_cell(const json& v, const std::string& path) {
    if (!v.is_array() || v.size() != 2) fail(path, "expected [row, col]");
    return {as_int(v[0], path + "[0]"), as_int(v[1], path + "[1]")};
}

EnvConfig parse_env(const json& j, const std::string& path) {
    EnvConfig env;
    const std::string kind = as_string(require(j, "kind", path), path + ".kind");
    if (kind == "gridworld") {
        env.kind = EnvConfig::Kind::Gridworld;
        GridworldParams& g = env.grid;
        g.width = as_int(require(j, "width", path), path + ".width");
        g.height = as_int(require(j, "height", path), path + ".height");
        g.horizon = as_int(require(j, "horizon", path), path + ".horizon");
        g.goal = as_cell(require(j, "goal", path), path + ".goal");
        g.slip_prob = j.contains("slip") ? as_number(j["slip"], path + ".slip") : 0.0;
        g.traps.clear();
        if (j.contains("traps")) {
            const json& traps = j["traps"];
            if (!traps.is_array()) fail(path + ".traps", "expected an array of [row, col]");
            for (std::size_t i = 0; i < traps.size(); ++i)
                g.traps.push_back(as_cell(traps[i], path + ".traps[" + std::to_string(i) + "]"));
        }
        env.name = "grid" + std::to_string(g.width) + "x" + std::to_string(g.height);
    } else if (kind == "random_tabular") {
        env.kind = EnvConfig::Kind::RandomTabular;
        RandomTabularParams& r = env.random;
        r.num_states = as_int(require(j, "num_states", path), path + ".num_states");
        r.num_actions = as_int(require(j, "num_actions", path), path + ".num_actions");
        r.horizon = as_int(require(j, "horizon", path), path + ".horizon");
        if (j.contains("reset_fraction"))
            r.reset_fraction = as_number(j["reset_fraction"], path + ".reset_fraction");
        if (j.contains("seed")) r.seed = static_cast<std::uint64_t>(as_int(j["seed"], path + ".seed"));
        if (j.contains("min_prob")) r.min_prob = as_number(j["min_prob"], path + ".min_prob");
        if (j.contains("support_size_max"))
            r.support_size_max = as_int(j["support_size_max"], path + ".support_size_max");
        env.name = "random" + std::to_string(r.num_states) + "s" + std::to_string(r.num_actions) + "a";
    } else if (kind == "inline") {
        env.kind = EnvConfig::Kind::Inline;
        const json& spec = require(j, "spec", path);
        try {
            env.inline_spec = spec_from_json(spec.dump());
        } catch (const std::exception& e) {
            fail(path + ".spec", e.what());
        }
        env.name = "inline";
    } else {
        fail(path + ".kind", "unknown kind '" + kind + "' (gridworld, random_tabular, inline)");
    }
    if (j.contains("name")) env.name = as_string(j["name"], path + ".name");
    return env;
}

} // namespace

EnvSpec build_env(const EnvConfig& env) {
    switch (env.kind) {
        case EnvConfig::Kind::Gridworld: return make_gridworld(env.grid);
        case EnvConfig::Kind::RandomTabular: return make_random_tabular(env.random).spec;
        case EnvConfig::Kind::Inline: return env.inline_spec;
    }
    throw ContractViolation("build_env: bad kind");
}

std::vector<std::string> RunConfig::hyper_overrides() const {
    std::vector<std::string> out;
    if (!std::isnan(hyper.alpha_override)) out.push_back("alpha");
    if (hyper.bonus_scale != 1.0) out.push_back("bonus_scale");
    if (hyper.bonus_constant != 1.0) out.push_back("C");
    if (hyper.ridge != 1.0) out.push_back("lambda_reg");
    return out;
}

RunConfig parse_run_config(const std::string& json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    if (!j.is_object()) throw ConfigError("config: expected a JSON object");

    RunConfig cfg;
    cfg.env = parse_env(require(j, "env", "config"), "config.env");

    const json& eps = require(j, "episodes", "config");
    cfg.episode_grid.clear();
    if (eps.is_array()) {
        for (std::size_t i = 0; i < eps.size(); ++i)
            cfg.episode_grid.push_back(as_int(eps[i], "config.episodes[" + std::to_string(i) + "]"));
    } else {
        cfg.episode_grid.push_back(as_int(eps, "config.episodes"));
    }
    if (cfg.episode_grid.empty()) throw ConfigError("config.episodes: empty grid");
    for (int k : cfg.episode_grid)
        if (k < 1) throw ConfigError("config.episodes: every entry must be >= 1");

    const json& seeds = require(j, "seeds", "config");
    cfg.seeds.clear();
    if (seeds.is_array()) {
        for (std::size_t i = 0; i < seeds.size(); ++i) {
            const int s = as_int(seeds[i], "config.seeds[" + std::to_string(i) + "]");
            if (s < 0) throw ConfigError("config.seeds: seeds must be non-negative");
            cfg.seeds.push_back(static_cast<std::uint64_t>(s));
        }
    } else if (seeds.is_object()) {
        const int base = as_int(require(seeds, "base", "config.seeds"), "config.seeds.base");
        const int count = as_int(require(seeds, "count", "config.seeds"), "config.seeds.count");
        if (base < 0) throw ConfigError("config.seeds.base: must be non-negative");
        if (count < 1) throw ConfigError("config.seeds.count: must be >= 1");
        for (int i = 0; i < count; ++i) cfg.seeds.push_back(static_cast<std::uint64_t>(base + i));
    } else {
        fail("config.seeds", "expected an array or {base, count}");
    }
    if (cfg.seeds.empty()) throw ConfigError("config.seeds: no seeds");

    if (j.contains("hyper")) {
        const json& h = j["hyper"];
        if (!h.is_object()) throw ConfigError("config.hyper: expected an object");
        if (h.contains("B")) {
            const json& b = h["B"];
            if (b.is_string()) {
                if (b.get<std::string>() != "auto")
                    fail("config.hyper.B", "expected a positive number or \"auto\"");
                cfg.dual_radius_auto = true;
                cfg.hyper.dual_radius = -1.0;
            } else {
                cfg.hyper.dual_radius = as_number(b, "config.hyper.B");
                if (cfg.hyper.dual_radius <= 0.0) fail("config.hyper.B", "must be positive");
            }
        }
        if (h.contains("C")) cfg.hyper.bonus_constant = as_number(h["C"], "config.hyper.C");
        if (h.contains("bonus_scale"))
            cfg.hyper.bonus_scale = as_number(h["bonus_scale"], "config.hyper.bonus_scale");
        if (h.contains("lambda_reg")) {
            cfg.hyper.ridge = as_number(h["lambda_reg"], "config.hyper.lambda_reg");
            if (cfg.hyper.ridge <= 0.0) fail("config.hyper.lambda_reg", "must be positive");
        }
        if (h.contains("p")) {
            cfg.hyper.confidence = as_number(h["p"], "config.hyper.p");
            if (!(cfg.hyper.confidence > 0.0 && cfg.hyper.confidence < 1.0))
                fail("config.hyper.p", "must lie in (0, 1)");
        }
        if (h.contains("alpha_override"))
            cfg.hyper.alpha_override = as_number(h["alpha_override"], "config.hyper.alpha_override");
    }

    if (j.contains("output_dir")) cfg.output_dir = as_string(j["output_dir"], "config.output_dir");
    if (j.contains("verify")) {
        const json& v = j["verify"];
        if (!v.is_object()) throw ConfigError("config.verify: expected an object");
        if (v.contains("reduction")) cfg.verify_reduction = as_bool(v["reduction"], "config.verify.reduction");
        if (v.contains("saddle")) cfg.verify_saddle = as_bool(v["saddle"], "config.verify.saddle");
        if (v.contains("equivalence"))
            cfg.verify_equivalence = as_bool(v["equivalence"], "config.verify.equivalence");
        if (v.contains("samples")) cfg.saddle_samples = as_int(v["samples"], "config.verify.samples");
        if (v.contains("seed"))
            cfg.certify_seed = static_cast<std::uint64_t>(as_int(v["seed"], "config.verify.seed"));
    }
    if (j.contains("threads")) {
        cfg.threads = as_int(j["threads"], "config.threads");
        if (cfg.threads < 1) fail("config.threads", "must be >= 1");
    }
    return cfg;
}

RunConfig load_run_config(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw ConfigError("cannot open config file: " + path);
    std::ostringstream buf;
    buf << f.rdbuf();
    return parse_run_config(buf.str());
}

} // namespace resetfree
