#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "resetfree/builders.hpp"
#include "resetfree/env.hpp"
#include "resetfree/harness.hpp"

namespace resetfree {

// Run configuration, read from JSON.  Parse errors throw ConfigError with the
// offending field path in the message.

struct EnvConfig {
    enum class Kind { Gridworld, RandomTabular, Inline };
    Kind kind = Kind::Gridworld;
    GridworldParams grid;
    RandomTabularParams random;
    EnvSpec inline_spec;
    std::string name; // label used in output file names
};

// Materialises the environment (generating, for the random kind).  Throws
// InfeasibleEnvironment / GenerationFailure as the builders do.
EnvSpec build_env(const EnvConfig& env);

struct RunConfig {
    EnvConfig env;
    std::vector<int> episode_grid;     // one entry per K to run; usually one
    std::vector<std::uint64_t> seeds;  // non-empty
    GameHyper hyper;                   // dual_radius <= 0 means "auto"
    bool dual_radius_auto = false;
    std::string output_dir = "out";
    bool verify_reduction = true;      // reduction + dual-bound checks per run
    bool verify_saddle = false;        // sampled saddle certification
    bool verify_equivalence = false;   // restricted-action equivalence check
    int saddle_samples = 200;
    std::uint64_t certify_seed = 0;
    int threads = 1;

    // Names of hyperparameters changed away from the formula defaults,
    // surfaced in summaries.
    std::vector<std::string> hyper_overrides() const;
};

RunConfig parse_run_config(const std::string& json_text);
RunConfig load_run_config(const std::string& path);

} // namespace resetfree
