#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "resetfree/errors.hpp"
#include "resetfree/rng.hpp"

namespace resetfree {

// Finite-horizon MDP with designated reset states, run as an unbroken chain
// of episodes.  States are identified by an integer id; the distinguished
// absorbing state entered after a reset is represented by kAbsorbingId and is
// not part of the stored tables (it yields zero reward and zero cost and maps
// to itself).
//
// Conventions, fixed here and relied on by every other module:
//  * The unit cost of a reset is charged on the step taken FROM a reset
//    state, i.e. cost(s, a) = 1 iff s is a reset state.  Entering a reset
//    state costs nothing at entry; at most one unit accrues per episode
//    because the successor is absorbing.
//  * Reward collected while occupying a reset state or the absorbing state
//    is zero, regardless of the reward table entry.
//  * An episode ends after the step at h = horizon.  The next episode starts
//    from the post-reset distribution if any step of this episode occupied a
//    reset state, and otherwise re-enters the state occupied at h = horizon
//    with the step index rewound to 1.

inline constexpr int kAbsorbingId = -1;

struct EnvState {
    int id = 0;   // state id in [0, num_states) or kAbsorbingId
    int step = 1; // position within the episode, 1-based

    bool absorbing() const { return id == kAbsorbingId; }
    bool operator==(const EnvState&) const = default;
};

struct Transition {
    EnvState next;
    double reward = 0.0;
    double cost = 0.0;
};

struct EnvSpec {
    int num_states = 0;
    int num_actions = 0;
    int horizon = 0;

    // transition[h][s][a][s'] flattened, h in [0, horizon), states real only.
    std::vector<double> transition;
    // reward[h][s][a] flattened, raw table in [0, 1].
    std::vector<double> reward;
    std::vector<std::uint8_t> reset_state; // per-state flag
    std::vector<double> start_dist;        // over real states, no mass on resets
    std::vector<double> post_reset_dist;   // over real states, no mass on resets

    std::vector<std::string> state_names;  // optional, size num_states or empty
    std::vector<std::string> action_names; // optional

    double prob(int h, int s, int a, int s2) const {
        return transition[((static_cast<std::size_t>(h) * num_states + s) * num_actions + a) * num_states + s2];
    }
    double& prob(int h, int s, int a, int s2) {
        return transition[((static_cast<std::size_t>(h) * num_states + s) * num_actions + a) * num_states + s2];
    }
    double raw_reward(int h, int s, int a) const {
        return reward[(static_cast<std::size_t>(h) * num_states + s) * num_actions + a];
    }
    double& raw_reward(int h, int s, int a) {
        return reward[(static_cast<std::size_t>(h) * num_states + s) * num_actions + a];
    }
    bool is_reset(int s) const { return reset_state[s] != 0; }

    // Reward actually paid out when acting from (s, h): zero at reset states.
    double effective_reward(int h, int s, int a) const {
        return is_reset(s) ? 0.0 : raw_reward(h, s, a);
    }
    // Cost paid out when acting from (s, h).
    double step_cost(int s) const { return is_reset(s) ? 1.0 : 0.0; }

    std::string state_label(int s) const;
    std::string action_label(int a) const;
};

// Structural validation: dimensions, row sums within 1e-12 of one, rewards in
// [0, 1], start / post-reset distributions normalised with zero mass on reset
// states, at least one non-reset state.  Throws ContractViolation.  Does NOT
// check reset-free feasibility; see oracle::certify_feasible.
void validate_structure(const EnvSpec& spec);

// How the previous episode ended, for chaining initial states.
struct EpisodeOutcome {
    int final_state_id = 0;    // state occupied at h = horizon (kAbsorbingId after a reset)
    bool reset_occurred = false;
};

// Samples the initial state of an episode.  With no previous outcome (first
// episode) draws from start_dist; after a reset draws from post_reset_dist;
// otherwise carries over the previous final state with the step rewound to 1.
EnvState begin_episode(const EnvSpec& spec, const std::optional<EpisodeOutcome>& prev, Rng& rng);

// One environment step.  Handles the absorbing state and reset states before
// consulting the transition table; consumes exactly one rng draw in the
// tabular branch and none otherwise.  Throws ContractViolation when the step
// index is outside [1, horizon] or the action is out of range.
Transition step(const EnvSpec& spec, const EnvState& state, int action, Rng& rng);

// JSON round-trip.  to_json emits the raw tables; from_json validates
// structure before returning.
std::string spec_to_json(const EnvSpec& spec);
EnvSpec spec_from_json(const std::string& text);

} // namespace resetfree
