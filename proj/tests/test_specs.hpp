#pragma once

// Hand-built fixture environments shared across test files.

#include <vector>

#include "resetfree/env.hpp"

namespace resetfree::testspec {

// Two states: g = 0 (safe), t = 1 (reset trap).  Action 0 stays at g, action
// 1 moves to t; from t both actions stay at t (never taken in practice since
// stepping from t absorbs).  Rewards default to zero; callers adjust.
inline EnvSpec chain(int horizon = 2) {
    EnvSpec spec;
    spec.num_states = 2;
    spec.num_actions = 2;
    spec.horizon = horizon;
    spec.transition.assign(static_cast<std::size_t>(horizon) * 2 * 2 * 2, 0.0);
    spec.reward.assign(static_cast<std::size_t>(horizon) * 2 * 2, 0.0);
    for (int h = 0; h < horizon; ++h) {
        spec.prob(h, 0, 0, 0) = 1.0;
        spec.prob(h, 0, 1, 1) = 1.0;
        spec.prob(h, 1, 0, 1) = 1.0;
        spec.prob(h, 1, 1, 1) = 1.0;
    }
    spec.reset_state = {0, 1};
    spec.start_dist = {1.0, 0.0};
    spec.post_reset_dist = {1.0, 0.0};
    spec.state_names = {"g", "t"};
    return spec;
}

// chain() with reward 0.9 for playing action 1 from g at step 1 only: the
// risky action pays once but costs a reset, so the multiplier threshold at g
// is exactly 0.9.
inline EnvSpec chain_with_temptation() {
    EnvSpec spec = chain(2);
    spec.raw_reward(0, 0, 1) = 0.9;
    return spec;
}

// Three safe states in a cycle plus one trap; action 0 follows the cycle
// 0 -> 1 -> 2 -> 0, action 1 jumps to the trap (state 3) from state 1 only,
// elsewhere follows the cycle too.  Rewards increase along the cycle.
inline EnvSpec cycle_with_trap(int horizon = 3) {
    EnvSpec spec;
    spec.num_states = 4;
    spec.num_actions = 2;
    spec.horizon = horizon;
    spec.transition.assign(static_cast<std::size_t>(horizon) * 4 * 2 * 4, 0.0);
    spec.reward.assign(static_cast<std::size_t>(horizon) * 4 * 2, 0.0);
    for (int h = 0; h < horizon; ++h) {
        for (int s = 0; s < 3; ++s) {
            spec.prob(h, s, 0, (s + 1) % 3) = 1.0;
            spec.prob(h, s, 1, s == 1 ? 3 : (s + 1) % 3) = 1.0;
            spec.raw_reward(h, s, 0) = 0.25 * s;
            spec.raw_reward(h, s, 1) = 0.25 * s;
        }
        spec.prob(h, 3, 0, 3) = 1.0;
        spec.prob(h, 3, 1, 3) = 1.0;
    }
    spec.reset_state = {0, 0, 0, 1};
    spec.start_dist = {1.0, 0.0, 0.0, 0.0};
    spec.post_reset_dist = {0.5, 0.5, 0.0, 0.0};
    return spec;
}

} // namespace resetfree::testspec
