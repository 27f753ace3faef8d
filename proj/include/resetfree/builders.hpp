#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "resetfree/env.hpp"

namespace resetfree {

// Grid navigation task.  Cells are indexed row-major; the four actions move
// up/down/left/right, slipping to one of the two perpendicular directions
// with probability slip_prob (split evenly); moves off the grid stay put.
// Occupying the goal cell pays reward 1 per step; trap cells are reset
// states.  Start and post-reset distributions are uniform over non-trap
// cells.  Construction fails with InfeasibleEnvironment when some non-trap
// cell admits no reset-free policy.
struct GridworldParams {
    int width = 3;
    int height = 3;
    std::vector<std::pair<int, int>> traps; // (row, col)
    std::pair<int, int> goal{0, 0};
    double slip_prob = 0.0;
    int horizon = 5;
};

EnvSpec make_gridworld(const GridworldParams& params);

// Random tabular instance: each transition row gets a sparse uniform support
// of at most support_size_max states with Dirichlet weights (entries below
// min_prob pruned and the row renormalised), uniform rewards, and a random
// subset of floor(reset_fraction * num_states) reset states.  Start and
// post-reset distributions are uniform over the non-reset states that admit
// a reset-free policy.  Rejection-samples until the whole carry-over closure
// is reset-free feasible; throws GenerationFailure when attempt_budget runs
// out.
struct RandomTabularParams {
    int num_states = 4;
    int num_actions = 2;
    int horizon = 3;
    double reset_fraction = 0.2;
    std::uint64_t seed = 0;
    int attempt_budget = 1000;
    double min_prob = 0.02;
    int support_size_max = 3;
};

struct RandomTabularResult {
    EnvSpec spec;
    int rejections = 0;
};

RandomTabularResult make_random_tabular(const RandomTabularParams& params);

} // namespace resetfree
