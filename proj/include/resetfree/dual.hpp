#pragma once

#include <Eigen/Dense>

#include "resetfree/env.hpp"
#include "resetfree/features.hpp"

namespace resetfree {

// Projected online gradient ascent on the multiplier weight vector.  The
// feasible set is the intersection of the nonnegative orthant with the
// l2 ball of radius B; combined with nonnegative dual features this keeps
// every induced multiplier nonnegative.

struct DualState {
    Eigen::VectorXd theta; // current weights, inside the feasible set
    double radius = 1.0;   // ball radius B
    int episode = 1;       // index k of the next update; step size is B / sqrt(k)
};

DualState make_dual_state(int dim, double radius);

// Exact Euclidean projection onto {theta >= 0, |theta|_2 <= B}: clamp the
// negative coordinates, then rescale radially if the clamped point is still
// outside the ball.  Clamping is the projection onto the orthant, and
// because the orthant is a cone containing the ball's centre, composing it
// with the ball projection is exact.
Eigen::VectorXd project_dual(const Eigen::VectorXd& theta, double radius);

// Multiplier induced at a state: <theta, xi(state)>.
double lambda_value(const DualState& dual, const DualFeatures& xi, const EnvState& state);

// One ascent step on the observed reset-value estimate at the episode's
// initial state.  v_c_estimate must lie in [0, 1]; the step size is
// radius / sqrt(episode) and the episode counter advances.
DualState ogd_step(const DualState& dual, const DualFeatures& xi, const EnvState& initial_state,
                   double v_c_estimate);

} // namespace resetfree
