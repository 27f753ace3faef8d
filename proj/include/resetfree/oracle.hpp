#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "resetfree/env.hpp"

namespace resetfree {

// Exact finite-horizon dynamic programming over the reset-augmented state
// space, and the constructions built on it: the action sets that keep the
// reset-avoidance value optimal, the reward-optimal reset-free policy, the
// per-state multiplier threshold above which that policy is a Lagrangian
// saddle point, and certification routines that test those facts numerically
// on concrete instances.
//
// All tables index the augmented state space: ids [0, num_states) are the
// real states, index num_states is the absorbing state.  Step indices are
// 1-based as in EnvState; internally layer h lives at offset h-1.

enum class Objective {
    Reward,              // effective reward, truncated by resets
    Cost,                // unit charge on steps taken from reset states
    Lagrangian,          // reward - y * cost, for a fixed scalar y
    RestrictedViolation, // indicator of playing an action outside a given action set
};

struct ValueTables {
    int horizon = 0;
    int num_states = 0; // real states; augmented size is num_states + 1
    int num_actions = 0;
    Objective objective = Objective::Reward;
    double lagrangian_y = 0.0;

    std::vector<double> v; // [(h-1)][s_aug], h = 1..horizon+1 (last layer zero)
    std::vector<double> q; // [(h-1)][s_aug][a], h = 1..horizon

    int aug(int state_id) const { return state_id == kAbsorbingId ? num_states : state_id; }
    double value(int h, int state_id) const {
        return v[static_cast<std::size_t>(h - 1) * (num_states + 1) + aug(state_id)];
    }
    double action_value(int h, int state_id, int a) const {
        return q[(static_cast<std::size_t>(h - 1) * (num_states + 1) + aug(state_id)) * num_actions + a];
    }
    double& value_ref(int h, int state_id) {
        return v[static_cast<std::size_t>(h - 1) * (num_states + 1) + aug(state_id)];
    }
    double& action_value_ref(int h, int state_id, int a) {
        return q[(static_cast<std::size_t>(h - 1) * (num_states + 1) + aug(state_id)) * num_actions + a];
    }
};

// Stochastic policy over real states; rows are per-(h, s) distributions.
struct PolicyTable {
    int horizon = 0;
    int num_states = 0;
    int num_actions = 0;
    std::vector<double> probs; // [(h-1)][s][a]

    double prob(int h, int s, int a) const {
        return probs[(static_cast<std::size_t>(h - 1) * num_states + s) * num_actions + a];
    }
    double& prob_ref(int h, int s, int a) {
        return probs[(static_cast<std::size_t>(h - 1) * num_states + s) * num_actions + a];
    }
    static PolicyTable uniform(int horizon, int num_states, int num_actions);
};

struct DeterministicPolicy {
    int horizon = 0;
    int num_states = 0;
    std::vector<int> action; // [(h-1)][s]

    int at(int h, int s) const { return action[static_cast<std::size_t>(h - 1) * num_states + s]; }
    int& at_ref(int h, int s) { return action[static_cast<std::size_t>(h - 1) * num_states + s]; }
    PolicyTable as_table(int num_actions) const;
};

// Per-(h, s) action subsets as bitmasks; supports num_actions <= 32.
struct ActionSets {
    int horizon = 0;
    int num_states = 0;
    int num_actions = 0;
    std::vector<std::uint32_t> mask; // [(h-1)][s]

    bool allowed(int h, int s, int a) const {
        return (mask[static_cast<std::size_t>(h - 1) * num_states + s] >> a) & 1u;
    }
    std::uint32_t& mask_ref(int h, int s) { return mask[static_cast<std::size_t>(h - 1) * num_states + s]; }
    std::uint32_t row_mask(int h, int s) const { return mask[static_cast<std::size_t>(h - 1) * num_states + s]; }
};

// Minimum achievable reset probability from every (h, s): cost tables of the
// optimal reset-avoiding policy.  Values lie in [0, 1].
ValueTables min_cost_dp(const EnvSpec& spec);

// Actions whose optimal continuation cost matches the state's optimal cost,
// up to eps_tie.  Rows are never empty; reset and absorbing continuations
// make every action allowed at reset states.
ActionSets restricted_actions(const EnvSpec& spec, const ValueTables& cost_opt, double eps_tie = 1e-9);

// Reward-optimal deterministic policy constrained to the restricted action
// sets; ties broken toward the smallest action id.
DeterministicPolicy optimal_reset_free_policy(const EnvSpec& spec, const ActionSets& restricted);

// Exact evaluation of a stochastic policy under the given objective.  The
// restricted set argument is only consulted for RestrictedViolation.
ValueTables evaluate_policy(const EnvSpec& spec, const PolicyTable& policy, Objective objective,
                            double lagrangian_y = 0.0, const ActionSets* restricted = nullptr);

// Value of the best policy for reward - y * cost (unconstrained max DP).
// Used to trace the scalarised objective during the multiplier search.
ValueTables best_response_dp(const EnvSpec& spec, double y);

struct LambdaSearch {
    double y_max = -1.0;   // < 0: use 10 * horizon * (1 + max reward)
    double tol = 1e-9;     // width of the final bisection bracket
    double value_slack = 1e-11; // slack for "scalarised optimum equals reset-free optimum"
};

// Smallest multiplier y (within tol) at which the unconstrained optimum of
// reward - y * cost from state s drops to the reset-free optimum, i.e. the
// left edge of the argmin plateau.  Requires the state to be reset-free
// feasible.  Throws SearchBoundError when the plateau is not reached by
// y_max; pass y_max = positive to widen the bracket.
double lambda_hat(const EnvSpec& spec, int state, const LambdaSearch& search = {});

struct SaddlePoint {
    ValueTables cost_opt;        // Q/V of min_cost_dp
    ActionSets restricted;
    DeterministicPolicy pi_star;
    ValueTables pi_star_reward;  // reward tables of pi_star (restricted optimum)
    ValueTables pi_star_cost;    // cost tables of pi_star (equals cost_opt values)
    std::vector<double> lambda_hat;   // per real state at h = 1; NaN when infeasible
    std::vector<std::uint8_t> feasible; // V_c*(s) == 0 at h = 1

    double lambda_star(int s) const { return lambda_hat[s] + 1.0; }
    // l2 norm of the multiplier vector (lambda_hat + 1 on feasible states,
    // zero elsewhere); the dual player's ball radius must be at least this.
    double theta_star_norm() const;
};

SaddlePoint build_saddle_point(const EnvSpec& spec, const LambdaSearch& search = {});

// Throws InfeasibleEnvironment unless every state in the start and
// post-reset supports (and, with check_closure, every state an episode chain
// can carry over into an initial state) admits a policy that never resets.
void certify_feasible(const EnvSpec& spec, bool check_closure = true);

// States from which an episode can start across an entire run: the start and
// post-reset supports closed under "occupied at the final step, no reset on
// the way, under some positive-probability action sequence".
std::vector<int> feasible_start_closure(const EnvSpec& spec);

struct SaddleCertification {
    int num_samples = 0;
    int feasible_starts = 0;
    // One entry per inequality of the two saddle chains; positive numbers
    // mean the inequality was violated by that amount.
    double max_violation_multiplier_side_hat = 0.0; // L(pi*, lambda) >= L(pi*, lambda_hat)
    double max_violation_policy_side_hat = 0.0;     // L(pi*, lambda_hat) >= L(pi, lambda_hat)
    double max_violation_multiplier_side_star = 0.0;
    double max_violation_policy_side_star = 0.0;
    double max_violation = 0.0;
    int worst_start = -1;
    int worst_sample = -1;
    std::string worst_inequality;
    std::string to_json() const;
};

// Samples random (policy, multiplier) pairs and measures how badly the
// saddle chains fail at every feasible start.  Exact values throughout; the
// expected outcome on a correct oracle is violations at floating-point
// noise.
SaddleCertification certify_saddle_point(const EnvSpec& spec, const SaddlePoint& saddle, int num_samples,
                                         std::uint64_t seed);

struct EquivalenceCertification {
    bool exhaustive = false;
    std::uint64_t policies_checked = 0;
    int feasible_starts = 0;
    std::uint64_t counterexamples = 0;
    // Worst mismatch magnitudes for the two directions of the biconditional
    // "never leaves the restricted sets iff never resets".
    double max_cost_when_inside = 0.0;      // violation mass 0 but reset value > 0
    double max_violation_when_costfree = 0.0; // reset value 0 but violation mass > 0
    std::string to_json() const;
};

// Number of deterministic time-dependent policies, or nullopt when it
// exceeds the cutoff.
std::optional<std::uint64_t> deterministic_policy_count(const EnvSpec& spec, std::uint64_t cutoff);

// Checks, for every feasible start, that a policy stays inside the
// restricted action sets exactly when its reset value is zero.  Exhaustive
// over deterministic policies whenever their count is within
// enumeration_cutoff, otherwise over num_policies sampled stochastic
// policies.  tol is the zero threshold on both sides.
EquivalenceCertification certify_restricted_equivalence(const EnvSpec& spec, const SaddlePoint& saddle,
                                                        int num_policies, std::uint64_t seed,
                                                        std::uint64_t enumeration_cutoff = 1000000,
                                                        double tol = 1e-9);

// Streams layer-1 value rows (reward, cost, restricted-set violation) of
// every deterministic policy to the callback; rows are indexed by real state
// id.  Throws ContractViolation when the policy count exceeds the cutoff.
void for_each_deterministic_policy(
    const EnvSpec& spec, const ActionSets& restricted, std::uint64_t cutoff,
    const std::function<void(const std::vector<double>& reward_v1, const std::vector<double>& cost_v1,
                             const std::vector<double>& violation_v1)>& fn);

} // namespace resetfree
