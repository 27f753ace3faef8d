#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "resetfree/dual.hpp"
#include "resetfree/env.hpp"
#include "resetfree/features.hpp"
#include "resetfree/oracle.hpp"
#include "resetfree/primal.hpp"

namespace resetfree {

// Runs the two-player game (optimistic learner vs multiplier ascent) against
// an environment, evaluating the played policy exactly each episode so the
// logs carry both the learner's view and ground truth.  Per-episode order,
// which tests pin: observe the initial state, read the multiplier and the
// learner's value estimates, tabulate and roll out the policy, take the
// multiplier ascent step on the estimated reset value, then refit the
// learner's regressions.

struct GameHyper {
    double dual_radius = 1.0;   // B; <= 0 means "use the oracle multiplier norm"
    double bonus_constant = 1.0;
    double bonus_scale = 1.0;
    double ridge = 1.0;
    double confidence = 0.05;
    double alpha_override = std::numeric_limits<double>::quiet_NaN();
};

struct EpisodeRecord {
    int k = 0;  // 1-based
    int s1 = 0; // initial state id
    bool reset = false;
    double lambda = 0.0;      // multiplier used throughout the episode
    double lambda_hat = 0.0;  // oracle threshold at s1
    double lambda_star = 0.0; // lambda_hat + 1
    double v_r_est = 0.0;     // learner estimates at s1, start-of-episode generation
    double v_c_est = 0.0;
    double v_r_exact = 0.0;   // exact values of the played policy at s1
    double v_c_exact = 0.0;
    double v_r_star = 0.0;    // exact values of the oracle comparator at s1
    double v_c_star = 0.0;
    double theta_norm = 0.0;  // multiplier weight norm at the start of the episode

    // Cumulative sums including this episode.
    double regret_cum = 0.0;
    double resets_expected_cum = 0.0;
    double resets_realized_cum = 0.0;
    double r_p_cum = 0.0;        // primal-player regret against the comparator
    double r_d_zero_cum = 0.0;   // dual-player regret against the zero multiplier
    double r_d_star_cum = 0.0;   // dual-player regret against lambda_star
    double dual_lhs_zero_cum = 0.0; // same comparators on the learner's estimates
    double dual_lhs_star_cum = 0.0; // (the sequence the ascent player actually sees)
    double t1_cum = 0.0;         // comparator value minus optimistic estimate
};

struct GameMetrics {
    int episodes = 0;
    double regret = 0.0;
    double resets_expected = 0.0;
    int resets_realized = 0;
    double r_p = 0.0;
    double r_d_zero = 0.0;
    double r_d_star = 0.0;
    double dual_lhs_zero = 0.0;
    double dual_lhs_star = 0.0;
    double t1 = 0.0;
    double theta_norm_final = 0.0;
    double dual_radius = 0.0;
    double alpha = 0.0;
    double beta = 0.0;
    int invariant_violations = 0;
    std::vector<std::string> invariant_messages; // capped
    std::string to_json() const;
};

struct RunResult {
    std::vector<EpisodeRecord> records;
    GameMetrics metrics;
};

// Resolved dual radius for a spec: max(1, oracle multiplier norm).
double auto_dual_radius(const SaddlePoint& saddle);

// Plays `episodes` episodes with the given seed.  The saddle pointer lets
// callers share one oracle across seeds; pass nullptr to build it here.
// Throws InfeasibleEnvironment if a realized initial state has no reset-free
// policy (closure-certified specs cannot trigger this).
RunResult run_game(const EnvSpec& spec, std::shared_ptr<const PrimalFeatures> features,
                   const DualFeatures& xi, const GameHyper& hyper, int episodes, std::uint64_t seed,
                   const SaddlePoint* saddle = nullptr);

// One-hot features variant.
RunResult run_game(const EnvSpec& spec, const GameHyper& hyper, int episodes, std::uint64_t seed,
                   const SaddlePoint* saddle = nullptr);

// Primal and dual player regrets recomputed from the logs for an arbitrary
// multiplier comparator (a function of the initial state id).
double primal_regret_from_records(const std::vector<EpisodeRecord>& records);
double dual_regret_from_records(const std::vector<EpisodeRecord>& records,
                                const std::function<double(int)>& lambda_c);

struct ReductionReport {
    bool ok = true;
    int first_violation_k = -1;
    double max_gap_regret = 0.0;     // max over prefixes of lhs - rhs (positive = violated)
    double max_gap_resets = 0.0;
    double max_gap_comparator = 0.0; // comparator-vs-played sum exceeding the primal regret
    std::string to_json() const;
};

// Prefix-wise checks that cumulative regret and expected resets stay below
// the primal-plus-dual regret decompositions, and that swapping the
// comparator multiplier does not break the primal bound.
ReductionReport verify_reduction(const std::vector<EpisodeRecord>& records, double tol = 1e-6);

struct DualBoundReport {
    bool ok = true;
    int first_violation_k = -1;
    double max_gap = 0.0;
    double bound_at_end = 0.0;
    std::string to_json() const;
};

// Prefix-wise check of the ascent player's regret on its observed losses
// against 1.5 * B * sqrt(k), for comparators zero and lambda_star.
DualBoundReport verify_dual_bound(const std::vector<EpisodeRecord>& records, double dual_radius,
                                  double tol = 1e-9);

struct ComparatorCheck {
    bool enumerable = false;
    double best_reset_free_total = 0.0;
    double comparator_total = 0.0;
    double gap = 0.0; // best minus comparator (positive = comparator not optimal)
    std::string to_json() const;
};

// On enumerably small specs, confirms that no deterministic policy that is
// reset-free at every realized initial state collects more total reward
// there than the oracle comparator.
ComparatorCheck verify_comparator_optimality(const EnvSpec& spec, const SaddlePoint& saddle,
                                             const std::vector<EpisodeRecord>& records,
                                             std::uint64_t cutoff = 1000000);

// Episode log as CSV (fixed column set, shortest round-trip doubles).
std::string records_to_csv(const std::vector<EpisodeRecord>& records);
void write_records_csv(const std::vector<EpisodeRecord>& records, const std::string& path);

} // namespace resetfree
