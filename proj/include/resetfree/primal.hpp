#pragma once

#include <cmath>
#include <limits>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "resetfree/env.hpp"
#include "resetfree/features.hpp"

namespace resetfree {

// Optimistic least-squares value learner.  Each episode it acts with a
// softmax over reward-minus-weighted-cost action values, then refits ridge
// regressions backward over the horizon: an additive exploration bonus on
// the reward estimate and a subtractive one on the cost estimate, both
// clipped to their value ranges.
//
// Generation bookkeeping, which the tests pin:
//  * During episode k the learner acts from generation-k action values and
//    the episode's scalar multiplier (evaluated once, at the initial state).
//  * The state-value functions of generation k+1 average generation-(k+1)
//    action values under the policy weights of episode k, i.e. softmax of
//    generation-k action values with episode k's multiplier.
//  * value_estimates() therefore mixes the previous generation's weights
//    with the current generation's action values; the result is what the
//    multiplier player consumes at the start of the next episode.

struct TrajectoryStep {
    EnvState state;
    int action = 0;
    double reward = 0.0;
    double cost = 0.0;
    EnvState next;
};

struct Trajectory {
    EnvState initial;
    double lambda_at_start = 0.0; // multiplier the episode was played with
    std::vector<TrajectoryStep> steps; // exactly horizon entries
};

struct LearnerHyper {
    int horizon = 1;
    int num_actions = 1;
    int num_episodes = 1;    // planned K; enters the softmax temperature
    double dual_radius = 1.0; // B; enters the softmax temperature
    double confidence = 0.05; // p in the bonus formula
    double bonus_constant = 1.0; // leading constant of the bonus formula
    double bonus_scale = 1.0;    // practical multiplier applied on top
    double ridge = 1.0;          // Gram regulariser
    double alpha_override = std::numeric_limits<double>::quiet_NaN(); // NaN: use the formula

    // log(m) K / (2 (1 + B + H))
    double alpha() const;
    // bonus_scale * C * d * H * sqrt(log(4 log(m) d K H / p))
    double beta(int feature_dim) const;
    void validate() const;
};

class Learner {
public:
    Learner(std::shared_ptr<const PrimalFeatures> features, const LearnerHyper& hyper);
    ~Learner(); // out of line: members point to types defined in the .cpp

    // Action distribution at a state under the current generation's action
    // values and the given episode multiplier.  Rows sum to one within 1e-12.
    std::vector<double> policy_distribution(const EnvState& state, double lambda_at_start) const;

    // Current generation action-value estimates (clipped, with bonus).
    double q_reward(const EnvState& state, int action) const;
    double q_cost(const EnvState& state, int action) const;

    struct Values {
        double v_reward = 0.0;
        double v_cost = 0.0;
    };
    // State values of the current generation under the previous episode's
    // policy weights; see the generation notes above.
    Values value_estimates(const EnvState& state) const;

    // Folds one finished episode into the regression state.  The trajectory
    // must have exactly horizon steps with consecutive step indices.
    void end_of_episode_update(const Trajectory& trajectory);

    int episodes_seen() const { return episodes_seen_; }
    double alpha() const { return alpha_; }
    double beta() const { return beta_; }
    double ridge() const { return hyper_.ridge; }
    int feature_dim() const { return dim_; }
    bool tabular_backend() const { return tabular_; }
    const LearnerHyper& hyper() const { return hyper_; }
    const PrimalFeatures& features() const { return *features_; }

    // Regularised Gram matrix of the current generation at layer h.
    Eigen::MatrixXd gram_matrix(int h) const;
    // Smallest eigenvalue of gram_matrix(h); exact and O(d) on the tabular
    // backend, dense solve otherwise.
    double gram_min_eigenvalue(int h) const;
    Eigen::VectorXd weights_reward(int h) const;
    Eigen::VectorXd weights_cost(int h) const;

    std::string snapshot_json() const;

private:
    struct Generation; // per-layer (gram factor, regression weights)
    struct TabularTables;

    double q_eval(const Generation& gen, const EnvState& state, int action, bool cost) const;
    double v_eval(int h, const EnvState& state) const;

    std::shared_ptr<const PrimalFeatures> features_;
    LearnerHyper hyper_;
    int dim_ = 0;
    double alpha_ = 0.0;
    double beta_ = 0.0;
    bool tabular_ = false;
    int episodes_seen_ = 0;
    double lambda_prev_ = 0.0; // multiplier of the most recent episode

    // Generic backend state.
    std::vector<Eigen::MatrixXd> gram_raw_; // per layer, without the ridge
    std::unique_ptr<Generation> cur_;
    std::unique_ptr<Generation> prev_;
    std::vector<Trajectory> history_;
    std::vector<std::vector<Eigen::VectorXd>> phi_cache_; // per episode, per step

    // Tabular backend state.
    std::unique_ptr<TabularTables> tab_;
};

// Softmax with inverse temperature alpha and max-score subtraction; scores
// enter as given (no negation).  Exposed for direct unit testing.
std::vector<double> softmax(const std::vector<double>& scores, double alpha);

} // namespace resetfree
