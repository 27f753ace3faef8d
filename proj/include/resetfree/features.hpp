#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "resetfree/env.hpp"

namespace resetfree {

// Feature maps feeding the regression-based learner (state-action features)
// and the multiplier player (state features).  The learner treats these as
// opaque; the bundled one-hot maps additionally expose their tabular
// structure so the learner can switch to an equivalent bucketed update.

class PrimalFeatures {
public:
    virtual ~PrimalFeatures() = default;
    virtual int dim() const = 0;
    virtual void evaluate(const EnvState& state, int action, Eigen::VectorXd& out) const = 0;

    Eigen::VectorXd operator()(const EnvState& state, int action) const {
        Eigen::VectorXd v(dim());
        evaluate(state, action, v);
        return v;
    }

    // Tabular structure hint.  When provided, evaluate must equal the
    // indicator of bucket_index(state, action), with the absorbing state
    // mapping to the zero vector (no bucket).
    struct TabularShape {
        int num_states;
        int num_actions;
    };
    virtual std::optional<TabularShape> tabular_shape() const { return std::nullopt; }
    // Bucket in [0, num_states * num_actions) for real states, -1 for the
    // absorbing state.  Only meaningful when tabular_shape() is set.
    virtual int bucket_index(const EnvState& state, int action) const {
        (void)state;
        (void)action;
        return -1;
    }
};

class DualFeatures {
public:
    virtual ~DualFeatures() = default;
    virtual int dim() const = 0;
    // Must be entrywise nonnegative so that clamped multiplier vectors give
    // nonnegative multipliers everywhere.
    virtual void evaluate(const EnvState& state, Eigen::VectorXd& out) const = 0;

    Eigen::VectorXd operator()(const EnvState& state) const {
        Eigen::VectorXd v(dim());
        evaluate(state, v);
        return v;
    }
};

// Indicator of (state, action) with bucket s * num_actions + a.  One extra
// trailing slot is reserved for the absorbing marker but the absorbing state
// maps to the zero vector, so the slot stays empty; dim = n * m + 1.
class OneHotPrimal : public PrimalFeatures {
public:
    OneHotPrimal(int num_states, int num_actions);
    int dim() const override { return num_states_ * num_actions_ + 1; }
    void evaluate(const EnvState& state, int action, Eigen::VectorXd& out) const override;
    std::optional<TabularShape> tabular_shape() const override {
        return TabularShape{num_states_, num_actions_};
    }
    int bucket_index(const EnvState& state, int action) const override;

private:
    int num_states_;
    int num_actions_;
};

// Indicator of the state id; the absorbing state maps to zero.  dim = n.
class OneHotDual : public DualFeatures {
public:
    explicit OneHotDual(int num_states);
    int dim() const override { return num_states_; }
    void evaluate(const EnvState& state, Eigen::VectorXd& out) const override;

private:
    int num_states_;
};

// Coefficient vectors that reproduce a spec's rewards, costs and transition
// rows through the one-hot primal features.  Index order matches the bucket
// layout; the trailing absorbing slot is zero.
Eigen::VectorXd induced_reward_vector(const EnvSpec& spec, int h);
Eigen::VectorXd induced_cost_vector(const EnvSpec& spec, int h);
// Measure vector for successor s2 (real id or kAbsorbingId).
Eigen::VectorXd induced_measure_vector(const EnvSpec& spec, int h, int s2);

struct FeatureBoundsReport {
    double max_phi_norm = 0.0;
    double max_reward_coeff_norm = 0.0;
    double max_cost_coeff_norm = 0.0;
    double max_measure_norm = 0.0;
    double bound = 0.0; // sqrt(dim), the norm budget the analysis assumes
    std::vector<std::string> warnings;
    bool ok() const { return warnings.empty(); }
};

// Checks the norm envelope the learner's guarantees assume: unit feature
// norms and sqrt(dim)-bounded coefficient/measure norms.  Reports rather
// than enforces; exotic feature maps may exceed the envelope knowingly.
FeatureBoundsReport validate_feature_bounds(const EnvSpec& spec, const PrimalFeatures& features);

} // namespace resetfree
