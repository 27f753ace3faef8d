#include "resetfree/features.hpp"

#include <cmath>

namespace resetfree {

OneHotPrimal::OneHotPrimal(int num_states, int num_actions)
    : num_states_(num_states), num_actions_(num_actions) {
    if (num_states <= 0 || num_actions <= 0)
        throw ContractViolation("OneHotPrimal: dimensions must be positive");
}

int OneHotPrimal::bucket_index(const EnvState& state, int action) const {
    if (state.absorbing()) return -1;
    if (state.id < 0 || state.id >= num_states_ || action < 0 || action >= num_actions_)
        throw ContractViolation("OneHotPrimal: state or action out of range");
    return state.id * num_actions_ + action;
}

void OneHotPrimal::evaluate(const EnvState& state, int action, Eigen::VectorXd& out) const {
    out.setZero(dim());
    const int b = bucket_index(state, action);
    if (b >= 0) out[b] = 1.0;
}

OneHotDual::OneHotDual(int num_states) : num_states_(num_states) {
    if (num_states <= 0) throw ContractViolation("OneHotDual: num_states must be positive");
}

void OneHotDual::evaluate(const EnvState& state, Eigen::VectorXd& out) const {
    out.setZero(dim());
    if (state.absorbing()) return;
    if (state.id < 0 || state.id >= num_states_)
        throw ContractViolation("OneHotDual: state id out of range");
    out[state.id] = 1.0;
}

Eigen::VectorXd induced_reward_vector(const EnvSpec& spec, int h) {
    Eigen::VectorXd w = Eigen::VectorXd::Zero(spec.num_states * spec.num_actions + 1);
    for (int s = 0; s < spec.num_states; ++s)
        for (int a = 0; a < spec.num_actions; ++a)
            w[s * spec.num_actions + a] = spec.effective_reward(h - 1, s, a);
    return w;
}

Eigen::VectorXd induced_cost_vector(const EnvSpec& spec, int h) {
    (void)h;
    Eigen::VectorXd w = Eigen::VectorXd::Zero(spec.num_states * spec.num_actions + 1);
    for (int s = 0; s < spec.num_states; ++s)
        for (int a = 0; a < spec.num_actions; ++a) w[s * spec.num_actions + a] = spec.step_cost(s);
    return w;
}

Eigen::VectorXd induced_measure_vector(const EnvSpec& spec, int h, int s2) {
    Eigen::VectorXd w = Eigen::VectorXd::Zero(spec.num_states * spec.num_actions + 1);
    for (int s = 0; s < spec.num_states; ++s) {
        for (int a = 0; a < spec.num_actions; ++a) {
            double p;
            if (spec.is_reset(s))
                p = (s2 == kAbsorbingId) ? 1.0 : 0.0;
            else
                p = (s2 == kAbsorbingId) ? 0.0 : spec.prob(h - 1, s, a, s2);
            w[s * spec.num_actions + a] = p;
        }
    }
    return w;
}

FeatureBoundsReport validate_feature_bounds(const EnvSpec& spec, const PrimalFeatures& features) {
    FeatureBoundsReport rep;
    rep.bound = std::sqrt(static_cast<double>(features.dim()));
    Eigen::VectorXd phi(features.dim());
    for (int h = 1; h <= spec.horizon; ++h) {
        for (int s = 0; s < spec.num_states; ++s) {
            for (int a = 0; a < spec.num_actions; ++a) {
                features.evaluate(EnvState{s, h}, a, phi);
                rep.max_phi_norm = std::max(rep.max_phi_norm, phi.norm());
            }
        }
        rep.max_reward_coeff_norm = std::max(rep.max_reward_coeff_norm, induced_reward_vector(spec, h).norm());
        rep.max_cost_coeff_norm = std::max(rep.max_cost_coeff_norm, induced_cost_vector(spec, h).norm());
        for (int s2 = -1; s2 < spec.num_states; ++s2) {
            const int id = (s2 < 0) ? kAbsorbingId : s2;
            rep.max_measure_norm = std::max(rep.max_measure_norm, induced_measure_vector(spec, h, id).norm());
        }
    }
    if (rep.max_phi_norm > 1.0 + 1e-12)
        rep.warnings.push_back("feature norm exceeds 1: " + std::to_string(rep.max_phi_norm));
    if (rep.max_reward_coeff_norm > rep.bound + 1e-12)
        rep.warnings.push_back("reward coefficient norm exceeds sqrt(dim)");
    if (rep.max_cost_coeff_norm > rep.bound + 1e-12)
        rep.warnings.push_back("cost coefficient norm exceeds sqrt(dim)");
    if (rep.max_measure_norm > rep.bound + 1e-12)
        rep.warnings.push_back("transition measure norm exceeds sqrt(dim)");
    return rep;
}

} // namespace resetfree
