#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "resetfree/oracle.hpp"
#include "resetfree/rng.hpp"
#include "test_specs.hpp"

using namespace resetfree;

namespace {

// Chain of singleton-successor states 0 -> 1 -> 2 -> trap(3), one action.
// State 2 cannot avoid the trap, so it is infeasible even though the start
// support {0} is fine; episode carry-over still drags runs into state 2.
EnvSpec conveyor() {
    EnvSpec spec;
    spec.num_states = 4;
    spec.num_actions = 1;
    spec.horizon = 2;
    spec.transition.assign(2 * 4 * 1 * 4, 0.0);
    spec.reward.assign(2 * 4 * 1, 0.0);
    for (int h = 0; h < 2; ++h) {
        spec.prob(h, 0, 0, 1) = 1.0;
        spec.prob(h, 1, 0, 2) = 1.0;
        spec.prob(h, 2, 0, 3) = 1.0;
        spec.prob(h, 3, 0, 3) = 1.0;
    }
    spec.reset_state = {0, 0, 0, 1};
    spec.start_dist = {1.0, 0.0, 0.0, 0.0};
    spec.post_reset_dist = {1.0, 0.0, 0.0, 0.0};
    return spec;
}

PolicyTable random_policy(const EnvSpec& spec, Rng& rng) {
    PolicyTable pi = PolicyTable::uniform(spec.horizon, spec.num_states, spec.num_actions);
    for (int h = 1; h <= spec.horizon; ++h) {
        for (int s = 0; s < spec.num_states; ++s) {
            double total = 0.0;
            for (int a = 0; a < spec.num_actions; ++a) {
                const double w = 0.05 + rng.uniform();
                pi.prob_ref(h, s, a) = w;
                total += w;
            }
            for (int a = 0; a < spec.num_actions; ++a) pi.prob_ref(h, s, a) /= total;
        }
    }
    return pi;
}

} // namespace

TEST_CASE("oracle: minimum reset probability on the two-state chain") {
    const EnvSpec spec = testspec::chain();
    const ValueTables c = min_cost_dp(spec);
    CHECK(c.value(2, 1) == 1.0);          // acting from the trap at the last step
    CHECK(c.value(2, 0) == 0.0);
    CHECK(c.action_value(1, 0, 0) == 0.0); // stay safe
    CHECK(c.action_value(1, 0, 1) == 1.0); // walk into the trap
    CHECK(c.value(1, 0) == 0.0);
    CHECK(c.value(1, 1) == 1.0);
    CHECK(c.value(1, kAbsorbingId) == 0.0);
}

TEST_CASE("oracle: restricted action sets keep only reset-optimal actions") {
    const EnvSpec spec = testspec::chain();
    const ActionSets sets = restricted_actions(spec, min_cost_dp(spec));
    CHECK(sets.allowed(1, 0, 0));
    CHECK_FALSE(sets.allowed(1, 0, 1));
    // At the last step no successor can charge anything, so both survive.
    CHECK(sets.allowed(2, 0, 0));
    CHECK(sets.allowed(2, 0, 1));
    // Reset states always keep every action.
    CHECK(sets.row_mask(1, 1) == 3u);
    CHECK(sets.row_mask(2, 1) == 3u);
}

TEST_CASE("oracle: uniform policy pays half a reset on the chain") {
    const EnvSpec spec = testspec::chain();
    const PolicyTable pi = PolicyTable::uniform(spec.horizon, spec.num_states, spec.num_actions);
    const ValueTables vc = evaluate_policy(spec, pi, Objective::Cost);
    CHECK(vc.value(1, 0) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("oracle: lagrangian evaluation equals reward minus y times cost") {
    const EnvSpec spec = testspec::chain_with_temptation();
    Rng rng(17);
    for (int trial = 0; trial < 20; ++trial) {
        const PolicyTable pi = random_policy(spec, rng);
        const double y = rng.uniform() * 5.0;
        const ValueTables vr = evaluate_policy(spec, pi, Objective::Reward);
        const ValueTables vc = evaluate_policy(spec, pi, Objective::Cost);
        const ValueTables vl = evaluate_policy(spec, pi, Objective::Lagrangian, y);
        for (int s = 0; s < spec.num_states; ++s)
            CHECK(vl.value(1, s) == doctest::Approx(vr.value(1, s) - y * vc.value(1, s)).epsilon(1e-12));
    }
}

TEST_CASE("oracle: scalar best response dips to the safe optimum as y grows") {
    const EnvSpec spec = testspec::chain_with_temptation();
    CHECK(best_response_dp(spec, 0.0).value(1, 0) == doctest::Approx(0.9));
    CHECK(best_response_dp(spec, 0.5).value(1, 0) == doctest::Approx(0.4));
    CHECK(best_response_dp(spec, 2.0).value(1, 0) == doctest::Approx(0.0));
}

TEST_CASE("oracle: multiplier threshold matches the hand value 0.9") {
    const EnvSpec spec = testspec::chain_with_temptation();
    const double lh = lambda_hat(spec, 0);
    CHECK(lh == doctest::Approx(0.9).epsilon(1e-6));
    CHECK(lh >= 0.9 - 1e-12); // returned edge sits on the safe side of the plateau
}

TEST_CASE("oracle: threshold search reports an exhausted bracket") {
    const EnvSpec spec = testspec::chain_with_temptation();
    LambdaSearch search;
    search.y_max = 0.5;
    CHECK_THROWS_AS(lambda_hat(spec, 0, search), SearchBoundError);
    CHECK_THROWS_AS(lambda_hat(spec, 1), ContractViolation); // trap state has no threshold
    CHECK_THROWS_AS(lambda_hat(spec, 9), ContractViolation);
}

TEST_CASE("oracle: saddle point assembly on the temptation chain") {
    const EnvSpec spec = testspec::chain_with_temptation();
    const SaddlePoint sp = build_saddle_point(spec);
    CHECK(sp.feasible == std::vector<std::uint8_t>{1, 0});
    CHECK(std::isnan(sp.lambda_hat[1]));
    CHECK(sp.lambda_hat[0] == doctest::Approx(0.9).epsilon(1e-6));
    CHECK(sp.lambda_star(0) == doctest::Approx(1.9).epsilon(1e-6));
    CHECK(sp.pi_star.at(1, 0) == 0);              // refuses the temptation
    CHECK(sp.pi_star_reward.value(1, 0) == 0.0);  // and therefore earns nothing
    CHECK(sp.pi_star_cost.value(1, 0) == 0.0);
    CHECK(sp.theta_star_norm() == doctest::Approx(1.9).epsilon(1e-6));
}

TEST_CASE("oracle: saddle certification sees only float noise on correct instances") {
    for (const EnvSpec& spec : {testspec::chain_with_temptation(), testspec::cycle_with_trap()}) {
        const SaddlePoint sp = build_saddle_point(spec);
        const SaddleCertification cert = certify_saddle_point(spec, sp, 300, 5);
        CHECK(cert.max_violation <= 1e-9);
        CHECK(cert.feasible_starts >= 1);
        CHECK(cert.num_samples == 300);
    }
}

TEST_CASE("oracle: restricted-set membership is equivalent to never resetting") {
    for (const EnvSpec& spec : {testspec::chain_with_temptation(), testspec::cycle_with_trap()}) {
        const SaddlePoint sp = build_saddle_point(spec);
        const EquivalenceCertification cert = certify_restricted_equivalence(spec, sp, 100, 3);
        CHECK(cert.exhaustive); // 16 and 4096 policies, both enumerable
        CHECK(cert.counterexamples == 0);
        CHECK(cert.max_cost_when_inside <= 1e-12);
        CHECK(cert.max_violation_when_costfree <= 1e-12);
    }
}

TEST_CASE("oracle: deterministic policy counting with overflow cutoff") {
    CHECK(deterministic_policy_count(testspec::chain(), 1000000) == 16u);
    CHECK(deterministic_policy_count(testspec::cycle_with_trap(), 1000000) == 4096u);
    CHECK_FALSE(deterministic_policy_count(testspec::cycle_with_trap(), 100).has_value());
}

TEST_CASE("oracle: the restricted optimum dominates every never-resetting policy") {
    for (const EnvSpec& spec : {testspec::chain_with_temptation(), testspec::cycle_with_trap()}) {
        const SaddlePoint sp = build_saddle_point(spec);
        for_each_deterministic_policy(
            spec, sp.restricted, 1000000,
            [&](const std::vector<double>& vr, const std::vector<double>& vc, const std::vector<double>&) {
                for (int s = 0; s < spec.num_states; ++s) {
                    if (!sp.feasible[s] || vc[s] > 1e-12) continue;
                    CHECK(vr[s] <= sp.pi_star_reward.value(1, s) + 1e-9);
                }
            });
    }
}

TEST_CASE("oracle: start closure collects every carry-over state") {
    std::vector<int> closure = feasible_start_closure(testspec::cycle_with_trap());
    std::sort(closure.begin(), closure.end());
    CHECK(closure == std::vector<int>{0, 1, 2});
}

TEST_CASE("oracle: feasibility certification distinguishes starts from closure") {
    CHECK_NOTHROW(certify_feasible(testspec::chain()));
    CHECK_NOTHROW(certify_feasible(testspec::cycle_with_trap()));

    const EnvSpec belt = conveyor();
    // The start state itself is fine, but chained episodes walk into state 2
    // which cannot avoid the trap.
    CHECK_NOTHROW(certify_feasible(belt, false));
    CHECK_THROWS_AS(certify_feasible(belt, true), InfeasibleEnvironment);

    EnvSpec doomed = testspec::chain();
    doomed.prob(0, 0, 0, 0) = 0.0;
    doomed.prob(0, 0, 0, 1) = 1.0; // both actions now enter the trap at h = 1
    CHECK_THROWS_AS(certify_feasible(doomed, false), InfeasibleEnvironment);
}

TEST_CASE("oracle: conveyor feasibility values are exact") {
    const ValueTables c = min_cost_dp(conveyor());
    CHECK(c.value(1, 0) == 0.0);
    CHECK(c.value(1, 1) == 0.0);
    CHECK(c.value(1, 2) == 1.0);
    CHECK(c.value(1, 3) == 1.0);
}
