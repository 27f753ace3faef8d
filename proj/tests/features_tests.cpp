#include <doctest.h>

#include <cmath>
#include <vector>

#include <Eigen/Dense>

#include "resetfree/features.hpp"
#include "resetfree/rng.hpp"
#include "test_specs.hpp"

using namespace resetfree;

TEST_CASE("features: one-hot dimensions and bucket layout") {
    OneHotPrimal primal(3, 2);
    CHECK(primal.dim() == 7); // 3*2 buckets plus the reserved trailing slot
    CHECK(primal.tabular_shape().has_value());
    CHECK(primal.tabular_shape()->num_states == 3);
    CHECK(primal.tabular_shape()->num_actions == 2);
    for (int s = 0; s < 3; ++s)
        for (int a = 0; a < 2; ++a) CHECK(primal.bucket_index(EnvState{s, 1}, a) == s * 2 + a);
    CHECK(primal.bucket_index(EnvState{kAbsorbingId, 2}, 0) == -1);

    OneHotDual dual(3);
    CHECK(dual.dim() == 3);

    CHECK_THROWS_AS(OneHotPrimal(0, 2), ContractViolation);
    CHECK_THROWS_AS(OneHotDual(0), ContractViolation);
}

TEST_CASE("features: evaluation is an exact indicator, zero when absorbing") {
    OneHotPrimal primal(2, 2);
    Eigen::VectorXd phi(primal.dim());
    primal.evaluate(EnvState{1, 3}, 0, phi);
    CHECK(phi.sum() == 1.0);
    CHECK(phi[2] == 1.0);
    CHECK(phi.norm() == 1.0);
    primal.evaluate(EnvState{kAbsorbingId, 3}, 1, phi);
    CHECK(phi.norm() == 0.0);
    CHECK_THROWS_AS(primal.evaluate(EnvState{5, 1}, 0, phi), ContractViolation);
    CHECK_THROWS_AS(primal.evaluate(EnvState{0, 1}, 7, phi), ContractViolation);

    OneHotDual dual(2);
    Eigen::VectorXd xi(dual.dim());
    dual.evaluate(EnvState{1, 1}, xi);
    CHECK(xi[0] == 0.0);
    CHECK(xi[1] == 1.0);
    dual.evaluate(EnvState{kAbsorbingId, 1}, xi);
    CHECK(xi.norm() == 0.0);
    CHECK_THROWS_AS(dual.evaluate(EnvState{2, 1}, xi), ContractViolation);
}

TEST_CASE("features: induced coefficient vectors reproduce the tables") {
    const EnvSpec spec = testspec::chain_with_temptation();
    OneHotPrimal primal(spec.num_states, spec.num_actions);
    for (int h = 1; h <= spec.horizon; ++h) {
        const Eigen::VectorXd wr = induced_reward_vector(spec, h);
        const Eigen::VectorXd wc = induced_cost_vector(spec, h);
        for (int s = 0; s < spec.num_states; ++s) {
            for (int a = 0; a < spec.num_actions; ++a) {
                const Eigen::VectorXd phi = primal(EnvState{s, h}, a);
                CHECK(phi.dot(wr) == spec.effective_reward(h - 1, s, a));
                CHECK(phi.dot(wc) == spec.step_cost(s));
            }
        }
        CHECK(wr[primal.dim() - 1] == 0.0); // trailing slot stays empty
    }
}

TEST_CASE("features: induced measures reproduce one-step expectations") {
    const EnvSpec spec = testspec::cycle_with_trap();
    OneHotPrimal primal(spec.num_states, spec.num_actions);
    Rng rng(4);

    // Random successor valuation; absorbing entry last.
    std::vector<double> value(spec.num_states + 1);
    for (double& v : value) v = rng.uniform();

    for (int h = 1; h <= spec.horizon; ++h) {
        Eigen::VectorXd combo = Eigen::VectorXd::Zero(primal.dim());
        for (int s2 = 0; s2 < spec.num_states; ++s2)
            combo += value[s2] * induced_measure_vector(spec, h, s2);
        combo += value[spec.num_states] * induced_measure_vector(spec, h, kAbsorbingId);

        for (int s = 0; s < spec.num_states; ++s) {
            for (int a = 0; a < spec.num_actions; ++a) {
                double expect = 0.0;
                if (spec.is_reset(s)) {
                    expect = value[spec.num_states]; // reset states feed the absorbing state
                } else {
                    for (int s2 = 0; s2 < spec.num_states; ++s2)
                        expect += spec.prob(h - 1, s, a, s2) * value[s2];
                }
                const Eigen::VectorXd phi = primal(EnvState{s, h}, a);
                CHECK(phi.dot(combo) == doctest::Approx(expect).epsilon(1e-12));
            }
        }
    }
}

TEST_CASE("features: norm envelope holds for one-hot maps") {
    const EnvSpec spec = testspec::cycle_with_trap();
    OneHotPrimal primal(spec.num_states, spec.num_actions);
    const FeatureBoundsReport rep = validate_feature_bounds(spec, primal);
    CHECK(rep.ok());
    CHECK(rep.max_phi_norm == 1.0);
    CHECK(rep.bound == doctest::Approx(std::sqrt(static_cast<double>(primal.dim()))));
    CHECK(rep.max_measure_norm <= rep.bound + 1e-12);
}
