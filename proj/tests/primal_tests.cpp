#include <doctest.h>

#include <cmath>
#include <memory>
#include <vector>

#include <json.hpp>

#include "resetfree/oracle.hpp"
#include "resetfree/primal.hpp"
#include "resetfree/rng.hpp"
#include "test_specs.hpp"

using namespace resetfree;

namespace {

// Forwards a one-hot map but hides its tabular structure, forcing the
// learner onto the generic regression backend.
class HiddenShape : public PrimalFeatures {
public:
    explicit HiddenShape(std::shared_ptr<const PrimalFeatures> inner) : inner_(std::move(inner)) {}
    int dim() const override { return inner_->dim(); }
    void evaluate(const EnvState& state, int action, Eigen::VectorXd& out) const override {
        inner_->evaluate(state, action, out);
    }

private:
    std::shared_ptr<const PrimalFeatures> inner_;
};

LearnerHyper chain_hyper() {
    LearnerHyper hyper;
    hyper.horizon = 2;
    hyper.num_actions = 2;
    hyper.num_episodes = 10;
    hyper.dual_radius = 1.0;
    return hyper;
}

// Deterministic rollout through a spec; the rng only feeds categorical rows
// that are point masses here.
Trajectory scripted_episode(const EnvSpec& spec, int start, const std::vector<int>& actions, double lambda) {
    Trajectory traj;
    traj.lambda_at_start = lambda;
    EnvState s{start, 1};
    traj.initial = s;
    Rng rng(0);
    for (int h = 1; h <= spec.horizon; ++h) {
        const Transition t = step(spec, s, actions[h - 1], rng);
        traj.steps.push_back(TrajectoryStep{s, actions[h - 1], t.reward, t.cost, t.next});
        s = t.next;
    }
    return traj;
}

} // namespace

TEST_CASE("primal: softmax hand values and guards") {
    const std::vector<double> p = softmax({2.0, 0.0}, 1.0);
    CHECK(p[0] == doctest::Approx(0.8807970779778824).epsilon(1e-14));
    CHECK(p[1] == doctest::Approx(0.11920292202211755).epsilon(1e-14));

    // Zero temperature collapses to uniform; huge scores must not overflow.
    const std::vector<double> u = softmax({5.0, -3.0, 1.0}, 0.0);
    for (double x : u) CHECK(x == doctest::Approx(1.0 / 3.0).epsilon(1e-14));
    const std::vector<double> sharp = softmax({1000.0, 0.0}, 1.0);
    CHECK(sharp[0] == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(sharp[0] + sharp[1] == doctest::Approx(1.0).epsilon(1e-12));

    CHECK_THROWS_AS(softmax({}, 1.0), ContractViolation);
    CHECK_THROWS_AS(softmax({std::numeric_limits<double>::infinity()}, 1.0), NumericError);
}

TEST_CASE("primal: temperature and bonus formulas at pinned inputs") {
    LearnerHyper hyper = chain_hyper();
    hyper.num_episodes = 100;
    // log(2) * 100 / (2 * (1 + 1 + 2))
    CHECK(hyper.alpha() == doctest::Approx(8.664339756999317).epsilon(1e-12));
    // 1 * 5 * 2 * sqrt(log(4 * log(2) * 5 * 100 * 2 / 0.05))
    CHECK(hyper.beta(5) == doctest::Approx(33.05036912513135).epsilon(1e-12));

    hyper.alpha_override = 2.5;
    CHECK(hyper.alpha() == 2.5);
    hyper.bonus_scale = 0.25;
    CHECK(hyper.beta(5) == doctest::Approx(0.25 * 33.05036912513135).epsilon(1e-12));
}

TEST_CASE("primal: hyper validation rejects bad settings") {
    auto reject = [](auto&& mutate) {
        LearnerHyper hyper = chain_hyper();
        mutate(hyper);
        CHECK_THROWS_AS(hyper.validate(), ContractViolation);
    };
    reject([](LearnerHyper& h) { h.horizon = 0; });
    reject([](LearnerHyper& h) { h.num_actions = 1; });
    reject([](LearnerHyper& h) { h.num_episodes = 0; });
    reject([](LearnerHyper& h) { h.dual_radius = 0.0; });
    reject([](LearnerHyper& h) { h.confidence = 0.0; });
    reject([](LearnerHyper& h) { h.confidence = 1.0; });
    reject([](LearnerHyper& h) { h.ridge = 0.0; });
    reject([](LearnerHyper& h) { h.bonus_scale = -1.0; });
    reject([](LearnerHyper& h) { h.alpha_override = -2.0; });
    CHECK_NOTHROW(chain_hyper().validate());
}

TEST_CASE("primal: fresh learner starts optimistic at the clip ceiling") {
    auto features = std::make_shared<OneHotPrimal>(2, 2);
    LearnerHyper hyper = chain_hyper();
    LearnerHyper unit = hyper;
    unit.bonus_scale = 1.0;
    hyper.bonus_scale = 2.0 / unit.beta(features->dim()); // beta == 2 exactly up to one ulp
    Learner learner(features, hyper);

    CHECK(learner.beta() == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(learner.tabular_backend());
    for (int a = 0; a < 2; ++a) {
        CHECK(learner.q_reward(EnvState{0, 1}, a) == doctest::Approx(2.0).epsilon(1e-12)); // range H-h+1 = 2
        CHECK(learner.q_reward(EnvState{0, 2}, a) == 1.0);                                 // range 1, clipped
        CHECK(learner.q_cost(EnvState{0, 1}, a) == 0.0); // subtractive bonus floors at 0
        CHECK(learner.q_cost(EnvState{1, 2}, a) == 0.0);
    }
    const Learner::Values v = learner.value_estimates(EnvState{0, 1});
    CHECK(v.v_reward == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(v.v_cost == 0.0);
    CHECK(learner.episodes_seen() == 0);
    CHECK(learner.gram_min_eigenvalue(1) == 1.0);
}

TEST_CASE("primal: one visited bucket yields the pinned ridge regression") {
    EnvSpec spec = testspec::chain();
    spec.raw_reward(1, 0, 0) = 0.7; // pay only when acting from g at the last step

    auto features = std::make_shared<OneHotPrimal>(2, 2);
    LearnerHyper hyper = chain_hyper();
    LearnerHyper unit = hyper;
    unit.bonus_scale = 1.0;
    hyper.bonus_scale = 2.0 / unit.beta(features->dim());
    Learner learner(features, hyper);

    learner.end_of_episode_update(scripted_episode(spec, 0, {0, 0}, 0.0));
    CHECK(learner.episodes_seen() == 1);

    // Bucket (g, a0) holds one sample of target 0.7 + 0 against ridge 1.
    const int b = features->bucket_index(EnvState{0, 2}, 0);
    CHECK(learner.weights_reward(2)[b] == doctest::Approx(0.35).epsilon(1e-12));
    CHECK(learner.gram_matrix(2)(b, b) == 2.0);
    CHECK(learner.gram_min_eigenvalue(2) == 1.0); // reserved slot keeps the floor at ridge

    // Layer 1 regresses on the new layer-2 value, which is clipped to 1.
    CHECK(learner.weights_reward(1)[b] == doctest::Approx(0.5).epsilon(1e-12));

    // Cost weights stay at zero: no reset was touched.
    CHECK(learner.weights_cost(1).norm() == 0.0);
    CHECK(learner.weights_cost(2).norm() == 0.0);

    // Mixed state value: uniform old-generation weights over the new
    // action values 0.5 + beta/sqrt(2) and the untouched ceiling 2.
    const double expected =
        0.5 * (0.5 + learner.beta() * std::sqrt(0.5)) + 0.5 * 2.0;
    CHECK(learner.value_estimates(EnvState{0, 1}).v_reward == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("primal: policy distribution is the softmax of exposed action values") {
    const EnvSpec spec = testspec::chain_with_temptation();
    auto features = std::make_shared<OneHotPrimal>(2, 2);
    LearnerHyper hyper = chain_hyper();
    hyper.bonus_scale = 0.05;
    Learner learner(features, hyper);

    Rng rng(13);
    for (int k = 0; k < 8; ++k) {
        std::vector<int> actions = {static_cast<int>(rng.next_u64() % 2), static_cast<int>(rng.next_u64() % 2)};
        learner.end_of_episode_update(scripted_episode(spec, 0, actions, rng.uniform()));
    }
    for (double lambda : {0.0, 0.3, 2.0}) {
        for (int s = 0; s < 2; ++s) {
            for (int h = 1; h <= 2; ++h) {
                const EnvState st{s, h};
                std::vector<double> scores(2);
                for (int a = 0; a < 2; ++a) scores[a] = learner.q_reward(st, a) - lambda * learner.q_cost(st, a);
                const std::vector<double> want = softmax(scores, learner.alpha());
                const std::vector<double> got = learner.policy_distribution(st, lambda);
                double total = 0.0;
                for (int a = 0; a < 2; ++a) {
                    CHECK(got[a] == doctest::Approx(want[a]).epsilon(1e-12));
                    total += got[a];
                }
                CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
            }
        }
    }
    CHECK_THROWS_AS(learner.policy_distribution(EnvState{0, 1}, -0.5), ContractViolation);
}

TEST_CASE("primal: trajectory validation") {
    const EnvSpec spec = testspec::chain();
    auto features = std::make_shared<OneHotPrimal>(2, 2);
    Learner learner(features, chain_hyper());

    Trajectory good = scripted_episode(spec, 0, {0, 0}, 0.0);
    CHECK_NOTHROW(learner.end_of_episode_update(good));

    Trajectory short_run = good;
    short_run.steps.pop_back();
    CHECK_THROWS_AS(learner.end_of_episode_update(short_run), ContractViolation);

    Trajectory scrambled = good;
    scrambled.steps[1].state.step = 5;
    CHECK_THROWS_AS(learner.end_of_episode_update(scrambled), ContractViolation);

    Trajectory negative_lambda = good;
    negative_lambda.lambda_at_start = -1.0;
    CHECK_THROWS_AS(learner.end_of_episode_update(negative_lambda), ContractViolation);

    Trajectory bad_action = good;
    bad_action.steps[0].action = 9;
    CHECK_THROWS_AS(learner.end_of_episode_update(bad_action), ContractViolation);

    Trajectory wrong_start = good;
    wrong_start.initial = EnvState{1, 1};
    CHECK_THROWS_AS(learner.end_of_episode_update(wrong_start), ContractViolation);
}

TEST_CASE("primal: tabular and generic backends agree to regression accuracy") {
    const EnvSpec spec = testspec::chain_with_temptation();
    auto onehot = std::make_shared<OneHotPrimal>(2, 2);
    auto hidden = std::make_shared<HiddenShape>(onehot);

    LearnerHyper hyper = chain_hyper();
    hyper.num_episodes = 30;
    hyper.bonus_scale = 0.05;
    Learner fast(onehot, hyper);
    Learner slow(hidden, hyper);
    CHECK(fast.tabular_backend());
    CHECK_FALSE(slow.tabular_backend());

    Rng rng(31);
    for (int k = 0; k < 30; ++k) {
        std::vector<int> actions = {static_cast<int>(rng.next_u64() % 2), static_cast<int>(rng.next_u64() % 2)};
        const Trajectory traj = scripted_episode(spec, 0, actions, rng.uniform() * 2.0);
        fast.end_of_episode_update(traj);
        slow.end_of_episode_update(traj);

        for (int h = 1; h <= 2; ++h) {
            CHECK((fast.weights_reward(h) - slow.weights_reward(h)).norm() < 1e-9);
            CHECK((fast.weights_cost(h) - slow.weights_cost(h)).norm() < 1e-9);
            CHECK((fast.gram_matrix(h) - slow.gram_matrix(h)).norm() < 1e-9);
            CHECK(fast.gram_min_eigenvalue(h) == doctest::Approx(slow.gram_min_eigenvalue(h)).epsilon(1e-9));
            for (int s = 0; s < 2; ++s) {
                const EnvState st{s, h};
                for (int a = 0; a < 2; ++a) {
                    CHECK(fast.q_reward(st, a) == doctest::Approx(slow.q_reward(st, a)).epsilon(1e-9));
                    CHECK(fast.q_cost(st, a) == doctest::Approx(slow.q_cost(st, a)).epsilon(1e-9));
                }
                const Learner::Values vf = fast.value_estimates(st);
                const Learner::Values vs = slow.value_estimates(st);
                CHECK(vf.v_reward == doctest::Approx(vs.v_reward).epsilon(1e-9));
                CHECK(vf.v_cost == doctest::Approx(vs.v_cost).epsilon(1e-9));
            }
        }
    }
}

TEST_CASE("primal: theory-scale bonuses keep estimates optimistic throughout") {
    const EnvSpec spec = testspec::cycle_with_trap();
    const SaddlePoint sp = build_saddle_point(spec);

    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        auto features = std::make_shared<OneHotPrimal>(spec.num_states, spec.num_actions);
        LearnerHyper hyper;
        hyper.horizon = spec.horizon;
        hyper.num_actions = spec.num_actions;
        hyper.num_episodes = 20;
        hyper.dual_radius = 1.0;
        Learner learner(features, hyper);

        Rng rng(seed);
        for (int k = 1; k <= 20; ++k) {
            Rng ep = rng.substream(static_cast<std::uint64_t>(k));
            Trajectory traj;
            EnvState s{0, 1};
            traj.initial = s;
            traj.lambda_at_start = 0.0;
            for (int h = 1; h <= spec.horizon; ++h) {
                const int a = ep.categorical(learner.policy_distribution(s, 0.0));
                const Transition t = step(spec, s, a, ep);
                traj.steps.push_back(TrajectoryStep{s, a, t.reward, t.cost, t.next});
                s = t.next;
            }
            learner.end_of_episode_update(traj);

            const Learner::Values v = learner.value_estimates(EnvState{0, 1});
            CHECK(v.v_reward >= sp.pi_star_reward.value(1, 0) - 1e-9);
            CHECK(v.v_cost <= 1e-9); // state 0 admits a zero-reset policy
        }
    }
}

TEST_CASE("primal: snapshot serialises the learner state") {
    const EnvSpec spec = testspec::chain();
    auto features = std::make_shared<OneHotPrimal>(2, 2);
    Learner learner(features, chain_hyper());
    learner.end_of_episode_update(scripted_episode(spec, 0, {0, 0}, 0.3));

    const nlohmann::json j = nlohmann::json::parse(learner.snapshot_json());
    CHECK(j.at("episodes_seen").get<int>() == 1);
    CHECK(j.at("lambda_prev").get<double>() == 0.3);
    CHECK(j.at("alpha").get<double>() == doctest::Approx(learner.alpha()));
    CHECK(j.at("beta").get<double>() == doctest::Approx(learner.beta()));
}
