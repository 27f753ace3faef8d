#include "resetfree/harness.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <json.hpp>

#include "resetfree/textio.hpp"

namespace resetfree {

namespace {

constexpr int kMaxInvariantMessages = 20;

void note_violation(GameMetrics& metrics, const std::string& msg) {
    ++metrics.invariant_violations;
    if (static_cast<int>(metrics.invariant_messages.size()) < kMaxInvariantMessages)
        metrics.invariant_messages.push_back(msg);
}

} // namespace

double auto_dual_radius(const SaddlePoint& saddle) { return std::max(1.0, saddle.theta_star_norm()); }

RunResult run_game(const EnvSpec& spec, std::shared_ptr<const PrimalFeatures> features,
                   const DualFeatures& xi, const GameHyper& hyper, int episodes, std::uint64_t seed,
                   const SaddlePoint* saddle) {
    if (episodes < 0) throw ContractViolation("run_game: negative episode count");
    validate_structure(spec);
    if (episodes == 0) return RunResult{}; // empty log, zero metrics

    SaddlePoint local;
    if (!saddle) {
        local = build_saddle_point(spec);
        saddle = &local;
    }

    const double radius = hyper.dual_radius > 0.0 ? hyper.dual_radius : auto_dual_radius(*saddle);

    LearnerHyper lh;
    lh.horizon = spec.horizon;
    lh.num_actions = spec.num_actions;
    lh.num_episodes = episodes;
    lh.dual_radius = radius;
    lh.confidence = hyper.confidence;
    lh.bonus_constant = hyper.bonus_constant;
    lh.bonus_scale = hyper.bonus_scale;
    lh.ridge = hyper.ridge;
    lh.alpha_override = hyper.alpha_override;

    Learner learner(features, lh);
    DualState dual = make_dual_state(xi.dim(), radius);

    RunResult out;
    out.records.reserve(episodes);
    GameMetrics& metrics = out.metrics;
    metrics.episodes = episodes;
    metrics.dual_radius = radius;
    metrics.alpha = learner.alpha();
    metrics.beta = learner.beta();

    // Gram eigenvalue probes are exact and cheap on the tabular backend;
    // keep dense probes to small feature dims.
    const bool probe_gram = learner.tabular_backend() || learner.feature_dim() <= 64;

    const Rng run_rng(seed);
    std::optional<EpisodeOutcome> prev;
    PolicyTable policy = PolicyTable::uniform(spec.horizon, spec.num_states, spec.num_actions);

    double regret_cum = 0.0, resets_expected_cum = 0.0, resets_realized_cum = 0.0;
    double r_p_cum = 0.0, r_d_zero_cum = 0.0, r_d_star_cum = 0.0;
    double dual_lhs_zero_cum = 0.0, dual_lhs_star_cum = 0.0, t1_cum = 0.0;

    for (int k = 1; k <= episodes; ++k) {
        Rng ep_rng = run_rng.substream(static_cast<std::uint64_t>(k));
        const EnvState s1 = begin_episode(spec, prev, ep_rng);
        if (!saddle->feasible[s1.id])
            throw InfeasibleEnvironment("run_game: episode " + std::to_string(k) + " starts at " +
                                        spec.state_label(s1.id) +
                                        " which admits no reset-free policy; metrics are undefined there");

        const double lam = lambda_value(dual, xi, s1);
        if (lam < 0.0) note_violation(metrics, "negative multiplier at episode " + std::to_string(k));
        const double theta_norm = dual.theta.norm();
        if (theta_norm > radius + 1e-12)
            note_violation(metrics, "multiplier weights left the ball at episode " + std::to_string(k));

        const Learner::Values est = learner.value_estimates(s1);

        // Exact evaluation of the policy the learner is about to play.
        for (int h = 1; h <= spec.horizon; ++h) {
            for (int s = 0; s < spec.num_states; ++s) {
                const std::vector<double> row = learner.policy_distribution(EnvState{s, h}, lam);
                for (int a = 0; a < spec.num_actions; ++a) policy.prob_ref(h, s, a) = row[a];
            }
        }
        const ValueTables exact_r = evaluate_policy(spec, policy, Objective::Reward);
        const ValueTables exact_c = evaluate_policy(spec, policy, Objective::Cost);

        EpisodeRecord rec;
        rec.k = k;
        rec.s1 = s1.id;
        rec.lambda = lam;
        rec.lambda_hat = saddle->lambda_hat[s1.id];
        rec.lambda_star = saddle->lambda_star(s1.id);
        rec.v_r_est = est.v_reward;
        rec.v_c_est = est.v_cost;
        rec.v_r_exact = exact_r.value(1, s1.id);
        rec.v_c_exact = exact_c.value(1, s1.id);
        rec.v_r_star = saddle->pi_star_reward.value(1, s1.id);
        rec.v_c_star = saddle->pi_star_cost.value(1, s1.id);
        rec.theta_norm = theta_norm;

        // Roll the episode out.  Action rows at real states equal the
        // tabulated policy; the absorbing state gets the learner's (uniform)
        // row directly.
        Trajectory traj;
        traj.initial = s1;
        traj.lambda_at_start = lam;
        traj.steps.reserve(spec.horizon);
        EnvState state = s1;
        double episode_cost = 0.0;
        for (int h = 1; h <= spec.horizon; ++h) {
            const std::vector<double> row = learner.policy_distribution(state, lam);
            const int action = ep_rng.categorical(row);
            const double q_r = learner.q_reward(state, action);
            const double q_c = learner.q_cost(state, action);
            if (q_r < -1e-12 || q_r > spec.horizon - h + 1 + 1e-12)
                note_violation(metrics, "reward value estimate outside its clip range");
            if (q_c < -1e-12 || q_c > 1.0 + 1e-12)
                note_violation(metrics, "cost value estimate outside its clip range");
            const Transition tr = step(spec, state, action, ep_rng);
            traj.steps.push_back(TrajectoryStep{state, action, tr.reward, tr.cost, tr.next});
            episode_cost += tr.cost;
            state = tr.next;
        }
        if (episode_cost != 0.0 && episode_cost != 1.0)
            note_violation(metrics, "episode reset count not in {0,1}");
        const bool reset = episode_cost > 0.0;
        rec.reset = reset;
        prev = EpisodeOutcome{traj.steps.back().state.id, reset};

        // Multiplier ascent on the estimated reset value, then the
        // regression refit; this order is part of the protocol.
        dual = ogd_step(dual, xi, s1, est.v_cost);
        learner.end_of_episode_update(traj);

        if (probe_gram) {
            for (int h = 1; h <= spec.horizon; ++h) {
                if (learner.gram_min_eigenvalue(h) < learner.ridge() - 1e-9) {
                    note_violation(metrics, "Gram matrix eigenvalue fell below the regulariser");
                    break;
                }
            }
        }

        regret_cum += rec.v_r_star - rec.v_r_exact;
        resets_expected_cum += rec.v_c_exact;
        resets_realized_cum += reset ? 1.0 : 0.0;
        r_p_cum += (rec.v_r_star - lam * rec.v_c_star) - (rec.v_r_exact - lam * rec.v_c_exact);
        r_d_zero_cum += -lam * rec.v_c_exact;
        r_d_star_cum += (rec.lambda_star - lam) * rec.v_c_exact;
        dual_lhs_zero_cum += (lam - 0.0) * (-rec.v_c_est);
        dual_lhs_star_cum += (lam - rec.lambda_star) * (-rec.v_c_est);
        t1_cum += (rec.v_r_star - lam * rec.v_c_star) - (rec.v_r_est - lam * rec.v_c_est);

        rec.regret_cum = regret_cum;
        rec.resets_expected_cum = resets_expected_cum;
        rec.resets_realized_cum = resets_realized_cum;
        rec.r_p_cum = r_p_cum;
        rec.r_d_zero_cum = r_d_zero_cum;
        rec.r_d_star_cum = r_d_star_cum;
        rec.dual_lhs_zero_cum = dual_lhs_zero_cum;
        rec.dual_lhs_star_cum = dual_lhs_star_cum;
        rec.t1_cum = t1_cum;
        out.records.push_back(rec);
    }

    metrics.regret = regret_cum;
    metrics.resets_expected = resets_expected_cum;
    metrics.resets_realized = static_cast<int>(resets_realized_cum);
    metrics.r_p = r_p_cum;
    metrics.r_d_zero = r_d_zero_cum;
    metrics.r_d_star = r_d_star_cum;
    metrics.dual_lhs_zero = dual_lhs_zero_cum;
    metrics.dual_lhs_star = dual_lhs_star_cum;
    metrics.t1 = t1_cum;
    metrics.theta_norm_final = dual.theta.norm();
    return out;
}

RunResult run_game(const EnvSpec& spec, const GameHyper& hyper, int episodes, std::uint64_t seed,
                   const SaddlePoint* saddle) {
    auto features = std::make_shared<OneHotPrimal>(spec.num_states, spec.num_actions);
    OneHotDual xi(spec.num_states);
    return run_game(spec, features, xi, hyper, episodes, seed, saddle);
}

double primal_regret_from_records(const std::vector<EpisodeRecord>& records) {
    double total = 0.0;
    for (const auto& r : records)
        total += (r.v_r_star - r.lambda * r.v_c_star) - (r.v_r_exact - r.lambda * r.v_c_exact);
    return total;
}

double dual_regret_from_records(const std::vector<EpisodeRecord>& records,
                                const std::function<double(int)>& lambda_c) {
    double total = 0.0;
    for (const auto& r : records) total += (lambda_c(r.s1) - r.lambda) * r.v_c_exact;
    return total;
}

ReductionReport verify_reduction(const std::vector<EpisodeRecord>& records, double tol) {
    ReductionReport rep;
    double comp_hat = 0.0, comp_star = 0.0;
    for (const auto& r : records) {
        const double played = r.v_r_exact - r.lambda * r.v_c_exact;
        comp_hat += (r.v_r_star - r.lambda_hat * r.v_c_star) - played;
        comp_star += (r.v_r_star - r.lambda_star * r.v_c_star) - played;

        const double gap_regret = r.regret_cum - (r.r_p_cum + r.r_d_zero_cum);
        const double gap_resets = r.resets_expected_cum - (r.r_p_cum + r.r_d_star_cum);
        const double gap_comp =
            std::max(comp_hat - r.r_p_cum, comp_star - r.r_p_cum);
        rep.max_gap_regret = std::max(rep.max_gap_regret, gap_regret);
        rep.max_gap_resets = std::max(rep.max_gap_resets, gap_resets);
        rep.max_gap_comparator = std::max(rep.max_gap_comparator, gap_comp);
        if ((gap_regret > tol || gap_resets > tol || gap_comp > tol) && rep.first_violation_k < 0) {
            rep.first_violation_k = r.k;
            rep.ok = false;
        }
    }
    return rep;
}

DualBoundReport verify_dual_bound(const std::vector<EpisodeRecord>& records, double dual_radius,
                                  double tol) {
    DualBoundReport rep;
    for (const auto& r : records) {
        const double bound = 1.5 * dual_radius * std::sqrt(static_cast<double>(r.k));
        const double gap = std::max(r.dual_lhs_zero_cum, r.dual_lhs_star_cum) - bound;
        rep.max_gap = std::max(rep.max_gap, gap);
        if (gap > tol && rep.first_violation_k < 0) {
            rep.first_violation_k = r.k;
            rep.ok = false;
        }
        rep.bound_at_end = bound;
    }
    return rep;
}

ComparatorCheck verify_comparator_optimality(const EnvSpec& spec, const SaddlePoint& saddle,
                                             const std::vector<EpisodeRecord>& records,
                                             std::uint64_t cutoff) {
    ComparatorCheck check;
    if (!deterministic_policy_count(spec, cutoff).has_value()) return check;
    check.enumerable = true;

    std::vector<double> start_count(spec.num_states, 0.0);
    for (const auto& r : records) start_count[r.s1] += 1.0;

    double comparator = 0.0;
    for (int s = 0; s < spec.num_states; ++s)
        comparator += start_count[s] * saddle.pi_star_reward.value(1, s);
    check.comparator_total = comparator;

    double best = -std::numeric_limits<double>::infinity();
    for_each_deterministic_policy(
        spec, saddle.restricted, cutoff,
        [&](const std::vector<double>& vr, const std::vector<double>& vc, const std::vector<double>&) {
            double total = 0.0;
            for (int s = 0; s < spec.num_states; ++s) {
                if (start_count[s] == 0.0) continue;
                if (vc[s] > 1e-12) return; // resets from a visited start: outside the comparator class
                total += start_count[s] * vr[s];
            }
            best = std::max(best, total);
        });
    check.best_reset_free_total = best;
    check.gap = best - comparator;
    return check;
}

std::string records_to_csv(const std::vector<EpisodeRecord>& records) {
    std::string out =
        "k,s1,reset,lambda,lambda_hat,lambda_star,v_r_est,v_c_est,v_r_exact,v_c_exact,v_r_star,v_c_star,"
        "theta_norm,regret_cum,resets_expected_cum,resets_realized_cum,r_p_cum,r_d_zero_cum,r_d_star_cum,"
        "dual_lhs_zero_cum,dual_lhs_star_cum,t1_cum\n";
    for (const auto& r : records) {
        out += std::to_string(r.k);
        out += ',';
        out += std::to_string(r.s1);
        out += ',';
        out += r.reset ? '1' : '0';
        for (double x : {r.lambda, r.lambda_hat, r.lambda_star, r.v_r_est, r.v_c_est, r.v_r_exact,
                         r.v_c_exact, r.v_r_star, r.v_c_star, r.theta_norm, r.regret_cum,
                         r.resets_expected_cum, r.resets_realized_cum, r.r_p_cum, r.r_d_zero_cum,
                         r.r_d_star_cum, r.dual_lhs_zero_cum, r.dual_lhs_star_cum, r.t1_cum}) {
            out += ',';
            out += format_double(x);
        }
        out += '\n';
    }
    return out;
}

void write_records_csv(const std::vector<EpisodeRecord>& records, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw ConfigError("cannot open for writing: " + path);
    f << records_to_csv(records);
    if (!f) throw ConfigError("write failed: " + path);
}

std::string GameMetrics::to_json() const {
    nlohmann::json j;
    j["episodes"] = episodes;
    j["regret"] = regret;
    j["resets_expected"] = resets_expected;
    j["resets_realized"] = resets_realized;
    j["r_p"] = r_p;
    j["r_d_zero"] = r_d_zero;
    j["r_d_star"] = r_d_star;
    j["dual_lhs_zero"] = dual_lhs_zero;
    j["dual_lhs_star"] = dual_lhs_star;
    j["t1"] = t1;
    j["theta_norm_final"] = theta_norm_final;
    j["dual_radius"] = dual_radius;
    j["alpha"] = alpha;
    j["beta"] = beta;
    j["invariant_violations"] = invariant_violations;
    j["invariant_messages"] = invariant_messages;
    return j.dump(2);
}

std::string ReductionReport::to_json() const {
    nlohmann::json j;
    j["ok"] = ok;
    j["first_violation_k"] = first_violation_k;
    j["max_gap_regret"] = max_gap_regret;
    j["max_gap_resets"] = max_gap_resets;
    j["max_gap_comparator"] = max_gap_comparator;
    return j.dump(2);
}

std::string DualBoundReport::to_json() const {
    nlohmann::json j;
    j["ok"] = ok;
    j["first_violation_k"] = first_violation_k;
    j["max_gap"] = max_gap;
    j["bound_at_end"] = bound_at_end;
    return j.dump(2);
}

std::string ComparatorCheck::to_json() const {
    nlohmann::json j;
    j["enumerable"] = enumerable;
    j["best_reset_free_total"] = best_reset_free_total;
    j["comparator_total"] = comparator_total;
    j["gap"] = gap;
    return j.dump(2);
}

} // namespace resetfree
