#include "resetfree/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <json.hpp>

namespace resetfree {

namespace {

constexpr double kFeasTol = 1e-12;

enum class Mode { MinAction, MaxAction, MaxRestricted, PolicyWeighted };

// Per-step payoff of acting from real state s at layer h0 (0-based).
double local_payoff(const EnvSpec& spec, Objective obj, double y, const ActionSets* restricted, int h0, int s,
                    int a) {
    switch (obj) {
    case Objective::Reward:
        return spec.effective_reward(h0, s, a);
    case Objective::Cost:
        return spec.step_cost(s);
    case Objective::Lagrangian:
        return spec.effective_reward(h0, s, a) - y * spec.step_cost(s);
    case Objective::RestrictedViolation:
        return restricted->allowed(h0 + 1, s, a) ? 0.0 : 1.0;
    }
    return 0.0;
}

// Shared backward induction.  Fills tables and, in MaxRestricted mode, the
// greedy policy (smallest-action-id tie break).
ValueTables backward_induction(const EnvSpec& spec, Objective obj, double y, Mode mode,
                               const PolicyTable* policy, const ActionSets* restricted,
                               DeterministicPolicy* argmax_out) {
    const int n = spec.num_states;
    const int m = spec.num_actions;
    const int H = spec.horizon;
    const int naug = n + 1;

    ValueTables t;
    t.horizon = H;
    t.num_states = n;
    t.num_actions = m;
    t.objective = obj;
    t.lagrangian_y = y;
    t.v.assign(static_cast<std::size_t>(H + 1) * naug, 0.0);
    t.q.assign(static_cast<std::size_t>(H) * naug * m, 0.0);

    if (argmax_out) {
        argmax_out->horizon = H;
        argmax_out->num_states = n;
        argmax_out->action.assign(static_cast<std::size_t>(H) * n, 0);
    }

    for (int h = H; h >= 1; --h) {
        const int h0 = h - 1;
        const double* v_next = &t.v[static_cast<std::size_t>(h) * naug];
        for (int s = 0; s < n; ++s) {
            double* qrow = &t.q[(static_cast<std::size_t>(h0) * naug + s) * m];
            if (spec.is_reset(s)) {
                // Forced transition to the absorbing state, whose value is 0.
                for (int a = 0; a < m; ++a) qrow[a] = local_payoff(spec, obj, y, restricted, h0, s, a);
            } else {
                for (int a = 0; a < m; ++a) {
                    double cont = 0.0;
                    for (int s2 = 0; s2 < n; ++s2) cont += spec.prob(h0, s, a, s2) * v_next[s2];
                    qrow[a] = local_payoff(spec, obj, y, restricted, h0, s, a) + cont;
                }
            }

            double val = 0.0;
            switch (mode) {
            case Mode::MinAction: {
                val = qrow[0];
                for (int a = 1; a < m; ++a) val = std::min(val, qrow[a]);
                break;
            }
            case Mode::MaxAction: {
                val = qrow[0];
                for (int a = 1; a < m; ++a) val = std::max(val, qrow[a]);
                break;
            }
            case Mode::MaxRestricted: {
                int best = -1;
                for (int a = 0; a < m; ++a) {
                    if (!restricted->allowed(h, s, a)) continue;
                    if (best < 0 || qrow[a] > qrow[best]) best = a;
                }
                if (best < 0) throw ContractViolation("backward_induction: empty restricted action set");
                val = qrow[best];
                if (argmax_out) argmax_out->at_ref(h, s) = best;
                break;
            }
            case Mode::PolicyWeighted: {
                for (int a = 0; a < m; ++a) val += policy->prob(h, s, a) * qrow[a];
                break;
            }
            }
            t.value_ref(h, s) = val;
        }
        // Absorbing state: zero payoff, self loop; q and v rows stay 0.
    }
    return t;
}

double max_raw_reward(const EnvSpec& spec) {
    double r = 0.0;
    for (double x : spec.reward) r = std::max(r, x);
    return r;
}

struct LambdaContext {
    const ValueTables* cost_opt;
    const ValueTables* restricted_opt; // reward tables of pi_star
};

double lambda_hat_impl(const EnvSpec& spec, int state, const LambdaSearch& search, const LambdaContext& ctx) {
    if (state < 0 || state >= spec.num_states) throw ContractViolation("lambda_hat: state id out of range");
    if (ctx.cost_opt->value(1, state) > kFeasTol)
        throw ContractViolation("lambda_hat: state " + spec.state_label(state) +
                                " is not reset-free feasible; the multiplier threshold is undefined there");

    const double plateau = ctx.restricted_opt->value(1, state);
    const double slack = search.value_slack;
    auto reached = [&](double y) { return best_response_dp(spec, y).value(1, state) <= plateau + slack; };

    if (reached(0.0)) return 0.0;
    double y_max = search.y_max > 0.0 ? search.y_max : 10.0 * spec.horizon * (1.0 + max_raw_reward(spec));
    if (!reached(y_max)) {
        const double g_end = best_response_dp(spec, y_max).value(1, state);
        throw SearchBoundError("lambda_hat: scalarised optimum still " + std::to_string(g_end - plateau) +
                               " above the reset-free optimum at y_max=" + std::to_string(y_max) +
                               " for state " + spec.state_label(state) + "; increase y_max");
    }
    double lo = 0.0, hi = y_max;
    while (hi - lo > search.tol) {
        const double mid = 0.5 * (lo + hi);
        if (reached(mid))
            hi = mid;
        else
            lo = mid;
    }
    return hi;
}

void sample_stochastic_policy(PolicyTable& pi, Rng& rng) {
    std::vector<double> w(pi.num_actions);
    for (int h = 1; h <= pi.horizon; ++h) {
        for (int s = 0; s < pi.num_states; ++s) {
            double total = 0.0;
            for (int a = 0; a < pi.num_actions; ++a) {
                const double u = std::max(rng.uniform(), 1e-300);
                w[a] = -std::log(u);
                total += w[a];
            }
            for (int a = 0; a < pi.num_actions; ++a) pi.prob_ref(h, s, a) = w[a] / total;
        }
    }
}

} // namespace

PolicyTable PolicyTable::uniform(int horizon, int num_states, int num_actions) {
    PolicyTable pi;
    pi.horizon = horizon;
    pi.num_states = num_states;
    pi.num_actions = num_actions;
    pi.probs.assign(static_cast<std::size_t>(horizon) * num_states * num_actions, 1.0 / num_actions);
    return pi;
}

PolicyTable DeterministicPolicy::as_table(int num_actions) const {
    PolicyTable pi;
    pi.horizon = horizon;
    pi.num_states = num_states;
    pi.num_actions = num_actions;
    pi.probs.assign(static_cast<std::size_t>(horizon) * num_states * num_actions, 0.0);
    for (int h = 1; h <= horizon; ++h)
        for (int s = 0; s < num_states; ++s) pi.prob_ref(h, s, at(h, s)) = 1.0;
    return pi;
}

ValueTables min_cost_dp(const EnvSpec& spec) {
    return backward_induction(spec, Objective::Cost, 0.0, Mode::MinAction, nullptr, nullptr, nullptr);
}

ActionSets restricted_actions(const EnvSpec& spec, const ValueTables& cost_opt, double eps_tie) {
    if (spec.num_actions > 32) throw ContractViolation("restricted_actions: more than 32 actions unsupported");
    ActionSets sets;
    sets.horizon = spec.horizon;
    sets.num_states = spec.num_states;
    sets.num_actions = spec.num_actions;
    sets.mask.assign(static_cast<std::size_t>(spec.horizon) * spec.num_states, 0);
    for (int h = 1; h <= spec.horizon; ++h) {
        for (int s = 0; s < spec.num_states; ++s) {
            std::uint32_t m = 0;
            const double v = cost_opt.value(h, s);
            for (int a = 0; a < spec.num_actions; ++a)
                if (cost_opt.action_value(h, s, a) <= v + eps_tie) m |= (1u << a);
            if (m == 0) throw NumericError("restricted_actions: produced an empty action set");
            sets.mask_ref(h, s) = m;
        }
    }
    return sets;
}

DeterministicPolicy optimal_reset_free_policy(const EnvSpec& spec, const ActionSets& restricted) {
    DeterministicPolicy pi;
    backward_induction(spec, Objective::Reward, 0.0, Mode::MaxRestricted, nullptr, &restricted, &pi);
    return pi;
}

ValueTables evaluate_policy(const EnvSpec& spec, const PolicyTable& policy, Objective objective,
                            double lagrangian_y, const ActionSets* restricted) {
    if (policy.horizon != spec.horizon || policy.num_states != spec.num_states ||
        policy.num_actions != spec.num_actions)
        throw ContractViolation("evaluate_policy: policy shape does not match spec");
    if (objective == Objective::RestrictedViolation && restricted == nullptr)
        throw ContractViolation("evaluate_policy: RestrictedViolation needs action sets");
    for (std::size_t i = 0; i < policy.probs.size(); ++i)
        if (!(policy.probs[i] >= 0.0))
            throw ContractViolation("evaluate_policy: negative action probability");
    return backward_induction(spec, objective, lagrangian_y, Mode::PolicyWeighted, &policy, restricted, nullptr);
}

ValueTables best_response_dp(const EnvSpec& spec, double y) {
    return backward_induction(spec, Objective::Lagrangian, y, Mode::MaxAction, nullptr, nullptr, nullptr);
}

double lambda_hat(const EnvSpec& spec, int state, const LambdaSearch& search) {
    const ValueTables cost_opt = min_cost_dp(spec);
    const ActionSets restricted = restricted_actions(spec, cost_opt);
    DeterministicPolicy pi;
    const ValueTables opt =
        backward_induction(spec, Objective::Reward, 0.0, Mode::MaxRestricted, nullptr, &restricted, &pi);
    return lambda_hat_impl(spec, state, search, LambdaContext{&cost_opt, &opt});
}

double SaddlePoint::theta_star_norm() const {
    double ss = 0.0;
    for (std::size_t s = 0; s < lambda_hat.size(); ++s)
        if (feasible[s]) ss += (lambda_hat[s] + 1.0) * (lambda_hat[s] + 1.0);
    return std::sqrt(ss);
}

SaddlePoint build_saddle_point(const EnvSpec& spec, const LambdaSearch& search) {
    SaddlePoint sp;
    sp.cost_opt = min_cost_dp(spec);
    sp.restricted = restricted_actions(spec, sp.cost_opt);
    sp.pi_star_reward = backward_induction(spec, Objective::Reward, 0.0, Mode::MaxRestricted, nullptr,
                                           &sp.restricted, &sp.pi_star);
    sp.pi_star_cost = evaluate_policy(spec, sp.pi_star.as_table(spec.num_actions), Objective::Cost);
    sp.lambda_hat.assign(spec.num_states, std::numeric_limits<double>::quiet_NaN());
    sp.feasible.assign(spec.num_states, 0);
    const LambdaContext ctx{&sp.cost_opt, &sp.pi_star_reward};
    for (int s = 0; s < spec.num_states; ++s) {
        if (sp.cost_opt.value(1, s) <= kFeasTol) {
            sp.feasible[s] = 1;
            sp.lambda_hat[s] = lambda_hat_impl(spec, s, search, ctx);
        }
    }
    return sp;
}

std::vector<int> feasible_start_closure(const EnvSpec& spec) {
    const int n = spec.num_states;
    const int H = spec.horizon;
    std::vector<std::uint8_t> in_set(n, 0);
    std::vector<int> queue;
    auto push = [&](int s) {
        if (!in_set[s]) {
            in_set[s] = 1;
            queue.push_back(s);
        }
    };
    for (int s = 0; s < n; ++s)
        if (spec.start_dist[s] > 0.0 || spec.post_reset_dist[s] > 0.0) push(s);

    std::vector<std::uint8_t> cur(n), nxt(n);
    for (std::size_t qi = 0; qi < queue.size(); ++qi) {
        const int s0 = queue[qi];
        std::fill(cur.begin(), cur.end(), 0);
        cur[s0] = 1;
        // Occupancy support at positions 2..H; reset states do not propagate
        // (their successor is absorbing and never re-enters the chain).
        for (int t = 0; t < H - 1; ++t) {
            std::fill(nxt.begin(), nxt.end(), 0);
            for (int s = 0; s < n; ++s) {
                if (!cur[s] || spec.is_reset(s)) continue;
                for (int a = 0; a < spec.num_actions; ++a)
                    for (int s2 = 0; s2 < n; ++s2)
                        if (spec.prob(t, s, a, s2) > 0.0) nxt[s2] = 1;
            }
            cur.swap(nxt);
        }
        for (int s = 0; s < n; ++s)
            if (cur[s] && !spec.is_reset(s)) push(s);
    }
    std::vector<int> out;
    for (int s = 0; s < n; ++s)
        if (in_set[s]) out.push_back(s);
    return out;
}

void certify_feasible(const EnvSpec& spec, bool check_closure) {
    const ValueTables cost_opt = min_cost_dp(spec);
    auto require = [&](int s, const char* where) {
        const double v = cost_opt.value(1, s);
        if (v > kFeasTol)
            throw InfeasibleEnvironment(
                "environment is not reset-free feasible: every policy starting from " + spec.state_label(s) +
                " (" + where + ") resets with probability at least " + std::to_string(v) +
                "; the learning reduction requires a zero-reset policy from every possible initial state");
    };
    for (int s = 0; s < spec.num_states; ++s) {
        if (spec.start_dist[s] > 0.0) require(s, "start support");
        if (spec.post_reset_dist[s] > 0.0) require(s, "post-reset support");
    }
    if (check_closure)
        for (int s : feasible_start_closure(spec)) require(s, "carry-over closure");
}

SaddleCertification certify_saddle_point(const EnvSpec& spec, const SaddlePoint& saddle, int num_samples,
                                         std::uint64_t seed) {
    if (num_samples <= 0) throw ContractViolation("certify_saddle_point: num_samples must be positive");
    SaddleCertification cert;
    cert.num_samples = num_samples;

    std::vector<int> starts;
    double lam_cap = 1.0;
    for (int s = 0; s < spec.num_states; ++s) {
        if (saddle.feasible[s]) {
            starts.push_back(s);
            lam_cap = std::max(lam_cap, saddle.lambda_hat[s] + 1.0);
        }
    }
    cert.feasible_starts = static_cast<int>(starts.size());
    if (starts.empty()) throw ContractViolation("certify_saddle_point: no feasible start states");
    lam_cap *= 2.0;

    Rng rng = Rng(seed).substream(0x5add1e);
    PolicyTable pi = PolicyTable::uniform(spec.horizon, spec.num_states, spec.num_actions);
    std::vector<double> lam(spec.num_states);

    auto consider = [&](double violation, double& slot, int s, int sample, const char* name) {
        if (violation > slot) slot = violation;
        if (violation > cert.max_violation) {
            cert.max_violation = violation;
            cert.worst_start = s;
            cert.worst_sample = sample;
            cert.worst_inequality = name;
        }
    };

    for (int i = 0; i < num_samples; ++i) {
        sample_stochastic_policy(pi, rng);
        for (int s = 0; s < spec.num_states; ++s) lam[s] = rng.uniform() * lam_cap;
        const ValueTables vr = evaluate_policy(spec, pi, Objective::Reward);
        const ValueTables vc = evaluate_policy(spec, pi, Objective::Cost);
        for (int s : starts) {
            const double vr_star = saddle.pi_star_reward.value(1, s);
            const double vc_star = saddle.pi_star_cost.value(1, s);
            const double lh = saddle.lambda_hat[s];
            const double ls = saddle.lambda_star(s);
            // Multiplier side: the saddle multiplier minimises L(pi*, .).
            consider((vr_star - lh * vc_star) - (vr_star - lam[s] * vc_star),
                     cert.max_violation_multiplier_side_hat, s, i, "L(pi*,lambda) >= L(pi*,lambda_hat)");
            consider((vr_star - ls * vc_star) - (vr_star - lam[s] * vc_star),
                     cert.max_violation_multiplier_side_star, s, i, "L(pi*,lambda) >= L(pi*,lambda_star)");
            // Policy side: pi* maximises L(., fixed multiplier).
            consider((vr.value(1, s) - lh * vc.value(1, s)) - (vr_star - lh * vc_star),
                     cert.max_violation_policy_side_hat, s, i, "L(pi*,lambda_hat) >= L(pi,lambda_hat)");
            consider((vr.value(1, s) - ls * vc.value(1, s)) - (vr_star - ls * vc_star),
                     cert.max_violation_policy_side_star, s, i, "L(pi*,lambda_star) >= L(pi,lambda_star)");
        }
    }
    cert.max_violation = std::max(cert.max_violation, 0.0);
    return cert;
}

std::optional<std::uint64_t> deterministic_policy_count(const EnvSpec& spec, std::uint64_t cutoff) {
    std::uint64_t count = 1;
    const std::uint64_t slots = static_cast<std::uint64_t>(spec.horizon) * spec.num_states;
    for (std::uint64_t i = 0; i < slots; ++i) {
        if (count > cutoff / static_cast<std::uint64_t>(spec.num_actions)) {
            if (count * static_cast<std::uint64_t>(spec.num_actions) > cutoff) return std::nullopt;
        }
        count *= static_cast<std::uint64_t>(spec.num_actions);
    }
    return count;
}

void for_each_deterministic_policy(
    const EnvSpec& spec, const ActionSets& restricted, std::uint64_t cutoff,
    const std::function<void(const std::vector<double>&, const std::vector<double>&,
                             const std::vector<double>&)>& fn) {
    const auto count = deterministic_policy_count(spec, cutoff);
    if (!count.has_value())
        throw ContractViolation("for_each_deterministic_policy: policy count exceeds cutoff");
    const int n = spec.num_states;
    const int m = spec.num_actions;
    const int H = spec.horizon;
    const int slots = H * n;

    std::vector<int> assign(slots, 0); // [(h-1)*n + s]
    // v layers over augmented states for the three objectives; absorbing kept 0.
    std::vector<double> vr((H + 1) * (n + 1), 0.0), vc(vr), vm(vr);
    std::vector<double> out_r(n), out_c(n), out_m(n);

    for (std::uint64_t pi = 0; pi < *count; ++pi) {
        for (int h = H; h >= 1; --h) {
            const int h0 = h - 1;
            const double* vr_next = &vr[static_cast<std::size_t>(h) * (n + 1)];
            const double* vc_next = &vc[static_cast<std::size_t>(h) * (n + 1)];
            const double* vm_next = &vm[static_cast<std::size_t>(h) * (n + 1)];
            for (int s = 0; s < n; ++s) {
                const int a = assign[h0 * n + s];
                const std::size_t at = static_cast<std::size_t>(h0) * (n + 1) + s;
                if (spec.is_reset(s)) {
                    vr[at] = 0.0;
                    vc[at] = 1.0;
                    vm[at] = restricted.allowed(h, s, a) ? 0.0 : 1.0;
                    continue;
                }
                double cr = 0.0, cc = 0.0, cm = 0.0;
                for (int s2 = 0; s2 < n; ++s2) {
                    const double p = spec.prob(h0, s, a, s2);
                    cr += p * vr_next[s2];
                    cc += p * vc_next[s2];
                    cm += p * vm_next[s2];
                }
                vr[at] = spec.effective_reward(h0, s, a) + cr;
                vc[at] = cc;
                vm[at] = (restricted.allowed(h, s, a) ? 0.0 : 1.0) + cm;
            }
        }
        for (int s = 0; s < n; ++s) {
            out_r[s] = vr[s];
            out_c[s] = vc[s];
            out_m[s] = vm[s];
        }
        fn(out_r, out_c, out_m);

        int slot = 0;
        while (slot < slots) {
            if (++assign[slot] < m) break;
            assign[slot] = 0;
            ++slot;
        }
        if (slot == slots) break;
    }
}

EquivalenceCertification certify_restricted_equivalence(const EnvSpec& spec, const SaddlePoint& saddle,
                                                        int num_policies, std::uint64_t seed,
                                                        std::uint64_t enumeration_cutoff, double tol) {
    EquivalenceCertification cert;
    std::vector<int> starts;
    for (int s = 0; s < spec.num_states; ++s)
        if (saddle.feasible[s]) starts.push_back(s);
    cert.feasible_starts = static_cast<int>(starts.size());

    auto check = [&](const std::vector<double>& cost_v1, const std::vector<double>& viol_v1) {
        for (int s : starts) {
            const bool inside = viol_v1[s] <= tol;
            const bool costfree = cost_v1[s] <= tol;
            if (inside != costfree) {
                ++cert.counterexamples;
                if (inside) cert.max_cost_when_inside = std::max(cert.max_cost_when_inside, cost_v1[s]);
                else cert.max_violation_when_costfree = std::max(cert.max_violation_when_costfree, viol_v1[s]);
            }
        }
    };

    if (deterministic_policy_count(spec, enumeration_cutoff).has_value()) {
        cert.exhaustive = true;
        for_each_deterministic_policy(spec, saddle.restricted, enumeration_cutoff,
                                      [&](const std::vector<double>&, const std::vector<double>& c,
                                          const std::vector<double>& m) {
                                          ++cert.policies_checked;
                                          check(c, m);
                                      });
    } else {
        if (num_policies <= 0)
            throw ContractViolation("certify_restricted_equivalence: num_policies must be positive");
        Rng rng = Rng(seed).substream(0x0e917a1e);
        PolicyTable pi = PolicyTable::uniform(spec.horizon, spec.num_states, spec.num_actions);
        for (int i = 0; i < num_policies; ++i) {
            sample_stochastic_policy(pi, rng);
            const ValueTables vc = evaluate_policy(spec, pi, Objective::Cost);
            const ValueTables vm =
                evaluate_policy(spec, pi, Objective::RestrictedViolation, 0.0, &saddle.restricted);
            std::vector<double> c(spec.num_states), m(spec.num_states);
            for (int s = 0; s < spec.num_states; ++s) {
                c[s] = vc.value(1, s);
                m[s] = vm.value(1, s);
            }
            ++cert.policies_checked;
            check(c, m);
        }
    }
    return cert;
}

std::string SaddleCertification::to_json() const {
    nlohmann::json j;
    j["num_samples"] = num_samples;
    j["feasible_starts"] = feasible_starts;
    j["max_violation"] = max_violation;
    j["max_violation_multiplier_side_hat"] = max_violation_multiplier_side_hat;
    j["max_violation_policy_side_hat"] = max_violation_policy_side_hat;
    j["max_violation_multiplier_side_star"] = max_violation_multiplier_side_star;
    j["max_violation_policy_side_star"] = max_violation_policy_side_star;
    j["worst_start"] = worst_start;
    j["worst_sample"] = worst_sample;
    j["worst_inequality"] = worst_inequality;
    return j.dump(2);
}

std::string EquivalenceCertification::to_json() const {
    nlohmann::json j;
    j["exhaustive"] = exhaustive;
    j["policies_checked"] = policies_checked;
    j["feasible_starts"] = feasible_starts;
    j["counterexamples"] = counterexamples;
    j["max_cost_when_inside"] = max_cost_when_inside;
    j["max_violation_when_costfree"] = max_violation_when_costfree;
    return j.dump(2);
}

} // namespace resetfree
