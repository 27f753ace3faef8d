#include "resetfree/builders.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "resetfree/oracle.hpp"
#include "resetfree/rng.hpp"

namespace resetfree {

EnvSpec make_gridworld(const GridworldParams& p) {
    if (p.width <= 0 || p.height <= 0) throw ContractViolation("make_gridworld: empty grid");
    if (p.horizon <= 0) throw ContractViolation("make_gridworld: horizon must be positive");
    if (!(p.slip_prob >= 0.0 && p.slip_prob <= 1.0))
        throw ContractViolation("make_gridworld: slip_prob outside [0,1]");
    auto in_grid = [&](int r, int c) { return r >= 0 && r < p.height && c >= 0 && c < p.width; };
    if (!in_grid(p.goal.first, p.goal.second)) throw ContractViolation("make_gridworld: goal off the grid");

    const int n = p.width * p.height;
    const int m = 4;
    auto cell = [&](int r, int c) { return r * p.width + c; };

    EnvSpec spec;
    spec.num_states = n;
    spec.num_actions = m;
    spec.horizon = p.horizon;
    spec.reset_state.assign(n, 0);
    for (const auto& [r, c] : p.traps) {
        if (!in_grid(r, c)) throw ContractViolation("make_gridworld: trap off the grid");
        spec.reset_state[cell(r, c)] = 1;
    }
    if (spec.is_reset(cell(p.goal.first, p.goal.second)))
        throw ContractViolation("make_gridworld: goal cell is a trap");

    spec.transition.assign(static_cast<std::size_t>(p.horizon) * n * m * n, 0.0);
    spec.reward.assign(static_cast<std::size_t>(p.horizon) * n * m, 0.0);

    // dr/dc per action, plus the two perpendicular slip directions.
    static const int dr[4] = {-1, 1, 0, 0};
    static const int dc[4] = {0, 0, -1, 1};
    static const int perp[4][2] = {{2, 3}, {2, 3}, {0, 1}, {0, 1}};

    const int goal_id = cell(p.goal.first, p.goal.second);
    std::vector<double> row(n);
    for (int s = 0; s < n; ++s) {
        const int r = s / p.width;
        const int c = s % p.width;
        for (int a = 0; a < m; ++a) {
            std::fill(row.begin(), row.end(), 0.0);
            auto land = [&](int dir, double prob) {
                const int rr = r + dr[dir];
                const int cc = c + dc[dir];
                row[in_grid(rr, cc) ? cell(rr, cc) : s] += prob;
            };
            land(a, 1.0 - p.slip_prob);
            land(perp[a][0], p.slip_prob / 2.0);
            land(perp[a][1], p.slip_prob / 2.0);
            for (int h = 0; h < p.horizon; ++h) {
                for (int s2 = 0; s2 < n; ++s2) spec.prob(h, s, a, s2) = row[s2];
                spec.raw_reward(h, s, a) = (s == goal_id) ? 1.0 : 0.0;
            }
        }
    }

    int non_trap = 0;
    for (int s = 0; s < n; ++s)
        if (!spec.is_reset(s)) ++non_trap;
    if (non_trap == 0) throw ContractViolation("make_gridworld: every cell is a trap");
    spec.start_dist.assign(n, 0.0);
    for (int s = 0; s < n; ++s)
        if (!spec.is_reset(s)) spec.start_dist[s] = 1.0 / non_trap;
    spec.post_reset_dist = spec.start_dist;

    spec.state_names.reserve(n);
    for (int s = 0; s < n; ++s)
        spec.state_names.push_back("(" + std::to_string(s / p.width) + "," + std::to_string(s % p.width) + ")");
    spec.action_names = {"up", "down", "left", "right"};

    validate_structure(spec);
    certify_feasible(spec, /*check_closure=*/true);
    return spec;
}

RandomTabularResult make_random_tabular(const RandomTabularParams& p) {
    if (p.num_states < 2 || p.num_actions < 2)
        throw ContractViolation("make_random_tabular: need at least 2 states and 2 actions");
    if (p.horizon <= 0) throw ContractViolation("make_random_tabular: horizon must be positive");
    if (!(p.reset_fraction >= 0.0 && p.reset_fraction < 1.0))
        throw ContractViolation("make_random_tabular: reset_fraction outside [0,1)");
    if (!(p.min_prob >= 0.0 && p.min_prob < 1.0))
        throw ContractViolation("make_random_tabular: min_prob outside [0,1)");

    const int n = p.num_states;
    const int m = p.num_actions;
    int num_resets = static_cast<int>(std::floor(p.reset_fraction * n));
    num_resets = std::min(num_resets, n - 1);

    const int attempts = (num_resets == 0) ? 1 : p.attempt_budget;
    if (attempts <= 0)
        throw GenerationFailure("make_random_tabular: attempt budget exhausted before any attempt");

    for (int attempt = 0; attempt < attempts; ++attempt) {
        Rng rng = Rng(p.seed).substream(0x7ab0000 + static_cast<std::uint64_t>(attempt));

        EnvSpec spec;
        spec.num_states = n;
        spec.num_actions = m;
        spec.horizon = p.horizon;
        spec.reset_state.assign(n, 0);
        // Partial Fisher-Yates for a uniform reset subset.
        std::vector<int> ids(n);
        for (int i = 0; i < n; ++i) ids[i] = i;
        for (int i = 0; i < num_resets; ++i) {
            const int j = i + static_cast<int>(rng.next_u64() % static_cast<std::uint64_t>(n - i));
            std::swap(ids[i], ids[j]);
            spec.reset_state[ids[i]] = 1;
        }

        spec.transition.assign(static_cast<std::size_t>(p.horizon) * n * m * n, 0.0);
        spec.reward.assign(static_cast<std::size_t>(p.horizon) * n * m, 0.0);
        // Sparse rows: dense supports would touch every reset state with
        // positive probability from everywhere, leaving nothing feasible.
        const int max_support = std::min(p.support_size_max, n);
        std::vector<int> pool(n);
        std::vector<double> row(n);
        for (int h = 0; h < p.horizon; ++h) {
            for (int s = 0; s < n; ++s) {
                for (int a = 0; a < m; ++a) {
                    const int size = 1 + static_cast<int>(rng.next_u64() %
                                                          static_cast<std::uint64_t>(max_support));
                    for (int i = 0; i < n; ++i) pool[i] = i;
                    std::fill(row.begin(), row.end(), 0.0);
                    // Dirichlet(1) weights on a uniform support, then prune
                    // near-zero entries to keep branching probabilities
                    // bounded away from zero.
                    double total = 0.0;
                    int argmax = -1;
                    for (int i = 0; i < size; ++i) {
                        const int j = i + static_cast<int>(rng.next_u64() %
                                                           static_cast<std::uint64_t>(n - i));
                        std::swap(pool[i], pool[j]);
                        const int s2 = pool[i];
                        row[s2] = -std::log(std::max(rng.uniform(), 1e-300));
                        total += row[s2];
                        if (argmax < 0 || row[s2] > row[argmax]) argmax = s2;
                    }
                    double kept = 0.0;
                    for (int s2 = 0; s2 < n; ++s2) {
                        row[s2] /= total;
                        if (row[s2] < p.min_prob) row[s2] = 0.0;
                        kept += row[s2];
                    }
                    if (kept <= 0.0) {
                        row[argmax] = 1.0;
                        kept = 1.0;
                    }
                    for (int s2 = 0; s2 < n; ++s2) spec.prob(h, s, a, s2) = row[s2] / kept;
                }
            }
        }
        for (int h = 0; h < p.horizon; ++h)
            for (int s = 0; s < n; ++s)
                for (int a = 0; a < m; ++a) spec.raw_reward(h, s, a) = rng.uniform();

        // Start support: non-reset states that admit a reset-free policy.
        const ValueTables cost_opt = min_cost_dp(spec);
        std::vector<int> support;
        for (int s = 0; s < n; ++s)
            if (!spec.is_reset(s) && cost_opt.value(1, s) <= 1e-12) support.push_back(s);
        if (support.empty()) continue;
        spec.start_dist.assign(n, 0.0);
        for (int s : support) spec.start_dist[s] = 1.0 / static_cast<double>(support.size());
        spec.post_reset_dist = spec.start_dist;

        validate_structure(spec);
        try {
            certify_feasible(spec, /*check_closure=*/true);
        } catch (const InfeasibleEnvironment&) {
            continue;
        }
        return RandomTabularResult{std::move(spec), attempt};
    }
    throw GenerationFailure("make_random_tabular: no feasible instance within " + std::to_string(attempts) +
                            " attempts (seed " + std::to_string(p.seed) + ")");
}

} // namespace resetfree
