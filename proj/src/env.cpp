#include "resetfree/env.hpp"

#include <cmath>
#include <cstdio>

#include <json.hpp>

namespace resetfree {

namespace {

using nlohmann::json;

constexpr double kRowSumTol = 1e-12;

std::string idx3(int h, int s, int a) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "[h=%d,s=%d,a=%d]", h, s, a);
    return buf;
}

} // namespace

std::string EnvSpec::state_label(int s) const {
    if (s == kAbsorbingId) return "<absorbing>";
    if (s >= 0 && s < static_cast<int>(state_names.size())) return state_names[s];
    return "s" + std::to_string(s);
}

std::string EnvSpec::action_label(int a) const {
    if (a >= 0 && a < static_cast<int>(action_names.size())) return action_names[a];
    return "a" + std::to_string(a);
}

void validate_structure(const EnvSpec& spec) {
    const int n = spec.num_states;
    const int m = spec.num_actions;
    const int H = spec.horizon;
    if (n <= 0 || m <= 0 || H <= 0)
        throw ContractViolation("EnvSpec: num_states, num_actions, horizon must be positive");
    const std::size_t want_t = static_cast<std::size_t>(H) * n * m * n;
    const std::size_t want_r = static_cast<std::size_t>(H) * n * m;
    if (spec.transition.size() != want_t)
        throw ContractViolation("EnvSpec: transition table has wrong size");
    if (spec.reward.size() != want_r)
        throw ContractViolation("EnvSpec: reward table has wrong size");
    if (spec.reset_state.size() != static_cast<std::size_t>(n))
        throw ContractViolation("EnvSpec: reset_state flag vector has wrong size");
    if (spec.start_dist.size() != static_cast<std::size_t>(n) ||
        spec.post_reset_dist.size() != static_cast<std::size_t>(n))
        throw ContractViolation("EnvSpec: start/post_reset distributions have wrong size");
    if (!spec.state_names.empty() && spec.state_names.size() != static_cast<std::size_t>(n))
        throw ContractViolation("EnvSpec: state_names size mismatch");
    if (!spec.action_names.empty() && spec.action_names.size() != static_cast<std::size_t>(m))
        throw ContractViolation("EnvSpec: action_names size mismatch");

    int non_reset = 0;
    for (int s = 0; s < n; ++s)
        if (!spec.is_reset(s)) ++non_reset;
    if (non_reset == 0) throw ContractViolation("EnvSpec: every state is a reset state");

    for (int h = 0; h < H; ++h) {
        for (int s = 0; s < n; ++s) {
            for (int a = 0; a < m; ++a) {
                const double r = spec.raw_reward(h, s, a);
                if (!(r >= 0.0 && r <= 1.0))
                    throw ContractViolation("EnvSpec: reward outside [0,1] at " + idx3(h, s, a));
                double row = 0.0;
                for (int s2 = 0; s2 < n; ++s2) {
                    const double p = spec.prob(h, s, a, s2);
                    if (!(p >= 0.0))
                        throw ContractViolation("EnvSpec: negative transition probability at " + idx3(h, s, a));
                    row += p;
                }
                if (std::fabs(row - 1.0) > kRowSumTol)
                    throw ContractViolation("EnvSpec: transition row does not sum to 1 at " + idx3(h, s, a));
            }
        }
    }

    for (const auto* dist : {&spec.start_dist, &spec.post_reset_dist}) {
        const char* which = (dist == &spec.start_dist) ? "start_dist" : "post_reset_dist";
        double total = 0.0;
        for (int s = 0; s < n; ++s) {
            const double p = (*dist)[s];
            if (!(p >= 0.0))
                throw ContractViolation(std::string("EnvSpec: negative mass in ") + which);
            if (p > 0.0 && spec.is_reset(s))
                throw ContractViolation(std::string("EnvSpec: ") + which + " places mass on reset state " +
                                        spec.state_label(s));
            total += p;
        }
        if (std::fabs(total - 1.0) > kRowSumTol)
            throw ContractViolation(std::string("EnvSpec: ") + which + " does not sum to 1");
    }
}

EnvState begin_episode(const EnvSpec& spec, const std::optional<EpisodeOutcome>& prev, Rng& rng) {
    if (!prev.has_value()) return EnvState{rng.categorical(spec.start_dist), 1};
    if (prev->reset_occurred) return EnvState{rng.categorical(spec.post_reset_dist), 1};
    const int s = prev->final_state_id;
    if (s == kAbsorbingId || s < 0 || s >= spec.num_states)
        throw ContractViolation("begin_episode: carried-over state id out of range");
    if (spec.is_reset(s))
        throw ContractViolation("begin_episode: carried-over state is a reset state but reset_occurred is false");
    return EnvState{s, 1};
}

Transition step(const EnvSpec& spec, const EnvState& state, int action, Rng& rng) {
    if (state.step < 1 || state.step > spec.horizon)
        throw ContractViolation("step: step index outside episode horizon");
    if (action < 0 || action >= spec.num_actions)
        throw ContractViolation("step: action out of range");
    if (state.absorbing())
        return Transition{EnvState{kAbsorbingId, state.step + 1}, 0.0, 0.0};
    if (state.id < 0 || state.id >= spec.num_states)
        throw ContractViolation("step: state id out of range");
    if (spec.is_reset(state.id))
        return Transition{EnvState{kAbsorbingId, state.step + 1}, 0.0, 1.0};

    std::vector<double> row(spec.num_states);
    for (int s2 = 0; s2 < spec.num_states; ++s2)
        row[s2] = spec.prob(state.step - 1, state.id, action, s2);
    const int s2 = rng.categorical(row);
    return Transition{EnvState{s2, state.step + 1},
                      spec.effective_reward(state.step - 1, state.id, action), 0.0};
}

std::string spec_to_json(const EnvSpec& spec) {
    json j;
    j["num_states"] = spec.num_states;
    j["num_actions"] = spec.num_actions;
    j["horizon"] = spec.horizon;

    json trans = json::array();
    for (int h = 0; h < spec.horizon; ++h) {
        json by_s = json::array();
        for (int s = 0; s < spec.num_states; ++s) {
            json by_a = json::array();
            for (int a = 0; a < spec.num_actions; ++a) {
                json row = json::array();
                for (int s2 = 0; s2 < spec.num_states; ++s2) row.push_back(spec.prob(h, s, a, s2));
                by_a.push_back(std::move(row));
            }
            by_s.push_back(std::move(by_a));
        }
        trans.push_back(std::move(by_s));
    }
    j["transition"] = std::move(trans);

    json rew = json::array();
    for (int h = 0; h < spec.horizon; ++h) {
        json by_s = json::array();
        for (int s = 0; s < spec.num_states; ++s) {
            json by_a = json::array();
            for (int a = 0; a < spec.num_actions; ++a) by_a.push_back(spec.raw_reward(h, s, a));
            by_s.push_back(std::move(by_a));
        }
        rew.push_back(std::move(by_s));
    }
    j["reward"] = std::move(rew);

    json resets = json::array();
    for (int s = 0; s < spec.num_states; ++s)
        if (spec.is_reset(s)) resets.push_back(s);
    j["reset_states"] = std::move(resets);
    j["start_dist"] = spec.start_dist;
    j["post_reset_dist"] = spec.post_reset_dist;
    if (!spec.state_names.empty()) j["state_names"] = spec.state_names;
    if (!spec.action_names.empty()) j["action_names"] = spec.action_names;
    return j.dump(2);
}

EnvSpec spec_from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("EnvSpec JSON parse error: ") + e.what());
    }
    EnvSpec spec;
    try {
        spec.num_states = j.at("num_states").get<int>();
        spec.num_actions = j.at("num_actions").get<int>();
        spec.horizon = j.at("horizon").get<int>();
        if (spec.num_states <= 0 || spec.num_actions <= 0 || spec.horizon <= 0)
            throw ConfigError("EnvSpec JSON: dimensions must be positive");

        const auto& trans = j.at("transition");
        const auto& rew = j.at("reward");
        spec.transition.assign(static_cast<std::size_t>(spec.horizon) * spec.num_states * spec.num_actions *
                                   spec.num_states,
                               0.0);
        spec.reward.assign(static_cast<std::size_t>(spec.horizon) * spec.num_states * spec.num_actions, 0.0);
        for (int h = 0; h < spec.horizon; ++h) {
            for (int s = 0; s < spec.num_states; ++s) {
                for (int a = 0; a < spec.num_actions; ++a) {
                    spec.raw_reward(h, s, a) = rew.at(h).at(s).at(a).get<double>();
                    const auto& row = trans.at(h).at(s).at(a);
                    if (static_cast<int>(row.size()) != spec.num_states)
                        throw ConfigError("EnvSpec JSON: transition row length mismatch at " + idx3(h, s, a));
                    for (int s2 = 0; s2 < spec.num_states; ++s2)
                        spec.prob(h, s, a, s2) = row.at(s2).get<double>();
                }
            }
        }
        spec.reset_state.assign(spec.num_states, 0);
        for (const auto& v : j.at("reset_states")) {
            const int s = v.get<int>();
            if (s < 0 || s >= spec.num_states) throw ConfigError("EnvSpec JSON: reset state id out of range");
            spec.reset_state[s] = 1;
        }
        spec.start_dist = j.at("start_dist").get<std::vector<double>>();
        spec.post_reset_dist = j.at("post_reset_dist").get<std::vector<double>>();
        if (j.contains("state_names")) spec.state_names = j.at("state_names").get<std::vector<std::string>>();
        if (j.contains("action_names")) spec.action_names = j.at("action_names").get<std::vector<std::string>>();
    } catch (const json::exception& e) {
        throw ConfigError(std::string("EnvSpec JSON: missing or mistyped field: ") + e.what());
    }
    try {
        validate_structure(spec);
    } catch (const ContractViolation& e) {
        throw ConfigError(std::string("EnvSpec JSON failed validation: ") + e.what());
    }
    return spec;
}

} // namespace resetfree
