#ifndef ISQ_ENV_SIM_HPP
#define ISQ_ENV_SIM_HPP

#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "isq/arm_model.hpp"
#include "isq/rng.hpp"

namespace isq {

/// Current mode of every arm.
struct JointState {
    std::vector<int> states;
    friend bool operator==(const JointState&, const JointState&) = default;
};

/// Per-arm action; exactly `budget` entries are kActive.
struct JointAction {
    std::vector<int> actions;
    friend bool operator==(const JointAction&, const JointAction&) = default;
};

struct StepOutcome {
    JointState next_state;
    std::vector<double> rewards;
    double total_reward = 0.0;
};

/// Reward series of one run. `metric[t]` is the scenario metric after slot t.
struct Trajectory {
    std::vector<double> slot_reward;
    std::vector<double> metric;
};

inline int count_active(const JointAction& action) {
    int active = 0;
    for (const int a : action.actions) {
        active += a == kActive ? 1 : 0;
    }
    return active;
}

inline void check_budget(const ScenarioSpec& scenario, const JointAction& action) {
    if (action.actions.size() != scenario.arms.size()) {
        throw std::invalid_argument("joint action has wrong length");
    }
    const int active = count_active(action);
    if (active != scenario.budget) {
        throw std::invalid_argument("joint action activates " + std::to_string(active) +
                                    " arms, budget is " + std::to_string(scenario.budget));
    }
}

/// Inverse-CDF draw from one kernel row.
inline int sample_row(std::span<const double> row, Rng& rng) {
    const double u = uniform01(rng);
    double cumulative = 0.0;
    int last_positive = 0;
    for (std::size_t v = 0; v < row.size(); ++v) {
        if (row[v] > 0.0) {
            cumulative += row[v];
            last_positive = static_cast<int>(v);
            if (u < cumulative) {
                return last_positive;
            }
        }
    }
    // Row sums can fall short of 1 by rounding.
    return last_positive;
}

/// Advance every arm one slot. Arms consume the stream in index order, one
/// uniform each.
inline StepOutcome step(const ScenarioSpec& scenario, const JointState& state,
                        const JointAction& action, Rng& rng) {
    check_budget(scenario, action);
    const std::size_t n = scenario.arms.size();
    if (state.states.size() != n) {
        throw std::invalid_argument("joint state has wrong length");
    }
    StepOutcome out;
    out.next_state.states.resize(n);
    out.rewards.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const ArmModel& arm = scenario.arms[i];
        const int x = state.states[i];
        const int a = action.actions[i];
        if (x < 0 || x >= arm.state_count) {
            throw std::invalid_argument("state of arm " + std::to_string(i) + " out of range");
        }
        out.rewards[i] = arm.reward(static_cast<std::size_t>(x), static_cast<std::size_t>(a));
        out.total_reward += out.rewards[i];
        out.next_state.states[i] = sample_row(arm.kernel(a).row(static_cast<std::size_t>(x)), rng);
    }
    return out;
}

inline JointState sample_initial_state(const ScenarioSpec& scenario, Rng& rng) {
    JointState s;
    s.states.reserve(scenario.arms.size());
    for (const ArmModel& arm : scenario.arms) {
        s.states.push_back(
            static_cast<int>(uniform_below(rng, static_cast<std::uint64_t>(arm.state_count))));
    }
    return s;
}

/// Fold one slot into the running metric. `t` is the global slot index.
inline double accumulate_metric(MetricKind kind, double running, double slot_reward,
                                std::int64_t t, double discount) {
    if (kind == MetricKind::discounted_cumulative) {
        return running + std::pow(discount, static_cast<double>(t)) * slot_reward;
    }
    return running + (slot_reward - running) / static_cast<double>(t + 1);
}

/// Maps the observed joint state at global slot t to a joint action.
using FixedPolicy = std::function<JointAction(const JointState&, std::int64_t)>;

/// Runs a non-learning policy for `horizon` slots from a uniform random start.
/// If `steps` is given, every outcome is appended to it.
inline Trajectory rollout_fixed_policy(const ScenarioSpec& scenario, const FixedPolicy& policy,
                                       std::int64_t horizon, Rng& rng,
                                       std::vector<StepOutcome>* steps = nullptr) {
    if (horizon < 1) {
        throw std::invalid_argument("horizon must be at least 1");
    }
    Trajectory traj;
    traj.slot_reward.reserve(static_cast<std::size_t>(horizon));
    traj.metric.reserve(static_cast<std::size_t>(horizon));
    JointState state = sample_initial_state(scenario, rng);
    double running = 0.0;
    for (std::int64_t t = 0; t < horizon; ++t) {
        StepOutcome out = step(scenario, state, policy(state, t), rng);
        running = accumulate_metric(scenario.metric_kind, running, out.total_reward, t,
                                    scenario.discount);
        traj.slot_reward.push_back(out.total_reward);
        traj.metric.push_back(running);
        state = out.next_state;
        if (steps != nullptr) {
            steps->push_back(std::move(out));
        }
    }
    return traj;
}

}  // namespace isq

#endif  // ISQ_ENV_SIM_HPP
