#ifndef ISQ_POLICIES_HPP
#define ISQ_POLICIES_HPP

#include <algorithm>
#include <array>
#include <cstdint>
#include <functional>
#include <map>
#include <mutex>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "isq/arm_model.hpp"
#include "isq/env_sim.hpp"
#include "isq/rng.hpp"
#include "isq/whittle.hpp"

namespace isq {

/// Learned state-action values, one S x 2 table per arm.
class QTable {
public:
    QTable() = default;

    /// Starts every arm at its own reward table.
    explicit QTable(const ScenarioSpec& scenario) {
        values_.reserve(scenario.arms.size());
        for (const ArmModel& arm : scenario.arms) {
            values_.push_back(arm.reward);
        }
    }

    double& operator()(int arm, int state, int action) {
        return values_[static_cast<std::size_t>(arm)](static_cast<std::size_t>(state),
                                                      static_cast<std::size_t>(action));
    }
    double operator()(int arm, int state, int action) const {
        return values_[static_cast<std::size_t>(arm)](static_cast<std::size_t>(state),
                                                      static_cast<std::size_t>(action));
    }

    double best(int arm, int state) const {
        return std::max((*this)(arm, state, kPassive), (*this)(arm, state, kActive));
    }

    int arm_count() const { return static_cast<int>(values_.size()); }
    int state_count(int arm) const {
        return static_cast<int>(values_[static_cast<std::size_t>(arm)].rows());
    }
    const Matrix& arm_table(int arm) const { return values_[static_cast<std::size_t>(arm)]; }

    friend bool operator==(const QTable&, const QTable&) = default;

private:
    std::vector<Matrix> values_;
};

/// Learned per-state indices, one vector per arm. Starts at zero.
class IndexTable {
public:
    IndexTable() = default;
    explicit IndexTable(const ScenarioSpec& scenario) {
        values_.reserve(scenario.arms.size());
        for (const ArmModel& arm : scenario.arms) {
            values_.emplace_back(static_cast<std::size_t>(arm.state_count), 0.0);
        }
    }

    double operator()(int arm, int state) const {
        return values_[static_cast<std::size_t>(arm)][static_cast<std::size_t>(state)];
    }

    /// index(arm, state) = Q(state, 1) - Q(state, 0).
    void refresh(const QTable& q, int arm, int state) {
        values_[static_cast<std::size_t>(arm)][static_cast<std::size_t>(state)] =
            q(arm, state, kActive) - q(arm, state, kPassive);
    }

    /// Index of every arm at its current state.
    std::vector<double> at(const JointState& state) const {
        std::vector<double> out(values_.size());
        for (std::size_t n = 0; n < values_.size(); ++n) {
            out[n] = values_[n][static_cast<std::size_t>(state.states[n])];
        }
        return out;
    }

    const std::vector<double>& arm_indices(int arm) const {
        return values_[static_cast<std::size_t>(arm)];
    }

    friend bool operator==(const IndexTable&, const IndexTable&) = default;

private:
    std::vector<std::vector<double>> values_;
};

/// Visit counts per (arm, state, action).
class VisitCounter {
public:
    VisitCounter() = default;
    explicit VisitCounter(const ScenarioSpec& scenario) {
        counts_.reserve(scenario.arms.size());
        for (const ArmModel& arm : scenario.arms) {
            counts_.emplace_back(static_cast<std::size_t>(arm.state_count),
                                 std::array<std::int64_t, 2>{0, 0});
        }
    }

    std::int64_t operator()(int arm, int state, int action) const {
        return counts_[static_cast<std::size_t>(arm)][static_cast<std::size_t>(state)]
                      [static_cast<std::size_t>(action)];
    }
    void increment(int arm, int state, int action) {
        ++counts_[static_cast<std::size_t>(arm)][static_cast<std::size_t>(state)]
                 [static_cast<std::size_t>(action)];
    }

private:
    std::vector<std::vector<std::array<std::int64_t, 2>>> counts_;
};

/// One observed slot of one arm.
struct Transition {
    int state = 0;
    int action = 0;
    double reward = 0.0;
    int next_state = 0;
    friend bool operator==(const Transition&, const Transition&) = default;
};

/// Thrown when an operation runs on incomplete episode memory.
class InvalidState : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

/// Per-arm transitions of the current episode, in time order.
class EpisodeMemory {
public:
    EpisodeMemory(int arm_count, int episode_length)
        : length_(episode_length), tuples_(static_cast<std::size_t>(arm_count)) {
        for (auto& t : tuples_) {
            t.reserve(static_cast<std::size_t>(episode_length));
        }
    }

    void record(int arm, const Transition& tr) {
        auto& list = tuples_[static_cast<std::size_t>(arm)];
        if (static_cast<int>(list.size()) >= length_) {
            throw InvalidState("episode memory is already full");
        }
        list.push_back(tr);
    }

    void clear() {
        for (auto& t : tuples_) {
            t.clear();
        }
    }

    bool complete() const {
        return std::all_of(tuples_.begin(), tuples_.end(), [this](const auto& t) {
            return static_cast<int>(t.size()) == length_;
        });
    }

    const std::vector<Transition>& of(int arm) const { return tuples_[static_cast<std::size_t>(arm)]; }
    int length() const { return length_; }
    int arm_count() const { return static_cast<int>(tuples_.size()); }

private:
    int length_;
    std::vector<std::vector<Transition>> tuples_;
};

struct IsqConfig {
    int episodes = 200;         // J
    int episode_length = 100;   // T
    double discount = 0.999;
    double backward_rate = 0.1;
    double epsilon_constant = 5.0;
    double epsilon_scale = 1.0;

    std::int64_t horizon() const {
        return static_cast<std::int64_t>(episodes) * episode_length;
    }

    void check() const {
        if (episodes < 1 || episode_length < 1) {
            throw std::invalid_argument("episodes and episode_length must be positive");
        }
        if (!(discount > 0.0 && discount < 1.0)) {
            throw std::invalid_argument("discount must lie in (0,1)");
        }
        if (!(backward_rate > 0.0 && backward_rate < 1.0)) {
            throw std::invalid_argument("backward_rate must lie in (0,1)");
        }
        if (!(epsilon_constant > 0.0) || !(epsilon_scale > 0.0)) {
            throw std::invalid_argument("epsilon_constant and epsilon_scale must be positive");
        }
    }
};

// ---------------------------------------------------------------------------
// Exploration and selection

/// scale * e / (e + t), clamped to (0, 1].
inline double epsilon_decay(double e, double scale, std::int64_t t) {
    return std::min(1.0, scale * e / (e + static_cast<double>(t)));
}

inline double epsilon_schedule(const IsqConfig& config, std::int64_t t) {
    return epsilon_decay(config.epsilon_constant, config.epsilon_scale, t);
}

/// Activates the k arms with the largest priority. Ties go to the lower arm id.
inline JointAction top_k(std::span<const double> priority, int k) {
    const int n = static_cast<int>(priority.size());
    std::vector<int> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    std::partial_sort(order.begin(), order.begin() + k, order.end(), [&](int a, int b) {
        const double pa = priority[static_cast<std::size_t>(a)];
        const double pb = priority[static_cast<std::size_t>(b)];
        return pa > pb || (pa == pb && a < b);
    });
    JointAction action{std::vector<int>(static_cast<std::size_t>(n), kPassive)};
    for (int i = 0; i < k; ++i) {
        action.actions[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])] = kActive;
    }
    return action;
}

/// Epsilon-greedy top-k. Always consumes one uniform to decide between
/// exploring and exploiting; exploring then draws k arms without replacement.
inline JointAction select_actions(std::span<const double> current_indices, int k, double epsilon,
                                  Rng& rng) {
    const int n = static_cast<int>(current_indices.size());
    if (k <= 0 || k >= n) {
        throw std::invalid_argument("select_actions: need 0 < k < N");
    }
    if (uniform01(rng) < epsilon) {
        std::vector<int> arms(static_cast<std::size_t>(n));
        std::iota(arms.begin(), arms.end(), 0);
        JointAction action{std::vector<int>(static_cast<std::size_t>(n), kPassive)};
        for (int i = 0; i < k; ++i) {
            const auto j = static_cast<std::size_t>(i) +
                           static_cast<std::size_t>(uniform_below(rng, static_cast<std::uint64_t>(n - i)));
            std::swap(arms[static_cast<std::size_t>(i)], arms[j]);
            action.actions[static_cast<std::size_t>(arms[static_cast<std::size_t>(i)])] = kActive;
        }
        return action;
    }
    return top_k(current_indices, k);
}

// ---------------------------------------------------------------------------
// Learning updates

/// 1 / (visits so far + 1): the k-th visit of a pair learns at rate 1/k.
inline double visit_rate(std::int64_t visits_before) {
    return 1.0 / (static_cast<double>(visits_before) + 1.0);
}

/// Forward Sarsa step for one arm. The target bootstraps on the action
/// already chosen for the next slot.
inline void sarsa_forward_update(QTable& q, VisitCounter& visits, IndexTable& index, int arm,
                                 const Transition& tr, int next_action, double discount) {
    const double alpha = visit_rate(visits(arm, tr.state, tr.action));
    visits.increment(arm, tr.state, tr.action);
    double& cell = q(arm, tr.state, tr.action);
    const double target = tr.reward + discount * q(arm, tr.next_state, next_action);
    cell = (1.0 - alpha) * cell + alpha * target;
    index.refresh(q, arm, tr.state);
}

/// One Q-learning step at an explicit rate.
inline void q_learning_update(QTable& q, IndexTable& index, int arm, const Transition& tr,
                              double alpha, double discount) {
    double& cell = q(arm, tr.state, tr.action);
    const double target = tr.reward + discount * q.best(arm, tr.next_state);
    cell = (1.0 - alpha) * cell + alpha * target;
    index.refresh(q, arm, tr.state);
}

/// Replays one arm's episode from the last slot to the first with a constant
/// rate.
inline void backward_pass(QTable& q, IndexTable& index, const EpisodeMemory& memory, int arm,
                          double backward_rate, double discount) {
    const auto& tuples = memory.of(arm);
    if (static_cast<int>(tuples.size()) != memory.length()) {
        throw InvalidState("backward pass needs a complete episode (" +
                           std::to_string(tuples.size()) + " of " +
                           std::to_string(memory.length()) + " slots recorded)");
    }
    for (auto it = tuples.rbegin(); it != tuples.rend(); ++it) {
        q_learning_update(q, index, arm, *it, backward_rate, discount);
    }
}

inline void backward_pass(QTable& q, IndexTable& index, const EpisodeMemory& memory,
                          double backward_rate, double discount) {
    if (!memory.complete()) {
        throw InvalidState("backward pass needs a complete episode");
    }
    for (int n = 0; n < memory.arm_count(); ++n) {
        backward_pass(q, index, memory, n, backward_rate, discount);
    }
}

// ---------------------------------------------------------------------------
// Trials

struct LearnerSnapshot {
    std::int64_t slot = 0;  // global slot at which the snapshot was taken
    QTable q;
    IndexTable index;
};

struct TrialResult {
    std::string policy;
    std::uint64_t seed = 0;
    std::vector<double> slot_reward;
    std::vector<double> metric;
    double final_metric = 0.0;
    std::vector<LearnerSnapshot> snapshots;
};

/// Optional observation points for tests and diagnostics.
struct TrialHooks {
    std::function<void(std::int64_t t, const JointAction&)> on_action;
    /// Called after every table update with the arm and the state touched.
    std::function<void(const QTable&, const IndexTable&, int arm, int state)> on_update;
    /// Record tables after every ISQ episode.
    bool snapshot_episodes = false;
};

namespace detail {

inline void record_slot(TrialResult& result, const ScenarioSpec& scenario, std::int64_t t,
                        double slot_reward) {
    const double previous = result.metric.empty() ? 0.0 : result.metric.back();
    result.slot_reward.push_back(slot_reward);
    result.metric.push_back(
        accumulate_metric(scenario.metric_kind, previous, slot_reward, t, scenario.discount));
}

inline void finish(TrialResult& result) {
    result.final_metric = result.metric.empty() ? 0.0 : result.metric.back();
}

}  // namespace detail

/// Index policy learned by forward Sarsa within episodes and a backward
/// Q-learning sweep over each finished episode.
///
/// Per slot: act, observe rewards and next states, choose the next actions
/// epsilon-greedily on the current indices, record the transition, then run
/// the Sarsa step per arm. States restart uniformly at every episode; the
/// slot clock used for epsilon and the metric never resets.
inline TrialResult run_isq(const ScenarioSpec& scenario, const IsqConfig& config, Rng& rng,
                           const TrialHooks& hooks = {}) {
    check_scenario(scenario);
    config.check();
    const int n = scenario.arm_count();
    const int k = scenario.budget;

    QTable q(scenario);
    IndexTable index(scenario);
    VisitCounter visits(scenario);
    EpisodeMemory memory(n, config.episode_length);

    TrialResult result;
    result.policy = "ISQ";
    result.slot_reward.reserve(static_cast<std::size_t>(config.horizon()));
    result.metric.reserve(static_cast<std::size_t>(config.horizon()));

    std::int64_t t = 0;
    for (int episode = 0; episode < config.episodes; ++episode) {
        memory.clear();
        JointState state = sample_initial_state(scenario, rng);
        JointAction action = select_actions(index.at(state), k, epsilon_schedule(config, t), rng);

        for (int slot = 0; slot < config.episode_length; ++slot, ++t) {
            if (hooks.on_action) {
                hooks.on_action(t, action);
            }
            StepOutcome out = step(scenario, state, action, rng);
            detail::record_slot(result, scenario, t, out.total_reward);

            JointAction next_action = select_actions(index.at(out.next_state), k,
                                                     epsilon_schedule(config, t + 1), rng);
            for (int arm = 0; arm < n; ++arm) {
                const auto a = static_cast<std::size_t>(arm);
                const Transition tr{state.states[a], action.actions[a], out.rewards[a],
                                    out.next_state.states[a]};
                memory.record(arm, tr);
                sarsa_forward_update(q, visits, index, arm, tr, next_action.actions[a],
                                     config.discount);
                if (hooks.on_update) {
                    hooks.on_update(q, index, arm, tr.state);
                }
            }
            state = std::move(out.next_state);
            action = std::move(next_action);
        }

        for (int arm = 0; arm < n; ++arm) {
            const auto& tuples = memory.of(arm);
            if (!hooks.on_update) {
                backward_pass(q, index, memory, arm, config.backward_rate, config.discount);
                continue;
            }
            for (auto it = tuples.rbegin(); it != tuples.rend(); ++it) {
                q_learning_update(q, index, arm, *it, config.backward_rate, config.discount);
                hooks.on_update(q, index, arm, it->state);
            }
        }
        if (hooks.snapshot_episodes) {
            result.snapshots.push_back({t, q, index});
        }
    }
    detail::finish(result);
    return result;
}

/// Q-difference index learned by per-slot Q-learning with 1/(visits+1)
/// rates, explored with epsilon = N / (N + t). Every arm learns from its own
/// transition each slot.
inline TrialResult run_wiql(const ScenarioSpec& scenario, std::int64_t horizon, Rng& rng,
                            const TrialHooks& hooks = {}) {
    check_scenario(scenario);
    if (horizon < 1) {
        throw std::invalid_argument("horizon must be at least 1");
    }
    const int n = scenario.arm_count();
    QTable q(scenario);
    IndexTable index(scenario);
    VisitCounter visits(scenario);

    TrialResult result;
    result.policy = "WIQL";
    result.slot_reward.reserve(static_cast<std::size_t>(horizon));
    result.metric.reserve(static_cast<std::size_t>(horizon));

    JointState state = sample_initial_state(scenario, rng);
    for (std::int64_t t = 0; t < horizon; ++t) {
        const JointAction action = select_actions(index.at(state), scenario.budget,
                                                  epsilon_decay(n, 1.0, t), rng);
        if (hooks.on_action) {
            hooks.on_action(t, action);
        }
        StepOutcome out = step(scenario, state, action, rng);
        detail::record_slot(result, scenario, t, out.total_reward);
        for (int arm = 0; arm < n; ++arm) {
            const auto a = static_cast<std::size_t>(arm);
            const Transition tr{state.states[a], action.actions[a], out.rewards[a],
                                out.next_state.states[a]};
            const double alpha = visit_rate(visits(arm, tr.state, tr.action));
            visits.increment(arm, tr.state, tr.action);
            q_learning_update(q, index, arm, tr, alpha, scenario.discount);
            if (hooks.on_update) {
                hooks.on_update(q, index, arm, tr.state);
            }
        }
        state = std::move(out.next_state);
    }
    detail::finish(result);
    return result;
}

namespace detail {

inline TrialResult run_priority_policy(const ScenarioSpec& scenario, std::int64_t horizon,
                                       Rng& rng, const TrialHooks& hooks, std::string name,
                                       const std::vector<std::vector<double>>& priority) {
    FixedPolicy policy = [&](const JointState& state, std::int64_t t) {
        std::vector<double> current(state.states.size());
        for (std::size_t arm = 0; arm < current.size(); ++arm) {
            current[arm] = priority[arm][static_cast<std::size_t>(state.states[arm])];
        }
        JointAction action = top_k(current, scenario.budget);
        if (hooks.on_action) {
            hooks.on_action(t, action);
        }
        return action;
    };
    Trajectory traj = rollout_fixed_policy(scenario, policy, horizon, rng);
    TrialResult result;
    result.policy = std::move(name);
    result.slot_reward = std::move(traj.slot_reward);
    result.metric = std::move(traj.metric);
    finish(result);
    return result;
}

}  // namespace detail

/// Myopic baseline: activates the arms with the largest immediate reward gain
/// R(x,1) - R(x,0).
inline TrialResult run_greedy(const ScenarioSpec& scenario, std::int64_t horizon, Rng& rng,
                              const TrialHooks& hooks = {}) {
    check_scenario(scenario);
    std::vector<std::vector<double>> gain;
    gain.reserve(scenario.arms.size());
    for (const ArmModel& arm : scenario.arms) {
        std::vector<double> g(static_cast<std::size_t>(arm.state_count));
        for (std::size_t x = 0; x < g.size(); ++x) {
            g[x] = arm.reward(x, kActive) - arm.reward(x, kPassive);
        }
        gain.push_back(std::move(g));
    }
    return detail::run_priority_policy(scenario, horizon, rng, hooks, "Greedy", gain);
}

/// Computes and caches exact Whittle indices per distinct (arm, discount).
/// Safe to share between threads. A non-strict solver accepts arms whose D
/// curves are not monotone as long as each state has a sign change.
class WhittleSolver {
public:
    explicit WhittleSolver(double tol = 1e-6, bool strict = true) : tol_(tol), strict_(strict) {}

    WhittleSolver(const WhittleSolver& other) : tol_(other.tol_), strict_(other.strict_) {}

    std::vector<double> indices(const ArmModel& arm, double discount) const {
        {
            std::lock_guard lock(mutex_);
            for (const auto& entry : cache_) {
                if (entry.discount == discount && entry.arm == arm) {
                    return entry.index;
                }
            }
        }
        std::vector<double> index = whittle_index(arm, discount, tol_, strict_);
        std::lock_guard lock(mutex_);
        cache_.push_back({arm, discount, index});
        return index;
    }

    double tolerance() const { return tol_; }
    bool strict() const { return strict_; }

private:
    struct Entry {
        ArmModel arm;
        double discount;
        std::vector<double> index;
    };
    double tol_;
    bool strict_;
    mutable std::mutex mutex_;
    mutable std::vector<Entry> cache_;
};

/// Activates the arms with the largest exact Whittle index at their current
/// state. No exploration.
inline TrialResult run_wi_oracle(const ScenarioSpec& scenario, std::int64_t horizon, Rng& rng,
                                 const WhittleSolver& solver, const TrialHooks& hooks = {}) {
    check_scenario(scenario);
    std::vector<std::vector<double>> index;
    index.reserve(scenario.arms.size());
    for (const ArmModel& arm : scenario.arms) {
        index.push_back(solver.indices(arm, scenario.discount));
    }
    return detail::run_priority_policy(scenario, horizon, rng, hooks, "WI", index);
}

}  // namespace isq

#endif  // ISQ_POLICIES_HPP
