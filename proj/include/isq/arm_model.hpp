#ifndef ISQ_ARM_MODEL_HPP
#define ISQ_ARM_MODEL_HPP

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "isq/rng.hpp"

namespace isq {

inline constexpr int kPassive = 0;
inline constexpr int kActive = 1;

/// Dense row-major matrix of doubles.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    Matrix(std::initializer_list<std::initializer_list<double>> rows) {
        rows_ = rows.size();
        cols_ = rows_ == 0 ? 0 : rows.begin()->size();
        data_.reserve(rows_ * cols_);
        for (const auto& row : rows) {
            if (row.size() != cols_) {
                throw std::invalid_argument("Matrix: ragged initializer");
            }
            data_.insert(data_.end(), row.begin(), row.end());
        }
    }

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }

    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    std::span<const double> row(std::size_t r) const {
        return {data_.data() + r * cols_, cols_};
    }

    friend bool operator==(const Matrix&, const Matrix&) = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

/// One target's finite two-action MDP.
///
/// Entry (q, v) of a kernel is P(next = v | current = q, action). The reward
/// table is S x 2, indexed by (state, action).
struct ArmModel {
    int state_count = 0;
    Matrix kernel_passive;
    Matrix kernel_active;
    Matrix reward;

    const Matrix& kernel(int action) const {
        return action == kActive ? kernel_active : kernel_passive;
    }

    friend bool operator==(const ArmModel&, const ArmModel&) = default;
};

enum class MetricKind { time_average, discounted_cumulative };

inline const char* to_string(MetricKind kind) {
    return kind == MetricKind::time_average ? "time_average" : "discounted_cumulative";
}

struct ScenarioSpec {
    std::vector<ArmModel> arms;
    int budget = 0;
    double discount = 0.999;
    MetricKind metric_kind = MetricKind::time_average;

    int arm_count() const { return static_cast<int>(arms.size()); }

    friend bool operator==(const ScenarioSpec&, const ScenarioSpec&) = default;
};

// ---------------------------------------------------------------------------
// Validation

enum class ViolationKind { shape, range, row_sum, reward };

struct Violation {
    ViolationKind kind;
    std::string matrix;  // "kernel_passive", "kernel_active", "reward" or "state_count"
    int row = -1;
    std::string message;
};

inline constexpr double kRowSumTolerance = 1e-9;

/// First violated invariant of the arm, or nullopt if the arm is well formed.
inline std::optional<Violation> validate(const ArmModel& arm) {
    const int s = arm.state_count;
    if (s < 2) {
        return Violation{ViolationKind::shape, "state_count", -1,
                         "state_count must be at least 2, got " + std::to_string(s)};
    }
    const auto n = static_cast<std::size_t>(s);
    auto check_kernel = [n, s](const char* name, const Matrix& k) -> std::optional<Violation> {
        if (k.rows() != n || k.cols() != n) {
            return Violation{ViolationKind::shape, name, -1,
                             std::string(name) + " must be " + std::to_string(s) + "x" +
                                 std::to_string(s)};
        }
        for (std::size_t r = 0; r < n; ++r) {
            double sum = 0.0;
            for (const double p : k.row(r)) {
                if (!(p >= 0.0 && p <= 1.0)) {
                    return Violation{ViolationKind::range, name, static_cast<int>(r),
                                     std::string(name) + " row " + std::to_string(r) +
                                         " has entry outside [0,1]"};
                }
                sum += p;
            }
            if (std::abs(sum - 1.0) > kRowSumTolerance) {
                return Violation{ViolationKind::row_sum, name, static_cast<int>(r),
                                 std::string(name) + " row " + std::to_string(r) +
                                     " sums to " + std::to_string(sum)};
            }
        }
        return std::nullopt;
    };
    if (auto v = check_kernel("kernel_passive", arm.kernel_passive)) {
        return v;
    }
    if (auto v = check_kernel("kernel_active", arm.kernel_active)) {
        return v;
    }
    if (arm.reward.rows() != n || arm.reward.cols() != 2) {
        return Violation{ViolationKind::shape, "reward", -1,
                         "reward must be " + std::to_string(s) + "x2"};
    }
    for (std::size_t r = 0; r < n; ++r) {
        if (!std::isfinite(arm.reward(r, 0)) || !std::isfinite(arm.reward(r, 1))) {
            return Violation{ViolationKind::reward, "reward", static_cast<int>(r),
                             "reward row " + std::to_string(r) + " is not finite"};
        }
    }
    return std::nullopt;
}

/// Throws std::invalid_argument on the first problem found in the scenario.
inline void check_scenario(const ScenarioSpec& scenario) {
    const int n = scenario.arm_count();
    if (n < 2) {
        throw std::invalid_argument("scenario needs at least 2 arms");
    }
    if (scenario.budget <= 0 || scenario.budget >= n) {
        throw std::invalid_argument("budget must satisfy 0 < K < N (K=" +
                                    std::to_string(scenario.budget) +
                                    ", N=" + std::to_string(n) + ")");
    }
    if (!(scenario.discount > 0.0 && scenario.discount < 1.0)) {
        throw std::invalid_argument("discount must lie in (0,1)");
    }
    for (int i = 0; i < n; ++i) {
        if (auto v = validate(scenario.arms[static_cast<std::size_t>(i)])) {
            throw std::invalid_argument("arm " + std::to_string(i) + ": " + v->message);
        }
    }
}

// ---------------------------------------------------------------------------
// Presets

namespace detail {

inline void check_preset_args(int n_arms, int budget, double discount) {
    if (n_arms < 2) {
        throw std::invalid_argument("n_arms must be at least 2");
    }
    if (budget <= 0 || budget >= n_arms) {
        throw std::invalid_argument("budget must satisfy 0 < budget < n_arms");
    }
    if (!(discount > 0.0 && discount < 1.0)) {
        throw std::invalid_argument("discount must lie in (0,1)");
    }
}

/// Rewards shared by both target presets: rows are states CV, CA, CT, NT.
inline Matrix target_reward() {
    return Matrix{{0.5, 2.0}, {0.3, 1.5}, {0.1, 1.0}, {0.0, -1.0}};
}

}  // namespace detail

inline ArmModel circulant_arm() {
    return ArmModel{
        4,
        Matrix{{0.5, 0.0, 0.0, 0.5}, {0.5, 0.5, 0.0, 0.0}, {0.0, 0.5, 0.5, 0.0}, {0.0, 0.0, 0.5, 0.5}},
        Matrix{{0.5, 0.5, 0.0, 0.0}, {0.0, 0.5, 0.5, 0.0}, {0.0, 0.0, 0.5, 0.5}, {0.5, 0.0, 0.0, 0.5}},
        Matrix{{-1.0, -1.0}, {0.0, 0.0}, {0.0, 0.0}, {1.0, 1.0}},
    };
}

/// Smart target with CV/CA/CT/NT modes. Active tracking pushes the target
/// toward maneuvering; passive tracking lets it relax back toward CV.
inline ArmModel homogeneous_target_arm() {
    return ArmModel{
        4,
        Matrix{{0.8, 0.2, 0.0, 0.0}, {0.3, 0.7, 0.0, 0.0}, {0.0, 0.3, 0.7, 0.0}, {0.4, 0.0, 0.0, 0.6}},
        Matrix{{0.3, 0.7, 0.0, 0.0}, {0.0, 0.3, 0.7, 0.0}, {0.0, 0.0, 0.3, 0.7}, {0.3, 0.0, 0.0, 0.7}},
        detail::target_reward(),
    };
}

/// Circulant benchmark; reported as a time-averaged reward. The discount is
/// only used by learners and the index oracle.
inline ScenarioSpec make_circulant_scenario(int n_arms, int budget, double discount = 0.999) {
    detail::check_preset_args(n_arms, budget, discount);
    return ScenarioSpec{std::vector<ArmModel>(static_cast<std::size_t>(n_arms), circulant_arm()),
                        budget, discount, MetricKind::time_average};
}

inline ScenarioSpec make_homogeneous_target_scenario(int n_arms, int budget, double discount) {
    detail::check_preset_args(n_arms, budget, discount);
    return ScenarioSpec{
        std::vector<ArmModel>(static_cast<std::size_t>(n_arms), homogeneous_target_arm()), budget,
        discount, MetricKind::discounted_cumulative};
}

/// Random smart target that keeps the sparsity of the homogeneous kernels.
///
/// Active rows 0-2 stay with probability U[0.2,0.5] and otherwise escalate
/// one mode. Passive rows 1-2 relax one mode with probability U[0.2,0.5],
/// passive row 0 stays in CV with probability U[0.6,0.9]. Row 3 of both
/// kernels escapes NT to CV with probability U[0.2,0.5]. Draw order: active
/// rows 0..3, then passive rows 0..3.
inline ArmModel random_target_arm(Rng& rng) {
    Matrix active(4, 4);
    for (std::size_t r = 0; r < 3; ++r) {
        const double stay = uniform_real(rng, 0.2, 0.5);
        active(r, r) = stay;
        active(r, r + 1) = 1.0 - stay;
    }
    {
        const double escape = uniform_real(rng, 0.2, 0.5);
        active(3, 0) = escape;
        active(3, 3) = 1.0 - escape;
    }

    Matrix passive(4, 4);
    {
        const double stay = uniform_real(rng, 0.6, 0.9);
        passive(0, 0) = stay;
        passive(0, 1) = 1.0 - stay;
    }
    for (std::size_t r = 1; r < 3; ++r) {
        const double down = uniform_real(rng, 0.2, 0.5);
        passive(r, r - 1) = down;
        passive(r, r) = 1.0 - down;
    }
    {
        const double escape = uniform_real(rng, 0.2, 0.5);
        passive(3, 0) = escape;
        passive(3, 3) = 1.0 - escape;
    }
    return ArmModel{4, std::move(passive), std::move(active), detail::target_reward()};
}

inline ScenarioSpec make_heterogeneous_target_scenario(int n_arms, int budget, double discount,
                                                       std::uint64_t rng_seed) {
    detail::check_preset_args(n_arms, budget, discount);
    Rng rng(rng_seed);
    std::vector<ArmModel> arms;
    arms.reserve(static_cast<std::size_t>(n_arms));
    for (int i = 0; i < n_arms; ++i) {
        arms.push_back(random_target_arm(rng));
    }
    return ScenarioSpec{std::move(arms), budget, discount, MetricKind::discounted_cumulative};
}

}  // namespace isq

#endif  // ISQ_ARM_MODEL_HPP
