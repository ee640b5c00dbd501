#ifndef ISQ_WHITTLE_HPP
#define ISQ_WHITTLE_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "isq/arm_model.hpp"

namespace isq {

/// Value iteration did not reach its residual target.
class NumericFailure : public std::runtime_error {
public:
    NumericFailure(const std::string& what, double residual)
        : std::runtime_error(what), residual_(residual) {}
    double residual() const { return residual_; }

private:
    double residual_;
};

/// D_x(lambda) keeps one sign over the whole admissible subsidy range.
class NotIndexable : public std::runtime_error {
public:
    NotIndexable(const std::string& what, int state) : std::runtime_error(what), state_(state) {}
    int state() const { return state_; }

private:
    int state_;
};

/// D_x(lambda) was seen increasing in lambda during a search.
class AuditFailure : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Single arm whose passive action earns an extra subsidy per slot.
struct SubsidizedArm {
    const ArmModel& arm;
    double subsidy = 0.0;
    double discount = 0.999;
};

/// Optimal state-action values of a subsidized arm. q(x, 0) already contains
/// the subsidy.
struct ValueFunctions {
    Matrix q;
    std::vector<double> v;
    double residual = 0.0;  // sup-norm change of v in the final sweep
    long iterations = 0;
};

inline constexpr long kMaxValueIterations = 1'000'000;

namespace detail {

/// One Bellman sweep: fills q from v, returns the sup-norm change max|T(v) - v|.
inline double bellman_sweep(const ArmModel& arm, double subsidy, double discount,
                            const std::vector<double>& v, Matrix& q, std::vector<double>& next) {
    const auto s = static_cast<std::size_t>(arm.state_count);
    double change = 0.0;
    for (std::size_t x = 0; x < s; ++x) {
        for (int a = 0; a < 2; ++a) {
            const auto row = arm.kernel(a).row(x);
            double expected = 0.0;
            for (std::size_t y = 0; y < s; ++y) {
                expected += row[y] * v[y];
            }
            const double immediate = arm.reward(x, static_cast<std::size_t>(a)) +
                                     (a == kPassive ? subsidy : 0.0);
            q(x, static_cast<std::size_t>(a)) = immediate + discount * expected;
        }
        next[x] = std::max(q(x, 0), q(x, 1));
        change = std::max(change, std::abs(next[x] - v[x]));
    }
    return change;
}

inline double sup_norm(const std::vector<double>& v) {
    double m = 0.0;
    for (const double x : v) {
        m = std::max(m, std::abs(x));
    }
    return m;
}

}  // namespace detail

/// Residual target that guarantees max|v - v*| <= tol. The second term keeps
/// the target above the rounding floor of |v|, which matters once the
/// subsidy is large.
inline double residual_target(double tol, double discount, double value_scale) {
    const double bound = tol * (1.0 - discount) / (2.0 * discount);
    const double floor = 64.0 * std::numeric_limits<double>::epsilon() * value_scale;
    return std::max(bound, floor);
}

/// Value iteration on the subsidized arm until the sweep change is below
/// residual_target(tol, ...). `warm_start`, if non-empty, seeds v.
inline ValueFunctions solve_subsidized(const SubsidizedArm& problem, double tol,
                                       const std::vector<double>& warm_start = {},
                                       long max_iterations = kMaxValueIterations) {
    if (!(tol > 0.0)) {
        throw std::invalid_argument("solve_subsidized: tol must be positive");
    }
    const double beta = problem.discount;
    if (!(beta > 0.0 && beta < 1.0)) {
        throw std::invalid_argument("solve_subsidized: discount must lie in (0,1)");
    }
    const ArmModel& arm = problem.arm;
    const auto s = static_cast<std::size_t>(arm.state_count);

    ValueFunctions out;
    out.q = Matrix(s, 2);
    out.v = warm_start.size() == s ? warm_start : std::vector<double>(s, 0.0);
    std::vector<double> next(s, 0.0);

    for (long it = 1; it <= max_iterations; ++it) {
        const double change = detail::bellman_sweep(arm, problem.subsidy, beta, out.v, out.q, next);
        out.v.swap(next);
        out.residual = change;
        out.iterations = it;
        // q was built from the previous v, and v = max_a q(x, a) holds exactly.
        if (change <= residual_target(tol, beta, detail::sup_norm(out.v))) {
            return out;
        }
    }
    throw NumericFailure("value iteration did not converge in " + std::to_string(max_iterations) +
                             " sweeps (residual " + std::to_string(out.residual) + ")",
                         out.residual);
}

/// D_x(lambda): activate now then act optimally, minus stay passive now
/// (collecting the subsidy) then act optimally.
inline double d_gap(const ArmModel& arm, double discount, double subsidy, int state, double tol,
                    const std::vector<double>& warm_start = {},
                    std::vector<double>* v_out = nullptr) {
    if (state < 0 || state >= arm.state_count) {
        throw std::invalid_argument("d_gap: state out of range");
    }
    ValueFunctions vf = solve_subsidized({arm, subsidy, discount}, tol, warm_start);
    const auto x = static_cast<std::size_t>(state);
    if (v_out != nullptr) {
        *v_out = vf.v;
    }
    return vf.q(x, kActive) - vf.q(x, kPassive);
}

/// max |R| over the reward table, times 2.
inline double reward_spread(const ArmModel& arm) {
    double m = 0.0;
    for (std::size_t x = 0; x < static_cast<std::size_t>(arm.state_count); ++x) {
        m = std::max({m, std::abs(arm.reward(x, 0)), std::abs(arm.reward(x, 1))});
    }
    return 2.0 * m;
}

/// Root of D_x(lambda) for one state.
///
/// The bracket starts at +-max(spread, 1) and doubles until D changes sign,
/// capped at +-spread/(1-beta) where a sign change is guaranteed for an
/// indexable arm. Bisection stops once |D(mid)| <= tol/2 or the bracket is
/// narrower than tol*(1-beta)/2, since |dD/dlambda| <= 1/(1-beta).
///
/// With `require_monotone`, any evaluation that contradicts a decreasing D
/// raises AuditFailure. Without it the search only relies on the sign change
/// and returns one root.
inline double whittle_index_at(const ArmModel& arm, double discount, int state, double tol,
                               bool require_monotone = true) {
    const double vi_tol = tol / 10.0;
    const double spread = reward_spread(arm);
    const double cap = std::max(spread, 1.0) / (1.0 - discount);
    // Slack for value-iteration noise when comparing D across subsidies.
    const double noise = 4.0 * vi_tol;

    std::vector<double> warm;
    double half_width = std::max(spread, 1.0);
    double lo = -half_width;
    double hi = half_width;
    double d_lo = d_gap(arm, discount, lo, state, vi_tol);
    double d_hi = d_gap(arm, discount, hi, state, vi_tol);
    while (!(d_lo >= 0.0 && d_hi <= 0.0)) {
        if (half_width >= cap) {
            throw NotIndexable("D_" + std::to_string(state) +
                                   "(lambda) does not change sign on the admissible bracket",
                               state);
        }
        half_width = std::min(2.0 * half_width, cap);
        const double new_lo = -half_width;
        const double new_hi = half_width;
        const double nd_lo = d_gap(arm, discount, new_lo, state, vi_tol);
        const double nd_hi = d_gap(arm, discount, new_hi, state, vi_tol);
        if (require_monotone && (nd_lo < d_lo - noise || nd_hi > d_hi + noise)) {
            throw AuditFailure("D_" + std::to_string(state) +
                               "(lambda) is not decreasing while widening the bracket");
        }
        lo = new_lo;
        hi = new_hi;
        d_lo = nd_lo;
        d_hi = nd_hi;
    }
    if (d_lo == 0.0) {
        return lo;
    }
    if (d_hi == 0.0) {
        return hi;
    }

    const double width_target = tol * (1.0 - discount) / 2.0;
    double mid = 0.5 * (lo + hi);
    while (true) {
        mid = 0.5 * (lo + hi);
        const double d_mid = d_gap(arm, discount, mid, state, vi_tol, warm, &warm);
        if (require_monotone && (d_mid > d_lo + noise || d_mid < d_hi - noise)) {
            throw AuditFailure("D_" + std::to_string(state) +
                               "(lambda) is not monotone inside the bisection bracket");
        }
        if (std::abs(d_mid) <= tol / 2.0 || hi - lo <= width_target) {
            return mid;
        }
        if (d_mid > 0.0) {
            lo = mid;
            d_lo = d_mid;
        } else {
            hi = mid;
            d_hi = d_mid;
        }
    }
}

/// Whittle index of every state of `arm`. See whittle_index_at for
/// `require_monotone`.
inline std::vector<double> whittle_index(const ArmModel& arm, double discount, double tol = 1e-6,
                                         bool require_monotone = true) {
    if (!(tol > 0.0)) {
        throw std::invalid_argument("whittle_index: tol must be positive");
    }
    std::vector<double> index;
    index.reserve(static_cast<std::size_t>(arm.state_count));
    for (int x = 0; x < arm.state_count; ++x) {
        index.push_back(whittle_index_at(arm, discount, x, tol, require_monotone));
    }
    return index;
}

// ---------------------------------------------------------------------------
// Strong indexability audit

enum class AuditVerdict { strongly_indexable, not_strongly_indexable, inconclusive };

inline const char* to_string(AuditVerdict v) {
    switch (v) {
        case AuditVerdict::strongly_indexable: return "strongly_indexable";
        case AuditVerdict::not_strongly_indexable: return "not_strongly_indexable";
        case AuditVerdict::inconclusive: return "inconclusive";
    }
    return "?";
}

struct IndexabilityReport {
    std::vector<double> grid;
    std::vector<std::vector<double>> d_curves;  // d_curves[x][i] = D_x(grid[i])
    AuditVerdict verdict = AuditVerdict::inconclusive;
    bool strongly_indexable = false;
    std::vector<double> whittle_index;  // empty when the index search failed
};

/// Consecutive values must drop by more than this to count as a strict decrease.
inline constexpr double kStrictDecreaseTolerance = 1e-9;

inline AuditVerdict classify_curves(const std::vector<std::vector<double>>& curves) {
    bool plateau = false;
    for (const auto& curve : curves) {
        for (std::size_t i = 1; i < curve.size(); ++i) {
            const double drop = curve[i - 1] - curve[i];
            if (drop < -kStrictDecreaseTolerance) {
                return AuditVerdict::not_strongly_indexable;
            }
            if (drop <= kStrictDecreaseTolerance) {
                plateau = true;
            }
        }
    }
    return plateau ? AuditVerdict::inconclusive : AuditVerdict::strongly_indexable;
}

/// Evaluates D_x on the grid for every state and checks strict decrease.
/// Also attempts the index search; a failure there leaves whittle_index empty.
inline IndexabilityReport audit_strong_indexability(const ArmModel& arm, double discount,
                                                    const std::vector<double>& grid,
                                                    double tol = 1e-8) {
    if (grid.size() < 3) {
        throw std::invalid_argument("audit grid needs at least 3 points");
    }
    for (std::size_t i = 1; i < grid.size(); ++i) {
        if (!(grid[i] > grid[i - 1])) {
            throw std::invalid_argument("audit grid must be strictly increasing");
        }
    }
    IndexabilityReport report;
    report.grid = grid;
    const auto s = static_cast<std::size_t>(arm.state_count);
    report.d_curves.assign(s, std::vector<double>(grid.size()));
    std::vector<double> warm;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const ValueFunctions vf = solve_subsidized({arm, grid[i], discount}, tol, warm);
        warm = vf.v;
        for (std::size_t x = 0; x < s; ++x) {
            report.d_curves[x][i] = vf.q(x, kActive) - vf.q(x, kPassive);
        }
    }
    report.verdict = classify_curves(report.d_curves);
    report.strongly_indexable = report.verdict == AuditVerdict::strongly_indexable;
    try {
        report.whittle_index = whittle_index(arm, discount);
    } catch (const NotIndexable&) {
        report.whittle_index.clear();
    } catch (const AuditFailure&) {
        report.whittle_index.clear();
    }
    return report;
}

/// Evenly spaced grid of `points` values on [lo, hi].
inline std::vector<double> linear_grid(double lo, double hi, int points) {
    if (points < 2 || !(hi > lo)) {
        throw std::invalid_argument("linear_grid: need points >= 2 and hi > lo");
    }
    std::vector<double> grid(static_cast<std::size_t>(points));
    for (int i = 0; i < points; ++i) {
        grid[static_cast<std::size_t>(i)] = lo + (hi - lo) * i / (points - 1);
    }
    return grid;
}

/// Dual function of the relaxed scheduling problem at subsidy lambda.
/// Each arm's value is averaged over a uniform initial state.
inline double lagrangian_value(const ScenarioSpec& scenario, double lambda, double tol = 1e-6) {
    const double beta = scenario.discount;
    double total = 0.0;
    for (const ArmModel& arm : scenario.arms) {
        const ValueFunctions vf = solve_subsidized({arm, lambda, beta}, tol);
        double mean = 0.0;
        for (const double v : vf.v) {
            mean += v;
        }
        total += mean / static_cast<double>(vf.v.size());
    }
    return total + lambda * static_cast<double>(scenario.budget - scenario.arm_count()) /
                       (1.0 - beta);
}

}  // namespace isq

#endif  // ISQ_WHITTLE_HPP
