#ifndef ISQ_SCENARIO_IO_HPP
#define ISQ_SCENARIO_IO_HPP

#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "isq/arm_model.hpp"

namespace isq {

using Json = nlohmann::json;

/// Malformed or inconsistent configuration. `field()` is a JSON-path-like
/// name of the offending entry, e.g. "arms[2].kernel_active".
class ConfigError : public std::runtime_error {
public:
    ConfigError(std::string field, const std::string& message)
        : std::runtime_error(field + ": " + message), field_(std::move(field)) {}
    const std::string& field() const { return field_; }

private:
    std::string field_;
};

class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline Json matrix_to_json(const Matrix& m) {
    Json rows = Json::array();
    for (std::size_t r = 0; r < m.rows(); ++r) {
        rows.push_back(Json(std::vector<double>(m.row(r).begin(), m.row(r).end())));
    }
    return rows;
}

inline Matrix matrix_from_json(const Json& j, const std::string& field) {
    if (!j.is_array() || j.empty()) {
        throw ConfigError(field, "expected a non-empty array of rows");
    }
    const std::size_t cols = j.front().is_array() ? j.front().size() : 0;
    Matrix m(j.size(), cols);
    for (std::size_t r = 0; r < j.size(); ++r) {
        const Json& row = j[r];
        if (!row.is_array() || row.size() != cols || cols == 0) {
            throw ConfigError(field, "row " + std::to_string(r) + " has the wrong length");
        }
        for (std::size_t c = 0; c < cols; ++c) {
            if (!row[c].is_number()) {
                throw ConfigError(field, "entry (" + std::to_string(r) + "," + std::to_string(c) +
                                             ") is not a number");
            }
            m(r, c) = row[c].get<double>();
        }
    }
    return m;
}

inline Json arm_to_json(const ArmModel& arm) {
    return Json{{"state_count", arm.state_count},
                {"kernel_passive", matrix_to_json(arm.kernel_passive)},
                {"kernel_active", matrix_to_json(arm.kernel_active)},
                {"reward", matrix_to_json(arm.reward)}};
}

namespace detail {

inline const Json& require(const Json& j, const char* key, const std::string& prefix) {
    if (!j.is_object() || !j.contains(key)) {
        throw ConfigError(prefix + key, "missing");
    }
    return j.at(key);
}

}  // namespace detail

/// Parses one arm and checks its invariants; problems name the field.
inline ArmModel arm_from_json(const Json& j, const std::string& prefix = "") {
    ArmModel arm;
    const Json& sc = detail::require(j, "state_count", prefix);
    if (!sc.is_number_integer()) {
        throw ConfigError(prefix + "state_count", "expected an integer");
    }
    arm.state_count = sc.get<int>();
    arm.kernel_passive = matrix_from_json(detail::require(j, "kernel_passive", prefix),
                                          prefix + "kernel_passive");
    arm.kernel_active =
        matrix_from_json(detail::require(j, "kernel_active", prefix), prefix + "kernel_active");
    arm.reward = matrix_from_json(detail::require(j, "reward", prefix), prefix + "reward");
    if (auto v = validate(arm)) {
        throw ConfigError(prefix + v->matrix, v->message);
    }
    return arm;
}

inline Json scenario_to_json(const ScenarioSpec& scenario) {
    Json arms = Json::array();
    for (const ArmModel& arm : scenario.arms) {
        arms.push_back(arm_to_json(arm));
    }
    return Json{{"arms", arms},
                {"budget", scenario.budget},
                {"discount", scenario.discount},
                {"metric_kind", to_string(scenario.metric_kind)}};
}

inline MetricKind metric_kind_from_string(const std::string& s) {
    if (s == "time_average") {
        return MetricKind::time_average;
    }
    if (s == "discounted_cumulative") {
        return MetricKind::discounted_cumulative;
    }
    throw ConfigError("metric_kind", "expected time_average or discounted_cumulative, got '" + s + "'");
}

inline ScenarioSpec scenario_from_json(const Json& j) {
    ScenarioSpec scenario;
    const Json& arms = detail::require(j, "arms", "");
    if (!arms.is_array() || arms.size() < 2) {
        throw ConfigError("arms", "expected an array of at least 2 arms");
    }
    for (std::size_t i = 0; i < arms.size(); ++i) {
        scenario.arms.push_back(arm_from_json(arms[i], "arms[" + std::to_string(i) + "]."));
    }
    const Json& budget = detail::require(j, "budget", "");
    if (!budget.is_number_integer()) {
        throw ConfigError("budget", "expected an integer");
    }
    scenario.budget = budget.get<int>();
    if (scenario.budget <= 0 || scenario.budget >= scenario.arm_count()) {
        throw ConfigError("budget", "must satisfy 0 < budget < number of arms");
    }
    const Json& discount = detail::require(j, "discount", "");
    if (!discount.is_number()) {
        throw ConfigError("discount", "expected a number");
    }
    scenario.discount = discount.get<double>();
    if (!(scenario.discount > 0.0 && scenario.discount < 1.0)) {
        throw ConfigError("discount", "must lie in (0,1)");
    }
    const Json& kind = detail::require(j, "metric_kind", "");
    if (!kind.is_string()) {
        throw ConfigError("metric_kind", "expected a string");
    }
    scenario.metric_kind = metric_kind_from_string(kind.get<std::string>());
    return scenario;
}

inline Json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError(path, "cannot open file");
    }
    try {
        return Json::parse(in);
    } catch (const Json::parse_error& e) {
        throw ConfigError(path, std::string("not valid JSON: ") + e.what());
    }
}

inline void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw IoError("cannot write " + path);
    }
    out << text;
    if (!out) {
        throw IoError("write failed for " + path);
    }
}

inline ScenarioSpec load_scenario(const std::string& path) {
    return scenario_from_json(read_json_file(path));
}

inline void save_scenario(const ScenarioSpec& scenario, const std::string& path) {
    write_text_file(path, scenario_to_json(scenario).dump(2) + "\n");
}

}  // namespace isq

#endif  // ISQ_SCENARIO_IO_HPP
