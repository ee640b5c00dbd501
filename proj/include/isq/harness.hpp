#ifndef ISQ_HARNESS_HPP
#define ISQ_HARNESS_HPP

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "isq/arm_model.hpp"
#include "isq/policies.hpp"
#include "isq/rng.hpp"
#include "isq/scenario_io.hpp"
#include "isq/whittle.hpp"

namespace isq {

enum class ScenarioKind { circulant, homogeneous, heterogeneous, file };
enum class PolicyKind { isq, wiql, greedy, wi };

inline const char* to_string(ScenarioKind k) {
    switch (k) {
        case ScenarioKind::circulant: return "circulant";
        case ScenarioKind::homogeneous: return "homogeneous";
        case ScenarioKind::heterogeneous: return "heterogeneous";
        case ScenarioKind::file: return "file";
    }
    return "?";
}

/// Display name; also used for output file names and RNG stream derivation.
inline const char* policy_name(PolicyKind k) {
    switch (k) {
        case PolicyKind::isq: return "ISQ";
        case PolicyKind::wiql: return "WIQL";
        case PolicyKind::greedy: return "Greedy";
        case PolicyKind::wi: return "WI";
    }
    return "?";
}

inline PolicyKind policy_kind_from_name(const std::string& name, const std::string& field) {
    for (const PolicyKind k : {PolicyKind::isq, PolicyKind::wiql, PolicyKind::greedy, PolicyKind::wi}) {
        std::string canonical = policy_name(k);
        std::string lower = name;
        std::transform(lower.begin(), lower.end(), lower.begin(), ::tolower);
        std::transform(canonical.begin(), canonical.end(), canonical.begin(), ::tolower);
        if (lower == canonical) {
            return k;
        }
    }
    throw ConfigError(field, "unknown policy '" + name + "' (expected ISQ, WIQL, Greedy or WI)");
}

struct ScenarioSelector {
    ScenarioKind kind = ScenarioKind::circulant;
    int n_arms = 5;
    int budget = 1;
    double discount = 0.999;
    std::uint64_t seed = 7;  // heterogeneous generator only
    std::string path;        // file only
};

/// Unset ISQ hyperparameters fall back to scenario defaults: e = N and
/// scale 1/2 for the circulant benchmark, e = 5 and scale 1 otherwise.
struct PolicySpec {
    PolicyKind kind = PolicyKind::isq;
    std::optional<double> epsilon_constant;
    std::optional<double> epsilon_scale;
    std::optional<double> backward_rate;
};

struct ExperimentConfig {
    ScenarioSelector scenario;
    std::vector<PolicySpec> policies;
    std::int64_t horizon = 20000;
    int episodes = 200;
    int episode_length = 100;
    int trials = 20;
    std::uint64_t base_seed = 1;
    std::string output_dir;  // empty: nothing written
    /// Whittle oracle refuses arms whose D curves are not monotone.
    bool strict_indexability = true;
    /// Record ISQ tables after every episode (trial 0 is written out).
    bool snapshots = false;
    /// Worker threads; 0 picks the hardware concurrency.
    int threads = 0;
};

inline std::vector<PolicySpec> default_policies() {
    return {{PolicyKind::wi, {}, {}, {}},
            {PolicyKind::isq, {}, {}, {}},
            {PolicyKind::wiql, {}, {}, {}},
            {PolicyKind::greedy, {}, {}, {}}};
}

/// Throws ConfigError naming the first invalid field.
inline void check_config(const ExperimentConfig& c) {
    const ScenarioSelector& s = c.scenario;
    if (s.kind != ScenarioKind::file) {
        if (s.n_arms < 2) {
            throw ConfigError("scenario.n_arms", "must be at least 2");
        }
        if (s.budget <= 0 || s.budget >= s.n_arms) {
            throw ConfigError("scenario.budget", "must satisfy 0 < budget < n_arms");
        }
        if (!(s.discount > 0.0 && s.discount < 1.0)) {
            throw ConfigError("scenario.discount", "must lie in (0,1)");
        }
    } else if (s.path.empty()) {
        throw ConfigError("scenario.path", "required for file scenarios");
    }
    if (c.policies.empty()) {
        throw ConfigError("policies", "at least one policy is required");
    }
    for (std::size_t i = 0; i < c.policies.size(); ++i) {
        const PolicySpec& p = c.policies[i];
        const std::string field = "policies[" + std::to_string(i) + "]";
        for (std::size_t j = 0; j < i; ++j) {
            if (c.policies[j].kind == p.kind) {
                throw ConfigError(field, std::string("duplicate policy ") + policy_name(p.kind));
            }
        }
        if (p.epsilon_constant && !(*p.epsilon_constant > 0.0)) {
            throw ConfigError(field + ".epsilon_constant", "must be positive");
        }
        if (p.epsilon_scale && !(*p.epsilon_scale > 0.0)) {
            throw ConfigError(field + ".epsilon_scale", "must be positive");
        }
        if (p.backward_rate && !(*p.backward_rate > 0.0 && *p.backward_rate < 1.0)) {
            throw ConfigError(field + ".backward_rate", "must lie in (0,1)");
        }
    }
    if (c.episodes < 1) {
        throw ConfigError("episodes", "must be positive");
    }
    if (c.episode_length < 1) {
        throw ConfigError("episode_length", "must be positive");
    }
    if (c.horizon != static_cast<std::int64_t>(c.episodes) * c.episode_length) {
        throw ConfigError("horizon", "must equal episodes * episode_length (" +
                                         std::to_string(c.episodes) + " * " +
                                         std::to_string(c.episode_length) + ")");
    }
    if (c.trials < 1) {
        throw ConfigError("trials", "must be at least 1");
    }
    if (c.threads < 0) {
        throw ConfigError("threads", "must be non-negative");
    }
}

inline ScenarioSpec build_scenario(const ScenarioSelector& s) {
    switch (s.kind) {
        case ScenarioKind::circulant: return make_circulant_scenario(s.n_arms, s.budget, s.discount);
        case ScenarioKind::homogeneous:
            return make_homogeneous_target_scenario(s.n_arms, s.budget, s.discount);
        case ScenarioKind::heterogeneous:
            return make_heterogeneous_target_scenario(s.n_arms, s.budget, s.discount, s.seed);
        case ScenarioKind::file: return load_scenario(s.path);
    }
    throw ConfigError("scenario.kind", "unknown");
}

inline IsqConfig resolve_isq_config(const ExperimentConfig& c, const PolicySpec& p,
                                    const ScenarioSpec& scenario) {
    const bool circulant = c.scenario.kind == ScenarioKind::circulant;
    IsqConfig cfg;
    cfg.episodes = c.episodes;
    cfg.episode_length = c.episode_length;
    cfg.discount = scenario.discount;
    cfg.backward_rate = p.backward_rate.value_or(0.1);
    cfg.epsilon_constant =
        p.epsilon_constant.value_or(circulant ? static_cast<double>(scenario.arm_count()) : 5.0);
    cfg.epsilon_scale = p.epsilon_scale.value_or(circulant ? 0.5 : 1.0);
    return cfg;
}

// ---------------------------------------------------------------------------
// Config JSON

inline Json config_to_json(const ExperimentConfig& c) {
    Json scenario{{"kind", to_string(c.scenario.kind)},
                  {"n_arms", c.scenario.n_arms},
                  {"budget", c.scenario.budget},
                  {"discount", c.scenario.discount},
                  {"seed", c.scenario.seed}};
    if (c.scenario.kind == ScenarioKind::file) {
        scenario["path"] = c.scenario.path;
    }
    Json policies = Json::array();
    for (const PolicySpec& p : c.policies) {
        Json jp{{"name", policy_name(p.kind)}};
        if (p.epsilon_constant) {
            jp["epsilon_constant"] = *p.epsilon_constant;
        }
        if (p.epsilon_scale) {
            jp["epsilon_scale"] = *p.epsilon_scale;
        }
        if (p.backward_rate) {
            jp["backward_rate"] = *p.backward_rate;
        }
        policies.push_back(std::move(jp));
    }
    return Json{{"scenario", scenario},
                {"policies", policies},
                {"horizon", c.horizon},
                {"episodes", c.episodes},
                {"episode_length", c.episode_length},
                {"trials", c.trials},
                {"base_seed", c.base_seed},
                {"output_dir", c.output_dir},
                {"strict_indexability", c.strict_indexability},
                {"snapshots", c.snapshots}};
}

namespace detail {

template <class T>
T get_field(const Json& j, const char* key, const std::string& field, T fallback) {
    if (!j.contains(key)) {
        return fallback;
    }
    try {
        return j.at(key).get<T>();
    } catch (const Json::exception&) {
        throw ConfigError(field + key, "has the wrong type");
    }
}

inline ScenarioKind scenario_kind_from_string(const std::string& s, const std::string& field) {
    for (const ScenarioKind k : {ScenarioKind::circulant, ScenarioKind::homogeneous,
                                 ScenarioKind::heterogeneous, ScenarioKind::file}) {
        if (s == to_string(k)) {
            return k;
        }
    }
    throw ConfigError(field, "unknown scenario kind '" + s + "'");
}

}  // namespace detail

/// Reads a config document. Missing fields keep their defaults; a config
/// that gives only `horizon` splits it into episodes of `episode_length`.
inline ExperimentConfig config_from_json(const Json& j) {
    if (!j.is_object()) {
        throw ConfigError("config", "expected a JSON object");
    }
    ExperimentConfig c;
    if (j.contains("scenario")) {
        const Json& s = j.at("scenario");
        if (!s.is_object()) {
            throw ConfigError("scenario", "expected an object");
        }
        c.scenario.kind = detail::scenario_kind_from_string(
            detail::get_field<std::string>(s, "kind", "scenario.", "circulant"), "scenario.kind");
        c.scenario.n_arms = detail::get_field<int>(s, "n_arms", "scenario.", c.scenario.n_arms);
        c.scenario.budget = detail::get_field<int>(s, "budget", "scenario.", c.scenario.budget);
        c.scenario.discount =
            detail::get_field<double>(s, "discount", "scenario.", c.scenario.discount);
        c.scenario.seed = detail::get_field<std::uint64_t>(s, "seed", "scenario.", c.scenario.seed);
        c.scenario.path = detail::get_field<std::string>(s, "path", "scenario.", "");
    }
    if (j.contains("policies")) {
        const Json& ps = j.at("policies");
        if (!ps.is_array()) {
            throw ConfigError("policies", "expected an array");
        }
        for (std::size_t i = 0; i < ps.size(); ++i) {
            const std::string field = "policies[" + std::to_string(i) + "]";
            const Json& p = ps[i];
            PolicySpec spec;
            if (p.is_string()) {
                spec.kind = policy_kind_from_name(p.get<std::string>(), field);
            } else if (p.is_object()) {
                spec.kind = policy_kind_from_name(
                    detail::get_field<std::string>(p, "name", field + ".", ""), field + ".name");
                auto opt = [&](const char* key) -> std::optional<double> {
                    if (!p.contains(key)) {
                        return std::nullopt;
                    }
                    return detail::get_field<double>(p, key, field + ".", 0.0);
                };
                spec.epsilon_constant = opt("epsilon_constant");
                spec.epsilon_scale = opt("epsilon_scale");
                spec.backward_rate = opt("backward_rate");
            } else {
                throw ConfigError(field, "expected a policy name or object");
            }
            c.policies.push_back(spec);
        }
    } else {
        c.policies = default_policies();
    }
    c.episode_length = detail::get_field<int>(j, "episode_length", "", c.episode_length);
    const bool has_horizon = j.contains("horizon");
    const bool has_episodes = j.contains("episodes");
    c.episodes = detail::get_field<int>(j, "episodes", "", c.episodes);
    c.horizon = detail::get_field<std::int64_t>(j, "horizon", "", 0);
    if (has_horizon && !has_episodes) {
        if (c.episode_length <= 0 || c.horizon % c.episode_length != 0) {
            throw ConfigError("horizon", "must be a multiple of episode_length");
        }
        c.episodes = static_cast<int>(c.horizon / c.episode_length);
    } else if (!has_horizon) {
        c.horizon = static_cast<std::int64_t>(c.episodes) * c.episode_length;
    }
    c.trials = detail::get_field<int>(j, "trials", "", c.trials);
    c.base_seed = detail::get_field<std::uint64_t>(j, "base_seed", "", c.base_seed);
    c.output_dir = detail::get_field<std::string>(j, "output_dir", "", c.output_dir);
    c.strict_indexability =
        detail::get_field<bool>(j, "strict_indexability", "", c.strict_indexability);
    c.snapshots = detail::get_field<bool>(j, "snapshots", "", c.snapshots);
    check_config(c);
    return c;
}

// ---------------------------------------------------------------------------
// Running and aggregation

struct PolicyAggregate {
    std::string policy;
    std::vector<double> mean_curve;
    std::vector<double> std_curve;
    double final_mean = 0.0;
    double final_std = 0.0;
    std::vector<TrialResult> trials;
};

struct Improvement {
    std::string policy;
    std::string baseline;
    double percent = 0.0;
};

struct AggregateResult {
    ExperimentConfig config;
    std::vector<PolicyAggregate> policies;
    std::vector<Improvement> improvements;

    const PolicyAggregate& at(const std::string& name) const {
        for (const auto& p : policies) {
            if (p.policy == name) {
                return p;
            }
        }
        throw std::out_of_range("no policy named " + name);
    }
};

/// 100 * (a - b) / |b|.
inline double percentage_improvement(double a, double b) {
    if (b == 0.0) {
        throw std::invalid_argument("percentage_improvement: baseline is zero");
    }
    return 100.0 * (a - b) / std::abs(b);
}

/// Sample standard deviation (n - 1 denominator); 0 for a single value.
inline double sample_std(const std::vector<double>& xs, double mean) {
    if (xs.size() < 2) {
        return 0.0;
    }
    double ss = 0.0;
    for (const double x : xs) {
        ss += (x - mean) * (x - mean);
    }
    return std::sqrt(ss / static_cast<double>(xs.size() - 1));
}

inline PolicyAggregate aggregate_trials(std::string name, std::vector<TrialResult> trials) {
    PolicyAggregate agg;
    agg.policy = std::move(name);
    const std::size_t len = trials.front().metric.size();
    const auto count = static_cast<double>(trials.size());
    agg.mean_curve.assign(len, 0.0);
    agg.std_curve.assign(len, 0.0);
    std::vector<double> column(trials.size());
    for (std::size_t t = 0; t < len; ++t) {
        double sum = 0.0;
        for (std::size_t i = 0; i < trials.size(); ++i) {
            column[i] = trials[i].metric[t];
            sum += column[i];
        }
        agg.mean_curve[t] = sum / count;
        agg.std_curve[t] = sample_std(column, agg.mean_curve[t]);
    }
    agg.final_mean = agg.mean_curve.back();
    agg.final_std = agg.std_curve.back();
    agg.trials = std::move(trials);
    return agg;
}

inline TrialResult run_policy(const PolicySpec& spec, const ExperimentConfig& config,
                              const ScenarioSpec& scenario, const WhittleSolver& solver,
                              int trial) {
    Rng rng(stream_seed(policy_name(spec.kind), static_cast<std::uint64_t>(trial), config.base_seed));
    TrialResult result;
    switch (spec.kind) {
        case PolicyKind::isq: {
            TrialHooks hooks;
            hooks.snapshot_episodes = config.snapshots && trial == 0;
            result = run_isq(scenario, resolve_isq_config(config, spec, scenario), rng, hooks);
            break;
        }
        case PolicyKind::wiql: result = run_wiql(scenario, config.horizon, rng); break;
        case PolicyKind::greedy: result = run_greedy(scenario, config.horizon, rng); break;
        case PolicyKind::wi: result = run_wi_oracle(scenario, config.horizon, rng, solver); break;
    }
    result.seed = config.base_seed + static_cast<std::uint64_t>(trial);
    return result;
}

void emit_outputs(const AggregateResult& result, const std::string& dir);

/// Runs every (policy, trial) cell, aggregates per policy and, when
/// `output_dir` is set, writes curves and the summary there.
///
/// Cells run on a small worker pool; each owns its RNG stream, so results do
/// not depend on scheduling.
inline AggregateResult run_experiment(const ExperimentConfig& config) {
    check_config(config);
    const ScenarioSpec scenario = build_scenario(config.scenario);
    check_scenario(scenario);
    const WhittleSolver solver(1e-6, config.strict_indexability);

    // Whittle indices are solved once up front so errors surface before any
    // trial runs.
    for (const PolicySpec& p : config.policies) {
        if (p.kind == PolicyKind::wi) {
            for (const ArmModel& arm : scenario.arms) {
                solver.indices(arm, scenario.discount);
            }
        }
    }

    const std::size_t policies = config.policies.size();
    const auto trials = static_cast<std::size_t>(config.trials);
    std::vector<TrialResult> cells(policies * trials);
    std::vector<std::exception_ptr> errors(cells.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < cells.size(); i = next++) {
            try {
                cells[i] = run_policy(config.policies[i / trials], config, scenario, solver,
                                      static_cast<int>(i % trials));
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
    const std::size_t workers = std::min<std::size_t>(
        cells.size(), config.threads > 0 ? static_cast<std::size_t>(config.threads) : hw);
    if (workers <= 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        pool.reserve(workers);
        for (std::size_t w = 0; w < workers; ++w) {
            pool.emplace_back(worker);
        }
    }
    for (const auto& e : errors) {
        if (e) {
            std::rethrow_exception(e);
        }
    }

    AggregateResult result;
    result.config = config;
    for (std::size_t p = 0; p < policies; ++p) {
        std::vector<TrialResult> runs(std::make_move_iterator(cells.begin() + static_cast<std::ptrdiff_t>(p * trials)),
                                      std::make_move_iterator(cells.begin() + static_cast<std::ptrdiff_t>((p + 1) * trials)));
        result.policies.push_back(aggregate_trials(policy_name(config.policies[p].kind), std::move(runs)));
    }
    for (const auto& a : result.policies) {
        for (const auto& b : result.policies) {
            if (&a != &b && b.final_mean != 0.0) {
                result.improvements.push_back(
                    {a.policy, b.policy, percentage_improvement(a.final_mean, b.final_mean)});
            }
        }
    }
    if (!config.output_dir.empty()) {
        emit_outputs(result, config.output_dir);
    }
    return result;
}

// ---------------------------------------------------------------------------
// Emission

/// Shortest decimal that round-trips to the same double.
inline std::string format_number(double x) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), x);
    return std::string(buf, res.ptr);
}

namespace detail {

inline void ensure_dir(const std::string& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec || !std::filesystem::is_directory(dir)) {
        throw IoError("cannot create output directory " + dir);
    }
}

inline std::string join_path(const std::string& dir, const std::string& file) {
    return (std::filesystem::path(dir) / file).string();
}

}  // namespace detail

inline std::string curve_csv(const PolicyAggregate& p) {
    std::string text = "t,mean_metric,std_metric\n";
    for (std::size_t t = 0; t < p.mean_curve.size(); ++t) {
        text += std::to_string(t);
        text += ',';
        text += format_number(p.mean_curve[t]);
        text += ',';
        text += format_number(p.std_curve[t]);
        text += '\n';
    }
    return text;
}

inline Json summary_json(const AggregateResult& result) {
    Json policies = Json::object();
    for (const auto& p : result.policies) {
        policies[p.policy] = Json{{"final_mean", p.final_mean},
                                  {"final_std", p.final_std},
                                  {"trials", p.trials.size()}};
    }
    Json improvements = Json::array();
    for (const auto& i : result.improvements) {
        improvements.push_back(
            Json{{"policy", i.policy}, {"baseline", i.baseline}, {"percent", i.percent}});
    }
    // The echo omits the output directory so reruns elsewhere match byte for byte.
    Json config = config_to_json(result.config);
    config.erase("output_dir");
    return Json{{"policies", policies}, {"improvements", improvements}, {"config", config}};
}

inline Json snapshots_json(const TrialResult& trial) {
    Json out = Json::array();
    for (const auto& snap : trial.snapshots) {
        Json q = Json::array();
        Json idx = Json::array();
        for (int n = 0; n < snap.q.arm_count(); ++n) {
            q.push_back(matrix_to_json(snap.q.arm_table(n)));
            idx.push_back(snap.index.arm_indices(n));
        }
        out.push_back(Json{{"slot", snap.slot}, {"q", q}, {"index", idx}});
    }
    return out;
}

/// One `curve_<policy>.csv` per policy and `summary.json`.
inline void emit_curves(const AggregateResult& result, const std::string& dir) {
    if (result.policies.empty()) {
        throw std::invalid_argument("emit_curves: no results");
    }
    detail::ensure_dir(dir);
    for (const auto& p : result.policies) {
        write_text_file(detail::join_path(dir, "curve_" + p.policy + ".csv"), curve_csv(p));
    }
    write_text_file(detail::join_path(dir, "summary.json"), summary_json(result).dump(2) + "\n");
}

inline void emit_outputs(const AggregateResult& result, const std::string& dir) {
    emit_curves(result, dir);
    for (const auto& p : result.policies) {
        if (!p.trials.empty() && !p.trials.front().snapshots.empty()) {
            write_text_file(detail::join_path(dir, "snapshots_" + p.policy + ".json"),
                            snapshots_json(p.trials.front()).dump() + "\n");
        }
    }
}

inline std::string indexability_csv(const IndexabilityReport& report) {
    std::string text = "lambda";
    for (std::size_t x = 0; x < report.d_curves.size(); ++x) {
        text += ",D_" + std::to_string(x);
    }
    text += '\n';
    for (std::size_t i = 0; i < report.grid.size(); ++i) {
        text += format_number(report.grid[i]);
        for (const auto& curve : report.d_curves) {
            text += ',';
            text += format_number(curve[i]);
        }
        text += '\n';
    }
    return text;
}

inline Json indexability_json(const IndexabilityReport& report) {
    return Json{{"strongly_indexable", report.strongly_indexable},
                {"verdict", to_string(report.verdict)},
                {"grid_points", report.grid.size()},
                {"whittle_index", report.whittle_index}};
}

/// Writes `<stem>.csv` (lambda, D_0..D_{S-1}) and the `<stem>.json` verdict.
inline void emit_indexability(const IndexabilityReport& report, const std::string& dir,
                              const std::string& stem = "indexability") {
    detail::ensure_dir(dir);
    write_text_file(detail::join_path(dir, stem + ".csv"), indexability_csv(report));
    write_text_file(detail::join_path(dir, stem + ".json"),
                    indexability_json(report).dump(2) + "\n");
}

}  // namespace isq

#endif  // ISQ_HARNESS_HPP
