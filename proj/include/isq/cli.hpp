#ifndef ISQ_CLI_HPP
#define ISQ_CLI_HPP

#include <iomanip>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "isq/harness.hpp"

namespace isq {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 1;
inline constexpr int kExitNumeric = 2;

namespace detail {

inline ScenarioKind parse_scenario_flag(const std::string& value, ScenarioSelector& sel) {
    if (value == "circulant" || value == "homogeneous" || value == "heterogeneous") {
        return scenario_kind_from_string(value, "--scenario");
    }
    // Anything else is a path to a scenario file.
    sel.path = value;
    return ScenarioKind::file;
}

inline std::vector<PolicySpec> parse_policy_list(const std::string& csv) {
    std::vector<PolicySpec> out;
    std::stringstream ss(csv);
    std::string name;
    while (std::getline(ss, name, ',')) {
        if (!name.empty()) {
            out.push_back({policy_kind_from_name(name, "--policies"), {}, {}, {}});
        }
    }
    if (out.empty()) {
        throw ConfigError("--policies", "empty policy list");
    }
    return out;
}

/// Flag values for `run`; unset ones leave the config file (or defaults) alone.
struct RunFlags {
    std::string config_path;
    std::string scenario;
    std::optional<int> n;
    std::optional<int> k;
    std::optional<double> beta;
    std::optional<std::uint64_t> scenario_seed;
    std::string policies;
    std::optional<int> trials;
    std::optional<std::int64_t> horizon;
    std::optional<int> episodes;
    std::optional<int> episode_len;
    std::optional<std::uint64_t> seed;
    std::string out;
    std::optional<double> epsilon_e;
    std::optional<double> epsilon_scale;
    std::optional<double> backward_rate;
    std::optional<int> threads;
    bool non_strict = false;
    bool snapshots = false;
};

/// Merges flags over a base config. An explicit horizon without episodes is
/// split into episodes of the current episode length, and vice versa.
inline ExperimentConfig merge_flags(ExperimentConfig c, const RunFlags& f) {
    if (!f.scenario.empty()) {
        c.scenario.kind = parse_scenario_flag(f.scenario, c.scenario);
    }
    if (f.n) c.scenario.n_arms = *f.n;
    if (f.k) c.scenario.budget = *f.k;
    if (f.beta) c.scenario.discount = *f.beta;
    if (f.scenario_seed) c.scenario.seed = *f.scenario_seed;
    if (!f.policies.empty()) {
        c.policies = parse_policy_list(f.policies);
    }
    for (PolicySpec& p : c.policies) {
        if (p.kind != PolicyKind::isq) {
            continue;
        }
        if (f.epsilon_e) p.epsilon_constant = *f.epsilon_e;
        if (f.epsilon_scale) p.epsilon_scale = *f.epsilon_scale;
        if (f.backward_rate) p.backward_rate = *f.backward_rate;
    }
    if (f.trials) c.trials = *f.trials;
    if (f.episode_len) c.episode_length = *f.episode_len;
    if (f.episodes) c.episodes = *f.episodes;
    if (f.horizon) {
        c.horizon = *f.horizon;
        if (!f.episodes) {
            if (c.episode_length <= 0 || c.horizon % c.episode_length != 0) {
                throw ConfigError("--horizon", "must be a multiple of the episode length");
            }
            c.episodes = static_cast<int>(c.horizon / c.episode_length);
        }
    } else {
        c.horizon = static_cast<std::int64_t>(c.episodes) * c.episode_length;
    }
    if (f.seed) c.base_seed = *f.seed;
    if (!f.out.empty()) c.output_dir = f.out;
    if (f.threads) c.threads = *f.threads;
    if (f.non_strict) c.strict_indexability = false;
    if (f.snapshots) c.snapshots = true;
    check_config(c);
    return c;
}

inline std::string fixed(double x, int digits = 6) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(digits) << x;
    return os.str();
}

inline void print_summary(const AggregateResult& r, std::ostream& out) {
    for (const auto& p : r.policies) {
        out << p.policy << ": final mean " << fixed(p.final_mean) << " std " << fixed(p.final_std)
            << " over " << p.trials.size() << " trials\n";
    }
    for (const auto& i : r.improvements) {
        if (i.policy == "ISQ") {
            out << "ISQ vs " << i.baseline << ": " << fixed(i.percent, 3) << "%\n";
        }
    }
}

}  // namespace detail

/// Command-line entry point. Returns 0 on success, 1 for configuration or
/// I/O problems and 2 for numerical or indexability failures.
inline int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Index-based learning for restless bandits"};
    app.require_subcommand(1);

    detail::RunFlags rf;
    CLI::App* run = app.add_subcommand("run", "run an experiment and write curves");
    run->add_option("--config", rf.config_path, "JSON experiment config");
    run->add_option("--scenario", rf.scenario,
                    "circulant, homogeneous, heterogeneous or a scenario file");
    run->add_option("--n", rf.n, "number of arms");
    run->add_option("--k", rf.k, "arms activated per slot");
    run->add_option("--beta", rf.beta, "discount factor");
    run->add_option("--scenario-seed", rf.scenario_seed, "heterogeneous generator seed");
    run->add_option("--policies", rf.policies, "comma-separated subset of ISQ,WIQL,Greedy,WI");
    run->add_option("--trials", rf.trials, "trials per policy");
    run->add_option("--horizon", rf.horizon, "slots per trial");
    run->add_option("--episodes", rf.episodes, "ISQ episodes");
    run->add_option("--episode-len", rf.episode_len, "ISQ episode length");
    run->add_option("--seed", rf.seed, "base seed");
    run->add_option("--out", rf.out, "output directory");
    run->add_option("--epsilon-e", rf.epsilon_e, "ISQ exploration constant");
    run->add_option("--epsilon-scale", rf.epsilon_scale, "ISQ exploration scale");
    run->add_option("--backward-rate", rf.backward_rate, "ISQ backward learning rate");
    run->add_option("--threads", rf.threads, "worker threads (0 = all cores)");
    run->add_flag("--non-strict", rf.non_strict, "accept arms that are not strongly indexable");
    run->add_flag("--snapshots", rf.snapshots, "write ISQ tables after every episode");

    std::string w_scenario = "homogeneous";
    double w_beta = 0.999;
    int w_arm = 0;
    int w_n = 5;
    std::uint64_t w_seed = 7;
    double grid_lo = -2.0;
    double grid_hi = 2.0;
    int grid_points = 101;
    double w_tol = 1e-6;
    bool w_non_strict = false;
    std::string w_out;
    CLI::App* whittle = app.add_subcommand("whittle", "print Whittle indices and the audit for one arm");
    whittle->add_option("--scenario", w_scenario, "circulant, homogeneous, heterogeneous or a scenario file");
    whittle->add_option("--beta", w_beta, "discount factor (ignored for scenario files)");
    whittle->add_option("--arm", w_arm, "arm to analyse");
    whittle->add_option("--n", w_n, "arms in a generated heterogeneous scenario");
    whittle->add_option("--scenario-seed", w_seed, "heterogeneous generator seed");
    whittle->add_option("--grid-lo", grid_lo, "lowest subsidy in the audit grid");
    whittle->add_option("--grid-hi", grid_hi, "highest subsidy in the audit grid");
    whittle->add_option("--grid-points", grid_points, "audit grid size");
    whittle->add_option("--tol", w_tol, "index tolerance");
    whittle->add_flag("--non-strict", w_non_strict, "bisect even if D curves are not monotone");
    whittle->add_option("--out", w_out, "directory for indexability.csv/json");

    std::string v_path;
    CLI::App* validate_cmd = app.add_subcommand("validate", "check a scenario file");
    validate_cmd->add_option("file", v_path, "scenario JSON")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n";
        return kExitConfig;
    }

    try {
        if (run->parsed()) {
            ExperimentConfig base;
            base.policies = default_policies();
            if (!rf.config_path.empty()) {
                base = config_from_json(read_json_file(rf.config_path));
            }
            const ExperimentConfig config = detail::merge_flags(base, rf);
            const AggregateResult result = run_experiment(config);
            detail::print_summary(result, out);
            if (!config.output_dir.empty()) {
                out << "wrote " << config.output_dir << "\n";
            }
        } else if (whittle->parsed()) {
            ScenarioSelector sel;
            sel.kind = detail::parse_scenario_flag(w_scenario, sel);
            sel.discount = w_beta;
            sel.seed = w_seed;
            sel.n_arms = sel.kind == ScenarioKind::heterogeneous ? w_n : 2;
            sel.budget = 1;
            const ScenarioSpec scenario = build_scenario(sel);
            if (w_arm < 0 || w_arm >= scenario.arm_count()) {
                throw ConfigError("--arm", "out of range");
            }
            if (grid_points < 2 || !(grid_lo < grid_hi)) {
                throw ConfigError("--grid-points", "need at least 2 points on an increasing range");
            }
            const ArmModel& arm = scenario.arms[static_cast<std::size_t>(w_arm)];
            const std::vector<double> index =
                whittle_index(arm, scenario.discount, w_tol, !w_non_strict);
            for (std::size_t x = 0; x < index.size(); ++x) {
                out << "index[" << x << "] = " << detail::fixed(index[x]) << "\n";
            }
            const IndexabilityReport report = audit_strong_indexability(
                arm, scenario.discount, linear_grid(grid_lo, grid_hi, grid_points));
            out << "audit: " << to_string(report.verdict) << "\n";
            if (!w_out.empty()) {
                emit_indexability(report, w_out);
                out << "wrote " << w_out << "\n";
            }
        } else if (validate_cmd->parsed()) {
            const ScenarioSpec scenario = load_scenario(v_path);
            out << "ok: " << scenario.arm_count() << " arms, budget " << scenario.budget << "\n";
        }
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const IoError& e) {
        err << "io error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const NumericFailure& e) {
        err << "numeric failure: " << e.what() << "\n";
        return kExitNumeric;
    } catch (const NotIndexable& e) {
        err << "not indexable: " << e.what() << "\n";
        return kExitNumeric;
    } catch (const AuditFailure& e) {
        err << "audit failure: " << e.what() << "\n";
        return kExitNumeric;
    } catch (const std::invalid_argument& e) {
        err << "invalid argument: " << e.what() << "\n";
        return kExitConfig;
    }
    return kExitOk;
}

}  // namespace isq

#endif  // ISQ_CLI_HPP
