// Acceptance run: one PASS/FAIL line per criterion, details indented below.
// Exit status is non-zero when any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "isq/isq.hpp"

using namespace isq;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = true;
    std::vector<std::string> notes;

    void require(bool ok, const std::string& what) {
        notes.push_back(std::string(ok ? "ok   " : "FAIL ") + what);
        pass = pass && ok;
    }
    void note(const std::string& what) { notes.push_back("     " + what); }
};

std::string num(double x, int digits = 4) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*f", digits, x);
    return buf;
}

std::string vec(const std::vector<double>& v, int digits = 4) {
    std::string s = "[";
    for (std::size_t i = 0; i < v.size(); ++i) {
        s += (i ? ", " : "") + num(v[i], digits);
    }
    return s + "]";
}

int failures = 0;

void report(int id, const std::string& title, const std::function<Outcome()>& body) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
        o = body();
    } catch (const std::exception& e) {
        o.require(false, std::string("exception: ") + e.what());
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << id << ": " << title << " (" << num(secs, 1)
              << " s)\n";
    for (const auto& n : o.notes) {
        std::cout << "    " << n << "\n";
    }
    std::cout.flush();
    failures += o.pass ? 0 : 1;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

ExperimentConfig experiment(ScenarioKind kind, int n, int k, std::int64_t horizon, int trials) {
    ExperimentConfig c;
    c.scenario.kind = kind;
    c.scenario.n_arms = n;
    c.scenario.budget = k;
    c.scenario.discount = 0.999;
    c.policies = default_policies();
    c.episode_length = 100;
    c.episodes = static_cast<int>(horizon / 100);
    c.horizon = horizon;
    c.trials = trials;
    c.base_seed = 1;
    c.strict_indexability = kind != ScenarioKind::heterogeneous;
    return c;
}

void note_finals(Outcome& o, const AggregateResult& r) {
    for (const auto& p : r.policies) {
        o.note(p.policy + " final mean " + num(p.final_mean) + " (std " + num(p.final_std) + ")");
    }
}

Outcome whittle_regression() {
    Outcome o;
    const std::vector<double> published{1.3060, 0.4129, 1.0237, -1.4711};
    const std::vector<double> index = whittle_index(homogeneous_target_arm(), 0.999);
    o.note("computed " + vec(index, 5));
    for (std::size_t x = 0; x < 4; ++x) {
        const double dev = std::abs(index[x] - published[x]);
        o.require(dev <= 5e-3, "state " + std::to_string(x) + ": |" + num(index[x], 5) + " - " +
                                   num(published[x]) + "| = " + num(dev, 5) + " <= 0.005");
    }
    return o;
}

Outcome strong_indexability() {
    Outcome o;
    const IndexabilityReport r =
        audit_strong_indexability(homogeneous_target_arm(), 0.999, linear_grid(-2, 2, 101));
    for (std::size_t x = 0; x < 4; ++x) {
        const auto& c = r.d_curves[x];
        double min_drop = std::numeric_limits<double>::infinity();
        for (std::size_t i = 1; i < c.size(); ++i) {
            min_drop = std::min(min_drop, c[i - 1] - c[i]);
        }
        o.require(min_drop > kStrictDecreaseTolerance,
                  "D_" + std::to_string(x) + " from " + num(c.front()) + " to " + num(c.back()) +
                      ", smallest step drop " + num(min_drop, 6));
    }
    o.require(r.verdict == AuditVerdict::strongly_indexable, std::string("verdict ") + to_string(r.verdict));
    return o;
}

Outcome circulant_index() {
    Outcome o;
    const std::vector<double> index = whittle_index(circulant_arm(), 0.999);
    const std::vector<double> published{-0.5, 0.5, 1.0, -1.0};
    o.require(index.size() == 4, "bisection converged for all 4 states " + vec(index, 5));
    o.require(index[2] > index[1] && index[1] > index[0] && index[0] > index[3],
              "priority order state 2 > 1 > 0 > 3");
    std::vector<double> dev;
    for (std::size_t x = 0; x < 4; ++x) dev.push_back(index[x] - published[x]);
    o.note("deviation from [-0.5, 0.5, 1, -1] at beta 0.999: " + vec(dev, 5));
    return o;
}

Outcome circulant_ordering() {
    Outcome o;
    const AggregateResult r = run_experiment(experiment(ScenarioKind::circulant, 5, 1, 20000, 20));
    note_finals(o, r);
    const double wi = r.at("WI").final_mean;
    const double isq = r.at("ISQ").final_mean;
    const double wiql = r.at("WIQL").final_mean;
    const double greedy = r.at("Greedy").final_mean;
    o.require(wi >= isq, "WI >= ISQ");
    o.require(isq > wiql, "ISQ > WIQL");
    o.require(wiql > greedy, "WIQL > Greedy");
    o.require(std::abs(greedy) <= 0.05, "|Greedy| = " + num(std::abs(greedy)) + " <= 0.05");
    o.require(isq >= 0.9 * wi, "ISQ within 10% of WI (" + num(percentage_improvement(isq, wi), 2) + "%)");
    return o;
}

Outcome target_ordering(ScenarioKind kind) {
    Outcome o;
    const ExperimentConfig c = experiment(kind, 5, 1, 20000, 20);
    if (kind == ScenarioKind::heterogeneous) {
        o.note("scenario seed " + std::to_string(c.scenario.seed) + ", non-strict Whittle oracle");
    }
    const AggregateResult r = run_experiment(c);
    note_finals(o, r);
    const double wi = r.at("WI").final_mean;
    const double isq = r.at("ISQ").final_mean;
    const double wiql = r.at("WIQL").final_mean;
    const double greedy = r.at("Greedy").final_mean;
    o.require(wi >= isq, "WI >= ISQ");
    o.require(isq > wiql, "ISQ > WIQL (improvement " + num(percentage_improvement(isq, wiql), 2) + "%)");
    if (kind == ScenarioKind::homogeneous) {
        o.require(wiql > greedy, "WIQL > Greedy");
    } else {
        o.require(isq > greedy, "ISQ > Greedy");
    }
    return o;
}

Outcome large_scale() {
    Outcome o;
    const int n = 100;
    const int k = 20;
    const int trials = 3;
    for (const ScenarioKind kind : {ScenarioKind::circulant, ScenarioKind::homogeneous, ScenarioKind::heterogeneous}) {
        ExperimentConfig c = experiment(kind, n, k, 5000, trials);
        const ScenarioSpec scenario = build_scenario(c.scenario);
        const WhittleSolver solver(1e-6, c.strict_indexability);
        long slots = 0;
        long violations = 0;
        TrialHooks hooks;
        hooks.on_action = [&](std::int64_t, const JointAction& a) {
            ++slots;
            violations += count_active(a) == k ? 0 : 1;
        };
        std::vector<double> finals(4, 0.0);
        for (int trial = 0; trial < trials; ++trial) {
            const auto t = static_cast<std::uint64_t>(trial);
            Rng r_isq(stream_seed("ISQ", t, c.base_seed));
            finals[0] += run_isq(scenario, resolve_isq_config(c, c.policies[1], scenario), r_isq, hooks).final_metric;
            Rng r_wiql(stream_seed("WIQL", t, c.base_seed));
            finals[1] += run_wiql(scenario, c.horizon, r_wiql, hooks).final_metric;
            Rng r_greedy(stream_seed("Greedy", t, c.base_seed));
            finals[2] += run_greedy(scenario, c.horizon, r_greedy, hooks).final_metric;
            Rng r_wi(stream_seed("WI", t, c.base_seed));
            finals[3] += run_wi_oracle(scenario, c.horizon, r_wi, solver, hooks).final_metric;
        }
        for (double& f : finals) f /= trials;
        const std::string name = to_string(kind);
        o.note(name + ": ISQ " + num(finals[0]) + ", WIQL " + num(finals[1]) + ", Greedy " + num(finals[2]) +
               ", WI " + num(finals[3]));
        o.require(violations == 0 && slots == 4L * trials * c.horizon,
                  name + ": budget held in all " + std::to_string(slots) + " slots");
        o.require(finals[0] >= finals[1], name + ": ISQ >= WIQL (" +
                                              num(percentage_improvement(finals[0], finals[1]), 2) + "%)");
    }
    return o;
}

Outcome property_suites() {
    Outcome o;
    // Index coherence after every ISQ and WIQL update.
    {
        const ScenarioSpec s = make_heterogeneous_target_scenario(6, 2, 0.99, 5);
        IsqConfig cfg;
        cfg.episodes = 20;
        cfg.episode_length = 50;
        cfg.discount = 0.99;
        long bad = 0;
        long checked = 0;
        TrialHooks hooks;
        hooks.on_update = [&](const QTable& q, const IndexTable& idx, int arm, int x) {
            ++checked;
            bad += idx(arm, x) == q(arm, x, kActive) - q(arm, x, kPassive) ? 0 : 1;
        };
        Rng a(1);
        run_isq(s, cfg, a, hooks);
        Rng b(2);
        run_wiql(s, 1000, b, hooks);
        o.require(bad == 0, "index coherence over " + std::to_string(checked) + " updates");
    }
    // Bellman residual bound.
    {
        bool ok = true;
        for (const ArmModel& arm : {homogeneous_target_arm(), circulant_arm()}) {
            for (double lambda : {-1.0, 0.0, 1.3, 4.0}) {
                const ValueFunctions vf = solve_subsidized({arm, lambda, 0.999}, 1e-6);
                ok = ok && vf.residual <= residual_target(1e-6, 0.999, detail::sup_norm(vf.v));
            }
        }
        o.require(ok, "Bellman residual within bound on 8 solves");
    }
    // Chi-square on transition sampling, every row with >= 2 outcomes.
    {
        // Upper 0.001 quantiles of chi-square with 1, 2, 3 degrees of freedom.
        const double critical[] = {0.0, 10.828, 13.816, 16.266};
        const ArmModel arm = homogeneous_target_arm();
        Rng rng(2024);
        bool ok = true;
        double worst = 0.0;
        for (int a : {kPassive, kActive}) {
            for (std::size_t x = 0; x < 4; ++x) {
                const auto row = arm.kernel(a).row(x);
                std::vector<long> counts(4, 0);
                for (int i = 0; i < 100000; ++i) ++counts[static_cast<std::size_t>(sample_row(row, rng))];
                double stat = 0.0;
                int cells = 0;
                for (std::size_t v = 0; v < 4; ++v) {
                    if (row[v] == 0.0) {
                        ok = ok && counts[v] == 0;
                        continue;
                    }
                    const double e = row[v] * 100000.0;
                    stat += (static_cast<double>(counts[v]) - e) * (static_cast<double>(counts[v]) - e) / e;
                    ++cells;
                }
                ok = ok && stat < critical[cells - 1];
                worst = std::max(worst, stat / critical[cells - 1]);
            }
        }
        o.require(ok, "chi-square at 0.001 on 8 kernel rows (largest statistic/critical " + num(worst, 3) + ")");
    }
    // End-to-end determinism.
    {
        ExperimentConfig c = experiment(ScenarioKind::homogeneous, 5, 1, 2000, 3);
        const fs::path d1 = fs::temp_directory_path() / "isq_acceptance_a";
        const fs::path d2 = fs::temp_directory_path() / "isq_acceptance_b";
        fs::remove_all(d1);
        fs::remove_all(d2);
        c.output_dir = d1.string();
        run_experiment(c);
        c.output_dir = d2.string();
        run_experiment(c);
        bool same = true;
        int files = 0;
        for (const auto& e : fs::directory_iterator(d1)) {
            same = same && slurp(e.path()) == slurp(d2 / e.path().filename());
            ++files;
        }
        o.require(same && files == 5, "byte-identical reruns (" + std::to_string(files) + " files)");
    }
    // Backward pass, T = 2 hand oracle: 0.8 then 2.375.
    {
        const ScenarioSpec s = make_homogeneous_target_scenario(2, 1, 0.9);
        QTable q(s);
        IndexTable idx(s);
        EpisodeMemory m(2, 2);
        m.record(0, {0, kActive, 2.0, 1});
        m.record(0, {1, kPassive, 0.3, 0});
        backward_pass(q, idx, m, 0, 0.5, 0.5);
        o.require(q(0, 1, kPassive) == 0.8 && q(0, 0, kActive) == 2.375,
                  "backward hand oracle Q(1,0)=" + num(q(0, 1, kPassive), 6) + " Q(0,1)=" + num(q(0, 0, kActive), 6));
    }
    // Sarsa recurrences.
    {
        const ScenarioSpec s = make_homogeneous_target_scenario(2, 1, 0.9);
        QTable q(s);
        IndexTable idx(s);
        VisitCounter visits(s);
        const double expect = 1.5 + 0.9 * q(0, 2, kPassive);
        sarsa_forward_update(q, visits, idx, 0, {1, kActive, 1.5, 2}, kPassive, 0.9);
        o.require(q(0, 1, kActive) == expect, "Sarsa first visit overwrites (alpha = 1)");
        const double rewards[] = {3.0, -1.0, 4.0, 0.5};
        double sum = 0.0;
        bool ok = true;
        for (int i = 0; i < 4; ++i) {
            sum += rewards[i];
            sarsa_forward_update(q, visits, idx, 1, {0, kPassive, rewards[i], 1}, kActive, 0.0);
            ok = ok && std::abs(q(1, 0, kPassive) - sum / (i + 1)) < 1e-12;
        }
        o.require(ok, "Sarsa with beta = 0 is the running average of rewards");
    }
    return o;
}

}  // namespace

int main() {
    report(1, "Whittle indices of the homogeneous target arm within 5e-3 of the published values", whittle_regression);
    report(2, "D_x(lambda) strictly decreasing on 101 points in [-2, 2]", strong_indexability);
    report(3, "circulant index bisection and priority order", circulant_index);
    report(4, "circulant N=5 K=1, 20 trials, horizon 20000", circulant_ordering);
    report(5, "homogeneous targets N=5 K=1, 20 trials", [] { return target_ordering(ScenarioKind::homogeneous); });
    report(6, "heterogeneous targets N=5 K=1, 20 trials", [] { return target_ordering(ScenarioKind::heterogeneous); });
    report(7, "N=100 K=20, 3 trials, horizon 5000, three presets", large_scale);
    report(8, "property suites", property_suites);
    std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed") << "\n";
    return failures == 0 ? 0 : 1;
}
