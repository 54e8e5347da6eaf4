#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <iomanip>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "vlp/errors.hpp"
#include "vlp/executor.hpp"
#include "vlp/planner.hpp"
#include "vlp/scenario.hpp"

namespace vlp {

struct TrialResult {
    std::string scenario_id;
    std::string family;
    std::uint64_t seed = 0;
    bool planned = false; // every planner query produced a valid policy
    bool success = false;
    std::optional<FailureClass> failure_class;
    std::size_t replans = 0;
    std::size_t steps = 0;
    std::vector<EpisodeEvent> trace;
};

/// Counts per scenario (or per family aggregate); rates derive from them.
struct ReportRow {
    std::string id;
    std::size_t trials = 0;
    std::size_t planned = 0;
    std::size_t succeeded = 0;
    std::size_t fail_planning = 0;
    std::size_t fail_perception = 0;
    std::size_t fail_execution = 0;
    std::size_t total_replans = 0;
    std::size_t total_steps = 0;

    double plan_rate() const { return trials ? double(planned) / double(trials) : 0.0; }
    double success_rate() const { return trials ? double(succeeded) / double(trials) : 0.0; }
    std::size_t failures() const { return fail_planning + fail_perception + fail_execution; }
    /// Share of failed trials in one class; 0 when nothing failed.
    double failure_share(std::size_t n) const { return failures() ? double(n) / double(failures()) : 0.0; }
    double mean_replans() const { return trials ? double(total_replans) / double(trials) : 0.0; }
    double mean_steps() const { return trials ? double(total_steps) / double(trials) : 0.0; }

    void add(const TrialResult& t) {
        ++trials;
        planned += t.planned;
        succeeded += t.success;
        if (t.failure_class == FailureClass::planning) ++fail_planning;
        if (t.failure_class == FailureClass::perception) ++fail_perception;
        if (t.failure_class == FailureClass::execution) ++fail_execution;
        total_replans += t.replans;
        total_steps += t.steps;
    }

    bool operator==(const ReportRow&) const = default;
};

struct BatchReport {
    std::string planner;
    std::uint64_t base_seed = 0;
    std::size_t trials_per_scenario = 0;
    std::vector<ReportRow> rows; // scenarios sorted by id, then "family:<name>" aggregates

    const ReportRow* find(std::string_view id) const {
        for (const auto& r : rows) {
            if (r.id == id) return &r;
        }
        return nullptr;
    }

    bool operator==(const BatchReport&) const = default;
};

struct BatchOptions {
    std::size_t trials = 20;
    std::uint64_t base_seed = 0;
    std::size_t workers = 1;
    std::optional<std::string> embodiment;   // replaces every scenario's embodiment
    std::optional<double> observation_noise; // replaces every scenario's noise
    ExecutorOptions executor;
    bool keep_traces = false;
};

inline TrialResult run_trial(const ScenarioSpec& scenario, Planner& planner, std::uint64_t seed,
                             const ExecutorOptions& opts = {}, bool keep_trace = true) {
    Inbox inbox;
    const auto catalog = builtin_catalog(scenario.embodiment);
    ExecutorOptions o = opts;
    o.episode_id = scenario.id + "#" + std::to_string(seed);
    auto r = run_episode(scenario, planner, catalog, inbox, seed, o);
    TrialResult t;
    t.scenario_id = scenario.id;
    t.family = scenario.family;
    t.seed = seed;
    t.planned = r.all_policies_valid && r.planner_queries > 0;
    t.success = r.status == EpisodeStatus::success;
    t.failure_class = r.failure_class;
    t.replans = r.replans;
    t.steps = r.steps_executed;
    if (keep_trace) t.trace = std::move(r.trace);
    return t;
}

/// Runs `trials` episodes per scenario with seeds base_seed..base_seed+trials-1.
/// Results come back ordered by (scenario position, seed) regardless of workers.
inline std::vector<TrialResult> run_trials(const std::vector<ScenarioSpec>& corpus, Planner& planner,
                                           const BatchOptions& opts = {}) {
    if (corpus.empty()) throw CorpusError("corpus is empty");
    std::vector<ScenarioSpec> specs = corpus;
    for (auto& s : specs) {
        if (opts.embodiment) s.embodiment = *opts.embodiment;
        if (opts.observation_noise) s.observation_noise = *opts.observation_noise;
    }
    const std::size_t total = specs.size() * opts.trials;
    std::vector<TrialResult> results(total);
    std::atomic<std::size_t> next{0};
    auto work = [&] {
        for (std::size_t i = next++; i < total; i = next++) {
            const auto& spec = specs[i / opts.trials];
            const std::uint64_t seed = opts.base_seed + i % opts.trials;
            results[i] = run_trial(spec, planner, seed, opts.executor, opts.keep_traces);
        }
    };
    const std::size_t workers = std::clamp<std::size_t>(opts.workers, 1, std::max<std::size_t>(total, 1));
    if (workers == 1) {
        work();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
        for (auto& t : pool) t.join();
    }
    return results;
}

inline BatchReport summarize(const std::vector<TrialResult>& trials, std::string planner, std::uint64_t base_seed,
                             std::size_t trials_per_scenario) {
    std::map<std::string, ReportRow> per_scenario;
    std::map<std::string, ReportRow> per_family;
    for (const auto& t : trials) {
        auto& row = per_scenario[t.scenario_id];
        row.id = t.scenario_id;
        row.add(t);
        auto& fam = per_family["family:" + t.family];
        fam.id = "family:" + t.family;
        fam.add(t);
    }
    BatchReport report;
    report.planner = std::move(planner);
    report.base_seed = base_seed;
    report.trials_per_scenario = trials_per_scenario;
    for (auto& [_, r] : per_scenario) report.rows.push_back(r);
    for (auto& [_, r] : per_family) report.rows.push_back(r);
    return report;
}

inline BatchReport run_batch(const std::vector<ScenarioSpec>& corpus, Planner& planner, const BatchOptions& opts = {}) {
    return summarize(run_trials(corpus, planner, opts), planner.backend(), opts.base_seed, opts.trials);
}

// --- report rendering ------------------------------------------------------------

enum class ReportFormat { json, csv, table };

inline ReportFormat report_format_from_string(std::string_view s) {
    if (s == "json") return ReportFormat::json;
    if (s == "csv") return ReportFormat::csv;
    if (s == "table") return ReportFormat::table;
    throw std::invalid_argument("unknown report format: " + std::string(s));
}

inline nlohmann::json to_json(const ReportRow& r) {
    return {{"id", r.id},
            {"trials", r.trials},
            {"planned", r.planned},
            {"succeeded", r.succeeded},
            {"fail_planning", r.fail_planning},
            {"fail_perception", r.fail_perception},
            {"fail_execution", r.fail_execution},
            {"total_replans", r.total_replans},
            {"total_steps", r.total_steps},
            {"plan_rate", r.plan_rate()},
            {"success_rate", r.success_rate()},
            {"mean_replans", r.mean_replans()},
            {"mean_steps", r.mean_steps()}};
}

inline nlohmann::json to_json(const BatchReport& report) {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& r : report.rows) rows.push_back(to_json(r));
    return {{"planner", report.planner},
            {"base_seed", report.base_seed},
            {"trials_per_scenario", report.trials_per_scenario},
            {"rows", rows}};
}

inline BatchReport report_from_json(const nlohmann::json& j) {
    BatchReport report;
    report.planner = j.at("planner").get<std::string>();
    report.base_seed = j.at("base_seed").get<std::uint64_t>();
    report.trials_per_scenario = j.at("trials_per_scenario").get<std::size_t>();
    for (const auto& r : j.at("rows")) {
        ReportRow row;
        row.id = r.at("id").get<std::string>();
        row.trials = r.at("trials").get<std::size_t>();
        row.planned = r.at("planned").get<std::size_t>();
        row.succeeded = r.at("succeeded").get<std::size_t>();
        row.fail_planning = r.at("fail_planning").get<std::size_t>();
        row.fail_perception = r.at("fail_perception").get<std::size_t>();
        row.fail_execution = r.at("fail_execution").get<std::size_t>();
        row.total_replans = r.at("total_replans").get<std::size_t>();
        row.total_steps = r.at("total_steps").get<std::size_t>();
        report.rows.push_back(std::move(row));
    }
    return report;
}

namespace detail {

inline std::string fixed(double v, int digits = 4) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(digits) << v;
    return os.str();
}

} // namespace detail

inline constexpr std::string_view kCsvHeader =
    "scenario_id,trials,plan_rate,success_rate,fail_planning,fail_perception,fail_execution,mean_replans";

/// Failure columns are shares of the row's failed trials.
inline std::string emit_report(const BatchReport& report, ReportFormat format) {
    using detail::fixed;
    std::ostringstream os;
    switch (format) {
    case ReportFormat::json:
        os << to_json(report).dump(2) << '\n';
        break;
    case ReportFormat::csv:
        os << kCsvHeader << '\n';
        for (const auto& r : report.rows) {
            os << r.id << ',' << r.trials << ',' << fixed(r.plan_rate()) << ',' << fixed(r.success_rate()) << ','
               << fixed(r.failure_share(r.fail_planning)) << ',' << fixed(r.failure_share(r.fail_perception)) << ','
               << fixed(r.failure_share(r.fail_execution)) << ',' << fixed(r.mean_replans()) << '\n';
        }
        break;
    case ReportFormat::table: {
        std::size_t w = 11;
        for (const auto& r : report.rows) w = std::max(w, r.id.size());
        os << "planner: " << report.planner << "  seeds: " << report.base_seed << ".."
           << report.base_seed + report.trials_per_scenario - (report.trials_per_scenario ? 1 : 0) << '\n';
        os << std::left << std::setw(int(w)) << "scenario" << std::right << std::setw(7) << "trials" << std::setw(8)
           << "plan" << std::setw(8) << "succ" << std::setw(8) << "f.plan" << std::setw(8) << "f.perc" << std::setw(8)
           << "f.exec" << std::setw(9) << "replans" << std::setw(8) << "steps" << '\n';
        os << std::string(w + 64, '-') << '\n';
        for (const auto& r : report.rows) {
            os << std::left << std::setw(int(w)) << r.id << std::right << std::setw(7) << r.trials << std::setw(8)
               << fixed(r.plan_rate(), 2) << std::setw(8) << fixed(r.success_rate(), 2) << std::setw(8)
               << r.fail_planning << std::setw(8) << r.fail_perception << std::setw(8) << r.fail_execution
               << std::setw(9) << fixed(r.mean_replans(), 2) << std::setw(8) << fixed(r.mean_steps(), 1) << '\n';
        }
        break;
    }
    }
    return os.str();
}

} // namespace vlp
