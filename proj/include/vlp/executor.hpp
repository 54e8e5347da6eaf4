#pragma once

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "vlp/errors.hpp"
#include "vlp/planner.hpp"
#include "vlp/policy.hpp"
#include "vlp/primitives.hpp"
#include "vlp/scenario.hpp"
#include "vlp/sim.hpp"
#include "vlp/validate.hpp"

namespace vlp {

// --- task memory -------------------------------------------------------------

enum class MemoryEntryKind { instruction_received, policy_generated, step_executed, trigger_fired, episode_closed };

inline std::string_view to_string(MemoryEntryKind k) {
    switch (k) {
    case MemoryEntryKind::instruction_received: return "instruction_received";
    case MemoryEntryKind::policy_generated: return "policy_generated";
    case MemoryEntryKind::step_executed: return "step_executed";
    case MemoryEntryKind::trigger_fired: return "trigger_fired";
    case MemoryEntryKind::episode_closed: return "episode_closed";
    }
    return "?";
}

struct MemoryEntry {
    MemoryEntryKind kind;
    std::uint64_t tick = 0;
    std::string text;
};

/// Append-only episode log. Only its most recent entries reach the planner.
class TaskMemory {
public:
    TaskMemory() = default;
    explicit TaskMemory(std::string episode_id) : episode_id_(std::move(episode_id)) {}

    void append(MemoryEntryKind kind, std::uint64_t tick, std::string text) {
        entries_.push_back({kind, tick, std::move(text)});
    }

    const std::string& episode_id() const { return episode_id_; }
    const std::vector<MemoryEntry>& entries() const { return entries_; }

    std::size_t count(MemoryEntryKind kind) const {
        return static_cast<std::size_t>(
            std::count_if(entries_.begin(), entries_.end(), [&](const auto& e) { return e.kind == kind; }));
    }

    /// One line per entry, oldest first, at most `window` entries.
    std::string digest(std::size_t window = 20) const {
        std::ostringstream os;
        const std::size_t first = entries_.size() > window ? entries_.size() - window : 0;
        for (std::size_t i = first; i < entries_.size(); ++i) {
            os << '[' << entries_[i].tick << "] " << to_string(entries_[i].kind) << ": " << entries_[i].text << '\n';
        }
        return os.str();
    }

private:
    std::string episode_id_;
    std::vector<MemoryEntry> entries_;
};

// --- triggers and events -------------------------------------------------------

enum class TriggerKind { new_instruction, task_state_changed };

inline std::string_view to_string(TriggerKind k) {
    return k == TriggerKind::new_instruction ? "new_instruction" : "task_state_changed";
}

struct Trigger {
    TriggerKind kind;
    std::string payload; // instruction text or state-diff summary
    std::uint64_t at_tick = 0;
};

struct EpisodeEvent {
    std::uint64_t tick = 0;
    std::string kind;
    nlohmann::json details = nlohmann::json::object();

    bool operator==(const EpisodeEvent&) const = default;
};

/// Canonical single-line form: sorted keys, no whitespace.
inline std::string serialize_event(const EpisodeEvent& e) {
    return nlohmann::json{{"tick", e.tick}, {"kind", e.kind}, {"details", e.details}}.dump();
}

inline EpisodeEvent parse_event(std::string_view line) {
    auto j = nlohmann::json::parse(line);
    return {j.at("tick").get<std::uint64_t>(), j.at("kind").get<std::string>(), j.at("details")};
}

inline std::string serialize_trace(std::span<const EpisodeEvent> trace) {
    std::string out;
    for (const auto& e : trace) {
        out += serialize_event(e);
        out += '\n';
    }
    return out;
}

// --- inbox ---------------------------------------------------------------------

/// Serialized external event source owned by one episode. Producers on any
/// thread may push; the control loop consumes at step boundaries only.
class Inbox {
public:
    bool push_instruction(std::string text) {
        std::lock_guard lock(mu_);
        if (closed_) return false;
        instructions_.push_back(std::move(text));
        return true;
    }

    bool push_perturbation(Perturbation p) {
        std::lock_guard lock(mu_);
        if (closed_) return false;
        perturbations_.push_back(std::move(p));
        return true;
    }

    std::optional<std::string> pop_instruction() {
        std::lock_guard lock(mu_);
        if (instructions_.empty()) return std::nullopt;
        auto s = std::move(instructions_.front());
        instructions_.pop_front();
        return s;
    }

    std::vector<Perturbation> drain_perturbations() {
        std::lock_guard lock(mu_);
        std::vector<Perturbation> out(perturbations_.begin(), perturbations_.end());
        perturbations_.clear();
        return out;
    }

    /// Refuses further pushes; returns instructions that were never consumed.
    std::vector<std::string> close() {
        std::lock_guard lock(mu_);
        closed_ = true;
        std::vector<std::string> out(instructions_.begin(), instructions_.end());
        instructions_.clear();
        perturbations_.clear();
        return out;
    }

    bool closed() const {
        std::lock_guard lock(mu_);
        return closed_;
    }

private:
    mutable std::mutex mu_;
    std::deque<std::string> instructions_;
    std::deque<Perturbation> perturbations_;
    bool closed_ = false;
};

// --- state-change detection -------------------------------------------------------

/// What the executor believes about the scene since the policy was planned.
struct ExpectedState {
    std::map<std::string, Pose> poses;  // last known pose per object
    std::set<std::string> tracked;      // objects the remaining steps depend on
    std::optional<std::string> holding; // expected gripper content
};

struct StateDiff {
    enum class Kind { moved, disappeared, postcondition };
    Kind kind = Kind::moved;
    std::string label;
    double displacement = 0.0;

    std::string summary() const {
        std::ostringstream os;
        switch (kind) {
        case Kind::moved: os << label << " moved " << displacement << " m"; break;
        case Kind::disappeared: os << label << " disappeared"; break;
        case Kind::postcondition: os << "gripper no longer matches expectation (" << label << ")"; break;
        }
        return os.str();
    }

    std::string_view kind_name() const {
        switch (kind) {
        case Kind::moved: return "moved";
        case Kind::disappeared: return "disappeared";
        case Kind::postcondition: return "postcondition";
        }
        return "?";
    }
};

/// Object labels the steps from `next` onward depend on: named directly via a
/// `label` parameter, or through a $ref to a perception step that named one.
inline std::set<std::string> tracked_labels(std::span<const BehaviorStep> steps, std::size_t next) {
    std::map<std::string, std::string> label_of;
    for (const auto& s : steps) {
        auto it = s.params.find("label");
        if (it != s.params.end()) {
            if (const auto* l = std::get_if<std::string>(&it->second)) label_of[s.id] = *l;
        }
    }
    std::set<std::string> out;
    for (std::size_t i = next; i < steps.size(); ++i) {
        for (const auto& [key, v] : steps[i].params) {
            if (key == "label") {
                if (const auto* l = std::get_if<std::string>(&v)) out.insert(*l);
            } else if (const auto* r = std::get_if<ParamRef>(&v)) {
                if (auto it = label_of.find(r->step_id); it != label_of.end()) out.insert(it->second);
            }
        }
    }
    return out;
}

/// Fires when a tracked object moved strictly more than `delta_move`, a
/// tracked object vanished, or the gripper contents contradict the completed
/// grasp/place steps.
inline std::optional<StateDiff> detect_state_change(const ExpectedState& expected, const Observation& observed,
                                                    double delta_move = kDefaultMoveThreshold) {
    if (expected.holding != observed.robot.gripper_holding) {
        return StateDiff{StateDiff::Kind::postcondition,
                         expected.holding.value_or(observed.robot.gripper_holding.value_or("none")), 0.0};
    }
    for (const auto& label : expected.tracked) {
        const auto* seen = observed.find(label);
        if (!seen) return StateDiff{StateDiff::Kind::disappeared, label, 0.0};
        if (seen->held) continue; // travels with the gripper
        auto it = expected.poses.find(label);
        if (it == expected.poses.end()) continue;
        const double d = distance(seen->pose, it->second);
        if (d > delta_move) return StateDiff{StateDiff::Kind::moved, label, d};
    }
    return std::nullopt;
}

// --- parameter propagation -------------------------------------------------------

struct StepResult {
    bool success = false;
    Params outputs;
};

inline BehaviorStep resolve_params(const BehaviorStep& step, const std::map<std::string, StepResult>& results) {
    BehaviorStep out = step;
    for (auto& [key, value] : out.params) {
        const auto* ref = std::get_if<ParamRef>(&value);
        if (!ref) continue;
        auto it = results.find(ref->step_id);
        if (it == results.end()) {
            throw UnresolvedReference("step '" + step.id + "': $ref " + ref->str() + " names a step that has not run");
        }
        if (!it->second.success) {
            throw UnresolvedReference("step '" + step.id + "': $ref " + ref->str() + " names a failed step");
        }
        auto field = it->second.outputs.find(ref->field);
        if (field == it->second.outputs.end()) {
            throw UnresolvedReference("step '" + step.id + "': step '" + ref->step_id + "' produced no '" +
                                      ref->field + "'");
        }
        value = field->second;
    }
    return out;
}

// --- failure classification ----------------------------------------------------------

/// Assigns exactly one class to a failed episode from its trace.
///
/// planning: the closing cause was unusable planner output (no policy,
///   validation errors, planner unreachable) or a $ref that could not be
///   resolved; also when every policy ran cleanly yet never reached the goal.
/// perception: otherwise, if any perception result strayed more than
///   `delta_move` from ground truth, a perception primitive failed, or a
///   state-change trigger was a false alarm caused by observation noise.
/// execution: otherwise, when an action primitive failed.
inline FailureClass classify_failure(std::span<const EpisodeEvent> history,
                                     double delta_move = kDefaultMoveThreshold) {
    enum class Cause { none, planning, step };
    Cause last = Cause::none;
    bool perception_wrong = false;
    bool execution_failed = false;
    for (const auto& e : history) {
        if (e.kind == "policy_rejected" || e.kind == "reference_failed" || e.kind == "planner_unavailable") {
            last = Cause::planning;
        } else if (e.kind == "step_finished") {
            const auto& d = e.details;
            if (d.contains("perception_error") && d["perception_error"].is_number() &&
                d["perception_error"].get<double>() > delta_move) {
                perception_wrong = true;
            }
            if (!d.value("success", false)) {
                last = Cause::step;
                if (d.value("failure_class", "") == "perception") {
                    perception_wrong = true;
                } else {
                    execution_failed = true;
                }
            }
        } else if (e.kind == "trigger_fired" && e.details.value("false_alarm", false)) {
            perception_wrong = true;
        }
    }
    if (last == Cause::planning) return FailureClass::planning;
    if (perception_wrong) return FailureClass::perception;
    if (execution_failed) return FailureClass::execution;
    return FailureClass::planning;
}

// --- episode loop ------------------------------------------------------------------

enum class EpisodeStatus { success, failure };

inline std::string_view to_string(EpisodeStatus s) { return s == EpisodeStatus::success ? "success" : "failure"; }

struct EpisodeResult {
    EpisodeStatus status = EpisodeStatus::failure;
    std::optional<FailureClass> failure_class;
    std::size_t replans = 0;
    std::size_t steps_executed = 0;
    std::vector<EpisodeEvent> trace;
    std::vector<Trigger> triggers;
    TaskMemory memory;
    WorldState final_world;
    std::size_t planner_queries = 0;
    bool all_policies_valid = true; // every query yielded a policy with no validation errors
};

struct ExecutorOptions {
    std::size_t max_replans = 5;
    double delta_move = kDefaultMoveThreshold;
    std::size_t memory_window = 20;
    std::optional<double> observation_noise; // overrides the scenario's declaration
    std::chrono::milliseconds step_delay{0}; // pacing for live steering
    std::string episode_id = "episode";
    std::function<void(const EpisodeEvent&)> on_event;
    std::function<void(const Observation&)> on_snapshot; // noise-free, after each Update
};

namespace detail {

inline nlohmann::json params_to_json(const Params& params) {
    nlohmann::json j = nlohmann::json::object();
    for (const auto& [k, v] : params) j[k] = param_to_json(v);
    return j;
}

} // namespace detail

/// Runs one episode: plan, execute step by step with state feedback, and
/// regenerate the policy on a new instruction or a detected state change.
inline EpisodeResult run_episode(const ScenarioSpec& scenario, Planner& planner, const PrimitiveCatalog& catalog,
                                 Inbox& inbox, std::uint64_t seed, const ExecutorOptions& opts = {}) {
    ScenarioSpec sc = scenario;
    if (opts.observation_noise) sc.observation_noise = *opts.observation_noise;
    Simulator sim(sc, seed);
    const std::string catalog_text = render_catalog_for_prompt(catalog);

    EpisodeResult res;
    res.memory = TaskMemory(opts.episode_id);
    auto emit = [&](std::string kind, nlohmann::json details) {
        EpisodeEvent e{sim.state().tick, std::move(kind), std::move(details)};
        if (opts.on_event) opts.on_event(e);
        res.trace.push_back(std::move(e));
    };
    auto remember = [&](MemoryEntryKind kind, std::string text) {
        res.memory.append(kind, sim.state().tick, std::move(text));
    };
    auto snapshot = [&] {
        if (opts.on_snapshot) opts.on_snapshot(sim.snapshot());
    };

    std::vector<ScriptedEvent> scripted = sc.scripted_events;
    std::stable_sort(scripted.begin(), scripted.end(),
                     [](const auto& a, const auto& b) { return a.after_step < b.after_step; });
    std::size_t next_scripted = 0;

    auto apply_perturbation_event = [&](const Perturbation& p, const char* source) {
        try {
            sim.apply(p);
            emit("perturbation_applied", {{"perturbation", to_json(p)}, {"source", source}});
        } catch (const Error& e) {
            emit("perturbation_rejected", {{"perturbation", to_json(p)}, {"source", source}, {"error", e.code()}});
        }
    };
    auto deliver_external = [&](std::size_t steps_done) {
        while (next_scripted < scripted.size() && scripted[next_scripted].after_step <= steps_done) {
            const auto& ev = scripted[next_scripted++];
            if (ev.after_step != steps_done) continue;
            if (const auto* text = std::get_if<std::string>(&ev.event)) {
                inbox.push_instruction(*text);
            } else {
                apply_perturbation_event(std::get<Perturbation>(ev.event), "scripted");
            }
        }
        for (const auto& p : inbox.drain_perturbations()) apply_perturbation_event(p, "inbox");
    };

    auto close = [&](EpisodeStatus status, std::optional<FailureClass> fc) {
        for (const auto& text : inbox.close()) emit("instruction_discarded", {{"text", text}});
        res.status = status;
        res.failure_class = status == EpisodeStatus::failure ? fc : std::nullopt;
        res.final_world = sim.state();
        std::string summary(to_string(status));
        if (res.failure_class) summary += " (" + std::string(to_string(*res.failure_class)) + ")";
        remember(MemoryEntryKind::episode_closed, summary);
        emit("episode_closed", {{"status", std::string(to_string(status))},
                                {"failure_class", res.failure_class ? nlohmann::json(std::string(to_string(*res.failure_class)))
                                                                    : nlohmann::json()},
                                {"replans", res.replans},
                                {"steps_executed", res.steps_executed}});
        snapshot();
        return res;
    };
    auto fail = [&] { return close(EpisodeStatus::failure, classify_failure(res.trace, opts.delta_move)); };

    std::string instruction = sc.instruction;
    emit("episode_started", {{"scenario", sc.id},
                             {"instruction", instruction},
                             {"seed", seed},
                             {"embodiment", catalog.embodiment().name},
                             {"episode_id", opts.episode_id}});
    remember(MemoryEntryKind::instruction_received, instruction);
    emit("instruction_received", {{"text", instruction}});
    deliver_external(0);
    snapshot();

    std::string replan_reason;
    while (true) {
        if (res.planner_queries > 0) {
            if (res.replans >= opts.max_replans) {
                emit("replan_budget_exhausted", {{"replans", res.replans}, {"reason", replan_reason}});
                return fail();
            }
            ++res.replans;
            emit("replanned", {{"reason", replan_reason}, {"replans", res.replans}});
        }

        // Acquire o_t, s_t and query the planner.
        const Observation obs = sim.observe();
        PlannerRequest request{instruction, obs, obs.robot, catalog_text, res.memory.digest(opts.memory_window)};
        emit("planner_queried", {{"instruction", instruction}, {"query", res.planner_queries + 1}});
        ++res.planner_queries;

        PlannerResponse response;
        try {
            response = planner.plan(request);
        } catch (const PlannerUnavailable& e) {
            res.all_policies_valid = false;
            remember(MemoryEntryKind::policy_generated, "none (planner unavailable)");
            emit("planner_unavailable", {{"attempts", e.attempts()}, {"message", e.what()}});
            return fail();
        }

        if (!response.policy) {
            res.all_policies_valid = false;
            remember(MemoryEntryKind::policy_generated, "none (no policy in planner output)");
            emit("policy_generated", {{"digest", nullptr}, {"valid", false}});
            emit("policy_rejected", {{"reason", "no policy in planner output"}, {"raw_output", response.raw_output}});
            replan_reason = "invalid_policy";
            continue;
        }

        const Policy& policy = *response.policy;
        const auto report = validate_policy(policy, catalog, SymbolicState::from_robot(sim.state().robot));
        const std::string digest = policy_digest(policy);
        remember(MemoryEntryKind::policy_generated, digest + " " + policy.task_summary);
        nlohmann::json issues = nlohmann::json::array();
        for (const auto& i : report.issues) {
            issues.push_back({{"severity", i.severity == Severity::error ? "error" : "warning"},
                              {"step_id", i.step_id ? nlohmann::json(*i.step_id) : nlohmann::json()},
                              {"code", i.code}});
        }
        emit("policy_generated",
             {{"digest", digest}, {"valid", report.ok}, {"policy", policy_to_json(policy)}, {"issues", issues}});
        if (!report.ok) {
            res.all_policies_valid = false;
            emit("policy_rejected", {{"reason", "validation errors"}, {"digest", digest}});
            replan_reason = "invalid_policy";
            continue;
        }

        const auto steps = flatten(policy);
        ExpectedState expected;
        expected.holding = obs.robot.gripper_holding;
        for (const auto& o : obs.objects) expected.poses[o.label] = o.pose;
        std::map<std::string, Pose> truth; // ground truth the expectation corresponds to
        for (const auto& [label, o] : sim.state().objects) truth[label] = o.pose;

        std::map<std::string, StepResult> results;
        replan_reason = "policy_exhausted";
        for (std::size_t i = 0; i < steps.size(); ++i) {
            const auto& step = steps[i];
            BehaviorStep resolved;
            try {
                resolved = resolve_params(step, results);
            } catch (const UnresolvedReference& e) {
                emit("reference_failed", {{"step_id", step.id}, {"message", e.what()}});
                if (step.on_fail == OnFail::abort) return fail();
                replan_reason = "reference_failed";
                break;
            }

            // Execute(a)
            emit("step_started",
                 {{"step_id", step.id}, {"name", step.name}, {"params", detail::params_to_json(resolved.params)}});
            const StepOutcome outcome = sim.execute(resolved, catalog);
            ++res.steps_executed;
            results[step.id] = {outcome.success, outcome.outputs};

            nlohmann::json fin = {{"step_id", step.id}, {"name", step.name}, {"success", outcome.success}};
            if (!outcome.success) {
                fin["failure_class"] = std::string(to_string(*outcome.failure_class));
                fin["reason"] = outcome.reason;
            }
            if (!outcome.outputs.empty()) fin["outputs"] = detail::params_to_json(outcome.outputs);
            if (outcome.perception_error) fin["perception_error"] = *outcome.perception_error;
            remember(MemoryEntryKind::step_executed,
                     step.id + " " + step.name + (outcome.success ? " -> ok" : " -> failed: " + outcome.reason));
            emit("step_finished", std::move(fin));
            if (opts.step_delay.count() > 0) std::this_thread::sleep_for(opts.step_delay);

            // Update (o_t, s_t); external events land here, at the step boundary.
            deliver_external(res.steps_executed);
            snapshot();

            if (goal_holds(sc.goal, sim.state())) return close(EpisodeStatus::success, std::nullopt);

            if (!outcome.success) {
                if (step.on_fail == OnFail::abort) return fail();
                replan_reason = "step_failed";
                break;
            }

            if (outcome.subject) {
                if (step.name == "grasp") expected.holding = outcome.subject;
                if (step.name == "place" || step.name == "handover") expected.holding.reset();
                if (step.kind == StepKind::action) {
                    if (const auto* o = sim.state().find(*outcome.subject)) {
                        expected.poses[o->label] = o->pose;
                        truth[o->label] = o->pose;
                    }
                }
            }

            // Strategic trigger: new instruction OR task state changed.
            if (auto text = inbox.pop_instruction()) {
                Trigger t{TriggerKind::new_instruction, *text, sim.state().tick};
                res.triggers.push_back(t);
                remember(MemoryEntryKind::trigger_fired, "new_instruction: " + *text);
                emit("trigger_fired", {{"kind", "new_instruction"}, {"payload", *text}});
                instruction = *text;
                remember(MemoryEntryKind::instruction_received, instruction);
                emit("instruction_received", {{"text", instruction}});
                replan_reason = "trigger";
                break;
            }
            if (i + 1 < steps.size()) {
                expected.tracked = tracked_labels(steps, i + 1);
                if (auto diff = detect_state_change(expected, sim.observe(), opts.delta_move)) {
                    bool false_alarm = false;
                    if (diff->kind == StateDiff::Kind::moved) {
                        const auto* o = sim.state().find(diff->label);
                        auto was = truth.find(diff->label);
                        false_alarm = o && was != truth.end() && distance(o->pose, was->second) <= opts.delta_move;
                    }
                    Trigger t{TriggerKind::task_state_changed, diff->summary(), sim.state().tick};
                    res.triggers.push_back(t);
                    remember(MemoryEntryKind::trigger_fired, "task_state_changed: " + t.payload);
                    emit("trigger_fired", {{"kind", "task_state_changed"},
                                           {"payload", t.payload},
                                           {"diff", {{"kind", std::string(diff->kind_name())},
                                                     {"label", diff->label},
                                                     {"displacement", diff->displacement}}},
                                           {"false_alarm", false_alarm}});
                    replan_reason = "trigger";
                    break;
                }
            }
        }
    }
}

} // namespace vlp
