// Acceptance checks: one PASS/FAIL line per criterion. Exit status is the
// number of failing criteria.

#include <chrono>
#include <iostream>
#include <sstream>

#include "support.hpp"

using namespace vlp;
using namespace vlp::testing;
using namespace std::chrono_literals;

namespace {

struct Check {
    bool ok = true;
    std::ostringstream why;

    void expect(bool cond, const std::string& what) {
        if (!cond && ok) why << what;
        ok = ok && cond;
    }
};

EpisodeResult run(const ScenarioSpec& sc, Planner& planner, std::uint64_t seed, ExecutorOptions opts = {},
                  Inbox* inbox = nullptr) {
    Inbox local;
    return run_episode(sc, planner, builtin_catalog(sc.embodiment), inbox ? *inbox : local, seed, opts);
}

void algorithm_fidelity(Check& c) {
    OraclePlanner oracle;
    BatchOptions opts;
    opts.trials = 20;
    opts.keep_traces = true;
    const auto start = std::chrono::steady_clock::now();
    const auto first = run_trials(static_corpus(), oracle, opts);
    const auto second = run_trials(static_corpus(), oracle, opts);
    const auto elapsed = std::chrono::steady_clock::now() - start;
    const auto report = summarize(first, oracle.backend(), 0, 20);
    for (const auto& row : report.rows) {
        c.expect(row.plan_rate() == 1.0, row.id + " plan_rate " + std::to_string(row.plan_rate()));
        c.expect(row.success_rate() == 1.0, row.id + " success_rate " + std::to_string(row.success_rate()));
    }
    for (std::size_t i = 0; i < first.size(); ++i) {
        c.expect(first[i].trace == second[i].trace, first[i].scenario_id + " trace differs across runs");
    }
    // Two full passes must fit in the budget of one.
    c.expect(elapsed < 10s, "runtime " + std::to_string(std::chrono::duration<double>(elapsed).count()) + " s");
}

void mid_task_replanning(Check& c) {
    OraclePlanner oracle;
    std::size_t covered = 0;
    for (const auto& base : corpus()) {
        if (!base.dynamic) continue;
        bool has_instruction = false;
        for (const auto& e : base.scripted_events) has_instruction |= std::holds_alternative<std::string>(e.event);
        if (!has_instruction) continue;
        for (std::size_t k = 1; k <= 3; ++k) {
            auto sc = base;
            for (auto& e : sc.scripted_events) {
                if (std::holds_alternative<std::string>(e.event)) e.after_step = k;
            }
            const auto r = run(sc, oracle, k);
            const std::string tag = sc.id + " k=" + std::to_string(k) + ": ";
            std::size_t before = 0;
            for (const auto& e : r.trace) {
                if (e.kind == "trigger_fired") break;
                before += e.kind == "step_finished";
            }
            c.expect(r.status == EpisodeStatus::success, tag + "episode failed");
            c.expect(before == k, tag + std::to_string(before) + " old steps executed");
            c.expect(r.memory.count(MemoryEntryKind::trigger_fired) == 1, tag + "trigger memory entries");
            c.expect(r.triggers.size() == 1 && r.triggers[0].kind == TriggerKind::new_instruction,
                     tag + "trigger kind");
            c.expect(r.replans == 1, tag + "replans " + std::to_string(r.replans));
            c.expect(goal_holds(sc.goal, r.final_world), tag + "new goal not satisfied");
            ++covered;
        }
    }
    c.expect(covered >= 6, "fewer than two instruction-driven dynamic scenarios");
}

void state_change_trigger(Check& c) {
    OraclePlanner oracle;
    const auto sc = scenario("pick_place_cup_table");
    const double delta = ExecutorOptions{}.delta_move;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        Inbox inbox;
        ExecutorOptions opts;
        Pose moved = Simulator(sc, seed).state().objects.at("cup").pose;
        moved.y += 10 * delta;
        opts.on_event = [&](const EpisodeEvent& e) {
            if (e.kind == "step_finished" && e.details["step_id"] == "s1") {
                inbox.push_perturbation({PerturbationKind::move_object, "cup", moved, std::nullopt, true});
            }
        };
        const auto r = run(sc, oracle, seed, opts, &inbox);
        const std::string tag = "seed " + std::to_string(seed) + ": ";
        c.expect(r.status == EpisodeStatus::success, tag + "episode failed");
        c.expect(!r.triggers.empty() && r.triggers[0].kind == TriggerKind::task_state_changed, tag + "no trigger");
        c.expect(r.replans >= 1, tag + "no replan");
    }
}

void failure_taxonomy(Check& c) {
    OraclePlanner oracle;
    BatchOptions opts;
    opts.trials = 20;
    opts.observation_noise = 0.1;
    const auto trials = run_trials(static_corpus(), oracle, opts);
    std::size_t failed = 0, planning = 0;
    for (const auto& t : trials) {
        if (t.success) {
            c.expect(!t.failure_class, t.scenario_id + " success carries a failure class");
            continue;
        }
        ++failed;
        c.expect(t.failure_class.has_value(), t.scenario_id + " unclassified failure");
        planning += t.failure_class == FailureClass::planning;
    }
    const auto report = summarize(trials, "oracle", 0, 20);
    for (const auto& row : report.rows) {
        c.expect(row.succeeded + row.failures() == row.trials, row.id + " partition does not cover trials");
    }
    c.expect(failed > 0, "noise produced no failures");
    c.expect(planning == 0, std::to_string(planning) + " planning failures");
}

void policy_schema(Check& c) {
    std::mt19937_64 rng(7);
    for (int i = 0; i < 10000; ++i) {
        const auto p = random_policy(rng);
        const auto text = serialize_policy(p);
        c.expect(parse_policy(text) == p && serialize_policy(parse_policy(text)) == text, "round trip " + text);
    }
    const auto catalog = builtin_catalog("quadruped_manipulator");
    const auto reference = single_phase({
        step("s1", StepKind::perception, "grasp_point", {{"label", std::string("cup")}}),
        step("s2", StepKind::action, "grasp", {{"pose", ParamRef{"s1", "pose"}}}),
        step("s3", StepKind::perception, "locate_object", {{"label", std::string("table")}}),
        step("s4", StepKind::action, "place", {{"pose", ParamRef{"s3", "pose"}}}),
    });
    c.expect(validate_policy(reference, catalog).ok, "reference policy rejected");
    auto unknown = reference;
    unknown.phases[0].steps[1].name = "teleport";
    auto forward = reference;
    forward.phases[0].steps[1].params["pose"] = ParamRef{"s3", "pose"};
    auto duplicate = reference;
    duplicate.phases[0].steps[3].id = "s2";
    auto mismatch = reference;
    mismatch.phases[0].steps[1].kind = StepKind::perception;
    const std::pair<const Policy*, const char*> mutations[] = {{&unknown, "UnknownPrimitive"},
                                                               {&forward, "ForwardReference"},
                                                               {&duplicate, "DuplicateStepId"},
                                                               {&mismatch, "KindMismatch"}};
    for (const auto& [p, code] : mutations) {
        const auto r = validate_policy(*p, catalog);
        c.expect(!r.ok && r.has(code), std::string("mutation not rejected with ") + code);
    }
}

void remote_wire_contract(Check& c) {
    Policy policy = single_phase({step("s1", StepKind::action, "homing")}, "home");
    const auto canonical = serialize_policy(policy);
    Observation o;
    o.robot.embodiment = quadruped_manipulator();
    const PlannerRequest req{"go home", o, o.robot,
                             render_catalog_for_prompt(builtin_catalog("quadruped_manipulator")), ""};
    auto reply = [](std::string content) {
        return [content](const httplib::Request&, httplib::Response& res, int) {
            res.set_content(chat_reply(content), "application/json");
        };
    };
    {
        StubChatServer stub(reply("```json\n" + canonical + "\n```"));
        RemotePlanner planner({stub.url(), "stub", 2000ms, 0, 0.0});
        c.expect(planner.plan(req).policy == policy, "fenced reply not parsed");
    }
    {
        StubChatServer stub(reply("Sure. " + canonical + " Done."));
        RemotePlanner planner({stub.url(), "stub", 2000ms, 0, 0.0});
        c.expect(planner.plan(req).policy == policy, "prose reply not parsed");
    }
    {
        StubChatServer stub(reply("no plan today"));
        RemotePlanner planner({stub.url(), "stub", 2000ms, 0, 0.0});
        c.expect(!planner.plan(req).policy, "absent JSON parsed");
        const auto r = run(scenario("pick_place_cup_table"), planner, 0);
        c.expect(r.status == EpisodeStatus::failure && r.failure_class == FailureClass::planning,
                 "absent JSON is not a planning failure");
    }
    for (int retries : {0, 1, 3}) {
        StubChatServer stub([](const httplib::Request&, httplib::Response& res, int) { res.status = 503; });
        RemotePlanner planner({stub.url(), "stub", 2000ms, retries, 0.0});
        int attempts = -1;
        try {
            planner.plan(req);
        } catch (const PlannerUnavailable& e) {
            attempts = e.attempts();
        }
        c.expect(attempts == retries + 1 && stub.calls() == retries + 1,
                 "retries=" + std::to_string(retries) + " made " + std::to_string(stub.calls()) + " calls");
    }
    {
        StubChatServer stub([](const httplib::Request&, httplib::Response& res, int) {
            std::this_thread::sleep_for(700ms);
            res.set_content(chat_reply("late"), "application/json");
        });
        const auto timeout = 150ms;
        const int retries = 2;
        RemotePlanner planner({stub.url(), "stub", timeout, retries, 0.0});
        const auto start = std::chrono::steady_clock::now();
        bool timed_out = false;
        int attempts = -1;
        try {
            planner.plan(req);
        } catch (const PlannerUnavailable& e) {
            timed_out = e.cause() == PlannerUnavailable::Cause::timeout;
            attempts = e.attempts();
        }
        const auto elapsed = std::chrono::steady_clock::now() - start;
        const auto budget = timeout * (retries + 1);
        c.expect(timed_out && attempts == retries + 1, "timeout not reported after every attempt");
        c.expect(elapsed >= budget * 9 / 10 && elapsed < budget + 500ms,
                 "elapsed " + std::to_string(std::chrono::duration<double>(elapsed).count()) + " s");
    }
}

void cross_embodiment(Check& c) {
    OraclePlanner oracle;
    for (const auto* embodiment : {"quadruped_manipulator", "mobile_manipulator"}) {
        BatchOptions opts;
        opts.trials = 20;
        opts.embodiment = embodiment;
        const auto report = run_batch(static_corpus(), oracle, opts);
        for (const auto& row : report.rows) {
            c.expect(row.success_rate() == 1.0, std::string(embodiment) + " " + row.id);
        }
    }
}

void prompt_fidelity(Check& c) {
    Simulator sim(scenario("pick_place_cup_table"), 0);
    const auto obs = sim.observe();
    const PlannerRequest req{"Put the cup on the table.", obs, obs.robot,
                             render_catalog_for_prompt(builtin_catalog("quadruped_manipulator")),
                             "[0] instruction_received: Put the cup on the table.\n"};
    auto text = [](const ChatMessage& m) {
        return m.content.is_string() ? m.content.get<std::string>() : m.content.at(0).at("text").get<std::string>();
    };
    const auto grounding = assemble_prompt(req, PromptMode::grounding, {"cup", "grasp"});
    const auto first = text(grounding.at(0));
    c.expect(first.rfind("You are a robotic perceptor.\n", 0) == 0, "grounding prompt role line");
    std::string all;
    for (const auto& m : assemble_prompt(req, PromptMode::policy)) all += text(m) + "\n";
    for (const auto& part : {req.instruction, render_observation(obs), render_robot_state(obs.robot), req.catalog_text,
                             req.memory_digest}) {
        c.expect(all.find(part) != std::string::npos, "policy prompt lacks: " + part.substr(0, 40));
    }
}

} // namespace

int main() {
    const std::pair<const char*, void (*)(Check&)> criteria[] = {
        {"algorithm_fidelity", algorithm_fidelity},     {"mid_task_replanning", mid_task_replanning},
        {"state_change_trigger", state_change_trigger}, {"failure_taxonomy", failure_taxonomy},
        {"policy_schema", policy_schema},               {"remote_wire_contract", remote_wire_contract},
        {"cross_embodiment", cross_embodiment},         {"prompt_fidelity", prompt_fidelity},
    };
    int failures = 0;
    for (const auto& [name, fn] : criteria) {
        Check c;
        try {
            fn(c);
        } catch (const std::exception& e) {
            c.expect(false, std::string("exception: ") + e.what());
        }
        std::cout << (c.ok ? "PASS " : "FAIL ") << name;
        if (!c.ok) std::cout << " (" << c.why.str() << ")";
        std::cout << std::endl;
        failures += !c.ok;
    }
    return failures;
}
