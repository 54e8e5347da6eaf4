#pragma once

#include <algorithm>
#include <cctype>
#include <chrono>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "vlp/embodiment.hpp"
#include "vlp/errors.hpp"
#include "vlp/planner.hpp"
#include "vlp/policy.hpp"
#include "vlp/world_state.hpp"

namespace vlp {

/// What the oracle understood from an instruction.
struct OracleIntent {
    enum class Delivery { none, place, handover, dispose };

    Delivery delivery = Delivery::none;
    std::string object;      // graspable object to manipulate
    std::string destination; // place/handover/dispose target
    std::optional<std::string> close_target; // articulated object to push closed
    bool conditional_close = false;          // close only if it is (or becomes) open
};

namespace oracle_detail {

inline std::string normalize(std::string_view text) {
    std::string out = " ";
    for (char c : text) {
        const auto u = static_cast<unsigned char>(c);
        if (std::isalnum(u)) {
            out += static_cast<char>(std::tolower(u));
        } else if (out.back() != ' ') {
            out += ' ';
        }
    }
    if (out.back() != ' ') out += ' ';
    return out;
}

inline std::string label_words(const std::string& label) { return normalize(label); }

/// Position of a whole-word mention of `label` in normalized text.
inline std::optional<std::size_t> mention(const std::string& text, const std::string& label) {
    auto pos = text.find(label_words(label));
    if (pos == std::string::npos) return std::nullopt;
    return pos;
}

inline bool has_word(const std::string& text, std::string_view word) {
    return text.find(" " + std::string(word) + " ") != std::string::npos;
}

inline bool has_any(const std::string& text, std::initializer_list<std::string_view> words) {
    return std::any_of(words.begin(), words.end(), [&](auto w) { return has_word(text, w); });
}

inline bool is_person(const ObservedObject& o) {
    return !o.graspable && (o.label == "operator" || o.label == "person" || o.label == "human" || o.label == "user");
}

/// Earliest-mentioned object satisfying `keep`, or nullopt.
template <typename Pred>
std::optional<std::string> first_mentioned(const std::string& text, const Observation& obs, Pred keep) {
    std::optional<std::string> best;
    std::size_t best_pos = std::string::npos;
    std::size_t best_len = 0;
    for (const auto& o : obs.objects) {
        if (!keep(o)) continue;
        if (auto pos = mention(text, o.label)) {
            // Longest label wins on ties ("red cup" over "cup").
            if (!best || *pos < best_pos || (*pos == best_pos && o.label.size() > best_len)) {
                best = o.label;
                best_pos = *pos;
                best_len = o.label.size();
            }
        }
    }
    return best;
}

/// "it" refers to the held object, else to the object of the most recent
/// earlier instruction in the memory digest that named one.
inline std::optional<std::string> resolve_pronoun(const PlannerRequest& req, const Observation& obs) {
    if (req.robot_state.gripper_holding) return req.robot_state.gripper_holding;
    static constexpr std::string_view kTag = "instruction_received: ";
    std::vector<std::string> instructions;
    std::istringstream in(req.memory_digest);
    for (std::string line; std::getline(in, line);) {
        if (auto p = line.find(kTag); p != std::string::npos) instructions.push_back(line.substr(p + kTag.size()));
    }
    for (auto it = instructions.rbegin(); it != instructions.rend(); ++it) {
        auto found = first_mentioned(normalize(*it), obs, [](const auto& o) { return o.graspable; });
        if (found) return found;
    }
    return std::nullopt;
}

} // namespace oracle_detail

/// Keyword-and-slot reading of an instruction against the visible scene.
inline OracleIntent parse_intent(const PlannerRequest& req, const Observation& obs) {
    using namespace oracle_detail;
    const std::string text = normalize(req.instruction);
    OracleIntent intent;

    std::string manip = text;
    if (has_word(text, "close")) {
        auto articulated = first_mentioned(text, obs, [](const auto& o) { return o.closed_pose.has_value(); });
        if (articulated) {
            intent.close_target = articulated;
            intent.conditional_close = has_word(text, "if") || has_word(text, "when") || has_word(text, "whenever");
            manip = text.substr(0, text.find(" close ") + 1);
            for (std::string_view tail : {" and ", " then ", " also "}) {
                while (manip.size() >= tail.size() && manip.ends_with(tail)) {
                    manip.erase(manip.size() - tail.size() + 1);
                }
            }
        }
    }

    const bool has_content = manip.find_first_not_of(' ') != std::string::npos &&
                             manip != " and " && manip != " then ";
    if (has_content) {
        auto object = first_mentioned(manip, obs, [](const auto& o) { return o.graspable; });
        if (!object && has_any(manip, {"it", "this", "that"})) object = resolve_pronoun(req, obs);

        if (has_any(manip, {"me", "operator"}) && has_any(manip, {"hand", "give", "bring", "pass", "handover"})) {
            auto person = std::find_if(obs.objects.begin(), obs.objects.end(), is_person);
            if (person == obs.objects.end() || !object) throw UnsupportedInstruction(req.instruction);
            intent.delivery = OracleIntent::Delivery::handover;
            intent.object = *object;
            intent.destination = person->label;
        } else if (has_any(manip, {"throw", "dispose", "discard", "trash", "bin", "garbage", "away"})) {
            auto bin = first_mentioned(manip, obs, [](const auto& o) { return o.receptacle; });
            if (!bin) {
                auto it = std::find_if(obs.objects.begin(), obs.objects.end(), [](const auto& o) { return o.receptacle; });
                if (it != obs.objects.end()) bin = it->label;
            }
            if (!bin || !object) throw UnsupportedInstruction(req.instruction);
            intent.delivery = OracleIntent::Delivery::dispose;
            intent.object = *object;
            intent.destination = *bin;
        } else if (has_any(manip, {"pick", "put", "place", "move", "set", "bring", "take", "return"})) {
            auto dest = first_mentioned(manip, obs, [&](const auto& o) {
                return !o.graspable && !is_person(o) && (!object || o.label != *object);
            });
            if (!dest || !object) throw UnsupportedInstruction(req.instruction);
            intent.delivery = OracleIntent::Delivery::place;
            intent.object = *object;
            intent.destination = *dest;
        } else if (!intent.close_target) {
            throw UnsupportedInstruction(req.instruction);
        }
    }
    if (intent.delivery == OracleIntent::Delivery::none && !intent.close_target) {
        throw UnsupportedInstruction(req.instruction);
    }
    return intent;
}

namespace oracle_detail {

/// Accumulates phases while tracking where the base will be, so that
/// move_base is inserted exactly when a target falls outside arm reach.
class PolicyBuilder {
public:
    PolicyBuilder(const RobotState& robot) : base_(robot.base_pose), embodiment_(robot.embodiment) {}

    void begin(std::string phase) { phases_.push_back({std::move(phase), {}}); }

    std::string add(StepKind kind, std::string name, Params params = {}) {
        BehaviorStep s;
        s.id = "s" + std::to_string(++counter_);
        s.kind = kind;
        s.name = std::move(name);
        s.params = std::move(params);
        phases_.back().steps.push_back(s);
        return s.id;
    }

    std::string locate(const std::string& label) {
        return add(StepKind::perception, "locate_object", {{"label", label}});
    }

    /// Drives the base when `seen` is out of reach; `ref` is the located pose.
    void approach(const Pose& seen, const std::string& ref_step) {
        if (within_reach(base_, seen, embodiment_.reach_radius) || !embodiment_.base_mobile) return;
        add(StepKind::action, "move_base", {{"pose", ParamRef{ref_step, "pose"}}});
        base_ = approach_base_pose(base_, seen, embodiment_.reach_radius);
    }

    const Pose& base() const { return base_; }

    std::vector<Phase> take() {
        std::vector<Phase> out;
        for (auto& p : phases_) {
            if (!p.steps.empty()) out.push_back(std::move(p));
        }
        return out;
    }

private:
    std::vector<Phase> phases_;
    int counter_ = 0;
    Pose base_;
    EmbodimentProfile embodiment_;
};

} // namespace oracle_detail

/// Deterministic policy for an in-grammar instruction; throws
/// UnsupportedInstruction otherwise.
inline Policy oracle_policy(const PlannerRequest& req) {
    const auto* obs = std::get_if<Observation>(&req.observation);
    if (!obs) throw UnsupportedInstruction(req.instruction + " (oracle needs a structured observation)");
    const OracleIntent intent = parse_intent(req, *obs);
    const auto& robot = req.robot_state;

    auto seen = [&](const std::string& label) -> Pose {
        const auto* o = obs->find(label);
        if (!o) throw UnsupportedInstruction(req.instruction + " ('" + label + "' not visible)");
        return o->pose;
    };

    oracle_detail::PolicyBuilder b(robot);
    b.begin("prepare");
    b.add(StepKind::action, "wake_up");

    const auto& held = robot.gripper_holding;
    const bool manipulate = intent.delivery != OracleIntent::Delivery::none;
    if (held && (!manipulate || *held != intent.object)) {
        b.begin("release");
        b.add(StepKind::action, "place", {{"pose", offset(b.base(), 0.30, 0.0, 0.20)}});
    }

    if (manipulate) {
        if (!held || *held != intent.object) {
            b.begin("acquire");
            const Pose at = seen(intent.object);
            const auto loc = b.locate(intent.object);
            const auto gp = b.add(StepKind::perception, "grasp_point", {{"label", intent.object}});
            b.approach(at, loc);
            b.add(StepKind::action, "grasp", {{"pose", ParamRef{gp, "pose"}}});
            b.add(StepKind::action, "lift");
        }
        b.begin("deliver");
        const Pose to = seen(intent.destination);
        const auto loc = b.locate(intent.destination);
        b.approach(to, loc);
        const char* verb = intent.delivery == OracleIntent::Delivery::handover ? "handover" : "place";
        b.add(StepKind::action, verb, {{"pose", ParamRef{loc, "pose"}}});
    }

    bool monitor = false;
    if (intent.close_target) {
        const auto* art = obs->find(*intent.close_target);
        if (!art) throw UnsupportedInstruction(req.instruction + " ('" + *intent.close_target + "' not visible)");
        const bool open = art->closed_pose && distance(art->pose, *art->closed_pose) > kPlaceTolerance;
        if (open) {
            b.begin("interact");
            const auto loc = b.locate(*intent.close_target);
            b.approach(art->pose, loc);
            b.add(StepKind::action, "push", {{"pose", ParamRef{loc, "pose"}}});
        } else if (intent.conditional_close) {
            monitor = true;
        } else if (!manipulate) {
            // Already closed and nothing else to do: a single look confirms it.
            monitor = true;
        }
    }

    b.begin("finish");
    b.add(StepKind::action, "homing");
    if (monitor) {
        // Keeps the articulated object under observation for the rest of the policy.
        b.begin("monitor");
        b.locate(*intent.close_target);
    }

    Policy p;
    std::ostringstream summary;
    switch (intent.delivery) {
    case OracleIntent::Delivery::place: summary << "place " << intent.object << " on " << intent.destination; break;
    case OracleIntent::Delivery::handover: summary << "hand " << intent.object << " to " << intent.destination; break;
    case OracleIntent::Delivery::dispose: summary << "dispose of " << intent.object << " in " << intent.destination; break;
    case OracleIntent::Delivery::none: break;
    }
    if (intent.close_target) {
        if (manipulate) summary << "; ";
        summary << (intent.conditional_close ? "keep " : "close ") << *intent.close_target
                << (intent.conditional_close ? " closed" : "");
    }
    p.task_summary = summary.str();
    p.phases = b.take();
    return p;
}

/// Rule-based ground-truth planner.
class OraclePlanner final : public Planner {
public:
    PlannerResponse plan(const PlannerRequest& request) override {
        const auto start = std::chrono::steady_clock::now();
        PlannerResponse r;
        r.backend = backend();
        try {
            r.policy = oracle_policy(request);
            r.raw_output = serialize_policy(*r.policy);
        } catch (const UnsupportedInstruction& e) {
            r.raw_output = e.what();
        }
        r.latency = std::chrono::steady_clock::now() - start;
        return r;
    }

    std::string backend() const override { return "oracle"; }
};

} // namespace vlp
