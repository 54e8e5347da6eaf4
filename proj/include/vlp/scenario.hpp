#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "vlp/embodiment.hpp"
#include "vlp/errors.hpp"
#include "vlp/world_state.hpp"

namespace vlp {

enum class GoalType { at_pose, absent, held_by_operator };

/// One conjunct of a scenario's success condition, evaluated on ground truth.
/// at_pose compares against either a literal pose or another object's pose.
struct GoalPredicate {
    GoalType type = GoalType::at_pose;
    std::string label;
    std::optional<Pose> pose;
    std::optional<std::string> target_label;
    double tolerance = 0.05;

    bool operator==(const GoalPredicate&) const = default;
};

struct ScriptedEvent {
    std::size_t after_step = 0; // fires once this many steps have executed
    std::variant<std::string, Perturbation> event; // new instruction | scene change

    bool operator==(const ScriptedEvent&) const = default;

    bool is_instruction() const { return std::holds_alternative<std::string>(event); }
};

inline const std::vector<std::string>& task_families() {
    static const std::vector<std::string> kFamilies = {"pick_place", "handover", "scene_interact"};
    return kFamilies;
}

struct ScenarioSpec {
    std::string id;
    std::string family;
    bool dynamic = false;
    std::string embodiment = "quadruped_manipulator";
    Pose base_pose;
    std::vector<ObjectRecord> objects;
    std::string instruction;
    std::vector<GoalPredicate> goal;
    std::vector<ScriptedEvent> scripted_events;
    double jitter = 0.0;            // uniform ±jitter (m) on graspable objects' x/y, drawn from the seed
    double observation_noise = 0.0; // Gaussian σ (m) on observed positions

    bool operator==(const ScenarioSpec&) const = default;
};

inline std::string_view to_string(GoalType t) {
    switch (t) {
    case GoalType::at_pose: return "at_pose";
    case GoalType::absent: return "absent";
    case GoalType::held_by_operator: return "held_by_operator";
    }
    return "?";
}

inline bool goal_holds(const GoalPredicate& g, const WorldState& w) {
    const auto* obj = w.find(g.label);
    switch (g.type) {
    case GoalType::absent: return obj == nullptr;
    case GoalType::held_by_operator: return obj != nullptr && obj->at_operator;
    case GoalType::at_pose: {
        if (!obj || obj->held) return false;
        Pose target;
        if (g.target_label) {
            const auto* ref = w.find(*g.target_label);
            if (!ref) return false;
            target = ref->pose;
        } else if (g.pose) {
            target = *g.pose;
        } else {
            return false;
        }
        return distance(obj->pose, target) <= g.tolerance;
    }
    }
    return false;
}

inline bool goal_holds(const std::vector<GoalPredicate>& goal, const WorldState& w) {
    return std::all_of(goal.begin(), goal.end(), [&](const auto& g) { return goal_holds(g, w); });
}

// --- JSON -----------------------------------------------------------------

namespace detail {

inline Pose pose_from_json(const nlohmann::json& v, const std::string& where) {
    if (!v.is_array() || v.size() != 6) throw ScenarioError(where + ": pose must be an array of 6 numbers");
    std::array<double, 6> a{};
    for (std::size_t i = 0; i < 6; ++i) {
        if (!v[i].is_number()) throw ScenarioError(where + ": pose entries must be numbers");
        a[i] = v[i].get<double>();
    }
    Pose p = Pose::from_array(a);
    if (!p.finite()) throw ScenarioError(where + ": pose must be finite");
    return p;
}

template <typename T>
T get_or(const nlohmann::json& j, const char* key, T fallback, const std::string& where) {
    auto it = j.find(key);
    if (it == j.end()) return fallback;
    try {
        return it->get<T>();
    } catch (const nlohmann::json::exception&) {
        throw ScenarioError(where + ": field '" + key + "' has the wrong type");
    }
}

inline std::string get_string(const nlohmann::json& j, const char* key, const std::string& where) {
    auto it = j.find(key);
    if (it == j.end() || !it->is_string()) throw ScenarioError(where + ": missing string field '" + key + "'");
    return it->get<std::string>();
}

} // namespace detail

inline Perturbation perturbation_from_json(const nlohmann::json& j) {
    const std::string where = "perturbation";
    if (!j.is_object()) throw ScenarioError(where + " must be an object");
    Perturbation p;
    const auto kind = detail::get_string(j, "kind", where);
    if (kind == "move_object") {
        p.kind = PerturbationKind::move_object;
    } else if (kind == "remove_object") {
        p.kind = PerturbationKind::remove_object;
    } else if (kind == "add_object") {
        p.kind = PerturbationKind::add_object;
    } else {
        throw ScenarioError(where + ": unknown kind '" + kind + "'");
    }
    p.target = detail::get_string(j, "target", where);
    if (p.kind != PerturbationKind::remove_object) {
        if (!j.contains("new_pose")) throw ScenarioError(where + ": '" + kind + "' needs new_pose");
        p.new_pose = detail::pose_from_json(j["new_pose"], where + ".new_pose");
    }
    p.graspable = detail::get_or<bool>(j, "graspable", true, where);
    if (auto it = j.find("at_tick"); it != j.end() && it->is_number_unsigned()) p.at_tick = it->get<std::uint64_t>();
    return p;
}

inline nlohmann::json scenario_to_json(const ScenarioSpec& s) {
    nlohmann::json objects = nlohmann::json::array();
    for (const auto& o : s.objects) {
        nlohmann::json j = {{"label", o.label}, {"pose", pose_to_json(o.pose)}, {"graspable", o.graspable}};
        if (o.held) j["held"] = true;
        if (o.receptacle) j["receptacle"] = true;
        if (o.closed_pose) j["closed_pose"] = pose_to_json(*o.closed_pose);
        objects.push_back(std::move(j));
    }
    nlohmann::json goal = nlohmann::json::array();
    for (const auto& g : s.goal) {
        nlohmann::json j = {{"type", std::string(to_string(g.type))}, {"label", g.label}};
        if (g.type == GoalType::at_pose) {
            if (g.pose) j["pose"] = pose_to_json(*g.pose);
            if (g.target_label) j["target_label"] = *g.target_label;
            j["tolerance"] = g.tolerance;
        }
        goal.push_back(std::move(j));
    }
    nlohmann::json events = nlohmann::json::array();
    for (const auto& e : s.scripted_events) {
        nlohmann::json j = {{"after_step", e.after_step}};
        if (e.is_instruction()) {
            j["new_instruction"] = std::get<std::string>(e.event);
        } else {
            j["perturbation"] = to_json(std::get<Perturbation>(e.event));
        }
        events.push_back(std::move(j));
    }
    return {{"id", s.id},
            {"family", s.family},
            {"dynamic", s.dynamic},
            {"embodiment", s.embodiment},
            {"robot", {{"base_pose", pose_to_json(s.base_pose)}}},
            {"objects", std::move(objects)},
            {"instruction", s.instruction},
            {"goal", std::move(goal)},
            {"scripted_events", std::move(events)},
            {"jitter", s.jitter},
            {"observation_noise", s.observation_noise}};
}

/// Checks the cross-field invariants; throws ScenarioError on the first problem.
inline void validate_scenario(const ScenarioSpec& s) {
    const std::string where = "scenario '" + s.id + "'";
    if (s.id.empty()) throw ScenarioError("scenario id must not be empty");
    if (std::find(task_families().begin(), task_families().end(), s.family) == task_families().end()) {
        throw ScenarioError(where + ": unknown family '" + s.family + "'");
    }
    try {
        (void)builtin_embodiment(s.embodiment);
    } catch (const UnknownEmbodiment&) {
        throw ScenarioError(where + ": unknown embodiment '" + s.embodiment + "'");
    }
    if (s.instruction.empty()) throw ScenarioError(where + ": empty instruction");
    if (!(s.jitter >= 0.0) || !(s.observation_noise >= 0.0)) {
        throw ScenarioError(where + ": jitter and observation_noise must be >= 0");
    }

    std::set<std::string> labels;
    int held = 0;
    for (const auto& o : s.objects) {
        if (o.label.empty()) throw ScenarioError(where + ": object with empty label");
        if (!labels.insert(o.label).second) throw ScenarioError(where + ": duplicate object '" + o.label + "'");
        if (o.held && !o.graspable) throw ScenarioError(where + ": held object '" + o.label + "' is not graspable");
        if (o.held) ++held;
    }
    if (held > 1) throw ScenarioError(where + ": more than one held object");

    std::set<std::string> known = labels;
    for (const auto& e : s.scripted_events) {
        if (const auto* p = std::get_if<Perturbation>(&e.event)) {
            if (p->kind == PerturbationKind::add_object) known.insert(p->target);
        }
    }
    if (s.goal.empty()) throw ScenarioError(where + ": goal must have at least one predicate");
    for (const auto& g : s.goal) {
        if (!known.contains(g.label)) throw ScenarioError(where + ": goal references unknown label '" + g.label + "'");
        if (g.type == GoalType::at_pose) {
            if (g.target_label && !known.contains(*g.target_label)) {
                throw ScenarioError(where + ": goal references unknown label '" + *g.target_label + "'");
            }
            if (!g.target_label && !g.pose) throw ScenarioError(where + ": at_pose goal needs pose or target_label");
        }
    }
}

inline ScenarioSpec scenario_from_json(const nlohmann::json& j) {
    using detail::get_or;
    using detail::get_string;
    if (!j.is_object()) throw ScenarioError("scenario document must be a JSON object");
    ScenarioSpec s;
    s.id = get_string(j, "id", "scenario");
    const std::string where = "scenario '" + s.id + "'";
    s.family = get_string(j, "family", where);
    s.dynamic = get_or<bool>(j, "dynamic", false, where);
    s.embodiment = get_or<std::string>(j, "embodiment", s.embodiment, where);
    if (auto it = j.find("robot"); it != j.end()) {
        if (it->contains("base_pose")) s.base_pose = detail::pose_from_json((*it)["base_pose"], where + ".robot");
    }
    s.instruction = get_string(j, "instruction", where);
    s.jitter = get_or<double>(j, "jitter", 0.0, where);
    s.observation_noise = get_or<double>(j, "observation_noise", 0.0, where);

    const auto objects = j.value("objects", nlohmann::json::array());
    if (!objects.is_array()) throw ScenarioError(where + ": objects must be an array");
    for (const auto& o : objects) {
        ObjectRecord rec;
        rec.label = get_string(o, "label", where + ".objects");
        if (!o.contains("pose")) throw ScenarioError(where + ": object '" + rec.label + "' has no pose");
        rec.pose = detail::pose_from_json(o["pose"], where + ".objects." + rec.label);
        rec.graspable = get_or<bool>(o, "graspable", true, where);
        rec.held = get_or<bool>(o, "held", false, where);
        rec.receptacle = get_or<bool>(o, "receptacle", false, where);
        if (o.contains("closed_pose")) rec.closed_pose = detail::pose_from_json(o["closed_pose"], where);
        s.objects.push_back(std::move(rec));
    }

    const auto goal = j.value("goal", nlohmann::json::array());
    if (!goal.is_array()) throw ScenarioError(where + ": goal must be an array");
    for (const auto& g : goal) {
        GoalPredicate p;
        const auto type = get_string(g, "type", where + ".goal");
        if (type == "at_pose") {
            p.type = GoalType::at_pose;
        } else if (type == "absent") {
            p.type = GoalType::absent;
        } else if (type == "held_by_operator") {
            p.type = GoalType::held_by_operator;
        } else {
            throw ScenarioError(where + ": unknown goal type '" + type + "'");
        }
        p.label = get_string(g, "label", where + ".goal");
        if (g.contains("pose")) p.pose = detail::pose_from_json(g["pose"], where + ".goal");
        if (g.contains("target_label")) p.target_label = get_string(g, "target_label", where + ".goal");
        p.tolerance = get_or<double>(g, "tolerance", p.tolerance, where);
        s.goal.push_back(std::move(p));
    }

    const auto events = j.value("scripted_events", nlohmann::json::array());
    if (!events.is_array()) throw ScenarioError(where + ": scripted_events must be an array");
    for (const auto& e : events) {
        ScriptedEvent ev;
        ev.after_step = get_or<std::size_t>(e, "after_step", 0, where);
        if (e.contains("new_instruction")) {
            ev.event = get_string(e, "new_instruction", where);
        } else if (e.contains("perturbation")) {
            ev.event = perturbation_from_json(e["perturbation"]);
        } else {
            throw ScenarioError(where + ": scripted event needs new_instruction or perturbation");
        }
        s.scripted_events.push_back(std::move(ev));
    }
    validate_scenario(s);
    return s;
}

inline ScenarioSpec parse_scenario(std::string_view text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ScenarioError(std::string("malformed scenario JSON: ") + e.what());
    }
    return scenario_from_json(j);
}

inline ScenarioSpec load_scenario_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ScenarioError("cannot open scenario file " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_scenario(buf.str());
}

/// Loads every *.json file in `dir`, ordered by scenario id.
inline std::vector<ScenarioSpec> load_corpus(const std::filesystem::path& dir) {
    if (!std::filesystem::is_directory(dir)) throw CorpusError("corpus directory not found: " + dir.string());
    std::vector<ScenarioSpec> out;
    std::set<std::string> ids;
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        if (entry.path().extension() != ".json") continue;
        auto s = load_scenario_file(entry.path());
        if (!ids.insert(s.id).second) throw CorpusError("duplicate scenario id '" + s.id + "'");
        out.push_back(std::move(s));
    }
    if (out.empty()) throw CorpusError("corpus is empty: " + dir.string());
    std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
    return out;
}

} // namespace vlp
