#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "vlp/embodiment.hpp"
#include "vlp/pose.hpp"

namespace vlp {

// Pose-level tolerances of the simulated world.
inline constexpr double kPlaceTolerance = 0.02; // ε_place
inline constexpr double kReachTolerance = 0.01; // ε_reach
inline constexpr double kGraspTolerance = 0.05; // object must lie this close to a grasp/push target
inline constexpr double kDefaultMoveThreshold = 0.05; // δ_move

struct ObjectRecord {
    std::string label;
    Pose pose;
    bool graspable = true;
    bool held = false;
    bool receptacle = false;  // objects placed onto it are disposed of
    bool at_operator = false; // handed over to the human operator
    std::optional<Pose> closed_pose; // articulated objects (drawers) only

    bool operator==(const ObjectRecord&) const = default;
};

struct RobotState {
    Pose base_pose;
    Pose ee_pose;
    bool gripper_open = true;
    std::optional<std::string> gripper_holding;
    EmbodimentProfile embodiment;

    bool operator==(const RobotState&) const = default;
};

struct WorldState {
    std::map<std::string, ObjectRecord> objects;
    RobotState robot;
    std::uint64_t tick = 0;

    bool operator==(const WorldState&) const = default;

    const ObjectRecord* find(const std::string& label) const {
        auto it = objects.find(label);
        return it == objects.end() ? nullptr : &it->second;
    }
};

/// Returns an empty string when the state is consistent, otherwise the first
/// violated invariant.
inline std::string invariant_violation(const WorldState& w) {
    int held = 0;
    for (const auto& [label, obj] : w.objects) {
        if (label != obj.label) return "object key mismatch: " + label;
        if (!obj.pose.finite()) return "non-finite pose: " + label;
        if (obj.held && !obj.graspable) return "held object not graspable: " + label;
        if (obj.held) {
            ++held;
            if (w.robot.gripper_holding != label) return "held flag disagrees with gripper: " + label;
        }
    }
    if (held > 1) return "more than one held object";
    if (w.robot.gripper_holding) {
        if (held != 1) return "gripper holds a missing object";
        if (w.robot.gripper_open) return "gripper open while holding";
    }
    if (!w.robot.base_pose.finite() || !w.robot.ee_pose.finite()) return "non-finite robot pose";
    return {};
}

struct ObservedObject {
    std::string label;
    Pose pose;
    bool graspable = true;
    bool held = false;
    bool receptacle = false;
    std::optional<Pose> closed_pose;

    bool operator==(const ObservedObject&) const = default;
};

/// Structured scene snapshot: the simulator's stand-in for a camera frame.
struct Observation {
    std::vector<ObservedObject> objects; // sorted by label
    RobotState robot;
    std::uint64_t tick = 0;

    bool operator==(const Observation&) const = default;

    const ObservedObject* find(const std::string& label) const {
        for (const auto& o : objects) {
            if (o.label == label) return &o;
        }
        return nullptr;
    }
};

enum class PerturbationKind { move_object, remove_object, add_object };

inline std::string_view to_string(PerturbationKind k) {
    switch (k) {
    case PerturbationKind::move_object: return "move_object";
    case PerturbationKind::remove_object: return "remove_object";
    case PerturbationKind::add_object: return "add_object";
    }
    return "?";
}

/// Scripted or live scene change. `at_tick` is empty for manual injections.
struct Perturbation {
    PerturbationKind kind = PerturbationKind::move_object;
    std::string target;
    Pose new_pose;
    std::optional<std::uint64_t> at_tick;
    bool graspable = true; // add_object only

    bool operator==(const Perturbation&) const = default;
};

// --- JSON ------------------------------------------------------------------

inline nlohmann::json pose_to_json(const Pose& p) {
    auto a = p.to_array();
    return nlohmann::json(std::vector<double>(a.begin(), a.end()));
}

inline nlohmann::json to_json(const EmbodimentProfile& e) {
    return {{"name", e.name},
            {"dof", e.dof},
            {"reach_radius", e.reach_radius},
            {"gripper", std::string(to_string(e.gripper))},
            {"base_mobile", e.base_mobile},
            {"camera_mount", std::string(to_string(e.camera_mount))}};
}

inline nlohmann::json to_json(const RobotState& r) {
    return {{"base_pose", pose_to_json(r.base_pose)},
            {"ee_pose", pose_to_json(r.ee_pose)},
            {"gripper_open", r.gripper_open},
            {"gripper_holding", r.gripper_holding ? nlohmann::json(*r.gripper_holding) : nlohmann::json()},
            {"embodiment", r.embodiment.name}};
}

inline nlohmann::json to_json(const Observation& o) {
    nlohmann::json objs = nlohmann::json::array();
    for (const auto& obj : o.objects) {
        nlohmann::json j = {{"label", obj.label},
                            {"pose", pose_to_json(obj.pose)},
                            {"graspable", obj.graspable},
                            {"held", obj.held}};
        if (obj.receptacle) j["receptacle"] = true;
        if (obj.closed_pose) j["closed_pose"] = pose_to_json(*obj.closed_pose);
        objs.push_back(std::move(j));
    }
    return {{"tick", o.tick}, {"objects", std::move(objs)}, {"robot", to_json(o.robot)}};
}

inline nlohmann::json to_json(const WorldState& w) {
    nlohmann::json objs = nlohmann::json::object();
    for (const auto& [label, obj] : w.objects) {
        nlohmann::json j = {{"pose", pose_to_json(obj.pose)},
                            {"graspable", obj.graspable},
                            {"held", obj.held},
                            {"receptacle", obj.receptacle},
                            {"at_operator", obj.at_operator}};
        if (obj.closed_pose) j["closed_pose"] = pose_to_json(*obj.closed_pose);
        objs[label] = std::move(j);
    }
    return {{"tick", w.tick}, {"objects", std::move(objs)}, {"robot", to_json(w.robot)}};
}

inline nlohmann::json to_json(const Perturbation& p) {
    nlohmann::json j = {{"kind", std::string(to_string(p.kind))}, {"target", p.target}};
    if (p.kind != PerturbationKind::remove_object) j["new_pose"] = pose_to_json(p.new_pose);
    if (p.kind == PerturbationKind::add_object) j["graspable"] = p.graspable;
    if (p.at_tick) j["at_tick"] = *p.at_tick;
    return j;
}

// --- text rendering for prompts ---------------------------------------------

inline std::string format_pose(const Pose& p) {
    std::ostringstream os;
    os.setf(std::ios::fixed);
    os.precision(3);
    os << '[' << p.x << ", " << p.y << ", " << p.z << ", " << p.roll << ", " << p.pitch << ", " << p.yaw << ']';
    return os.str();
}

inline std::string render_robot_state(const RobotState& r) {
    std::ostringstream os;
    os << "embodiment: " << r.embodiment.name << " (" << r.embodiment.dof << " DoF, reach "
       << r.embodiment.reach_radius << " m, " << (r.embodiment.base_mobile ? "mobile base" : "fixed base")
       << ")\n";
    os << "base_pose: " << format_pose(r.base_pose) << '\n';
    os << "ee_pose: " << format_pose(r.ee_pose) << '\n';
    os << "gripper: " << (r.gripper_open ? "open" : "closed");
    os << ", holding: " << r.gripper_holding.value_or("none") << '\n';
    return os.str();
}

inline std::string render_observation(const Observation& o) {
    std::ostringstream os;
    os << "tick: " << o.tick << '\n';
    if (o.objects.empty()) os << "objects: none\n";
    for (const auto& obj : o.objects) {
        os << "- " << obj.label << " at " << format_pose(obj.pose);
        if (!obj.graspable) os << " (fixed)";
        if (obj.receptacle) os << " (receptacle)";
        if (obj.held) os << " (held)";
        if (obj.closed_pose) os << " (closed at " << format_pose(*obj.closed_pose) << ')';
        os << '\n';
    }
    return os.str();
}

} // namespace vlp
