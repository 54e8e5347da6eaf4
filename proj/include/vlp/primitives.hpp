#pragma once

#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "vlp/embodiment.hpp"
#include "vlp/errors.hpp"
#include "vlp/policy.hpp"
#include "vlp/world_state.hpp"

namespace vlp {

enum class ParamType { number, text, pose };

inline std::string_view to_string(ParamType t) {
    switch (t) {
    case ParamType::number: return "number";
    case ParamType::text: return "text";
    case ParamType::pose: return "pose";
    }
    return "?";
}

struct ParamSpec {
    std::string name;
    ParamType type = ParamType::pose;
    bool required = true;
};

/// Named output of a perception primitive, addressable as `<step_id>.<name>`.
struct OutputSpec {
    std::string name;
    ParamType type = ParamType::pose;
};

/// Symbolic predicates used as primitive guards and effects.
namespace pred {
inline constexpr const char* gripper_empty = "gripper_empty";
inline constexpr const char* holding_object = "holding_object";
inline constexpr const char* gripper_open = "gripper_open";
inline constexpr const char* gripper_closed = "gripper_closed";
inline constexpr const char* within_reach = "within_reach";
inline constexpr const char* at_pose = "at_pose";
inline constexpr const char* base_mobile = "base_mobile";
} // namespace pred

struct PrimitiveSpec {
    std::string name;
    StepKind kind = StepKind::action;
    std::vector<ParamSpec> params;
    std::vector<OutputSpec> outputs;
    std::vector<std::string> preconditions;
    std::vector<std::string> postconditions;
    std::string description;
    std::optional<std::string> target_param; // Cartesian target for reach checks

    const ParamSpec* param(std::string_view n) const {
        for (const auto& p : params) {
            if (p.name == n) return &p;
        }
        return nullptr;
    }
    const OutputSpec* output(std::string_view n) const {
        for (const auto& o : outputs) {
            if (o.name == n) return &o;
        }
        return nullptr;
    }
};

class PrimitiveCatalog {
public:
    PrimitiveCatalog() = default;
    explicit PrimitiveCatalog(EmbodimentProfile embodiment) : embodiment_(std::move(embodiment)) {}

    void add(PrimitiveSpec spec) {
        auto name = spec.name;
        if (!primitives_.emplace(name, std::move(spec)).second) {
            throw std::invalid_argument("duplicate primitive '" + name + "'");
        }
    }

    const PrimitiveSpec* find(std::string_view name) const {
        auto it = primitives_.find(std::string(name));
        return it == primitives_.end() ? nullptr : &it->second;
    }

    bool contains(std::string_view name) const { return find(name) != nullptr; }
    std::size_t size() const { return primitives_.size(); }
    bool empty() const { return primitives_.empty(); }

    const std::map<std::string, PrimitiveSpec>& primitives() const { return primitives_; }
    const EmbodimentProfile& embodiment() const { return embodiment_; }

private:
    std::map<std::string, PrimitiveSpec> primitives_; // ordered by name
    EmbodimentProfile embodiment_;
};

namespace detail {

inline PrimitiveSpec action(std::string name, std::vector<ParamSpec> params, std::vector<std::string> pre,
                            std::vector<std::string> post, std::string description) {
    PrimitiveSpec s;
    s.name = std::move(name);
    s.kind = StepKind::action;
    s.params = std::move(params);
    s.preconditions = std::move(pre);
    s.postconditions = std::move(post);
    s.description = std::move(description);
    for (const auto& p : s.params) {
        if (p.type == ParamType::pose) {
            s.target_param = p.name;
            break;
        }
    }
    return s;
}

inline PrimitiveSpec perception(std::string name, std::vector<ParamSpec> params, std::vector<OutputSpec> outputs,
                                std::string description) {
    PrimitiveSpec s;
    s.name = std::move(name);
    s.kind = StepKind::perception;
    s.params = std::move(params);
    s.outputs = std::move(outputs);
    s.description = std::move(description);
    return s;
}

} // namespace detail

/// The behavior library instantiated for one embodiment.
inline PrimitiveCatalog builtin_catalog(const EmbodimentProfile& embodiment) {
    if (!(embodiment.reach_radius > 0.0)) {
        throw std::invalid_argument("embodiment '" + embodiment.name + "' must have reach_radius > 0");
    }
    using detail::action;
    using detail::perception;
    const ParamSpec target{"pose", ParamType::pose, true};
    const ParamSpec label{"label", ParamType::text, true};

    PrimitiveCatalog c(embodiment);
    c.add(action("wake_up", {}, {}, {}, "Raise the arm from its rest configuration into a ready pose."));
    c.add(action("homing", {}, {}, {}, "Return the arm to its home pose."));
    c.add(action("start_pose", {}, {}, {}, "Move the arm to the pre-manipulation start pose."));
    if (embodiment.base_mobile) {
        c.add(action("move_base", {{"pose", ParamType::pose, true}}, {pred::base_mobile}, {pred::within_reach},
                     "Drive the base toward a Cartesian target until it is within arm reach."));
    }
    c.add(action("grasp", {target}, {pred::gripper_empty, pred::within_reach},
                 {pred::holding_object, pred::gripper_closed}, "Grasp the object at the Cartesian target pose."));
    c.add(action("lift", {}, {pred::holding_object}, {pred::holding_object}, "Lift the held object."));
    c.add(action("place", {target}, {pred::holding_object, pred::within_reach},
                 {pred::gripper_empty, pred::gripper_open, pred::at_pose},
                 "Place the held object at the Cartesian target pose and release it."));
    c.add(action("handover", {target}, {pred::holding_object, pred::within_reach},
                 {pred::gripper_empty, pred::gripper_open},
                 "Hand the held object to a person at the Cartesian target pose."));
    c.add(action("push", {target}, {pred::gripper_empty, pred::within_reach}, {},
                 "Push an articulated object (e.g. a drawer front) at the target pose closed."));
    c.add(action("open_gripper", {}, {pred::gripper_empty}, {pred::gripper_open}, "Open the empty gripper."));
    c.add(action("close_gripper", {}, {}, {pred::gripper_closed}, "Close the gripper."));

    c.add(perception("locate_object", {label}, {{"pose", ParamType::pose}},
                     "Locate the labelled object; outputs its Cartesian pose."));
    c.add(perception("grasp_point", {label}, {{"pose", ParamType::pose}},
                     "Infer a manipulation point on the labelled object; outputs a Cartesian pose."));
    c.add(perception("robot_state", {},
                     {{"base_pose", ParamType::pose},
                      {"ee_pose", ParamType::pose},
                      {"gripper_open", ParamType::number},
                      {"holding", ParamType::text}},
                     "Snapshot of the robot state."));
    c.add(perception("scene_objects", {}, {{"labels", ParamType::text}, {"count", ParamType::number}},
                     "List the labels of visible objects."));
    return c;
}

inline PrimitiveCatalog builtin_catalog(std::string_view embodiment_name) {
    return builtin_catalog(builtin_embodiment(embodiment_name));
}

/// One line per primitive, lexicographic by name.
inline std::string render_catalog_for_prompt(const PrimitiveCatalog& catalog) {
    std::ostringstream os;
    os << "Behavior primitives for " << (catalog.embodiment().name.empty() ? "unnamed" : catalog.embodiment().name)
       << ":\n";
    if (catalog.empty()) {
        os << "none\n";
        return os.str();
    }
    for (const auto& [name, spec] : catalog.primitives()) {
        os << "- " << name << " [" << to_string(spec.kind) << "](";
        for (std::size_t i = 0; i < spec.params.size(); ++i) {
            if (i) os << ", ";
            os << spec.params[i].name << ": " << to_string(spec.params[i].type);
            if (!spec.params[i].required) os << '?';
        }
        os << ')';
        if (!spec.outputs.empty()) {
            os << " -> {";
            for (std::size_t i = 0; i < spec.outputs.size(); ++i) {
                if (i) os << ", ";
                os << spec.outputs[i].name << ": " << to_string(spec.outputs[i].type);
            }
            os << '}';
        }
        os << ": " << spec.description << '\n';
    }
    return os.str();
}

inline nlohmann::json catalog_to_json(const PrimitiveCatalog& catalog) {
    nlohmann::json prims = nlohmann::json::array();
    for (const auto& [name, spec] : catalog.primitives()) {
        nlohmann::json params = nlohmann::json::array();
        for (const auto& p : spec.params) {
            params.push_back({{"name", p.name}, {"type", std::string(to_string(p.type))}, {"required", p.required}});
        }
        nlohmann::json outputs = nlohmann::json::array();
        for (const auto& o : spec.outputs) {
            outputs.push_back({{"name", o.name}, {"type", std::string(to_string(o.type))}});
        }
        prims.push_back({{"name", name},
                         {"kind", std::string(to_string(spec.kind))},
                         {"params", std::move(params)},
                         {"outputs", std::move(outputs)},
                         {"preconditions", spec.preconditions},
                         {"postconditions", spec.postconditions},
                         {"description", spec.description}});
    }
    return {{"embodiment", to_json(catalog.embodiment())}, {"primitives", std::move(prims)}};
}

// --- predicate evaluation --------------------------------------------------

inline std::optional<Pose> target_pose(const PrimitiveSpec& spec, const Params& params) {
    if (!spec.target_param) return std::nullopt;
    auto it = params.find(*spec.target_param);
    if (it == params.end()) return std::nullopt;
    if (const auto* p = std::get_if<Pose>(&it->second)) return *p;
    return std::nullopt;
}

/// Evaluates one symbolic predicate against a concrete world. Unknown
/// predicate names evaluate to false.
inline bool predicate_holds(std::string_view name, const PrimitiveSpec& spec, const WorldState& world,
                            const Params& params) {
    const auto& r = world.robot;
    if (name == pred::gripper_empty) return !r.gripper_holding.has_value();
    if (name == pred::holding_object) return r.gripper_holding.has_value();
    if (name == pred::gripper_open) return r.gripper_open;
    if (name == pred::gripper_closed) return !r.gripper_open;
    if (name == pred::base_mobile) return r.embodiment.base_mobile;
    if (name == pred::within_reach) {
        auto t = target_pose(spec, params);
        return t && within_reach(r.base_pose, *t, r.embodiment.reach_radius);
    }
    if (name == pred::at_pose) {
        auto t = target_pose(spec, params);
        if (!t) return false;
        for (const auto& [_, obj] : world.objects) {
            if (!obj.held && distance(obj.pose, *t) <= kPlaceTolerance) return true;
        }
        return false;
    }
    return false;
}

/// Violated preconditions; empty means the primitive may execute now.
inline std::vector<std::string> check_preconditions(const PrimitiveSpec& spec, const WorldState& world,
                                                    const Params& params = {}) {
    std::vector<std::string> violated;
    for (const auto& p : spec.preconditions) {
        if (!predicate_holds(p, spec, world, params)) violated.push_back(p);
    }
    return violated;
}

inline std::vector<std::string> check_postconditions(const PrimitiveSpec& spec, const WorldState& world,
                                                     const Params& params = {}) {
    std::vector<std::string> violated;
    for (const auto& p : spec.postconditions) {
        if (!predicate_holds(p, spec, world, params)) violated.push_back(p);
    }
    return violated;
}

} // namespace vlp
