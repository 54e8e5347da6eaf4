#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string>

#include "vlp/errors.hpp"
#include "vlp/policy.hpp"
#include "vlp/primitives.hpp"
#include "vlp/scenario.hpp"
#include "vlp/world_state.hpp"

namespace vlp {

enum class FailureClass { planning, perception, execution };

inline std::string_view to_string(FailureClass c) {
    switch (c) {
    case FailureClass::planning: return "planning";
    case FailureClass::perception: return "perception";
    case FailureClass::execution: return "execution";
    }
    return "?";
}

/// Result of one primitive invocation. Failures are data, never exceptions.
struct StepOutcome {
    bool success = false;
    std::optional<FailureClass> failure_class; // perception | execution at this layer
    std::string reason;
    Params outputs;                            // perception primitives only
    std::optional<double> perception_error;    // distance of a perceived pose from ground truth
    std::optional<std::string> subject;        // object acted on, if any

    bool operator==(const StepOutcome&) const = default;
};

// Arm presets relative to the base frame.
inline Pose rest_pose(const Pose& base) { return offset(base, 0.20, 0.0, 0.30); }
inline Pose ready_pose(const Pose& base) { return offset(base, 0.30, 0.0, 0.50); }
inline Pose start_arm_pose(const Pose& base) { return offset(base, 0.35, 0.0, 0.35); }

/// Initial ground truth for a scenario. Only graspable, non-held objects are
/// jittered, so a zero-jitter scenario is independent of the seed.
inline WorldState new_world(const ScenarioSpec& scenario, std::uint64_t seed) {
    validate_scenario(scenario);
    WorldState w;
    w.robot.embodiment = builtin_embodiment(scenario.embodiment);
    w.robot.base_pose = scenario.base_pose;
    w.robot.ee_pose = rest_pose(scenario.base_pose);

    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> jitter(-scenario.jitter, scenario.jitter);
    for (auto obj : scenario.objects) {
        if (scenario.jitter > 0.0 && obj.graspable && !obj.held) {
            obj.pose.x += jitter(rng);
            obj.pose.y += jitter(rng);
        }
        if (obj.held) {
            w.robot.gripper_holding = obj.label;
            w.robot.gripper_open = false;
        }
        w.objects.emplace(obj.label, std::move(obj));
    }
    if (auto why = invariant_violation(w); !why.empty()) throw ScenarioError(why);
    return w;
}

namespace detail {

inline void release_if_held(WorldState& w, const std::string& label) {
    if (w.robot.gripper_holding == label) {
        w.robot.gripper_holding.reset();
        w.robot.gripper_open = true;
    }
}

} // namespace detail

inline WorldState apply_perturbation(WorldState w, const Perturbation& p) {
    auto it = w.objects.find(p.target);
    switch (p.kind) {
    case PerturbationKind::move_object:
        if (it == w.objects.end()) throw UnknownObject(p.target);
        // Someone moved it: whatever the robot held is no longer in its hand.
        detail::release_if_held(w, p.target);
        it->second.held = false;
        it->second.at_operator = false;
        it->second.pose = p.new_pose;
        break;
    case PerturbationKind::remove_object:
        if (it == w.objects.end()) throw UnknownObject(p.target);
        detail::release_if_held(w, p.target);
        w.objects.erase(it);
        break;
    case PerturbationKind::add_object: {
        if (it != w.objects.end()) throw DuplicateObject(p.target);
        ObjectRecord rec;
        rec.label = p.target;
        rec.pose = p.new_pose;
        rec.graspable = p.graspable;
        w.objects.emplace(p.target, std::move(rec));
        break;
    }
    }
    ++w.tick;
    return w;
}

/// Deterministic kinematic stand-in for the robot and its scene. Owns the
/// ground truth and the noise generator; single writer.
class Simulator {
public:
    Simulator(const ScenarioSpec& scenario, std::uint64_t seed)
        : Simulator(new_world(scenario, seed), scenario.observation_noise, seed) {}

    Simulator(WorldState world, double observation_noise, std::uint64_t seed)
        : world_(std::move(world)), noise_sigma_(observation_noise), rng_(seed ^ 0x9e3779b97f4a7c15ull) {}

    const WorldState& state() const { return world_; }
    double observation_noise() const { return noise_sigma_; }

    /// Scene as seen by the robot; positions carry the declared Gaussian noise.
    Observation observe() {
        Observation o = snapshot();
        for (auto& obj : o.objects) obj.pose = noisy(obj.pose);
        return o;
    }

    /// Noise-free view for monitoring; does not consume randomness.
    Observation snapshot() const {
        Observation o;
        o.tick = world_.tick;
        o.robot = world_.robot;
        for (const auto& [label, obj] : world_.objects) {
            if (obj.at_operator) continue; // out of the robot's workspace
            o.objects.push_back({label, obj.pose, obj.graspable, obj.held, obj.receptacle, obj.closed_pose});
        }
        return o;
    }

    /// Strong guarantee: a rejected perturbation leaves the world untouched.
    void apply(const Perturbation& p) { world_ = apply_perturbation(world_, p); }

    StepOutcome execute(const BehaviorStep& step, const PrimitiveCatalog& catalog) {
        WorldState next = world_;
        ++next.tick;
        ++world_.tick;

        StepOutcome out;
        auto fail = [&](FailureClass c, std::string reason) {
            out.success = false;
            out.failure_class = c;
            out.reason = std::move(reason);
            return out;
        };

        const auto* spec = catalog.find(step.name);
        if (!spec) return fail(FailureClass::execution, "unknown primitive '" + step.name + "'");
        for (const auto& [k, v] : step.params) {
            if (std::holds_alternative<ParamRef>(v)) return fail(FailureClass::execution, "unresolved parameter " + k);
        }
        if (auto violated = check_preconditions(*spec, world_, step.params); !violated.empty()) {
            std::string why = violated.front() == pred::within_reach ? "unreachable" : "precondition " + violated.front();
            return fail(FailureClass::execution, why);
        }

        auto& robot = next.robot;
        const auto target = target_pose(*spec, step.params);
        const auto& name = step.name;

        if (name == "wake_up") {
            robot.ee_pose = ready_pose(robot.base_pose);
        } else if (name == "homing") {
            robot.ee_pose = rest_pose(robot.base_pose);
        } else if (name == "start_pose") {
            robot.ee_pose = start_arm_pose(robot.base_pose);
        } else if (name == "move_base") {
            robot.base_pose = approach_base_pose(robot.base_pose, *target, robot.embodiment.reach_radius);
            robot.ee_pose = rest_pose(robot.base_pose);
        } else if (name == "grasp") {
            ObjectRecord* best = nullptr;
            double best_d = kGraspTolerance;
            for (auto& [_, obj] : next.objects) {
                const double d = distance(obj.pose, *target);
                if (obj.graspable && !obj.held && !obj.at_operator && d <= best_d) {
                    best = &obj;
                    best_d = d;
                }
            }
            if (!best) return fail(FailureClass::execution, "no graspable object at target");
            best->held = true;
            robot.gripper_holding = best->label;
            robot.gripper_open = false;
            robot.ee_pose = *target;
            out.subject = best->label;
        } else if (name == "lift") {
            robot.ee_pose.z += 0.10;
            out.subject = robot.gripper_holding;
        } else if (name == "place" || name == "handover") {
            const std::string label = *robot.gripper_holding;
            auto& obj = next.objects.at(label);
            obj.held = false;
            obj.pose = *target;
            robot.gripper_holding.reset();
            robot.gripper_open = true;
            robot.ee_pose = *target;
            out.subject = label;
            if (name == "handover") {
                obj.at_operator = true;
            } else {
                for (const auto& [other, rec] : next.objects) {
                    if (other != label && rec.receptacle && distance(rec.pose, *target) <= kPlaceTolerance) {
                        next.objects.erase(label); // disposed of
                        break;
                    }
                }
            }
        } else if (name == "push") {
            ObjectRecord* hit = nullptr;
            for (auto& [_, obj] : next.objects) {
                if (obj.closed_pose && !obj.held && distance(obj.pose, *target) <= kGraspTolerance) {
                    hit = &obj;
                    break;
                }
            }
            if (!hit) return fail(FailureClass::execution, "nothing pushable at target");
            hit->pose = *hit->closed_pose;
            robot.ee_pose = *target;
            out.subject = hit->label;
        } else if (name == "open_gripper") {
            robot.gripper_open = true;
        } else if (name == "close_gripper") {
            robot.gripper_open = false;
        } else if (name == "locate_object" || name == "grasp_point") {
            const auto* label = get_text(step.params, "label");
            const ObjectRecord* obj = label ? next.find(*label) : nullptr;
            if (!obj) return fail(FailureClass::perception, "object not found");
            const Pose seen = noisy(obj->pose);
            out.outputs["pose"] = seen;
            out.perception_error = distance(seen, obj->pose);
            out.subject = obj->label;
        } else if (name == "robot_state") {
            out.outputs["base_pose"] = robot.base_pose;
            out.outputs["ee_pose"] = robot.ee_pose;
            out.outputs["gripper_open"] = robot.gripper_open ? 1.0 : 0.0;
            out.outputs["holding"] = robot.gripper_holding.value_or("");
        } else if (name == "scene_objects") {
            std::string labels;
            for (const auto& [label, _] : next.objects) {
                if (!labels.empty()) labels += ",";
                labels += label;
            }
            out.outputs["labels"] = labels;
            out.outputs["count"] = static_cast<double>(next.objects.size());
        } else {
            return fail(FailureClass::execution, "primitive '" + name + "' has no simulator binding");
        }

        if (auto violated = check_postconditions(*spec, next, step.params); !violated.empty()) {
            return fail(FailureClass::execution, "postcondition " + violated.front() + " not reached");
        }
        out.success = true;
        world_ = std::move(next);
        return out;
    }

private:
    static const std::string* get_text(const Params& params, std::string_view key) {
        auto it = params.find(key);
        if (it == params.end()) return nullptr;
        return std::get_if<std::string>(&it->second);
    }

    Pose noisy(Pose p) {
        if (noise_sigma_ <= 0.0) return p;
        std::normal_distribution<double> n(0.0, noise_sigma_);
        p.x += n(rng_);
        p.y += n(rng_);
        p.z += n(rng_);
        return p;
    }

    WorldState world_;
    double noise_sigma_ = 0.0;
    std::mt19937_64 rng_;
};

} // namespace vlp
