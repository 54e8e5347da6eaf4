#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "vlp/errors.hpp"
#include "vlp/pose.hpp"

namespace vlp {

enum class GripperType { claw, parallel_2f };
enum class CameraMount { wrist, head };

/// Robot platform profile. DoF is metadata only; the simulator is pose-level.
struct EmbodimentProfile {
    std::string name;
    int dof = 0;
    double reach_radius = 0.0; // meters from base
    GripperType gripper = GripperType::claw;
    bool base_mobile = false;
    CameraMount camera_mount = CameraMount::wrist;

    bool operator==(const EmbodimentProfile&) const = default;
};

inline std::string_view to_string(GripperType g) {
    return g == GripperType::claw ? "claw" : "parallel_2f";
}

inline std::string_view to_string(CameraMount c) {
    return c == CameraMount::wrist ? "wrist" : "head";
}

/// Legged base carrying a 6-DoF arm (12 + 6 DoF), claw gripper, wrist camera.
inline EmbodimentProfile quadruped_manipulator() {
    return {"quadruped_manipulator", 18, 0.65, GripperType::claw, true, CameraMount::wrist};
}

/// Wheeled single-arm service robot (11 DoF), two-finger gripper, head camera.
inline EmbodimentProfile mobile_manipulator() {
    return {"mobile_manipulator", 11, 0.80, GripperType::parallel_2f, true, CameraMount::head};
}

inline std::vector<EmbodimentProfile> builtin_embodiments() {
    return {quadruped_manipulator(), mobile_manipulator()};
}

inline EmbodimentProfile builtin_embodiment(std::string_view name) {
    for (auto& e : builtin_embodiments()) {
        if (e.name == name) return e;
    }
    throw UnknownEmbodiment(std::string(name));
}

/// Base pose reached by a move_base toward `target`: the base drives along the
/// line to the target and stops at half the reach radius (planar), facing it.
inline Pose approach_base_pose(const Pose& base, const Pose& target, double reach_radius) {
    const double standoff = 0.5 * reach_radius;
    const double dx = target.x - base.x;
    const double dy = target.y - base.y;
    const double d = std::hypot(dx, dy);
    Pose out = base;
    if (d <= 1e-9) return out;
    const double ux = dx / d;
    const double uy = dy / d;
    out.x = target.x - ux * standoff;
    out.y = target.y - uy * standoff;
    out.yaw = std::atan2(uy, ux);
    return out;
}

inline bool within_reach(const Pose& base, const Pose& target, double reach_radius) {
    return distance(base, target) <= reach_radius;
}

} // namespace vlp
