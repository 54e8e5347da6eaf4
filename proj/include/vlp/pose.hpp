#pragma once

#include <array>
#include <cmath>
#include <span>

namespace vlp {

/// Cartesian pose in the world frame: meters for position, radians for
/// orientation (roll, pitch, yaw).
struct Pose {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;
    double roll = 0.0;
    double pitch = 0.0;
    double yaw = 0.0;

    bool operator==(const Pose&) const = default;

    std::array<double, 6> to_array() const { return {x, y, z, roll, pitch, yaw}; }

    static Pose from_array(std::span<const double, 6> v) {
        return Pose{v[0], v[1], v[2], v[3], v[4], v[5]};
    }

    bool finite() const {
        for (double v : to_array()) {
            if (!std::isfinite(v)) return false;
        }
        return true;
    }
};

/// Euclidean distance between the translational parts of two poses.
inline double distance(const Pose& a, const Pose& b) {
    const double dx = a.x - b.x;
    const double dy = a.y - b.y;
    const double dz = a.z - b.z;
    return std::sqrt(dx * dx + dy * dy + dz * dz);
}

inline double planar_distance(const Pose& a, const Pose& b) {
    return std::hypot(a.x - b.x, a.y - b.y);
}

inline Pose offset(const Pose& base, double dx, double dy, double dz) {
    // Offsets are expressed in the base frame (yaw only).
    const double c = std::cos(base.yaw);
    const double s = std::sin(base.yaw);
    Pose p = base;
    p.x += c * dx - s * dy;
    p.y += s * dx + c * dy;
    p.z += dz;
    return p;
}

} // namespace vlp
