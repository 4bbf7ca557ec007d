#pragma once

// Points, displacement vectors and quaternions for the human side of the
// pipeline, plus the three geometric primitives everything else is built on.
//
// Frame convention (operator facing the sensor):
//   +x  operator's right
//   +y  up
//   +z  away from the sensor ("deeper")

#include <algorithm>
#include <cmath>
#include <numbers>

#include "teleop/errors.hpp"

namespace teleop {

inline constexpr double kPi = std::numbers::pi;

// Segments shorter than this are treated as overlapping skeleton points.
inline constexpr double kSegmentEpsilon = 1e-6;

struct Point3 {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;

    bool is_finite() const { return std::isfinite(x) && std::isfinite(y) && std::isfinite(z); }
    friend bool operator==(const Point3&, const Point3&) = default;
};

struct Vec3 {
    double dx = 0.0;
    double dy = 0.0;
    double dz = 0.0;

    double dot(const Vec3& o) const { return dx * o.dx + dy * o.dy + dz * o.dz; }
    double norm() const { return std::sqrt(dot(*this)); }
    Vec3 operator-() const { return {-dx, -dy, -dz}; }
    Vec3 operator*(double s) const { return {dx * s, dy * s, dz * s}; }
    bool is_finite() const { return std::isfinite(dx) && std::isfinite(dy) && std::isfinite(dz); }
    friend bool operator==(const Vec3&, const Vec3&) = default;
};

inline Point3 operator+(const Point3& p, const Vec3& v) { return {p.x + v.dx, p.y + v.dy, p.z + v.dz}; }

struct Quaternion {
    double w = 1.0;
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;

    static Quaternion identity() { return {}; }

    // Right-handed rotation of `angle` radians about the vertical (+y) axis.
    static Quaternion about_y(double angle) {
        return {std::cos(angle / 2.0), 0.0, std::sin(angle / 2.0), 0.0};
    }

    double norm() const { return std::sqrt(w * w + x * x + y * y + z * z); }

    Quaternion normalized() const {
        const double n = norm();
        if (!(n > 1e-9)) throw DegenerateQuaternion();
        return {w / n, x / n, y / n, z / n};
    }

    // Hamilton product; (a * b) applies b first, then a.
    Quaternion operator*(const Quaternion& o) const {
        return {w * o.w - x * o.x - y * o.y - z * o.z,
                w * o.x + x * o.w + y * o.z - z * o.y,
                w * o.y - x * o.z + y * o.w + z * o.x,
                w * o.z + x * o.y - y * o.x + z * o.w};
    }

    bool is_finite() const {
        return std::isfinite(w) && std::isfinite(x) && std::isfinite(y) && std::isfinite(z);
    }
    friend bool operator==(const Quaternion&, const Quaternion&) = default;
};

// Wraps into (-pi, pi].
inline double wrap_angle(double a) {
    a = std::remainder(a, 2.0 * kPi);
    if (a <= -kPi) a += 2.0 * kPi;
    return a;
}

// AB = A - B, componentwise.
inline Vec3 vector_between(const Point3& a, const Point3& b) {
    return {a.x - b.x, a.y - b.y, a.z - b.z};
}

// Angle at b between AB = a - b and BC = b - c, in [0, pi].
// A straight limb (b between a and c) gives 0, a fully folded one gives pi.
inline double joint_angle(const Point3& a, const Point3& b, const Point3& c) {
    const Vec3 ab = vector_between(a, b);
    const Vec3 bc = vector_between(b, c);
    const double n_ab = ab.norm();
    const double n_bc = bc.norm();
    if (!(n_ab > kSegmentEpsilon) || !(n_bc > kSegmentEpsilon)) throw DegenerateSegment();
    const double ratio = ab.dot(bc) / (n_ab * n_bc);
    return std::acos(std::clamp(ratio, -1.0, 1.0));
}

// Rotation about +y using a Y-X-Z (yaw, pitch, roll) intrinsic decomposition,
// yaw extracted first. Positive yaw turns the operator toward their left.
// Result in (-pi, pi].
inline double quaternion_to_yaw(const Quaternion& q) {
    const Quaternion u = q.normalized();
    // Third column of the rotation matrix: where +z is carried.
    const double r02 = 2.0 * (u.x * u.z + u.w * u.y);
    const double r22 = 1.0 - 2.0 * (u.x * u.x + u.y * u.y);
    return wrap_angle(std::atan2(r02, r22));
}

// Rotates p about `pivot` by the (normalized) quaternion q.
inline Point3 rotate_about(const Quaternion& q, const Point3& pivot, const Point3& p) {
    const Quaternion u = q.normalized();
    const Quaternion v{0.0, p.x - pivot.x, p.y - pivot.y, p.z - pivot.z};
    const Quaternion conj{u.w, -u.x, -u.y, -u.z};
    const Quaternion r = u * v * conj;
    return {pivot.x + r.x, pivot.y + r.y, pivot.z + r.z};
}

} // namespace teleop
