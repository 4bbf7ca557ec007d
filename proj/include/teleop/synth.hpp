#pragma once

// Synthetic operator streams. A low-dimensional body pose (arm pitch/roll/bend,
// thigh swing/knee bend, torso twist) is turned into a full 15-joint frame
// around a fixed standing template two meters from the sensor.

#include <array>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "teleop/errors.hpp"
#include "teleop/geometry.hpp"
#include "teleop/skeleton.hpp"

namespace teleop {

struct ArmPose {
    double pitch = 0.0;  // swing forward (toward the sensor)
    double roll = 0.0;   // raise sideways, away from the body
    double bend = 0.0;   // elbow flexion
};

struct LegPose {
    double swing = 0.0;  // thigh forward (toward the sensor), negative = back
    double bend = 0.0;   // knee flexion
};

struct BodyPose {
    double torso_yaw = 0.0;
    std::array<ArmPose, 2> arms{};  // [left, right]
    std::array<LegPose, 2> legs{};
};

namespace body {
inline constexpr double kDepth = 2.0;
inline constexpr double kUpperArm = 0.30;
inline constexpr double kForearm = 0.27;
inline constexpr double kThigh = 0.43;
inline constexpr double kShin = 0.44;
inline constexpr Point3 kTorso{0.0, 1.15, kDepth};
inline constexpr Point3 kNeck{0.0, 1.45, kDepth};
inline constexpr Point3 kHead{0.0, 1.65, kDepth};
inline constexpr double kShoulderX = 0.18, kShoulderY = 1.42;
inline constexpr double kHipX = 0.10, kHipY = 0.95;
} // namespace body

namespace detail {

inline Vec3 unit(const Vec3& v) { return v * (1.0 / v.norm()); }

inline Vec3 arm_direction(const ArmPose& a, double outward) {
    return {outward * std::sin(a.roll), -std::cos(a.roll) * std::cos(a.pitch), -std::cos(a.roll) * std::sin(a.pitch)};
}

// Forearm bends toward the front/up side of the upper arm by exactly `bend`.
inline Vec3 forearm_direction(const Vec3& upper, const ArmPose& a) {
    Vec3 perp{0.0, std::sin(a.pitch), -std::cos(a.pitch)};
    perp = unit(Vec3{perp.dx - perp.dot(upper) * upper.dx, perp.dy - perp.dot(upper) * upper.dy,
                     perp.dz - perp.dot(upper) * upper.dz});
    return unit(Vec3{upper.dx * std::cos(a.bend) + perp.dx * std::sin(a.bend),
                     upper.dy * std::cos(a.bend) + perp.dy * std::sin(a.bend),
                     upper.dz * std::cos(a.bend) + perp.dz * std::sin(a.bend)});
}

} // namespace detail

inline SkeletonFrame build_frame(const BodyPose& pose, std::int64_t stamp_us) {
    using namespace body;
    SkeletonFrame f;
    f.stamp_us = stamp_us;
    const Quaternion twist = Quaternion::about_y(pose.torso_yaw);
    auto upper = [&](const Point3& p) { return rotate_about(twist, kTorso, p); };

    f[SkeletonJoint::torso].position = kTorso;
    f[SkeletonJoint::neck].position = upper(kNeck);
    f[SkeletonJoint::head].position = upper(kHead);

    for (Side side : {Side::left, Side::right}) {
        const double outward = side == Side::right ? 1.0 : -1.0;
        const ArmPose& a = pose.arms[static_cast<std::size_t>(side)];
        const Point3 shoulder{outward * kShoulderX, kShoulderY, kDepth};
        const Vec3 up = detail::arm_direction(a, outward);
        const Point3 elbow = shoulder + up * kUpperArm;
        const Point3 hand = elbow + detail::forearm_direction(up, a) * kForearm;
        const LimbJoints arm = arm_joints(side);
        f[arm.root].position = upper(shoulder);
        f[arm.middle].position = upper(elbow);
        f[arm.end].position = upper(hand);

        const LegPose& l = pose.legs[static_cast<std::size_t>(side)];
        const Point3 hip{outward * kHipX, kHipY, kDepth};
        const Point3 knee = hip + Vec3{0.0, -std::cos(l.swing), -std::sin(l.swing)} * kThigh;
        const double shin = l.swing - l.bend;
        const Point3 foot = knee + Vec3{0.0, -std::cos(shin), -std::sin(shin)} * kShin;
        const LimbJoints leg = leg_joints(side);
        f[leg.root].position = hip;
        f[leg.middle].position = knee;
        f[leg.end].position = foot;
    }

    for (auto& s : f.joints) {
        s.orientation = Quaternion::identity();
        s.confidence = 1.0;
    }
    for (SkeletonJoint j : {SkeletonJoint::torso, SkeletonJoint::neck, SkeletonJoint::head,
                            SkeletonJoint::left_shoulder, SkeletonJoint::right_shoulder})
        f[j].orientation = twist;
    return f;
}

struct SynthParams {
    double duration_s = 0.0;  // 0 = scenario default
    double fps = 20.0;
    double angle = 0.6;       // turn scenario: target torso yaw
    Side leg = Side::right;   // step scenarios: stepping leg
    bool wave_arms = false;   // overlay arm waving on any scenario
    std::int64_t start_us = 0;
};

namespace detail {

// Smooth 0 -> 1 over [t0, t1].
inline double ease(double t, double t0, double t1) {
    if (t <= t0) return 0.0;
    if (t >= t1) return 1.0;
    return 0.5 * (1.0 - std::cos(kPi * (t - t0) / (t1 - t0)));
}

inline double lerp(double a, double b, double s) { return a + (b - a) * s; }

inline void wave(BodyPose& p, double t) {
    auto& right = p.arms[static_cast<std::size_t>(Side::right)];
    auto& left = p.arms[static_cast<std::size_t>(Side::left)];
    right.roll = 0.8 + 0.6 * std::sin(2.0 * kPi * t / 2.0);
    right.bend = 0.6 + 0.5 * std::sin(2.0 * kPi * t);
    left.pitch = 0.7 + 0.5 * std::sin(2.0 * kPi * t / 1.5);
    left.bend = 0.4 + 0.2 * std::cos(2.0 * kPi * t / 1.5);
}

// Lift with knee bend 1.2 rad, then plant the leg straight with its knee
// 0.15 m nearer to (forward) or farther from (back) the sensor.
inline void step(BodyPose& p, double t, Side side, bool forward) {
    const double planted = std::asin(0.15 / body::kThigh) * (forward ? 1.0 : -1.0);
    const double lifted_swing = forward ? 0.7 : -0.3;
    auto& leg = p.legs[static_cast<std::size_t>(side)];
    const double up = ease(t, 0.5, 1.1);
    const double down = ease(t, 1.1, 1.7);
    leg.swing = lerp(lerp(0.0, lifted_swing, up), planted, down);
    leg.bend = lerp(lerp(0.0, 1.2, up), 0.0, down);
}

inline void turn(BodyPose& p, double t, double angle) {
    p.torso_yaw = angle * (ease(t, 0.25, 1.25) - ease(t, 2.75, 3.75));
}

inline double parse_double(std::string_view s, std::string_view scenario) {
    const std::string text(s);
    try {
        std::size_t used = 0;
        const double v = std::stod(text, &used);
        if (used != text.size() || !std::isfinite(v)) throw UnknownScenario(std::string(scenario));
        return v;
    } catch (const std::logic_error&) {
        throw UnknownScenario(std::string(scenario));
    }
}

} // namespace detail

// Scenarios: idle, arm_wave, forward_step, backward_step, turn (params.angle)
// or turn(<radians>).
inline std::vector<SkeletonFrame> synth(std::string_view scenario, SynthParams params = {}) {
    std::string name(scenario);
    if (name.starts_with("turn(") && name.ends_with(")")) {
        params.angle = detail::parse_double(std::string_view(name).substr(5, name.size() - 6), scenario);
        name = "turn";
    }
    double default_duration = 0.0;
    if (name == "idle") default_duration = 2.0;
    else if (name == "arm_wave") default_duration = 4.0;
    else if (name == "forward_step" || name == "backward_step") default_duration = 3.0;
    else if (name == "turn") default_duration = 6.0;
    else throw UnknownScenario(name);
    if (!(params.fps > 0.0)) throw Error("synth: fps must be > 0");

    const double duration = params.duration_s > 0.0 ? params.duration_s : default_duration;
    const auto count = static_cast<std::size_t>(std::llround(duration * params.fps));
    std::vector<SkeletonFrame> frames;
    frames.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        const double t = static_cast<double>(i) / params.fps;
        BodyPose pose;
        if (name == "arm_wave" || params.wave_arms) detail::wave(pose, t);
        if (name == "forward_step") detail::step(pose, t, params.leg, true);
        if (name == "backward_step") detail::step(pose, t, params.leg, false);
        if (name == "turn") detail::turn(pose, t, params.angle);
        frames.push_back(build_frame(pose, params.start_us + std::llround(static_cast<double>(i) * 1e6 / params.fps)));
    }
    return frames;
}

// Appends a scenario so that it continues the stream one frame period after
// its current last frame.
inline void append_scenario(std::vector<SkeletonFrame>& frames, std::string_view scenario, SynthParams params = {}) {
    if (!frames.empty()) params.start_us = frames.back().stamp_us + std::llround(1e6 / params.fps);
    auto more = synth(scenario, params);
    frames.insert(frames.end(), more.begin(), more.end());
}

} // namespace teleop
