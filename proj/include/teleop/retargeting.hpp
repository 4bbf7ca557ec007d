#pragma once

// Upper-body imitation: skeleton arm poses to shoulder pitch/roll and elbow.

#include <array>
#include <cmath>
#include <cstdint>
#include <utility>

#include "teleop/geometry.hpp"
#include "teleop/robot_model.hpp"
#include "teleop/skeleton.hpp"

namespace teleop {

struct UpperBodyAngles {
    std::int64_t stamp_us = 0;
    double shoulder_pitch_l = 0.0;
    double shoulder_pitch_r = 0.0;
    double shoulder_roll_l = 0.0;
    double shoulder_roll_r = 0.0;
    double elbow_l = 0.0;
    double elbow_r = 0.0;

    JointAngleSet to_angle_set() const {
        JointAngleSet s;
        s.stamp_us = stamp_us;
        s.angles = {
            {RobotJoint::r_shoulder_pitch, shoulder_pitch_r}, {RobotJoint::l_shoulder_pitch, shoulder_pitch_l},
            {RobotJoint::r_shoulder_roll, shoulder_roll_r},   {RobotJoint::l_shoulder_roll, shoulder_roll_l},
            {RobotJoint::r_elbow, elbow_r},                   {RobotJoint::l_elbow, elbow_l},
        };
        return s;
    }

    friend bool operator==(const UpperBodyAngles&, const UpperBodyAngles&) = default;
};

struct ArmAngles {
    double shoulder_pitch = 0.0;
    double shoulder_roll = 0.0;
    double elbow = 0.0;
};

// Unclamped arm angles in the right-arm sign convention. `previous_pitch` is
// returned unchanged when the upper arm points along +/-x (no sagittal
// component), and updated otherwise.
inline ArmAngles raw_arm_angles(const Point3& shoulder, const Point3& elbow, const Point3& hand,
                                double& previous_pitch) {
    ArmAngles out;
    out.elbow = joint_angle(shoulder, elbow, hand);

    const Vec3 upper = vector_between(elbow, shoulder);
    const double len = upper.norm();
    if (!(len > kSegmentEpsilon)) throw DegenerateSegment();

    // Sagittal projection measured from straight down; forward (-z) positive.
    const double sagittal = std::hypot(upper.dy, upper.dz);
    if (sagittal >= kSegmentEpsilon) previous_pitch = std::atan2(-upper.dz, -upper.dy);
    out.shoulder_pitch = previous_pitch;

    out.shoulder_roll = std::asin(std::clamp(upper.dx / len, -1.0, 1.0));
    return out;
}

// Pure mapping of one frame. Joints must be confident (see StaleJointFilter).
// previous_pitch holds {left, right} shoulder pitch for singular configurations.
inline UpperBodyAngles retarget_upper_body(const SkeletonFrame& frame, const RobotModel& robot,
                                           std::array<double, 2>& previous_pitch) {
    auto arm = [&](Side side, double& prev) {
        const LimbJoints j = arm_joints(side);
        return raw_arm_angles(frame.position(j.root), frame.position(j.middle), frame.position(j.end), prev);
    };
    // Compute both arms before touching the memory so a throw leaves it intact.
    std::array<double, 2> pitch = previous_pitch;
    const ArmAngles left = arm(Side::left, pitch[0]);
    const ArmAngles right = arm(Side::right, pitch[1]);
    previous_pitch = pitch;

    UpperBodyAngles out;
    out.stamp_us = frame.stamp_us;
    out.shoulder_pitch_r = robot.clamp(RobotJoint::r_shoulder_pitch, right.shoulder_pitch);
    out.shoulder_pitch_l = robot.clamp(RobotJoint::l_shoulder_pitch, left.shoulder_pitch);
    // Raising either arm sideways moves the hand away from the body: +x for the
    // right arm, -x for the left, so the left roll comes out negated.
    out.shoulder_roll_r = robot.clamp(RobotJoint::r_shoulder_roll, right.shoulder_roll);
    out.shoulder_roll_l = robot.clamp(RobotJoint::l_shoulder_roll, left.shoulder_roll);
    out.elbow_r = robot.clamp(RobotJoint::r_elbow, right.elbow);
    out.elbow_l = robot.clamp(RobotJoint::l_elbow, -left.elbow);
    return out;
}

inline UpperBodyAngles retarget_upper_body(const SkeletonFrame& frame) {
    std::array<double, 2> prev{};
    return retarget_upper_body(frame, default_robot(), prev);
}

// Head imitation is not performed; joints 19-20 stay neutral.
inline std::pair<double, double> head_angles(const SkeletonFrame& /*frame*/) { return {0.0, 0.0}; }

// Stateful wrapper owned by one pipeline: keeps the singular-pitch memory.
class Retargeter {
public:
    explicit Retargeter(RobotModel robot = default_robot()) : robot_(std::move(robot)) {}

    UpperBodyAngles retarget(const SkeletonFrame& frame) { return retarget_upper_body(frame, robot_, previous_pitch_); }

    // Upper-body set including the neutral head joints.
    JointAngleSet retarget_full(const SkeletonFrame& frame) {
        JointAngleSet set = retarget(frame).to_angle_set();
        const auto [yaw, pitch] = head_angles(frame);
        set.angles[RobotJoint::head_yaw] = robot_.clamp(RobotJoint::head_yaw, yaw);
        set.angles[RobotJoint::head_pitch] = robot_.clamp(RobotJoint::head_pitch, pitch);
        return set;
    }

    void reset() { previous_pitch_ = {}; }

private:
    RobotModel robot_;
    std::array<double, 2> previous_pitch_{};
};

} // namespace teleop
