#pragma once

// Joint inventory and motion limits of the 20-DOF humanoid.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>

#include "teleop/errors.hpp"
#include "teleop/geometry.hpp"

namespace teleop {

// Underlying value is the robot's joint number (1-20).
enum class RobotJoint : std::uint8_t {
    r_shoulder_pitch = 1,
    l_shoulder_pitch = 2,
    r_shoulder_roll = 3,
    l_shoulder_roll = 4,
    r_elbow = 5,
    l_elbow = 6,
    r_hip_yaw = 7,
    l_hip_yaw = 8,
    r_hip_pitch = 9,
    l_hip_pitch = 10,
    r_hip_roll = 11,
    l_hip_roll = 12,
    r_knee = 13,
    l_knee = 14,
    r_ankle_roll = 15,
    l_ankle_roll = 16,
    r_ankle_pitch = 17,
    l_ankle_pitch = 18,
    head_yaw = 19,
    head_pitch = 20,
};

inline constexpr std::size_t kRobotJointCount = 20;

inline constexpr int joint_number(RobotJoint j) { return static_cast<int>(j); }
inline constexpr std::size_t joint_index(RobotJoint j) { return static_cast<std::size_t>(j) - 1; }
inline constexpr RobotJoint joint_at(std::size_t index) { return static_cast<RobotJoint>(index + 1); }

inline constexpr std::array<std::string_view, kRobotJointCount> kRobotJointNames = {
    "r_shoulder_pitch", "l_shoulder_pitch", "r_shoulder_roll", "l_shoulder_roll",
    "r_elbow",          "l_elbow",          "r_hip_yaw",       "l_hip_yaw",
    "r_hip_pitch",      "l_hip_pitch",      "r_hip_roll",      "l_hip_roll",
    "r_knee",           "l_knee",           "r_ankle_roll",    "l_ankle_roll",
    "r_ankle_pitch",    "l_ankle_pitch",    "head_yaw",        "head_pitch",
};

inline std::string_view to_string(RobotJoint j) { return kRobotJointNames[joint_index(j)]; }

inline std::optional<RobotJoint> robot_joint_from_string(std::string_view name) {
    for (std::size_t i = 0; i < kRobotJointCount; ++i)
        if (kRobotJointNames[i] == name) return joint_at(i);
    return std::nullopt;
}

inline constexpr std::array<RobotJoint, 8> kUpperBodyJoints = {
    RobotJoint::r_shoulder_pitch, RobotJoint::l_shoulder_pitch, RobotJoint::r_shoulder_roll,
    RobotJoint::l_shoulder_roll,  RobotJoint::r_elbow,          RobotJoint::l_elbow,
    RobotJoint::head_yaw,         RobotJoint::head_pitch,
};

inline constexpr std::array<RobotJoint, 12> kLegJoints = {
    RobotJoint::r_hip_yaw,     RobotJoint::l_hip_yaw,     RobotJoint::r_hip_roll,
    RobotJoint::l_hip_roll,    RobotJoint::r_hip_pitch,   RobotJoint::l_hip_pitch,
    RobotJoint::r_knee,        RobotJoint::l_knee,        RobotJoint::r_ankle_pitch,
    RobotJoint::l_ankle_pitch, RobotJoint::r_ankle_roll,  RobotJoint::l_ankle_roll,
};

// Elbows and knees rest straight at 0 even when 0 is a hard stop.
inline bool is_flexion_joint(RobotJoint j) {
    return j == RobotJoint::r_elbow || j == RobotJoint::l_elbow || j == RobotJoint::r_knee ||
           j == RobotJoint::l_knee;
}

struct JointDescriptor {
    RobotJoint joint = RobotJoint::r_shoulder_pitch;
    std::string axis;
    double theta_min = 0.0;
    double theta_max = 0.0;

    int number() const { return joint_number(joint); }
    bool contains(double angle) const { return angle >= theta_min && angle <= theta_max; }
    double clamp(double angle) const { return std::clamp(angle, theta_min, theta_max); }
};

struct JointAngleSet {
    std::int64_t stamp_us = 0;
    std::map<RobotJoint, double> angles;

    friend bool operator==(const JointAngleSet&, const JointAngleSet&) = default;
};

namespace detail {

inline std::array<JointDescriptor, kRobotJointCount> builtin_limits() {
    constexpr double p = kPi;
    std::array<JointDescriptor, kRobotJointCount> t;
    auto set = [&](RobotJoint j, const char* axis, double lo, double hi) {
        t[joint_index(j)] = JointDescriptor{j, axis, lo, hi};
    };
    // Right arm
    set(RobotJoint::r_shoulder_pitch, "Z_1", -4 * p / 3, 4 * p / 3);
    set(RobotJoint::r_shoulder_roll, "Z_2", -p / 2, p / 2);
    set(RobotJoint::r_elbow, "Z_3", 0.0, 5 * p / 6);
    // Left arm
    set(RobotJoint::l_shoulder_pitch, "Z_1", -4 * p / 3, 4 * p / 3);
    set(RobotJoint::l_shoulder_roll, "Z_2", -p / 2, p / 2);
    set(RobotJoint::l_elbow, "Z_3", -5 * p / 6, 0.0);
    // Right leg
    set(RobotJoint::r_hip_yaw, "Z_1", -5 * p / 6, p / 4);
    set(RobotJoint::r_hip_roll, "Z_2", 0.0, p / 3);
    set(RobotJoint::r_hip_pitch, "Z_3", -p / 2, p / 6);
    set(RobotJoint::r_knee, "Z_4", 0.0, 3 * p / 4);
    set(RobotJoint::r_ankle_pitch, "Z_5", -p / 3, p / 3);
    set(RobotJoint::r_ankle_roll, "Z_6", -p / 6, p / 3);
    // Left leg
    set(RobotJoint::l_hip_yaw, "Z_1", -p / 4, 5 * p / 6);
    set(RobotJoint::l_hip_roll, "Z_2", -p / 3, 0.0);
    set(RobotJoint::l_hip_pitch, "Z_3", -p / 6, p / 2);
    set(RobotJoint::l_knee, "Z_4", -3 * p / 4, 0.0);
    set(RobotJoint::l_ankle_pitch, "Z_5", -p / 3, p / 3);
    set(RobotJoint::l_ankle_roll, "Z_6", -p / 6, p / 3);
    // Head
    set(RobotJoint::head_yaw, "Z_1", -5 * p / 6, 5 * p / 6);
    set(RobotJoint::head_pitch, "Z_2", -p / 3, p / 6);
    return t;
}

} // namespace detail

class RobotModel {
public:
    RobotModel() : table_(detail::builtin_limits()) {}

    // Descriptors may arrive in any order but must cover all 20 joints once.
    explicit RobotModel(std::span<const JointDescriptor> descriptors) {
        std::array<bool, kRobotJointCount> seen{};
        if (descriptors.size() != kRobotJointCount)
            throw InvalidConfig("limits table must list exactly 20 joints, got " +
                                std::to_string(descriptors.size()));
        for (const auto& d : descriptors) {
            const std::size_t i = joint_index(d.joint);
            if (seen[i]) throw InvalidConfig("duplicate joint in limits table: " + std::string(to_string(d.joint)));
            if (!std::isfinite(d.theta_min) || !std::isfinite(d.theta_max) || !(d.theta_min < d.theta_max))
                throw InvalidConfig("invalid range for " + std::string(to_string(d.joint)));
            seen[i] = true;
            table_[i] = d;
        }
    }

    std::span<const JointDescriptor, kRobotJointCount> limits_table() const { return table_; }
    const JointDescriptor& descriptor(RobotJoint j) const { return table_[joint_index(j)]; }

    double clamp(RobotJoint j, double angle) const { return descriptor(j).clamp(angle); }
    bool within_limits(RobotJoint j, double angle) const { return descriptor(j).contains(angle); }

    bool within_limits(const JointAngleSet& set) const {
        return std::all_of(set.angles.begin(), set.angles.end(),
                           [&](const auto& kv) { return within_limits(kv.first, kv.second); });
    }

    // 0 where 0 lies strictly inside the range (or the joint is an elbow/knee
    // whose range touches 0), otherwise the range midpoint.
    double neutral_angle(RobotJoint j) const {
        const JointDescriptor& d = descriptor(j);
        const bool zero_inside = d.theta_min < 0.0 && 0.0 < d.theta_max;
        if (zero_inside || (is_flexion_joint(j) && d.contains(0.0))) return 0.0;
        return 0.5 * (d.theta_min + d.theta_max);
    }

    JointAngleSet neutral_pose() const {
        JointAngleSet pose;
        for (std::size_t i = 0; i < kRobotJointCount; ++i) pose.angles[joint_at(i)] = neutral_angle(joint_at(i));
        return pose;
    }

private:
    std::array<JointDescriptor, kRobotJointCount> table_;
};

inline const RobotModel& default_robot() {
    static const RobotModel model;
    return model;
}

inline std::span<const JointDescriptor, kRobotJointCount> limits_table() { return default_robot().limits_table(); }

inline double clamp_to_limits(RobotJoint j, double angle) { return default_robot().clamp(j, angle); }

inline JointAngleSet neutral_pose() { return default_robot().neutral_pose(); }

} // namespace teleop
