#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include "teleop/errors.hpp"
#include "teleop/geometry.hpp"

namespace teleop {

enum class SkeletonJoint : std::uint8_t {
    head,
    neck,
    torso,
    left_shoulder,
    left_elbow,
    left_hand,
    right_shoulder,
    right_elbow,
    right_hand,
    left_hip,
    left_knee,
    left_foot,
    right_hip,
    right_knee,
    right_foot,
};

inline constexpr std::size_t kSkeletonJointCount = 15;

inline constexpr std::array<SkeletonJoint, kSkeletonJointCount> kSkeletonJoints = {
    SkeletonJoint::head,          SkeletonJoint::neck,        SkeletonJoint::torso,
    SkeletonJoint::left_shoulder, SkeletonJoint::left_elbow,  SkeletonJoint::left_hand,
    SkeletonJoint::right_shoulder, SkeletonJoint::right_elbow, SkeletonJoint::right_hand,
    SkeletonJoint::left_hip,      SkeletonJoint::left_knee,   SkeletonJoint::left_foot,
    SkeletonJoint::right_hip,     SkeletonJoint::right_knee,  SkeletonJoint::right_foot,
};

inline constexpr std::array<std::string_view, kSkeletonJointCount> kSkeletonJointNames = {
    "head",          "neck",        "torso",
    "left_shoulder", "left_elbow",  "left_hand",
    "right_shoulder", "right_elbow", "right_hand",
    "left_hip",      "left_knee",   "left_foot",
    "right_hip",     "right_knee",  "right_foot",
};

inline std::string_view to_string(SkeletonJoint j) { return kSkeletonJointNames[static_cast<std::size_t>(j)]; }

inline std::optional<SkeletonJoint> skeleton_joint_from_string(std::string_view name) {
    for (std::size_t i = 0; i < kSkeletonJointCount; ++i)
        if (kSkeletonJointNames[i] == name) return kSkeletonJoints[i];
    return std::nullopt;
}

enum class Side : std::uint8_t { left, right };

inline std::string_view to_string(Side s) { return s == Side::left ? "left" : "right"; }
inline Side opposite(Side s) { return s == Side::left ? Side::right : Side::left; }

struct LimbJoints {
    SkeletonJoint root;
    SkeletonJoint middle;
    SkeletonJoint end;
};

inline LimbJoints arm_joints(Side s) {
    return s == Side::left
               ? LimbJoints{SkeletonJoint::left_shoulder, SkeletonJoint::left_elbow, SkeletonJoint::left_hand}
               : LimbJoints{SkeletonJoint::right_shoulder, SkeletonJoint::right_elbow, SkeletonJoint::right_hand};
}

inline LimbJoints leg_joints(Side s) {
    return s == Side::left
               ? LimbJoints{SkeletonJoint::left_hip, SkeletonJoint::left_knee, SkeletonJoint::left_foot}
               : LimbJoints{SkeletonJoint::right_hip, SkeletonJoint::right_knee, SkeletonJoint::right_foot};
}

// Joints below this confidence are stale and are replaced by the last
// confident sample of the same joint.
inline constexpr double kConfidenceFloor = 0.5;

struct JointSample {
    Point3 position;
    Quaternion orientation;
    double confidence = 1.0;

    bool confident() const { return confidence >= kConfidenceFloor; }
    friend bool operator==(const JointSample&, const JointSample&) = default;
};

struct SkeletonFrame {
    std::int64_t stamp_us = 0;
    std::array<JointSample, kSkeletonJointCount> joints{};

    JointSample& operator[](SkeletonJoint j) { return joints[static_cast<std::size_t>(j)]; }
    const JointSample& operator[](SkeletonJoint j) const { return joints[static_cast<std::size_t>(j)]; }

    // Position of a confident joint; MissingJoint otherwise.
    const Point3& position(SkeletonJoint j) const {
        const JointSample& s = (*this)[j];
        if (!s.confident()) throw MissingJoint(std::string(to_string(j)));
        return s.position;
    }

    friend bool operator==(const SkeletonFrame&, const SkeletonFrame&) = default;
};

// Throws InvalidFrame describing the first violated invariant.
inline void validate(const SkeletonFrame& frame) {
    for (std::size_t i = 0; i < kSkeletonJointCount; ++i) {
        const JointSample& s = frame.joints[i];
        const std::string name(kSkeletonJointNames[i]);
        if (!s.position.is_finite()) throw InvalidFrame(name + ": non-finite position");
        if (!s.orientation.is_finite() || !(s.orientation.norm() > 1e-9))
            throw InvalidFrame(name + ": invalid orientation");
        if (!(s.confidence >= 0.0 && s.confidence <= 1.0))
            throw InvalidFrame(name + ": confidence outside [0, 1]");
    }
}

// Stale-joint hold: low-confidence samples are replaced by the most recent
// confident sample of the same joint. A stale joint with no history stays
// stale, so downstream position() lookups raise MissingJoint.
class StaleJointFilter {
public:
    SkeletonFrame apply(const SkeletonFrame& frame) {
        SkeletonFrame out = frame;
        for (std::size_t i = 0; i < kSkeletonJointCount; ++i) {
            if (frame.joints[i].confident())
                last_[i] = frame.joints[i];
            else if (last_[i])
                out.joints[i] = *last_[i];
        }
        return out;
    }

    void reset() { last_ = {}; }

private:
    std::array<std::optional<JointSample>, kSkeletonJointCount> last_{};
};

} // namespace teleop
