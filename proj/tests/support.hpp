#pragma once

// Random payload generators shared by the wire, bridge and acceptance tests.

#include <random>

#include "teleop/bus.hpp"
#include "teleop/wire.hpp"

namespace teleop::testing {

inline double uniform(std::mt19937_64& rng, double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline SkeletonFrame random_skeleton(std::mt19937_64& rng) {
    SkeletonFrame f;
    f.stamp_us = std::uniform_int_distribution<std::int64_t>(0, 1LL << 50)(rng);
    for (auto& s : f.joints) {
        s.position = {uniform(rng, -3, 3), uniform(rng, -1, 3), uniform(rng, 0.5, 5)};
        s.orientation = Quaternion{uniform(rng, -1, 1), uniform(rng, -1, 1), uniform(rng, -1, 1), 0.5};
        s.confidence = uniform(rng, 0, 1);
    }
    return f;
}

inline double random_angle_for(std::mt19937_64& rng, RobotJoint j) {
    const auto& d = default_robot().descriptor(j);
    switch (std::uniform_int_distribution<int>(0, 3)(rng)) {
    case 0: return d.theta_min;
    case 1: return d.theta_max;
    default: return uniform(rng, d.theta_min, d.theta_max);
    }
}

inline JointAngleSet random_angles(std::mt19937_64& rng) {
    JointAngleSet s;
    s.stamp_us = std::uniform_int_distribution<std::int64_t>(0, 1LL << 50)(rng);
    for (std::size_t i = 0; i < kRobotJointCount; ++i)
        if (rng() % 2) s.angles[joint_at(i)] = random_angle_for(rng, joint_at(i));
    return s;
}

inline CommandBatch random_commands(std::mt19937_64& rng) {
    CommandBatch b;
    b.stamp_us = std::uniform_int_distribution<std::int64_t>(0, 1LL << 50)(rng);
    for (std::size_t i = 0; i < kRobotJointCount; ++i)
        if (rng() % 3 == 0)
            b.commands.push_back({joint_at(i), random_angle_for(rng, joint_at(i)), uniform(rng, 0.1, 2), b.stamp_us});
    return b;
}

inline SimRobotState random_robot_state(std::mt19937_64& rng) {
    SimRobotState s;
    s.stamp_us = std::uniform_int_distribution<std::int64_t>(0, 1LL << 50)(rng);
    for (std::size_t i = 0; i < kRobotJointCount; ++i) {
        s.current_angles[i] = random_angle_for(rng, joint_at(i));
        if (rng() % 2) s.active[i] = ActiveCommand{random_angle_for(rng, joint_at(i)), uniform(rng, 0.1, 2)};
    }
    s.base = {uniform(rng, -kPi, kPi), uniform(rng, -5, 5), uniform(rng, -5, 5)};
    return s;
}

inline GaitEvent random_gait_event(std::mt19937_64& rng) {
    GaitEvent e;
    e.stamp_us = std::uniform_int_distribution<std::int64_t>(0, 1LL << 50)(rng);
    e.type = static_cast<GaitEventType>(rng() % kGaitEventNames.size());
    if (rng() % 2) e.leg = rng() % 2 ? Side::left : Side::right;
    if (rng() % 2) e.step = rng() % 2 ? StepKind::forward : StepKind::back;
    e.direction = static_cast<TurnDirection>(rng() % 3);
    e.steps = static_cast<int>(rng() % 13);
    e.motion_set = rng() % 2 ? "turn_left" : "";
    e.heading_delta = uniform(rng, -1, 1);
    e.displacement = uniform(rng, -0.1, 0.1);
    if (rng() % 2) e.depth_diff = uniform(rng, -0.3, 0.3);
    return e;
}

inline Payload random_payload(std::mt19937_64& rng, PayloadKind kind) {
    switch (kind) {
    case PayloadKind::skeleton_frame: return random_skeleton(rng);
    case PayloadKind::joint_angles: return random_angles(rng);
    case PayloadKind::joint_commands: return random_commands(rng);
    case PayloadKind::robot_state: return random_robot_state(rng);
    case PayloadKind::gait_event: return random_gait_event(rng);
    }
    return random_angles(rng);
}

inline std::string_view topic_for(PayloadKind kind) {
    switch (kind) {
    case PayloadKind::skeleton_frame: return topics::skeleton;
    case PayloadKind::joint_angles: return topics::skel_angles;
    case PayloadKind::joint_commands: return topics::commands;
    case PayloadKind::robot_state: return topics::robot_state;
    case PayloadKind::gait_event: return topics::gait_events;
    }
    return topics::skeleton;
}

} // namespace teleop::testing
