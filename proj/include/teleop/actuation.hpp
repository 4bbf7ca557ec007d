#pragma once

// Displacement-proportional speed governor and a kinematic stand-in for the
// servos: each joint slews toward its target at the commanded rate.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "teleop/errors.hpp"
#include "teleop/geometry.hpp"
#include "teleop/robot_model.hpp"

namespace teleop {

struct SpeedGovernorConfig {
    double base_speed_rad_s = 1.0;

    void validate() const {
        if (!(base_speed_rad_s > 0.0) || !std::isfinite(base_speed_rad_s))
            throw InvalidConfig("base_speed_rad_s must be > 0");
    }
};

// w = w0 * (1 + |new - prev| / pi), displacement capped at pi so w <= 2 w0.
inline double govern_speed(const SpeedGovernorConfig& cfg, double phi_new, double phi_prev) {
    const double displacement = std::min(std::abs(phi_new - phi_prev), kPi);
    return cfg.base_speed_rad_s + cfg.base_speed_rad_s * (displacement / kPi);
}

struct JointCommand {
    RobotJoint joint = RobotJoint::r_shoulder_pitch;
    double target_angle = 0.0;
    double speed = 0.0;
    std::int64_t stamp_us = 0;

    friend bool operator==(const JointCommand&, const JointCommand&) = default;
};

struct CommandBatch {
    std::int64_t stamp_us = 0;
    std::vector<JointCommand> commands;

    friend bool operator==(const CommandBatch&, const CommandBatch&) = default;
};

struct ActiveCommand {
    double target = 0.0;
    double speed = 0.0;

    friend bool operator==(const ActiveCommand&, const ActiveCommand&) = default;
};

// Where the robot stands on the floor; advanced by completed motion sets.
struct BasePose {
    double heading = 0.0;  // radians, positive = turned left
    double x = 0.0;
    double z = 0.0;

    friend bool operator==(const BasePose&, const BasePose&) = default;
};

using JointArray = std::array<double, kRobotJointCount>;

struct SimRobotState {
    std::int64_t stamp_us = 0;
    JointArray current_angles{};
    std::array<std::optional<ActiveCommand>, kRobotJointCount> active{};
    BasePose base;

    static SimRobotState at_rest(const RobotModel& robot = default_robot()) {
        SimRobotState s;
        for (std::size_t i = 0; i < kRobotJointCount; ++i) s.current_angles[i] = robot.neutral_angle(joint_at(i));
        return s;
    }

    double angle(RobotJoint j) const { return current_angles[joint_index(j)]; }
    bool idle() const {
        return std::none_of(active.begin(), active.end(), [](const auto& c) { return c.has_value(); });
    }

    friend bool operator==(const SimRobotState&, const SimRobotState&) = default;
};

// One command per joint in `targets`, speed governed against `current`.
inline std::vector<JointCommand> make_commands(const SpeedGovernorConfig& cfg, const JointAngleSet& targets,
                                               const JointArray& current) {
    std::vector<JointCommand> out;
    out.reserve(targets.angles.size());
    for (const auto& [joint, target] : targets.angles) {
        out.push_back({joint, target, govern_speed(cfg, target, current[joint_index(joint)]), targets.stamp_us});
    }
    return out;
}

inline std::vector<JointCommand> make_commands(const SpeedGovernorConfig& cfg, const JointAngleSet& targets,
                                               const SimRobotState& state) {
    return make_commands(cfg, targets, state.current_angles);
}

// Newer commands replace in-flight ones for the same joint.
inline SimRobotState apply_commands(SimRobotState state, std::span<const JointCommand> commands,
                                    const RobotModel& robot = default_robot()) {
    for (const JointCommand& c : commands) {
        const double target = robot.clamp(c.joint, c.target_angle);
        state.active[joint_index(c.joint)] = ActiveCommand{target, c.speed};
    }
    return state;
}

// Arrival slack so that stepping exactly d / w seconds lands on the target
// despite rounding in the accumulated time.
inline constexpr double kArrivalSlack = 1e-12;

inline SimRobotState sim_step(SimRobotState state, double dt, const RobotModel& robot = default_robot()) {
    if (!(dt > 0.0)) throw Error("sim_step: dt must be > 0");
    for (std::size_t i = 0; i < kRobotJointCount; ++i) {
        auto& cmd = state.active[i];
        if (!cmd) continue;
        double& angle = state.current_angles[i];
        const double remaining = cmd->target - angle;
        const double reach = cmd->speed * dt;
        if (std::abs(remaining) <= reach + kArrivalSlack) {
            angle = cmd->target;
            cmd.reset();
        } else {
            angle += std::copysign(reach, remaining);
        }
        angle = robot.clamp(joint_at(i), angle);
    }
    state.stamp_us += std::llround(dt * 1e6);
    return state;
}

// Kinematic robot: owns a SimRobotState and advances it in fixed ticks.
class Simulator {
public:
    explicit Simulator(RobotModel robot = default_robot(), double rate_hz = 100.0)
        : robot_(std::move(robot)), state_(SimRobotState::at_rest(robot_)), rate_hz_(rate_hz) {
        if (!(rate_hz_ > 0.0)) throw InvalidConfig("simulation rate must be > 0");
    }

    const SimRobotState& state() const { return state_; }
    const RobotModel& robot() const { return robot_; }
    double rate_hz() const { return rate_hz_; }

    void apply(std::span<const JointCommand> commands) { state_ = apply_commands(std::move(state_), commands, robot_); }

    void step(double dt) { state_ = sim_step(std::move(state_), dt, robot_); }

    // Advances by `seconds` in ticks of 1/rate, the last tick shortened.
    void advance(double seconds) {
        const double tick = 1.0 / rate_hz_;
        while (seconds > 1e-12) {
            const double dt = std::min(tick, seconds);
            step(dt);
            seconds -= dt;
        }
    }

    // Forward is +z of the start frame at heading 0.
    void move_base(double heading_delta, double displacement) {
        state_.base.x += displacement * std::sin(state_.base.heading);
        state_.base.z += displacement * std::cos(state_.base.heading);
        state_.base.heading = wrap_angle(state_.base.heading + heading_delta);
    }

    void set_stamp(std::int64_t stamp_us) { state_.stamp_us = stamp_us; }

private:
    RobotModel robot_;
    SimRobotState state_;
    double rate_hz_;
};

} // namespace teleop
