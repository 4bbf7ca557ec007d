#pragma once

// Leg-lift detection, the step decision state machine, torso-yaw turn planning
// and playback of canned gait motion sets.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "teleop/actuation.hpp"
#include "teleop/errors.hpp"
#include "teleop/geometry.hpp"
#include "teleop/robot_model.hpp"
#include "teleop/skeleton.hpp"

namespace teleop {

enum class LegState : std::uint8_t { null, forward, back };
enum class LiftPhase : std::uint8_t { grounded, lifted };

inline std::string_view to_string(LegState s) {
    switch (s) {
    case LegState::forward: return "forward";
    case LegState::back: return "back";
    default: return "null";
    }
}

struct GaitState {
    bool initial_state = true;
    std::array<LegState, 2> legs{LegState::null, LegState::null};  // [left, right]
    std::optional<Side> lifted_leg;
    std::array<LiftPhase, 2> lift_phase{LiftPhase::grounded, LiftPhase::grounded};

    static GaitState initial() { return {}; }

    LegState& leg(Side s) { return legs[static_cast<std::size_t>(s)]; }
    LegState leg(Side s) const { return legs[static_cast<std::size_t>(s)]; }

    // initial <=> both Null; otherwise exactly one Forward and one Back.
    bool consistent() const {
        const LegState l = legs[0], r = legs[1];
        if (initial_state) return l == LegState::null && r == LegState::null;
        return (l == LegState::forward && r == LegState::back) || (l == LegState::back && r == LegState::forward);
    }

    friend bool operator==(const GaitState&, const GaitState&) = default;
};

struct GaitConfig {
    double knee_lift_threshold = 0.7;   // rad
    double knee_place_threshold = 0.5;  // rad, hysteresis below the lift threshold
    double depth_threshold = 0.08;      // m
    double yaw_threshold = 0.35;        // rad
    double turn_step_quantum = 0.26;    // rad per turn step
    int max_turn_steps = 12;

    void validate() const {
        for (double v : {knee_lift_threshold, knee_place_threshold, depth_threshold, yaw_threshold, turn_step_quantum})
            if (!(v > 0.0) || !std::isfinite(v)) throw InvalidConfig("gait thresholds must be finite and > 0");
        if (!(knee_place_threshold < knee_lift_threshold))
            throw InvalidConfig("knee_place_threshold must be below knee_lift_threshold");
        if (max_turn_steps < 1) throw InvalidConfig("max_turn_steps must be >= 1");
    }
};

enum class StepKind : std::uint8_t { forward, back };

inline std::string_view to_string(StepKind k) { return k == StepKind::forward ? "forward" : "back"; }

struct StepDecision {
    std::optional<StepKind> kind;  // nullopt = NoStep
    Side leg = Side::left;

    static StepDecision none() { return {}; }
    static StepDecision forward(Side s) { return {StepKind::forward, s}; }
    static StepDecision back(Side s) { return {StepKind::back, s}; }
    bool is_step() const { return kind.has_value(); }

    friend bool operator==(const StepDecision& a, const StepDecision& b) {
        return a.kind == b.kind && (!a.kind || a.leg == b.leg);
    }
};

// A non-initial gait whose marked leg is Null. recovered() is the forced
// initial state callers should continue from.
class InconsistentState : public Error {
public:
    explicit InconsistentState(GaitState recovered)
        : Error("inconsistent gait state: marked leg is Null outside the initial state"), recovered_(recovered) {}
    const GaitState& recovered() const noexcept { return recovered_; }

private:
    GaitState recovered_;
};

// --- sensing -------------------------------------------------------------

// 0 for a straight leg, growing as the knee bends.
inline double knee_angle(const SkeletonFrame& frame, Side side) {
    const LimbJoints j = leg_joints(side);
    return joint_angle(frame.position(j.root), frame.position(j.middle), frame.position(j.end));
}

// Distance of the knee from the sensor (z).
inline double knee_depth(const SkeletonFrame& frame, Side side) { return frame.position(leg_joints(side).middle).z; }

struct LiftEvent {
    enum class Kind : std::uint8_t { none, lifted, placed };
    Kind kind = Kind::none;
    Side leg = Side::left;

    static LiftEvent none() { return {}; }
    static LiftEvent lifted(Side s) { return {Kind::lifted, s}; }
    static LiftEvent placed(Side s) { return {Kind::placed, s}; }

    friend bool operator==(const LiftEvent& a, const LiftEvent& b) {
        return a.kind == b.kind && (a.kind == Kind::none || a.leg == b.leg);
    }
};

// Hysteretic lift tracking; at most one leg is tracked as lifted.
inline std::pair<GaitState, LiftEvent> update_lift(GaitState state, const GaitConfig& cfg, double left_knee,
                                                   double right_knee) {
    const std::array<double, 2> knee{left_knee, right_knee};
    if (state.lifted_leg) {
        const Side s = *state.lifted_leg;
        if (knee[static_cast<std::size_t>(s)] < cfg.knee_place_threshold) {
            state.lift_phase[static_cast<std::size_t>(s)] = LiftPhase::grounded;
            state.lifted_leg.reset();
            return {state, LiftEvent::placed(s)};
        }
        return {state, LiftEvent::none()};
    }
    const bool left_up = left_knee > cfg.knee_lift_threshold;
    const bool right_up = right_knee > cfg.knee_lift_threshold;
    if (!left_up && !right_up) return {state, LiftEvent::none()};
    const Side s = (left_up && (!right_up || left_knee >= right_knee)) ? Side::left : Side::right;
    state.lift_phase[static_cast<std::size_t>(s)] = LiftPhase::lifted;
    state.lifted_leg = s;
    return {state, LiftEvent::lifted(s)};
}

// Step decision at the placement of `marked`. depth_diff = marked - unmarked;
// positive means the marked knee ended up farther from the sensor.
inline std::pair<StepDecision, GaitState> decide_step(GaitState state, const GaitConfig& cfg, Side marked,
                                                      double marked_depth, double unmarked_depth) {
    const Side unmarked = opposite(marked);
    const double depth_diff = marked_depth - unmarked_depth;
    if (state.initial_state) {
        if (depth_diff > cfg.depth_threshold) {
            state.initial_state = false;
            state.leg(marked) = LegState::back;
            state.leg(unmarked) = LegState::forward;
            return {StepDecision::back(marked), state};
        }
        if (depth_diff < -cfg.depth_threshold) {
            state.initial_state = false;
            state.leg(marked) = LegState::forward;
            state.leg(unmarked) = LegState::back;
            return {StepDecision::forward(marked), state};
        }
        return {StepDecision::none(), state};  // within the noise band
    }

    StepDecision decision;
    switch (state.leg(marked)) {
    case LegState::forward: decision = StepDecision::back(marked); break;
    case LegState::back: decision = StepDecision::forward(marked); break;
    case LegState::null: {
        GaitState recovered = state;
        recovered.initial_state = true;
        recovered.legs = {LegState::null, LegState::null};
        throw InconsistentState(recovered);
    }
    }
    state.initial_state = true;
    state.legs = {LegState::null, LegState::null};
    return {decision, state};
}

enum class TurnDirection : std::uint8_t { none, left, right };

inline std::string_view to_string(TurnDirection d) {
    switch (d) {
    case TurnDirection::left: return "left";
    case TurnDirection::right: return "right";
    default: return "none";
    }
}

struct TurnPlan {
    TurnDirection direction = TurnDirection::none;
    int steps = 0;

    friend bool operator==(const TurnPlan&, const TurnPlan&) = default;
};

// Linear quantization of torso yaw into turn steps; positive yaw turns left.
inline TurnPlan plan_turn(const GaitConfig& cfg, double torso_yaw) {
    const double mag = std::abs(torso_yaw);
    if (mag <= cfg.yaw_threshold) return {};
    const auto raw = static_cast<long>(std::lround(mag / cfg.turn_step_quantum));
    const int steps = static_cast<int>(std::clamp<long>(raw, 1, cfg.max_turn_steps));
    return {torso_yaw > 0.0 ? TurnDirection::left : TurnDirection::right, steps};
}

// --- motion sets -----------------------------------------------------------

struct Keyframe {
    JointAngleSet angles;  // leg joints only; stamp unused
    int hold_ms = 0;

    friend bool operator==(const Keyframe&, const Keyframe&) = default;
};

struct MotionSet {
    std::string name;
    std::vector<Keyframe> keyframes;
    double heading_delta = 0.0;  // rad, turns only
    double displacement = 0.0;   // m along heading, steps only

    int total_ms() const {
        int total = 0;
        for (const auto& k : keyframes) total += k.hold_ms;
        return total;
    }

    friend bool operator==(const MotionSet&, const MotionSet&) = default;
};

using MotionLibrary = std::map<std::string, MotionSet>;

inline void validate(const MotionSet& set, const RobotModel& robot = default_robot()) {
    for (std::size_t k = 0; k < set.keyframes.size(); ++k) {
        const Keyframe& kf = set.keyframes[k];
        if (kf.hold_ms < 0) throw InvalidMotionSet(set.name + ": negative hold in keyframe " + std::to_string(k));
        for (const auto& [joint, angle] : kf.angles.angles) {
            if (!robot.within_limits(joint, angle))
                throw InvalidMotionSet(set.name + ": keyframe " + std::to_string(k) + " puts " +
                                       std::string(to_string(joint)) + " outside its limits");
        }
    }
    if (!std::isfinite(set.heading_delta) || !std::isfinite(set.displacement))
        throw InvalidMotionSet(set.name + ": non-finite heading_delta/displacement");
}

inline std::string motion_set_name(const StepDecision& d) {
    const std::string leg(to_string(d.leg));
    return (*d.kind == StepKind::forward ? "forward_step_" : "back_step_") + leg;
}

inline std::string motion_set_name(TurnDirection d) { return d == TurnDirection::left ? "turn_left" : "turn_right"; }

inline constexpr double kDefaultStepLength = 0.04;  // m per step set

// Simulator-only choreography: each set shuffles hip/knee/ankle pitch (and hip
// yaw for turns) and ends on the neutral leg pose.
inline MotionLibrary default_motion_sets(const GaitConfig& gait = {}, const RobotModel& robot = default_robot()) {
    auto neutral_legs = [&] {
        JointAngleSet s;
        for (RobotJoint j : kLegJoints) s.angles[j] = robot.neutral_angle(j);
        return s;
    };
    // Right-leg flexion is negative hip pitch / positive knee; the left leg mirrors.
    auto leg_pose = [&](Side side, double hip_pitch, double knee, double ankle_pitch) {
        JointAngleSet s = neutral_legs();
        const double m = side == Side::right ? 1.0 : -1.0;
        const bool right = side == Side::right;
        auto put = [&](RobotJoint j, double v) { s.angles[j] = robot.clamp(j, v); };
        put(right ? RobotJoint::r_hip_pitch : RobotJoint::l_hip_pitch, m * hip_pitch);
        put(right ? RobotJoint::r_knee : RobotJoint::l_knee, m * knee);
        put(right ? RobotJoint::r_ankle_pitch : RobotJoint::l_ankle_pitch, m * ankle_pitch);
        return s;
    };

    MotionLibrary lib;
    for (Side side : {Side::left, Side::right}) {
        const std::string leg(to_string(side));
        MotionSet fwd{"forward_step_" + leg, {}, 0.0, kDefaultStepLength};
        fwd.keyframes = {{leg_pose(side, -0.45, 0.9, 0.45), 250},
                         {leg_pose(side, -0.30, 0.3, 0.15), 250},
                         {neutral_legs(), 250}};
        MotionSet back{"back_step_" + leg, {}, 0.0, -kDefaultStepLength};
        back.keyframes = {{leg_pose(side, 0.30, 0.9, -0.30), 250},
                          {leg_pose(side, 0.20, 0.3, -0.10), 250},
                          {neutral_legs(), 250}};
        lib.emplace(fwd.name, fwd);
        lib.emplace(back.name, back);
    }

    const double q = gait.turn_step_quantum;
    for (TurnDirection dir : {TurnDirection::left, TurnDirection::right}) {
        const bool left = dir == TurnDirection::left;
        const Side lead = left ? Side::left : Side::right;
        const RobotJoint lead_yaw = left ? RobotJoint::l_hip_yaw : RobotJoint::r_hip_yaw;
        const RobotJoint trail_yaw = left ? RobotJoint::r_hip_yaw : RobotJoint::l_hip_yaw;
        const double sign = left ? 1.0 : -1.0;

        JointAngleSet open = leg_pose(lead, -0.30, 0.6, 0.3);
        open.angles[lead_yaw] = robot.clamp(lead_yaw, sign * q);
        JointAngleSet close = leg_pose(opposite(lead), -0.30, 0.6, 0.3);
        close.angles[trail_yaw] = robot.clamp(trail_yaw, sign * q);

        MotionSet turn{motion_set_name(dir), {}, sign * q, 0.0};
        turn.keyframes = {{open, 200}, {close, 200}, {neutral_legs(), 200}};
        lib.emplace(turn.name, turn);
    }
    for (const auto& [name, set] : lib) validate(set, robot);
    return lib;
}

using CommandSink = std::function<void(const CommandBatch&)>;

// Plays a motion set on a simulator in simulated time: each keyframe becomes a
// governed command batch, held for its duration. The declared heading change
// and displacement are applied on completion. Returns the total duration in ms.
inline int play_motion_set(const MotionSet& set, Simulator& sim, const SpeedGovernorConfig& governor,
                           const CommandSink& emit) {
    validate(set, sim.robot());
    int elapsed = 0;
    for (const Keyframe& kf : set.keyframes) {
        JointAngleSet targets = kf.angles;
        targets.stamp_us = sim.state().stamp_us;
        CommandBatch batch{targets.stamp_us, make_commands(governor, targets, sim.state())};
        if (emit) emit(batch);
        sim.apply(batch.commands);
        if (kf.hold_ms > 0) sim.advance(kf.hold_ms / 1000.0);
        elapsed += kf.hold_ms;
    }
    if (!set.keyframes.empty()) sim.move_base(set.heading_delta, set.displacement);
    return elapsed;
}

// Frame-driven playback used by the arbiter: keyframe k falls due at
// start + sum(hold[0..k)), the set ends at start + total.
class MotionPlayer {
public:
    void start(MotionSet set, std::int64_t start_us) {
        set_ = std::move(set);
        start_us_ = start_us;
        next_ = 0;
    }

    const MotionSet& current() const { return set_; }
    std::int64_t start_us() const { return start_us_; }
    std::int64_t end_us() const { return start_us_ + std::int64_t{set_.total_ms()} * 1000; }
    bool finished(std::int64_t now_us) const { return next_ >= set_.keyframes.size() && now_us >= end_us(); }

    // Keyframes that have fallen due by now_us and were not yet returned.
    std::vector<Keyframe> due(std::int64_t now_us) {
        std::vector<Keyframe> out;
        std::int64_t at = start_us_;
        for (std::size_t k = 0; k < set_.keyframes.size(); ++k) {
            if (k >= next_ && at <= now_us) {
                out.push_back(set_.keyframes[k]);
                next_ = k + 1;
            }
            at += std::int64_t{set_.keyframes[k].hold_ms} * 1000;
        }
        return out;
    }

private:
    MotionSet set_;
    std::int64_t start_us_ = 0;
    std::size_t next_ = 0;
};

// --- gait events published on "gait_events" ---------------------------------

enum class GaitEventType : std::uint8_t {
    lifted,
    placed,
    step,
    turn,
    locomotion_start,
    motion_start,
    motion_end,
    locomotion_end,
    reset,
};

inline constexpr std::array<std::string_view, 9> kGaitEventNames = {
    "lifted", "placed", "step", "turn", "locomotion_start", "motion_start", "motion_end", "locomotion_end", "reset",
};

inline std::string_view to_string(GaitEventType t) { return kGaitEventNames[static_cast<std::size_t>(t)]; }

inline std::optional<GaitEventType> gait_event_from_string(std::string_view s) {
    for (std::size_t i = 0; i < kGaitEventNames.size(); ++i)
        if (kGaitEventNames[i] == s) return static_cast<GaitEventType>(i);
    return std::nullopt;
}

struct GaitEvent {
    std::int64_t stamp_us = 0;
    GaitEventType type = GaitEventType::reset;
    std::optional<Side> leg;
    std::optional<StepKind> step;
    TurnDirection direction = TurnDirection::none;
    int steps = 0;
    std::string motion_set;
    double heading_delta = 0.0;
    double displacement = 0.0;
    std::optional<double> depth_diff;

    friend bool operator==(const GaitEvent&, const GaitEvent&) = default;
};

} // namespace teleop
