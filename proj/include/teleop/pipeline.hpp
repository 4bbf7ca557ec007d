#pragma once

// The arbiter node: per skeleton frame it tracks leg lifts and torso yaw,
// runs locomotion subroutines when a step or turn is triggered, and otherwise
// imitates the upper body. Upper-body output is suppressed for the whole
// duration of a locomotion subroutine.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <deque>
#include <optional>
#include <stop_token>
#include <string>
#include <utility>
#include <vector>

#include "teleop/actuation.hpp"
#include "teleop/bus.hpp"
#include "teleop/locomotion.hpp"
#include "teleop/retargeting.hpp"
#include "teleop/robot_model.hpp"
#include "teleop/skeleton.hpp"
#include "teleop/wire.hpp"

namespace teleop {

struct PipelineConfig {
    double frame_rate_hz = 20.0;
    int imitation_interval_frames = 1;
    SpeedGovernorConfig governor;
    GaitConfig gait;
    double starvation_timeout_s = 1.0;
    // A turn is planned once yaw has stayed within turn_settle_tolerance
    // (max - min) over turn_settle_frames consecutive frames.
    int turn_settle_frames = 3;
    double turn_settle_tolerance = 0.01;

    void validate() const {
        if (!(frame_rate_hz > 0.0)) throw InvalidConfig("frame_rate_hz must be > 0");
        if (imitation_interval_frames < 1) throw InvalidConfig("imitation_interval_frames must be >= 1");
        if (!(starvation_timeout_s > 0.0)) throw InvalidConfig("starvation_timeout_s must be > 0");
        if (turn_settle_frames < 1) throw InvalidConfig("turn_settle_frames must be >= 1");
        if (!(turn_settle_tolerance >= 0.0)) throw InvalidConfig("turn_settle_tolerance must be >= 0");
        governor.validate();
        gait.validate();
    }
};

struct OutboundMessage {
    std::string topic;
    Payload payload;

    friend bool operator==(const OutboundMessage&, const OutboundMessage&) = default;
};

enum class ArbiterMode : std::uint8_t { imitating, locomoting };

struct ArbiterState {
    ArbiterMode mode = ArbiterMode::imitating;
    GaitState gait;
    std::optional<UpperBodyAngles> last_upper;
    std::optional<TurnPlan> pending_turn;  // turn currently being executed
    std::string active_set;                // empty while imitating
    std::int64_t deadline_us = 0;          // end of the active set
};

class Arbiter {
public:
    explicit Arbiter(PipelineConfig cfg = {}, RobotModel robot = default_robot(), MotionLibrary motion_sets = {})
        : cfg_(std::move(cfg)), robot_(std::move(robot)), retargeter_(robot_),
          motion_sets_(motion_sets.empty() ? default_motion_sets(cfg_.gait, robot_) : std::move(motion_sets)) {
        cfg_.validate();
        for (const auto& [name, set] : motion_sets_) validate(set, robot_);
        for (const char* name : {"forward_step_left", "forward_step_right", "back_step_left", "back_step_right",
                                 "turn_left", "turn_right"})
            if (!motion_sets_.count(name)) throw InvalidConfig(std::string("missing motion set: ") + name);
        for (std::size_t i = 0; i < kRobotJointCount; ++i) commanded_[i] = robot_.neutral_angle(joint_at(i));
    }

    const ArbiterState& state() const { return state_; }
    const PipelineConfig& config() const { return cfg_; }
    std::uint64_t frames_processed() const { return processed_; }
    std::uint64_t out_of_order_drops() const { return out_of_order_; }
    const JointArray& commanded() const { return commanded_; }

    std::vector<OutboundMessage> process_frame(const SkeletonFrame& frame) {
        std::vector<OutboundMessage> out;
        if (last_stamp_ && frame.stamp_us <= *last_stamp_) {
            ++out_of_order_;
            return out;
        }
        last_stamp_ = frame.stamp_us;
        ++processed_;
        const std::int64_t now = frame.stamp_us;
        const SkeletonFrame held = filter_.apply(frame);

        // Leg lift tracking. Knee angles that cannot be measured keep their last value.
        for (Side s : {Side::left, Side::right}) {
            try {
                knees_[static_cast<std::size_t>(s)] = knee_angle(held, s);
            } catch (const Error&) {
            }
        }
        const auto [gait, lift] = update_lift(state_.gait, cfg_.gait, knees_[0], knees_[1]);
        state_.gait = gait;
        std::optional<StepDecision> decision;
        if (lift.kind == LiftEvent::Kind::lifted) {
            emit_event(out, now, GaitEventType::lifted, [&](GaitEvent& e) { e.leg = lift.leg; });
        } else if (lift.kind == LiftEvent::Kind::placed) {
            emit_event(out, now, GaitEventType::placed, [&](GaitEvent& e) { e.leg = lift.leg; });
            decision = decide_on_placement(held, lift.leg, now, out);
        }

        track_yaw(held);

        if (state_.mode == ArbiterMode::locomoting) {
            if (decision && decision->is_step()) queue_.push_back(motion_sets_.at(motion_set_name(*decision)));
            advance_locomotion(now, out);
            if (state_.mode == ArbiterMode::locomoting) return out;
            imitating_frames_ = 0;
        }

        if (decision && decision->is_step()) {
            start_locomotion({motion_sets_.at(motion_set_name(*decision))}, now, out);
            return out;
        }
        if (auto turn = turn_trigger()) {
            turn_armed_ = false;
            state_.pending_turn = *turn;
            emit_event(out, now, GaitEventType::turn, [&](GaitEvent& e) {
                e.direction = turn->direction;
                e.steps = turn->steps;
            });
            std::vector<MotionSet> sets(static_cast<std::size_t>(turn->steps),
                                        motion_sets_.at(motion_set_name(turn->direction)));
            start_locomotion(std::move(sets), now, out);
            return out;
        }

        if (imitating_frames_++ % static_cast<std::uint64_t>(cfg_.imitation_interval_frames) == 0)
            emit_upper_body(held, now, out);
        return out;
    }

    // Watchdog response: every joint holds its last commanded angle, any
    // running subroutine is abandoned and the gait returns to the initial state.
    std::vector<OutboundMessage> hold_position(std::int64_t stamp_us) {
        std::vector<OutboundMessage> out;
        CommandBatch batch{stamp_us, {}};
        for (std::size_t i = 0; i < kRobotJointCount; ++i)
            batch.commands.push_back({joint_at(i), commanded_[i], cfg_.governor.base_speed_rad_s, stamp_us});
        out.push_back({std::string(topics::commands), std::move(batch)});
        state_.gait = GaitState::initial();
        state_.mode = ArbiterMode::imitating;
        state_.active_set.clear();
        state_.pending_turn.reset();
        queue_.clear();
        imitating_frames_ = 0;
        emit_event(out, stamp_us, GaitEventType::reset, [](GaitEvent&) {});
        return out;
    }

private:
    template <class Fill>
    void emit_event(std::vector<OutboundMessage>& out, std::int64_t stamp, GaitEventType type, Fill&& fill) {
        GaitEvent e;
        e.stamp_us = stamp;
        e.type = type;
        fill(e);
        out.push_back({std::string(topics::gait_events), std::move(e)});
    }

    std::optional<StepDecision> decide_on_placement(const SkeletonFrame& held, Side marked, std::int64_t now,
                                                    std::vector<OutboundMessage>& out) {
        double marked_depth = 0.0, unmarked_depth = 0.0;
        try {
            marked_depth = knee_depth(held, marked);
            unmarked_depth = knee_depth(held, opposite(marked));
        } catch (const Error&) {
            return std::nullopt;
        }
        try {
            const auto [decision, next] = decide_step(state_.gait, cfg_.gait, marked, marked_depth, unmarked_depth);
            state_.gait = next;
            if (decision.is_step()) {
                emit_event(out, now, GaitEventType::step, [&](GaitEvent& e) {
                    e.leg = decision.leg;
                    e.step = decision.kind;
                    e.depth_diff = marked_depth - unmarked_depth;
                });
            }
            return decision;
        } catch (const InconsistentState& e) {
            state_.gait = e.recovered();
            emit_event(out, now, GaitEventType::reset, [](GaitEvent&) {});
            return std::nullopt;
        }
    }

    void track_yaw(const SkeletonFrame& held) {
        const JointSample& torso = held[SkeletonJoint::torso];
        if (!torso.confident()) return;
        double yaw = 0.0;
        try {
            yaw = quaternion_to_yaw(torso.orientation);
        } catch (const Error&) {
            return;
        }
        yaw_history_.push_back(yaw);
        while (yaw_history_.size() > static_cast<std::size_t>(cfg_.turn_settle_frames)) yaw_history_.pop_front();
        if (std::abs(yaw) <= cfg_.gait.yaw_threshold) turn_armed_ = true;
    }

    // Turns are only decided from the initial stance with both feet down.
    std::optional<TurnPlan> turn_trigger() const {
        if (!turn_armed_ || !state_.gait.initial_state || state_.gait.lifted_leg) return std::nullopt;
        if (yaw_history_.size() < static_cast<std::size_t>(cfg_.turn_settle_frames)) return std::nullopt;
        const auto [lo, hi] = std::minmax_element(yaw_history_.begin(), yaw_history_.end());
        if (*hi - *lo > cfg_.turn_settle_tolerance) return std::nullopt;
        const TurnPlan plan = plan_turn(cfg_.gait, yaw_history_.back());
        if (plan.steps == 0) return std::nullopt;
        return plan;
    }

    void start_locomotion(std::vector<MotionSet> sets, std::int64_t now, std::vector<OutboundMessage>& out) {
        state_.mode = ArbiterMode::locomoting;
        emit_event(out, now, GaitEventType::locomotion_start, [](GaitEvent&) {});
        queue_.assign(std::make_move_iterator(sets.begin()), std::make_move_iterator(sets.end()));
        start_next_set(now, out);
        advance_locomotion(now, out);
    }

    void start_next_set(std::int64_t start_us, std::vector<OutboundMessage>& out) {
        player_.start(std::move(queue_.front()), start_us);
        queue_.pop_front();
        state_.active_set = player_.current().name;
        state_.deadline_us = player_.end_us();
        emit_event(out, start_us, GaitEventType::motion_start,
                   [&](GaitEvent& e) { e.motion_set = player_.current().name; });
    }

    void advance_locomotion(std::int64_t now, std::vector<OutboundMessage>& out) {
        for (;;) {
            for (const Keyframe& kf : player_.due(now)) {
                JointAngleSet targets = kf.angles;
                targets.stamp_us = now;
                emit_commands(targets, out);
            }
            if (!player_.finished(now)) return;
            const MotionSet& done = player_.current();
            emit_event(out, now, GaitEventType::motion_end, [&](GaitEvent& e) {
                e.motion_set = done.name;
                e.heading_delta = done.heading_delta;
                e.displacement = done.displacement;
            });
            if (queue_.empty()) {
                state_.mode = ArbiterMode::imitating;
                state_.active_set.clear();
                state_.pending_turn.reset();
                emit_event(out, now, GaitEventType::locomotion_end, [](GaitEvent&) {});
                return;
            }
            start_next_set(player_.end_us(), out);
        }
    }

    void emit_commands(const JointAngleSet& targets, std::vector<OutboundMessage>& out) {
        CommandBatch batch{targets.stamp_us, make_commands(cfg_.governor, targets, commanded_)};
        for (const auto& [joint, angle] : targets.angles) commanded_[joint_index(joint)] = angle;
        out.push_back({std::string(topics::commands), std::move(batch)});
    }

    void emit_upper_body(const SkeletonFrame& held, std::int64_t now, std::vector<OutboundMessage>& out) {
        JointAngleSet targets;
        try {
            targets = retargeter_.retarget_full(held);
            state_.last_upper = upper_from_set(targets);
        } catch (const Error&) {
            if (!state_.last_upper) return;
            targets = state_.last_upper->to_angle_set();
            targets.angles[RobotJoint::head_yaw] = robot_.neutral_angle(RobotJoint::head_yaw);
            targets.angles[RobotJoint::head_pitch] = robot_.neutral_angle(RobotJoint::head_pitch);
        }
        targets.stamp_us = now;
        out.push_back({std::string(topics::skel_angles), targets});
        emit_commands(targets, out);
    }

    static UpperBodyAngles upper_from_set(const JointAngleSet& s) {
        UpperBodyAngles u;
        u.stamp_us = s.stamp_us;
        u.shoulder_pitch_r = s.angles.at(RobotJoint::r_shoulder_pitch);
        u.shoulder_pitch_l = s.angles.at(RobotJoint::l_shoulder_pitch);
        u.shoulder_roll_r = s.angles.at(RobotJoint::r_shoulder_roll);
        u.shoulder_roll_l = s.angles.at(RobotJoint::l_shoulder_roll);
        u.elbow_r = s.angles.at(RobotJoint::r_elbow);
        u.elbow_l = s.angles.at(RobotJoint::l_elbow);
        return u;
    }

    PipelineConfig cfg_;
    RobotModel robot_;
    Retargeter retargeter_;
    MotionLibrary motion_sets_;
    StaleJointFilter filter_;
    ArbiterState state_;
    MotionPlayer player_;
    std::deque<MotionSet> queue_;
    JointArray commanded_{};
    std::array<double, 2> knees_{};
    std::deque<double> yaw_history_;
    bool turn_armed_ = true;
    std::uint64_t imitating_frames_ = 0;
    std::optional<std::int64_t> last_stamp_;
    std::uint64_t processed_ = 0;
    std::uint64_t out_of_order_ = 0;
};

struct PipelineRunStats {
    std::uint64_t frames = 0;
    std::uint64_t out_of_order = 0;
    std::uint64_t holds = 0;
    std::uint64_t input_drops = 0;
};

inline void publish_all(Bus& bus, std::vector<OutboundMessage>& messages) {
    for (auto& m : messages) bus.publish(m.topic, std::move(m.payload));
}

// Service loop: consumes "skeleton", publishes the arbiter's output. After
// starvation_timeout_s without input it publishes one hold-position set and a
// gait reset; it exits with a final hold when stopped or when the bus closes.
// `frames_done`, when given, counts frames whose output has been published.
// `input` must be a "skeleton" subscription; taking it from the caller lets
// frames published before the loop thread starts reach the loop.
inline PipelineRunStats run_pipeline(Bus& bus, Arbiter& arbiter, std::shared_ptr<Subscription> input,
                                     std::stop_token stop, std::atomic<std::uint64_t>* frames_done = nullptr) {
    using clock = std::chrono::steady_clock;
    const auto timeout = std::chrono::duration<double>(arbiter.config().starvation_timeout_s);
    PipelineRunStats stats;
    auto last_input = clock::now();
    bool starved = false;
    auto hold = [&] {
        auto msgs = arbiter.hold_position(wall_clock_us());
        publish_all(bus, msgs);
        ++stats.holds;
    };

    while (!stop.stop_requested()) {
        auto env = input->pop(std::chrono::milliseconds(5));
        if (env) {
            auto msgs = arbiter.process_frame(std::get<SkeletonFrame>(env->payload));
            publish_all(bus, msgs);
            if (frames_done) ++*frames_done;
            last_input = clock::now();
            starved = false;
            continue;
        }
        if (input->closed()) break;
        if (!starved && clock::now() - last_input > timeout) {
            hold();
            starved = true;
        }
    }
    hold();
    stats.frames = arbiter.frames_processed();
    stats.out_of_order = arbiter.out_of_order_drops();
    stats.input_drops = input->dropped();
    return stats;
}

inline PipelineRunStats run_pipeline(Bus& bus, Arbiter& arbiter, std::stop_token stop,
                                     std::size_t input_capacity = kDefaultSubscriptionCapacity,
                                     std::atomic<std::uint64_t>* frames_done = nullptr) {
    return run_pipeline(bus, arbiter, bus.subscribe(topics::skeleton, input_capacity), std::move(stop), frames_done);
}

} // namespace teleop
