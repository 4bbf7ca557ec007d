#include <algorithm>
#include <chrono>
#include <random>
#include <sstream>
#include <string>

#include <gtest/gtest.h>

#include "teleop/nodes.hpp"
#include "teleop/stream_io.hpp"
#include "teleop/synth.hpp"

using namespace teleop;

namespace {

std::size_t line_count(const std::string& s) { return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n')); }

std::vector<GaitEvent> gait_events(const OfflineRun& run, GaitEventType type) {
    std::vector<GaitEvent> out;
    for (const auto& m : run.messages)
        if (const auto* e = std::get_if<GaitEvent>(&m.payload); e && e->type == type) out.push_back(*e);
    return out;
}

} // namespace

TEST(Record, EmptyStreamIsHeaderOnly) {
    std::ostringstream out;
    EXPECT_EQ(record({}, out), 0u);
    EXPECT_EQ(line_count(out.str()), 1u);
    const json h = json::parse(out.str());
    EXPECT_EQ(h["format"], "teleop-stream/1");
    EXPECT_EQ(h["frame_rate_hz"], 20.0);
    EXPECT_EQ(h["joints"].size(), 15u);
}

TEST(Record, FiftyFramesFiftyOneLines) {
    SynthParams p;
    p.duration_s = 2.5;
    const auto frames = synth("arm_wave", p);
    ASSERT_EQ(frames.size(), 50u);
    std::ostringstream out;
    EXPECT_EQ(record(frames, out), 50u);
    EXPECT_EQ(line_count(out.str()), 51u);
}

TEST(Record, NonMonotoneStampAtFrameTenNamesLineEleven) {
    auto frames = synth("idle");
    frames[9].stamp_us = frames[8].stamp_us;
    std::ostringstream out;
    try {
        record(frames, out);
        FAIL();
    } catch (const ParseError& e) {
        EXPECT_EQ(e.line(), 11u);
    }
}

TEST(Record, InvalidFrameNamesItsLine) {
    auto frames = synth("idle");
    frames[2][SkeletonJoint::head].confidence = 2.0;
    std::ostringstream out;
    try {
        record(frames, out);
        FAIL();
    } catch (const ParseError& e) {
        EXPECT_EQ(e.line(), 4u);
    }
}

TEST(Stream, RoundTripIsExact) {
    std::vector<SkeletonFrame> frames;
    for (const char* s : {"idle", "arm_wave", "forward_step", "turn(0.6)"}) append_scenario(frames, s);
    std::stringstream io;
    record(frames, io);
    const std::string first = io.str();
    EXPECT_EQ(read_stream(io), frames);

    // Re-recording what was read back is byte-identical.
    std::istringstream again(first);
    std::ostringstream second;
    record(read_stream(again), second);
    EXPECT_EQ(second.str(), first);
}

TEST(Stream, HeaderIsValidated) {
    std::istringstream empty("");
    EXPECT_THROW(StreamReader{empty}, ParseError);
    std::istringstream wrong(R"({"format":"other/1","frame_rate_hz":20,"joints":[]})" "\n");
    EXPECT_THROW(StreamReader{wrong}, ParseError);
}

TEST(Replay, MultiplierZeroPreservesOrder) {
    const auto frames = synth("arm_wave");
    std::stringstream io;
    record(frames, io);
    std::vector<SkeletonFrame> got;
    const auto start = std::chrono::steady_clock::now();
    EXPECT_EQ(replay(io, 0.0, [&](const SkeletonFrame& f) { got.push_back(f); }), frames.size());
    EXPECT_LT(std::chrono::steady_clock::now() - start, std::chrono::seconds(1));
    EXPECT_EQ(got, frames);
}

TEST(Replay, MultiplierOneSpacesFramesAtFrameRate) {
    SynthParams p;
    p.duration_s = 0.5;
    const auto frames = synth("idle", p);
    std::stringstream io;
    record(frames, io);
    std::vector<std::chrono::steady_clock::time_point> at;
    replay(io, 1.0, [&](const SkeletonFrame&) { at.push_back(std::chrono::steady_clock::now()); });
    ASSERT_EQ(at.size(), 10u);
    const double total_ms = std::chrono::duration<double, std::milli>(at.back() - at.front()).count();
    EXPECT_NEAR(total_ms / 9.0, 50.0, 5.0);
    using ms = std::chrono::duration<double, std::milli>;
    for (std::size_t i = 1; i < at.size(); ++i) EXPECT_GT(ms(at[i] - at[i - 1]).count(), 40.0);
}

TEST(Replay, TruncatedLastLineFailsAfterEarlierFrames) {
    SynthParams p;
    p.duration_s = 0.5;
    const auto frames = synth("idle", p);
    std::ostringstream out;
    record(frames, out);
    std::string text = out.str();
    text.resize(text.size() - 40);
    std::istringstream in(text);
    std::vector<SkeletonFrame> got;
    try {
        replay(in, 0.0, [&](const SkeletonFrame& f) { got.push_back(f); });
        FAIL();
    } catch (const ParseError& e) {
        EXPECT_EQ(e.line(), 11u);
    }
    EXPECT_EQ(got, std::vector<SkeletonFrame>(frames.begin(), frames.end() - 1));
}

TEST(Replay, RejectsNegativeMultiplier) {
    std::stringstream io;
    record({}, io);
    EXPECT_THROW(replay(io, -1.0, [](const SkeletonFrame&) {}), Error);
}

TEST(Replay, PublishesOnSkeletonTopic) {
    Bus bus;
    auto sub = bus.subscribe(topics::skeleton);
    const auto frames = synth("idle");
    std::stringstream io;
    record(frames, io);
    EXPECT_EQ(replay(io, 0.0, bus), 40u);
    const auto got = sub->drain();
    ASSERT_EQ(got.size(), 40u);
    for (std::size_t i = 0; i < got.size(); ++i) EXPECT_EQ(std::get<SkeletonFrame>(got[i].payload), frames[i]);
}

TEST(Synth, IdleIsFortyQuietFrames) {
    const auto frames = synth("idle");
    ASSERT_EQ(frames.size(), 40u);
    EXPECT_EQ(frames[1].stamp_us - frames[0].stamp_us, 50000);
    const OfflineRun run = run_offline(frames);
    for (const auto& m : run.messages) EXPECT_NE(m.topic, topics::gait_events);
}

TEST(Synth, ForwardStepFiresExactlyOneForwardStep) {
    for (Side leg : {Side::left, Side::right}) {
        SynthParams p;
        p.leg = leg;
        const OfflineRun run = run_offline(synth("forward_step", p));
        EXPECT_EQ(gait_events(run, GaitEventType::lifted).size(), 1u);
        EXPECT_EQ(gait_events(run, GaitEventType::placed).size(), 1u);
        const auto steps = gait_events(run, GaitEventType::step);
        ASSERT_EQ(steps.size(), 1u);
        EXPECT_EQ(steps[0].step, StepKind::forward);
        EXPECT_EQ(steps[0].leg, leg);
        EXPECT_LT(*steps[0].depth_diff, -GaitConfig{}.depth_threshold);
    }
}

TEST(Synth, BackwardStepFiresExactlyOneBackStep) {
    const OfflineRun run = run_offline(synth("backward_step"));
    const auto steps = gait_events(run, GaitEventType::step);
    ASSERT_EQ(steps.size(), 1u);
    EXPECT_EQ(steps[0].step, StepKind::back);
    EXPECT_GT(*steps[0].depth_diff, GaitConfig{}.depth_threshold);
}

TEST(Synth, TurnPointSixPlansTwoLeft) {
    const OfflineRun run = run_offline(synth("turn(0.6)"));
    const auto turns = gait_events(run, GaitEventType::turn);
    ASSERT_EQ(turns.size(), 1u);
    EXPECT_EQ(turns[0].direction, TurnDirection::left);
    EXPECT_EQ(turns[0].steps, 2);
    EXPECT_EQ(plan_turn(GaitConfig{}, 0.6), (TurnPlan{TurnDirection::left, 2}));
}

TEST(Synth, TorsoYawMatchesRequestedAngle) {
    BodyPose p;
    p.torso_yaw = 0.6;
    EXPECT_NEAR(quaternion_to_yaw(build_frame(p, 0)[SkeletonJoint::torso].orientation), 0.6, 1e-12);
}

TEST(Synth, UnknownScenario) {
    EXPECT_THROW(synth("moonwalk"), UnknownScenario);
    EXPECT_THROW(synth("turn(abc)"), UnknownScenario);
    EXPECT_THROW(synth("turn(0.6"), UnknownScenario);
}

TEST(Synth, EveryScenarioIsValidAndFullyConfident) {
    for (const char* s : {"idle", "arm_wave", "forward_step", "backward_step", "turn", "turn(-1.2)"}) {
        SynthParams p;
        p.wave_arms = true;
        for (const auto& f : synth(s, p)) {
            ASSERT_NO_THROW(validate(f)) << s;
            for (const auto& j : f.joints) ASSERT_TRUE(j.confident()) << s;
            ASSERT_NO_THROW(Retargeter().retarget_full(f)) << s;
        }
    }
}

TEST(Synth, AppendContinuesTheStream) {
    std::vector<SkeletonFrame> frames = synth("idle");
    append_scenario(frames, "idle");
    ASSERT_EQ(frames.size(), 80u);
    for (std::size_t i = 1; i < frames.size(); ++i) EXPECT_EQ(frames[i].stamp_us - frames[i - 1].stamp_us, 50000);
}

TEST(Synth, LimbLengthsAreRigid) {
    SynthParams p;
    p.wave_arms = true;
    for (const auto& f : synth("forward_step", p)) {
        EXPECT_NEAR(vector_between(f[SkeletonJoint::right_knee].position, f[SkeletonJoint::right_hip].position).norm(),
                    body::kThigh, 1e-12);
        EXPECT_NEAR(vector_between(f[SkeletonJoint::right_foot].position, f[SkeletonJoint::right_knee].position).norm(),
                    body::kShin, 1e-12);
        EXPECT_NEAR(vector_between(f[SkeletonJoint::left_hand].position, f[SkeletonJoint::left_elbow].position).norm(),
                    body::kForearm, 1e-12);
    }
}
