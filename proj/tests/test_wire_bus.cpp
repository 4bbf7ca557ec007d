#include <chrono>
#include <cstdint>
#include <random>
#include <string>
#include <thread>

#include <gtest/gtest.h>

#include "support.hpp"
#include "teleop/bus.hpp"
#include "teleop/wire.hpp"

using namespace teleop;
using namespace teleop::testing;
using namespace std::chrono_literals;

namespace {

constexpr PayloadKind kAllKinds[] = {PayloadKind::skeleton_frame, PayloadKind::joint_angles,
                                     PayloadKind::joint_commands, PayloadKind::robot_state, PayloadKind::gait_event};

std::uint64_t fnv1a64(const std::string& s) {
    std::uint64_t h = 14695981039346656037ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

std::string hex16(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

} // namespace

TEST(Wire, RoundTripAllKinds) {
    std::mt19937_64 rng(71);
    for (int i = 0; i < 2000; ++i) {
        const PayloadKind kind = kAllKinds[i % 5];
        Payload p = random_payload(rng, kind);
        const Envelope e{std::string(topic_for(kind)), rng() % 100000, stamp_of(p), p};
        const std::string line = encode_envelope(e);
        ASSERT_EQ(line.find('\n'), std::string::npos);
        ASSERT_EQ(decode_envelope(line), e) << line;
    }
}

TEST(Wire, RoundTripsJointLimitExtremes) {
    JointAngleSet lo, hi;
    for (std::size_t i = 0; i < kRobotJointCount; ++i) {
        lo.angles[joint_at(i)] = default_robot().descriptor(joint_at(i)).theta_min;
        hi.angles[joint_at(i)] = default_robot().descriptor(joint_at(i)).theta_max;
    }
    for (const auto& s : {lo, hi}) {
        const Envelope e{"skel_angles", 3, 0, s};
        EXPECT_EQ(decode_envelope(encode_envelope(e)), e);
    }
}

TEST(Wire, EnvelopeShape) {
    JointAngleSet s{42, {{RobotJoint::r_elbow, 0.5}}};
    const json j = json::parse(encode_envelope({"skel_angles", 7, 42, s}));
    EXPECT_EQ(j["topic"], "skel_angles");
    EXPECT_EQ(j["seq"], 7);
    EXPECT_EQ(j["stamp_us"], 42);
    EXPECT_EQ(j["kind"], "joint_angles");
    EXPECT_EQ(j["payload"]["angles"]["r_elbow"], 0.5);
}

TEST(Wire, MalformedInputIsParseErrorWithLine) {
    try {
        decode_envelope("{not json", 12);
        FAIL();
    } catch (const ParseError& e) {
        EXPECT_EQ(e.line(), 12u);
    }
    EXPECT_THROW(decode_envelope(R"({"topic":"skel_angles","seq":0,"stamp_us":0,"kind":"nope","payload":{}})"),
                 ParseError);
    EXPECT_THROW(decode_envelope(R"({"topic":"skel_angles","seq":-1,"stamp_us":0,"kind":"joint_angles",)"
                                 R"("payload":{"stamp_us":0,"angles":{}}})"),
                 ParseError);
    EXPECT_THROW(decode_envelope(R"({"topic":"skel_angles","seq":0,"stamp_us":0,"kind":"joint_angles",)"
                                 R"("payload":{"stamp_us":0,"angles":{"tail":1}}})"),
                 ParseError);
}

TEST(Registry, HashIsFnv1aOfSortedTopicKindLines) {
    const std::string expected_text = "commands=joint_commands\n"
                                      "gait_events=gait_event\n"
                                      "robot_state=robot_state\n"
                                      "skel_angles=joint_angles\n"
                                      "skeleton=skeleton_frame\n";
    EXPECT_EQ(hex16(fnv1a64("")), "cbf29ce484222325");
    EXPECT_EQ(hex16(fnv1a64("a")), "af63dc4c8601ec8c");
    EXPECT_EQ(TopicRegistry::canonical().canonical_string(), expected_text);
    EXPECT_EQ(TopicRegistry::canonical().hash(), hex16(fnv1a64(expected_text)));

    TopicRegistry other = TopicRegistry::canonical();
    other.add("extra", PayloadKind::joint_angles);
    EXPECT_NE(other.hash(), TopicRegistry::canonical().hash());
}

TEST(Registry, DuplicateTopicRejected) {
    TopicRegistry r = TopicRegistry::canonical();
    EXPECT_THROW(r.add("skeleton", PayloadKind::skeleton_frame), Error);
}

TEST(Bus, SequenceNumbersPerTopic) {
    Bus bus;
    auto sub = bus.subscribe("skel_angles");
    for (int i = 0; i < 3; ++i) EXPECT_EQ(bus.publish("skel_angles", JointAngleSet{}), std::uint64_t(i));
    EXPECT_EQ(bus.publish("gait_events", GaitEvent{}), 0u);
    for (std::uint64_t i = 0; i < 3; ++i) EXPECT_EQ(sub->try_pop()->seq, i);
    EXPECT_FALSE(sub->try_pop());
}

TEST(Bus, RejectsKindMismatchAndUnknownTopic) {
    Bus bus;
    EXPECT_THROW(bus.publish("skel_angles", CommandBatch{}), KindMismatch);
    EXPECT_THROW(bus.publish("nope", JointAngleSet{}), UnknownTopic);
    EXPECT_THROW(bus.subscribe("nope"), UnknownTopic);
}

TEST(Bus, PublishKeepsStampAndPayload) {
    Bus bus;
    auto sub = bus.subscribe("skel_angles");
    const JointAngleSet s{9, {{RobotJoint::head_yaw, 0.25}}};
    bus.publish("skel_angles", s, 1234);
    const auto e = sub->try_pop();
    ASSERT_TRUE(e);
    EXPECT_EQ(e->stamp_us, 1234);
    EXPECT_EQ(std::get<JointAngleSet>(e->payload), s);
}

TEST(Bus, OverflowDropsOldest) {
    Bus bus;
    auto sub = bus.subscribe("skel_angles");
    for (int i = 0; i < 65; ++i) bus.publish("skel_angles", JointAngleSet{i, {}});
    EXPECT_EQ(sub->dropped(), 1u);
    EXPECT_EQ(sub->size(), 64u);
    EXPECT_EQ(sub->try_pop()->seq, 1u);
}

TEST(Bus, SubscribersAreIndependent) {
    Bus bus;
    auto a = bus.subscribe("commands");
    auto b = bus.subscribe("commands", 2);
    for (int i = 0; i < 5; ++i) bus.publish("commands", CommandBatch{i, {}});
    EXPECT_EQ(a->size(), 5u);
    EXPECT_EQ(b->size(), 2u);
    EXPECT_EQ(b->dropped(), 3u);
}

TEST(Bus, NoCrossTalkFuzz) {
    std::mt19937_64 rng(73);
    Bus bus(TopicRegistry::canonical(), 100000);
    std::map<std::string, std::shared_ptr<Subscription>> subs;
    for (PayloadKind k : kAllKinds) subs[std::string(topic_for(k))] = bus.subscribe(topic_for(k));
    std::map<std::string, std::vector<std::int64_t>> sent;
    for (int i = 0; i < 5000; ++i) {
        const PayloadKind k = kAllKinds[rng() % 5];
        const std::int64_t stamp = i;
        bus.publish(topic_for(k), random_payload(rng, k), stamp);
        sent[std::string(topic_for(k))].push_back(stamp);
    }
    for (auto& [topic, sub] : subs) {
        std::vector<std::int64_t> got;
        std::uint64_t seq = 0;
        for (const Envelope& e : sub->drain()) {
            ASSERT_EQ(e.topic, topic);
            ASSERT_EQ(e.seq, seq++);
            got.push_back(e.stamp_us);
        }
        EXPECT_EQ(got, sent[topic]) << topic;
    }
}

TEST(Bus, ConcurrentPublishersKeepPerPublisherOrder) {
    Bus bus(TopicRegistry::canonical(), 100000);
    auto sub = bus.subscribe("skel_angles");
    constexpr int kPublishers = 4, kEach = 2000;
    std::vector<std::jthread> threads;
    for (int p = 0; p < kPublishers; ++p)
        threads.emplace_back([&, p] {
            for (int i = 0; i < kEach; ++i) bus.publish("skel_angles", JointAngleSet{p * 1000000 + i, {}});
        });
    threads.clear();
    std::vector<int> next(kPublishers, 0);
    std::uint64_t seq = 0;
    for (const Envelope& e : sub->drain()) {
        ASSERT_EQ(e.seq, seq++);
        const auto stamp = std::get<JointAngleSet>(e.payload).stamp_us;
        const int p = static_cast<int>(stamp / 1000000);
        ASSERT_EQ(stamp % 1000000, next[p]++);
    }
    for (int n : next) EXPECT_EQ(n, kEach);
}

TEST(Bus, InjectKeepsSeqAndSkipsOrigin) {
    Bus bus;
    auto sub = bus.subscribe("skel_angles");
    std::vector<Envelope> at_a, at_b;
    const LinkId a = bus.attach([&](const Envelope& e) { at_a.push_back(e); });
    bus.attach([&](const Envelope& e) { at_b.push_back(e); });
    const Envelope e{"skel_angles", 99, 555, JointAngleSet{555, {}}};
    bus.inject(e, a);
    EXPECT_TRUE(at_a.empty());
    ASSERT_EQ(at_b.size(), 1u);
    EXPECT_EQ(at_b[0], e);
    EXPECT_EQ(*sub->try_pop(), e);
    bus.publish("skel_angles", JointAngleSet{});
    EXPECT_EQ(at_a.size(), 1u);
    bus.detach(a);
    bus.publish("skel_angles", JointAngleSet{});
    EXPECT_EQ(at_a.size(), 1u);
    EXPECT_THROW(bus.inject({"skel_angles", 0, 0, CommandBatch{}}, a), KindMismatch);
}

TEST(Bus, CloseWakesReaders) {
    Bus bus;
    auto sub = bus.subscribe("robot_state");
    std::jthread closer([&] {
        std::this_thread::sleep_for(20ms);
        bus.close();
    });
    EXPECT_FALSE(sub->pop(5s));
    EXPECT_TRUE(sub->closed());
    EXPECT_TRUE(bus.subscribe("robot_state")->closed());
}
