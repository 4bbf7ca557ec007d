// Acceptance run: one PASS/FAIL line per criterion, each with its wall time
// and budget. Exit status is non-zero if any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <memory>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "support.hpp"
#include "teleop/bridge.hpp"
#include "teleop/nodes.hpp"
#include "teleop/synth.hpp"

using namespace teleop;
using namespace teleop::testing;
using namespace std::chrono_literals;

namespace {

struct Failure {
    std::string what;
};

#define CHECK(cond, msg)                                                                                   \
    do {                                                                                                   \
        if (!(cond)) {                                                                                     \
            std::ostringstream os_;                                                                        \
            os_ << msg;                                                                                    \
            throw Failure{os_.str()};                                                                      \
        }                                                                                                  \
    } while (0)

Point3 random_point(std::mt19937_64& rng) { return {uniform(rng, -2, 2), uniform(rng, -2, 2), uniform(rng, -2, 2)}; }

// 1. Three-point joint angle.
std::string joint_angle_suite() {
    CHECK(std::abs(joint_angle({0, 1, 0}, {0, 0, 0}, {1, 0, 0}) - kPi / 2) <= 1e-12, "right angle example");
    CHECK(std::abs(joint_angle({0, 2, 0}, {0, 1, 0}, {0, 0, 0}) - 0.0) <= 1e-12, "straight example");
    CHECK(std::abs(joint_angle({0, 1, 0}, {0, 0, 0}, {0, 1, 0}) - kPi) <= 1e-12, "folded example");
    std::mt19937_64 rng(1);
    int skipped = 0;
    for (int i = 0; i < 100000; ++i) {
        const Point3 a = random_point(rng), b = random_point(rng), c = random_point(rng);
        double t;
        try {
            t = joint_angle(a, b, c);
        } catch (const DegenerateSegment&) {
            ++skipped;
            continue;
        }
        CHECK(t >= 0.0 && t <= kPi, "angle out of range at " << i);
        CHECK(std::abs(t - joint_angle(c, b, a)) <= 1e-12, "reversal at " << i);
        const Quaternion q =
            Quaternion{uniform(rng, -1, 1), uniform(rng, -1, 1), uniform(rng, -1, 1), uniform(rng, -1, 1)}.normalized();
        const Vec3 shift{uniform(rng, -1, 1), uniform(rng, -1, 1), uniform(rng, -1, 1)};
        auto move = [&](const Point3& p) { return rotate_about(q, {0, 0, 0}, p) + shift; };
        CHECK(std::abs(joint_angle(move(a), move(b), move(c)) - t) <= 1e-9, "rigid motion at " << i);
        const double k = uniform(rng, 0.1, 10.0);
        auto scale = [&](const Point3& p) { return Point3{b.x + (p.x - b.x) * k, b.y + (p.y - b.y) * k, b.z + (p.z - b.z) * k}; };
        CHECK(std::abs(joint_angle(scale(a), b, scale(c)) - t) <= 1e-9, "scale at " << i);
    }
    return "1e5 triples, " + std::to_string(skipped) + " degenerate";
}

// 2. Speed governor.
std::string governor_suite() {
    const double w0 = 1.3;
    CHECK(govern_speed({w0}, 0.4, 0.4) == w0, "zero displacement");
    CHECK(govern_speed({w0}, kPi, 0.0) == 2 * w0, "half turn");
    CHECK(govern_speed({w0}, -kPi / 2, kPi / 2) == 2 * w0, "half turn across zero");
    std::mt19937_64 rng(2);
    for (int i = 0; i < 100000; ++i) {
        const SpeedGovernorConfig cfg{uniform(rng, 0.01, 100)};
        const double a = uniform(rng, -3 * kPi, 3 * kPi), b = uniform(rng, -3 * kPi, 3 * kPi);
        const double c = uniform(rng, -3 * kPi, 3 * kPi), d = uniform(rng, -3 * kPi, 3 * kPi);
        const double s1 = govern_speed(cfg, a, b), s2 = govern_speed(cfg, c, d);
        CHECK(s1 >= cfg.base_speed_rad_s && s1 <= 2 * cfg.base_speed_rad_s, "range at " << i);
        if (std::abs(a - b) <= std::abs(c - d)) CHECK(s1 <= s2, "monotone at " << i);
        else CHECK(s1 >= s2, "monotone at " << i);
    }
    return "1e5 pairs";
}

// 3. Step decision against a literal transcription of the pseudocode.
struct RefGait {
    bool initial_state = true;
    std::string left = "Null", right = "Null";
};

std::pair<std::string, RefGait> reference_step(RefGait g, bool marked_is_left, double marked_depth,
                                               double unmarked_depth, double depth_threshold) {
    std::string& marked_leg = marked_is_left ? g.left : g.right;
    std::string& unmarked_leg = marked_is_left ? g.right : g.left;
    std::string action = "none";
    const double depth_diff = marked_depth - unmarked_depth;
    if (g.initial_state == true) {
        if (depth_diff > depth_threshold) {
            action = "back step";
            g.initial_state = false;
            marked_leg = "Back";
            unmarked_leg = "Forward";
        } else if (depth_diff < -depth_threshold) {
            action = "forward step";
            g.initial_state = false;
            marked_leg = "Forward";
            unmarked_leg = "Back";
        }
    } else {
        if (marked_leg == "Forward") action = "back step";
        else if (marked_leg == "Back" || marked_leg == "Backward") action = "forward step";
        g.initial_state = true;
        marked_leg = "Null";
        unmarked_leg = "Null";
    }
    return {action, g};
}

std::string word(LegState s) {
    switch (s) {
    case LegState::forward: return "Forward";
    case LegState::back: return "Back";
    default: return "Null";
    }
}

std::string step_decision_suite() {
    constexpr double diffs[] = {-0.2, -0.081, -0.08, 0.0, 0.08, 0.081, 0.2};
    const LegState all[] = {LegState::null, LegState::forward, LegState::back};
    const GaitConfig cfg;
    int cases = 0;
    for (bool initial : {true, false})
        for (LegState l : all)
            for (LegState r : all)
                for (Side marked : {Side::left, Side::right})
                    for (double diff : diffs) {
                        GaitState s;
                        s.initial_state = initial;
                        s.legs = {l, r};
                        StepDecision d = StepDecision::none();
                        GaitState next;
                        try {
                            std::tie(d, next) = decide_step(s, cfg, marked, diff, 0.0);
                        } catch (const InconsistentState& e) {
                            next = e.recovered();
                        }
                        const auto [action, ref] =
                            reference_step({initial, word(l), word(r)}, marked == Side::left, diff, 0.0, cfg.depth_threshold);
                        const std::string got =
                            !d.kind ? "none" : (*d.kind == StepKind::forward ? "forward step" : "back step");
                        CHECK(got == action, "action mismatch at case " << cases);
                        CHECK(!d.kind || d.leg == marked, "leg mismatch at case " << cases);
                        CHECK(next.initial_state == ref.initial_state && word(next.leg(Side::left)) == ref.left &&
                                  word(next.leg(Side::right)) == ref.right,
                              "state mismatch at case " << cases);
                        ++cases;
                    }
    CHECK(cases == 252, "enumerated " << cases);

    std::mt19937_64 rng(3);
    for (int seq = 0; seq < 10000; ++seq) {
        GaitState s;
        for (int i = 0; i < 8; ++i) {
            const Side marked = rng() % 2 ? Side::right : Side::left;
            const double diff = i % 2 ? uniform(rng, -0.3, 0.3) : diffs[rng() % 7];
            const bool was_initial = s.initial_state;
            auto [d, next] = decide_step(s, cfg, marked, diff, 0.0);
            CHECK(next.consistent(), "initial iff both Null broken in sequence " << seq);
            if (was_initial && d.is_step()) {
                auto [d2, closed] = decide_step(next, cfg, rng() % 2 ? Side::right : Side::left, uniform(rng, -0.3, 0.3), 0.0);
                CHECK(d2.is_step() && closed == GaitState::initial(), "two-step neutrality in sequence " << seq);
                next = closed;
            }
            s = next;
        }
    }
    return "252 cases, 1e4 sequences";
}

// 4. Joint limits on every emitted command.
std::string limits_suite() {
    std::vector<SkeletonFrame> frames;
    for (const char* s : {"idle", "arm_wave", "forward_step", "backward_step", "turn", "turn(0.6)", "turn(-1.5707963)"})
        for (bool wave : {false, true}) {
            SynthParams p;
            p.wave_arms = wave;
            append_scenario(frames, s, p);
        }
    std::mt19937_64 rng(4);
    std::int64_t stamp = frames.back().stamp_us;
    for (int i = 0; i < 10000; ++i) {
        SkeletonFrame f = random_skeleton(rng);
        f.stamp_us = (stamp += 50000);
        frames.push_back(f);
    }
    const OfflineRun run = run_offline(frames);
    std::size_t commands = 0;
    for (const auto& m : run.messages)
        if (const auto* b = std::get_if<CommandBatch>(&m.payload))
            for (const auto& c : b->commands) {
                CHECK(default_robot().within_limits(c.joint, c.target_angle),
                      to_string(c.joint) << " commanded " << c.target_angle);
                ++commands;
            }
    CHECK(commands > 0, "no commands emitted");
    for (int i = 0; i < 100000; ++i) {
        const RobotJoint j = joint_at(rng() % kRobotJointCount);
        const double once = clamp_to_limits(j, uniform(rng, -10, 10));
        CHECK(default_robot().within_limits(j, once) && clamp_to_limits(j, once) == once, "clamp idempotence");
    }
    return std::to_string(frames.size()) + " frames, " + std::to_string(commands) + " commands";
}

bool is_event(const OutboundMessage& m, GaitEventType t) {
    const auto* e = std::get_if<GaitEvent>(&m.payload);
    return e && e->type == t;
}

// 5. Upper-body imitation pauses for locomotion and resumes right after.
std::string precedence_suite() {
    SynthParams p;
    p.wave_arms = true;
    const auto frames = synth("forward_step", p);
    Arbiter arbiter;
    bool locomoting = false, saw_interval = false, resumed = false;
    int suppressed_frames = 0;
    for (const auto& f : frames) {
        bool ended = false, angles = false;
        for (const auto& m : arbiter.process_frame(f)) {
            if (is_event(m, GaitEventType::locomotion_start)) {
                CHECK(!locomoting, "nested locomotion interval");
                locomoting = saw_interval = true;
            } else if (is_event(m, GaitEventType::locomotion_end)) {
                locomoting = false;
                ended = true;
            } else if (m.topic == topics::skel_angles) {
                CHECK(!locomoting, "skel_angles during locomotion at stamp " << f.stamp_us);
                angles = true;
            }
        }
        if (locomoting) ++suppressed_frames;
        if (ended) {
            CHECK(angles, "no skel_angles on the frame ending locomotion at stamp " << f.stamp_us);
            resumed = true;
        }
    }
    CHECK(saw_interval && resumed, "no complete locomotion interval");
    return std::to_string(suppressed_frames) + " frames suppressed";
}

// 6. Turn quantization and resulting heading.
TurnPlan quantization_oracle(double yaw, const GaitConfig& cfg) {
    if (std::abs(yaw) <= cfg.yaw_threshold) return {};
    int best = 0;
    for (int n = 1; n <= 1000; ++n)
        if (std::abs(std::abs(yaw) - n * cfg.turn_step_quantum) <= std::abs(std::abs(yaw) - best * cfg.turn_step_quantum))
            best = n;
    return {yaw > 0 ? TurnDirection::left : TurnDirection::right, std::clamp(best, 1, cfg.max_turn_steps)};
}

std::string turning_suite() {
    const GaitConfig cfg;
    std::string detail;
    for (double yaw : {0.6, -kPi / 2}) {
        char scenario[64];
        std::snprintf(scenario, sizeof scenario, "turn(%.17g)", yaw);
        const OfflineRun run = run_offline(synth(scenario), PipelineConfig{}, 8.0);
        std::vector<GaitEvent> turns;
        for (const auto& m : run.messages)
            if (const auto* e = std::get_if<GaitEvent>(&m.payload); e && e->type == GaitEventType::turn) turns.push_back(*e);
        CHECK(turns.size() == 1, scenario << " planned " << turns.size() << " turns");
        const TurnPlan want = quantization_oracle(yaw, cfg);
        CHECK(turns[0].direction == want.direction && turns[0].steps == want.steps,
              scenario << " gave " << turns[0].steps << " steps, oracle " << want.steps);
        const double heading = run.final_state.base.heading;
        CHECK(std::abs(heading - yaw) <= cfg.turn_step_quantum, scenario << " heading " << heading);
        detail += std::string(detail.empty() ? "" : ", ") + std::to_string(want.steps) +
                  (want.direction == TurnDirection::left ? " left" : " right") + " heading " + std::to_string(heading);
    }
    CHECK(quantization_oracle(0.6, cfg) == (TurnPlan{TurnDirection::left, 2}), "0.6 rad is not 2 left steps");
    CHECK(quantization_oracle(-kPi / 2, cfg) == (TurnPlan{TurnDirection::right, 6}), "-pi/2 is not 6 right steps");
    return detail;
}

// 7. Real-time budget and determinism.
std::string realtime_suite() {
    std::vector<SkeletonFrame> frames;
    const char* cycle[] = {"arm_wave", "forward_step", "idle", "backward_step", "turn(0.6)", "turn(-0.9)"};
    SynthParams p;
    p.wave_arms = true;
    for (int i = 0; frames.size() < 1200; ++i) append_scenario(frames, cycle[i % 6], p);
    frames.resize(1200);
    CHECK(frames.back().stamp_us - frames.front().stamp_us == 1199 * 50000LL, "stream is not 60 s at 20 FPS");

    const LatencyReport r = bench_latency(frames, PipelineConfig{}, 1.0);
    char buf[160];
    std::snprintf(buf, sizeof buf, "p50 %.3f ms p95 %.3f ms p99 %.3f ms max %.3f ms, %llu/%llu measured, %llu drops",
                  r.p50_ms, r.p95_ms, r.p99_ms, r.max_ms, static_cast<unsigned long long>(r.measured),
                  static_cast<unsigned long long>(r.frames), static_cast<unsigned long long>(r.drops));
    // Frames inside a locomotion interval emit nothing of their own, so the
    // expected count comes from the offline run of the same stream.
    std::set<std::int64_t> emitting;
    for (const auto& m : run_offline(frames).messages)
        if (!std::holds_alternative<GaitEvent>(m.payload)) emitting.insert(stamp_of(m.payload));
    CHECK(r.measured == emitting.size(), buf << ", expected " << emitting.size());
    CHECK(r.drops == 0, buf);
    CHECK(r.p95_ms < 50.0, buf);

    // Determinism: the real-time replay above and two offline replays of the
    // same stream must log identical outputs on every topic.
    auto offline_log = [&] {
        MessageLog log;
        for (const auto& m : run_offline(frames).messages) log_message(log, m.topic, m.payload);
        return log;
    };
    const MessageLog a = offline_log();
    CHECK(a == offline_log(), "offline replays differ");
    CHECK(a == r.log, "offline and real-time replays logged different messages");
    return buf;
}

// 8. Wire exactness and socket transport.
bool wait_until(const std::function<bool()>& pred, std::chrono::milliseconds timeout) {
    const auto until = std::chrono::steady_clock::now() + timeout;
    while (!pred()) {
        if (std::chrono::steady_clock::now() > until) return false;
        std::this_thread::sleep_for(1ms);
    }
    return true;
}

std::string bus_wire_suite() {
    constexpr PayloadKind kinds[] = {PayloadKind::skeleton_frame, PayloadKind::joint_angles, PayloadKind::joint_commands,
                                     PayloadKind::robot_state, PayloadKind::gait_event};
    std::mt19937_64 rng(8);
    for (int i = 0; i < 5000; ++i) {
        const PayloadKind kind = kinds[i % 5];
        const Payload p = random_payload(rng, kind);
        const Envelope e{std::string(topic_for(kind)), rng() % 100000, stamp_of(p), p};
        const std::string line = encode_envelope(e);
        CHECK(decode_envelope(line) == e && encode_envelope(decode_envelope(line)) == line, "round trip: " << line);
    }

    BridgeServerOptions opts;
    opts.tcp_port = 0;
    opts.ws_port = 0;
    constexpr int kEach = 1500;
    Bus hub(TopicRegistry::canonical(), 100000);
    BridgeServer server(hub, opts);
    const BridgeAddress tcp{"127.0.0.1", server.tcp_port(), Transport::tcp};
    const BridgeAddress ws{"127.0.0.1", server.ws_port(), Transport::websocket};
    std::vector<std::unique_ptr<Bus>> pub_buses, sub_buses;
    std::vector<std::unique_ptr<BridgeClient>> clients;
    std::vector<std::shared_ptr<Subscription>> subs;
    for (int i = 0; i < 4; ++i) {
        sub_buses.push_back(std::make_unique<Bus>(TopicRegistry::canonical(), 100000));
        subs.push_back(sub_buses.back()->subscribe(topics::skel_angles));
        clients.push_back(std::make_unique<BridgeClient>(*sub_buses.back(), i % 2 ? ws : tcp,
                                                         std::set<std::string>{std::string(topics::skel_angles)}));
    }
    for (int i = 0; i < 4; ++i) {
        pub_buses.push_back(std::make_unique<Bus>());
        clients.push_back(std::make_unique<BridgeClient>(*pub_buses.back(), i % 2 ? tcp : ws));
    }
    CHECK(wait_until([&] { return server.linked_peers() == 8; }, 5000ms), "peers did not link");
    {
        std::vector<std::jthread> publishers;
        for (int p = 0; p < 4; ++p)
            publishers.emplace_back([&, p] {
                for (int i = 0; i < kEach; ++i) pub_buses[p]->publish(topics::skel_angles, JointAngleSet{p * 1000000 + i, {}});
            });
    }
    for (int s = 0; s < 4; ++s) {
        CHECK(wait_until([&] { return subs[s]->size() == 4 * kEach; }, 20000ms),
              "subscriber " << s << " got " << subs[s]->size());
        std::vector<std::int64_t> next(4, 0);
        for (const Envelope& e : subs[s]->drain()) {
            const auto stamp = std::get<JointAngleSet>(e.payload).stamp_us;
            const auto p = static_cast<std::size_t>(stamp / 1000000);
            CHECK(stamp % 1000000 == next[p], "FIFO broken for subscriber " << s << " publisher " << p);
            ++next[p];
        }
    }
    for (const auto& c : clients) CHECK(c->dropped() == 0, "client dropped messages");

    TopicRegistry other = TopicRegistry::canonical();
    other.add("extra", PayloadKind::joint_angles);
    Bus odd(other);
    for (const BridgeAddress& a : {tcp, ws}) {
        bool refused = false;
        try {
            BridgeClient c(odd, a);
        } catch (const RegistryMismatch&) {
            refused = true;
        }
        CHECK(refused, "registry mismatch accepted");
    }
    return "5000 round trips, 4x4 x " + std::to_string(kEach) + " over TCP+WS";
}

} // namespace

int main() {
    struct Criterion {
        const char* name;
        double budget_s;
        std::function<std::string()> run;
    };
    const Criterion criteria[] = {
        {"joint-angle", 5, joint_angle_suite},
        {"speed-governor", 2, governor_suite},
        {"step-decision-oracle", 5, step_decision_suite},
        {"joint-limits", 10, limits_suite},
        {"precedence", 10, precedence_suite},
        {"turning", 10, turning_suite},
        {"real-time", 90, realtime_suite},
        {"bus-wire", 10, bus_wire_suite},
    };
    int failed = 0;
    for (const auto& c : criteria) {
        const auto start = std::chrono::steady_clock::now();
        std::string detail;
        bool ok = true;
        try {
            detail = c.run();
        } catch (const Failure& f) {
            ok = false;
            detail = f.what;
        } catch (const std::exception& e) {
            ok = false;
            detail = std::string("exception: ") + e.what();
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        if (ok && secs >= c.budget_s) {
            ok = false;
            detail += "; over time budget";
        }
        std::printf("%s %-22s %7.2f s (budget %g s)  %s\n", ok ? "PASS" : "FAIL", c.name, secs, c.budget_s, detail.c_str());
        std::fflush(stdout);
        failed += !ok;
    }
    std::printf("%d/%zu criteria passed\n", static_cast<int>(std::size(criteria)) - failed, std::size(criteria));
    return failed ? 1 : 0;
}
