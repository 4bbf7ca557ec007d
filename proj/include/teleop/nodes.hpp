#pragma once

// Simulator node, an offline lockstep runner, and the latency bench.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <map>
#include <span>
#include <stop_token>
#include <string>
#include <thread>
#include <vector>

#include "teleop/actuation.hpp"
#include "teleop/bus.hpp"
#include "teleop/locomotion.hpp"
#include "teleop/pipeline.hpp"
#include "teleop/skeleton.hpp"
#include "teleop/wire.hpp"

namespace teleop {

// Applies a gait event to the simulated base pose; only motion_end moves it.
inline void apply_gait_event(Simulator& sim, const GaitEvent& e) {
    if (e.type == GaitEventType::motion_end) sim.move_base(e.heading_delta, e.displacement);
}

struct SimulatorRunStats {
    std::uint64_t ticks = 0;
    std::uint64_t batches = 0;
    std::uint64_t dropped = 0;
};

// Consumes "commands" and "gait_events", publishes "robot_state" once per tick.
inline SimulatorRunStats run_simulator(Bus& bus, Simulator& sim, std::stop_token stop) {
    using clock = std::chrono::steady_clock;
    auto commands = bus.subscribe(topics::commands, 1024);
    auto events = bus.subscribe(topics::gait_events, 1024);
    const auto tick = std::chrono::duration_cast<clock::duration>(std::chrono::duration<double>(1.0 / sim.rate_hz()));
    SimulatorRunStats stats;
    auto next = clock::now();
    sim.set_stamp(wall_clock_us());
    while (!stop.stop_requested() && !bus.closed()) {
        for (auto& env : commands->drain()) {
            sim.apply(std::get<CommandBatch>(env.payload).commands);
            ++stats.batches;
        }
        for (auto& env : events->drain()) apply_gait_event(sim, std::get<GaitEvent>(env.payload));
        sim.step(1.0 / sim.rate_hz());
        sim.set_stamp(wall_clock_us());
        bus.publish(topics::robot_state, sim.state());
        ++stats.ticks;
        next += tick;
        std::this_thread::sleep_until(next);
    }
    stats.dropped = commands->dropped() + events->dropped();
    return stats;
}

struct OfflineRun {
    std::vector<OutboundMessage> messages;
    SimRobotState final_state;
    std::uint64_t frames = 0;
};

// Drives an arbiter and a simulator in lockstep on frame stamps, with no
// threads and no wall clock. The simulator settles for `settle_s` at the end.
inline OfflineRun run_offline(std::span<const SkeletonFrame> frames, Arbiter& arbiter, Simulator& sim,
                              double settle_s = 1.0) {
    OfflineRun run;
    bool started = false;
    for (const SkeletonFrame& frame : frames) {
        if (!started) {
            sim.set_stamp(frame.stamp_us);
            started = true;
        } else if (frame.stamp_us > sim.state().stamp_us) {
            sim.advance(static_cast<double>(frame.stamp_us - sim.state().stamp_us) / 1e6);
        }
        auto out = arbiter.process_frame(frame);
        for (const auto& m : out) {
            if (const auto* batch = std::get_if<CommandBatch>(&m.payload)) sim.apply(batch->commands);
            if (const auto* event = std::get_if<GaitEvent>(&m.payload)) apply_gait_event(sim, *event);
        }
        run.messages.insert(run.messages.end(), std::make_move_iterator(out.begin()),
                            std::make_move_iterator(out.end()));
    }
    if (settle_s > 0.0) sim.advance(settle_s);
    run.final_state = sim.state();
    run.frames = arbiter.frames_processed();
    return run;
}

inline OfflineRun run_offline(std::span<const SkeletonFrame> frames, const PipelineConfig& cfg = {},
                              double settle_s = 1.0) {
    Arbiter arbiter(cfg);
    Simulator sim;
    return run_offline(frames, arbiter, sim, settle_s);
}

// Topic -> payload lines in arrival order. Envelope stamps and seqs are left
// out, so logs from separate runs compare equal when the outputs match.
using MessageLog = std::map<std::string, std::vector<std::string>>;

inline void log_message(MessageLog& log, std::string_view topic, const Payload& payload) {
    log[std::string(topic)].push_back(wire::encode(payload).dump());
}

struct LatencyReport {
    std::uint64_t frames = 0;     // frames published
    std::uint64_t measured = 0;   // frames with a matching output
    double p50_ms = 0.0;
    double p95_ms = 0.0;
    double p99_ms = 0.0;
    double max_ms = 0.0;
    std::uint64_t drops = 0;      // bus overflow drops plus out-of-order frames
    MessageLog log;
};

// Nearest-rank percentile of an ascending sample.
inline double percentile(const std::vector<double>& sorted, double p) {
    if (sorted.empty()) return 0.0;
    const auto rank = static_cast<std::size_t>(std::ceil(p / 100.0 * static_cast<double>(sorted.size())));
    return sorted[std::clamp<std::size_t>(rank, 1, sorted.size()) - 1];
}

// Publishes frames on an in-process bus served by the pipeline loop and times
// each frame from publish to the first "commands" or "skel_angles" message
// carrying its stamp. `multiplier` paces publishing as in replay().
inline LatencyReport bench_latency(std::span<const SkeletonFrame> frames, const PipelineConfig& cfg = {},
                                   double multiplier = 1.0) {
    using clock = std::chrono::steady_clock;
    Bus bus;
    Arbiter arbiter(cfg);
    std::atomic<std::uint64_t> done{0};
    const std::size_t out_capacity = std::max<std::size_t>(1024, frames.size() * 4);
    auto cmd_sub = bus.subscribe(topics::commands, out_capacity);
    auto angle_sub = bus.subscribe(topics::skel_angles, out_capacity);
    auto event_sub = bus.subscribe(topics::gait_events, out_capacity);

    std::map<std::int64_t, clock::time_point> egress;
    MessageLog log;
    std::atomic<bool> observing{true};
    std::thread observer([&] {
        auto take = [&](Subscription& sub) {
            bool any = false;
            while (auto env = sub.try_pop()) {
                const auto now = clock::now();
                any = true;
                log_message(log, env->topic, env->payload);
                if (env->kind() != PayloadKind::gait_event) egress.try_emplace(stamp_of(env->payload), now);
            }
            return any;
        };
        while (observing) {
            // Block briefly on commands, the topic every imitated frame produces.
            if (auto env = cmd_sub->pop(std::chrono::milliseconds(2))) {
                const auto now = clock::now();
                log_message(log, env->topic, env->payload);
                egress.try_emplace(stamp_of(env->payload), now);
            }
            take(*angle_sub);
            take(*cmd_sub);
            take(*event_sub);
        }
        take(*angle_sub);
        take(*cmd_sub);
        take(*event_sub);
    });

    PipelineRunStats stats;
    auto input = bus.subscribe(topics::skeleton);
    std::jthread pipeline([&](std::stop_token st) { stats = run_pipeline(bus, arbiter, input, st, &done); });

    std::map<std::int64_t, clock::time_point> ingress;
    const auto start = clock::now();
    const std::int64_t first = frames.empty() ? 0 : frames.front().stamp_us;
    for (const SkeletonFrame& f : frames) {
        if (multiplier > 0.0)
            std::this_thread::sleep_until(start + std::chrono::duration_cast<clock::duration>(
                                                      std::chrono::duration<double, std::micro>(
                                                          static_cast<double>(f.stamp_us - first) * multiplier)));
        ingress[f.stamp_us] = clock::now();
        bus.publish(topics::skeleton, f);
    }

    // Wait for the loop to finish the stream, then for the observer to catch up.
    const auto deadline = clock::now() + std::chrono::seconds(10);
    while (done.load() < frames.size() && clock::now() < deadline) std::this_thread::sleep_for(std::chrono::milliseconds(1));
    while ((cmd_sub->size() || angle_sub->size() || event_sub->size()) && clock::now() < deadline)
        std::this_thread::sleep_for(std::chrono::milliseconds(1));
    observing = false;
    observer.join();
    pipeline.request_stop();
    pipeline.join();

    LatencyReport report;
    report.frames = frames.size();
    std::vector<double> samples;
    for (const auto& [stamp, in] : ingress) {
        auto it = egress.find(stamp);
        if (it == egress.end()) continue;
        samples.push_back(std::chrono::duration<double, std::milli>(it->second - in).count());
    }
    std::sort(samples.begin(), samples.end());
    report.measured = samples.size();
    report.p50_ms = percentile(samples, 50);
    report.p95_ms = percentile(samples, 95);
    report.p99_ms = percentile(samples, 99);
    report.max_ms = samples.empty() ? 0.0 : samples.back();
    report.drops = stats.input_drops + stats.out_of_order + cmd_sub->dropped() + angle_sub->dropped() +
                   event_sub->dropped();
    report.log = std::move(log);
    return report;
}

} // namespace teleop
