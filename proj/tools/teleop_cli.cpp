// teleop: record, replay and synthesize skeleton streams; run the pipeline,
// simulator and bridge nodes; measure pipeline latency.

#include <atomic>
#include <chrono>
#include <csignal>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <stop_token>
#include <string>
#include <thread>

#include <CLI11.hpp>

#include "teleop/bridge.hpp"
#include "teleop/teleop.hpp"

namespace {

using namespace teleop;

std::atomic<bool> g_interrupted{false};

extern "C" void on_signal(int) { g_interrupted = true; }

// Runs until interrupted, `seconds` elapse (0 = forever) or `alive` fails.
template <class Alive>
void wait_until_done(double seconds, Alive&& alive) {
    const auto start = std::chrono::steady_clock::now();
    while (!g_interrupted && alive()) {
        if (seconds > 0.0 && std::chrono::steady_clock::now() - start >= std::chrono::duration<double>(seconds)) break;
        std::this_thread::sleep_for(std::chrono::milliseconds(20));
    }
}

TeleopConfig config_from(const std::string& path) { return path.empty() ? TeleopConfig{} : load_config(path); }

BridgeAddress address_from(const std::string& bus, const TeleopConfig& cfg) {
    if (!bus.empty()) return parse_bridge_address(bus);
    return BridgeAddress{cfg.bus.host, cfg.bus.tcp_port, Transport::tcp};
}

std::ifstream open_input(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open " + path);
    return in;
}

int cmd_synth(const std::string& scenario, const std::string& out_path, const SynthParams& params) {
    const auto frames = synth(scenario, params);
    StreamHeader header{params.fps};
    if (out_path.empty() || out_path == "-") {
        record(frames, std::cout, header);
    } else {
        std::ofstream out(out_path);
        if (!out) throw Error("cannot write " + out_path);
        record(frames, out, header);
        if (!out) throw Error("write failed: " + out_path);
        std::cerr << "wrote " << frames.size() << " frames to " << out_path << "\n";
    }
    return 0;
}

int cmd_replay(const std::string& path, double speed, const std::string& bus_addr, const std::string& config) {
    const TeleopConfig cfg = config_from(config);
    auto in = open_input(path);
    Bus bus;
    BridgeClient link(bus, address_from(bus_addr, cfg));
    std::size_t count = 0;
    try {
        count = replay(in, speed, [&](const SkeletonFrame& f) {
            if (g_interrupted) throw Error("interrupted");
            bus.publish(topics::skeleton, f);
        });
    } catch (...) {
        link.drain(std::chrono::seconds(5));
        throw;
    }
    if (!link.drain(std::chrono::seconds(10))) throw Error("bridge did not accept all frames");
    std::cerr << "replayed " << count << " frames\n";
    return 0;
}

int cmd_record(const std::string& path, const std::string& bus_addr, const std::string& config, double seconds,
               std::size_t max_frames) {
    const TeleopConfig cfg = config_from(config);
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path);
    Bus bus;
    auto frames = bus.subscribe(topics::skeleton, 4096);
    BridgeClient link(bus, address_from(bus_addr, cfg), {std::string(topics::skeleton)});
    StreamWriter writer(out, StreamHeader{cfg.pipeline.frame_rate_hz});
    const auto start = std::chrono::steady_clock::now();
    while (!g_interrupted && link.connected()) {
        if (seconds > 0.0 && std::chrono::steady_clock::now() - start >= std::chrono::duration<double>(seconds)) break;
        if (max_frames && writer.count() >= max_frames) break;
        if (auto env = frames->pop(std::chrono::milliseconds(20))) writer.write(std::get<SkeletonFrame>(env->payload));
    }
    out.flush();
    std::cerr << "recorded " << writer.count() << " frames\n";
    return 0;
}

int cmd_pipeline(const std::string& config, const std::string& bus_addr, double seconds) {
    const TeleopConfig cfg = config_from(config);
    Bus bus;
    Arbiter arbiter(cfg.pipeline, cfg.robot, cfg.motion_sets);
    PipelineRunStats stats;
    std::jthread loop([&](std::stop_token st) { stats = run_pipeline(bus, arbiter, st); });
    BridgeClient link(bus, address_from(bus_addr, cfg), {std::string(topics::skeleton)});
    wait_until_done(seconds, [&] { return link.connected(); });
    loop.request_stop();
    loop.join();
    link.drain(std::chrono::seconds(2));
    std::cerr << "pipeline: " << stats.frames << " frames, " << stats.out_of_order << " out of order, "
              << stats.input_drops << " dropped, " << stats.holds << " holds\n";
    return 0;
}

int cmd_sim(double rate, const std::string& config, const std::string& bus_addr, double seconds) {
    const TeleopConfig cfg = config_from(config);
    Bus bus;
    Simulator sim(cfg.robot, rate > 0.0 ? rate : cfg.sim.rate_hz);
    SimulatorRunStats stats;
    std::jthread loop([&](std::stop_token st) { stats = run_simulator(bus, sim, st); });
    BridgeClient link(bus, address_from(bus_addr, cfg),
                      {std::string(topics::commands), std::string(topics::gait_events)});
    wait_until_done(seconds, [&] { return link.connected(); });
    loop.request_stop();
    loop.join();
    const BasePose base = sim.state().base;
    std::cerr << "sim: " << stats.ticks << " ticks, " << stats.batches << " command batches, heading "
              << base.heading << " rad\n";
    return 0;
}

int cmd_bridge(const std::string& config, const std::string& host, int tcp, int ws, double seconds) {
    const TeleopConfig cfg = config_from(config);
    Bus bus;
    BridgeServerOptions options;
    options.host = host.empty() ? cfg.bus.host : host;
    options.tcp_port = static_cast<std::uint16_t>(tcp >= 0 ? tcp : cfg.bus.tcp_port);
    options.ws_port = static_cast<std::uint16_t>(ws >= 0 ? ws : cfg.bus.ws_port);
    BridgeServer server(bus, options);
    std::cerr << "bridge: tcp " << options.host << ":" << server.tcp_port() << ", ws " << options.host << ":"
              << server.ws_port() << ", protocol " << kProtocolVersion << ", registry "
              << bus.registry().hash() << "\n";
    wait_until_done(seconds, [] { return true; });
    server.stop();
    return 0;
}

int cmd_bench(const std::string& path, double speed, const std::string& config) {
    const TeleopConfig cfg = config_from(config);
    auto in = open_input(path);
    const auto frames = read_stream(in);
    const LatencyReport r = bench_latency(frames, cfg.pipeline, speed);
    std::printf("frames %llu measured %llu drops %llu\n", static_cast<unsigned long long>(r.frames),
                static_cast<unsigned long long>(r.measured), static_cast<unsigned long long>(r.drops));
    std::printf("latency_ms p50 %.3f p95 %.3f p99 %.3f max %.3f\n", r.p50_ms, r.p95_ms, r.p99_ms, r.max_ms);
    return 0;
}

// Runs the arbiter and simulator offline over a file and prints what the
// pipeline emits as envelope lines.
int cmd_process(const std::string& path, const std::string& config, const std::string& out_path) {
    const TeleopConfig cfg = config_from(config);
    auto in = open_input(path);
    const auto frames = read_stream(in);
    Arbiter arbiter(cfg.pipeline, cfg.robot, cfg.motion_sets);
    Simulator sim(cfg.robot, cfg.sim.rate_hz);
    const OfflineRun run = run_offline(frames, arbiter, sim);
    std::ofstream file;
    if (!out_path.empty()) {
        file.open(out_path);
        if (!file) throw Error("cannot write " + out_path);
    }
    std::ostream& out = out_path.empty() ? std::cout : file;
    std::map<std::string, std::uint64_t> seq;
    for (const auto& m : run.messages) {
        const Envelope e{m.topic, seq[m.topic]++, stamp_of(m.payload), m.payload};
        out << encode_envelope(e) << "\n";
    }
    const BasePose base = run.final_state.base;
    std::cerr << "processed " << run.frames << " frames; base heading " << base.heading << " rad, x " << base.x
              << " m, z " << base.z << " m\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Humanoid teleoperation pipeline tools"};
    app.require_subcommand(1);

    std::string file, out, bus_addr, config, scenario, leg = "right", host;
    double speed = 1.0, seconds = 0.0, rate = 0.0;
    int tcp = -1, ws = -1;
    std::size_t max_frames = 0;
    SynthParams params;

    auto* replay_cmd = app.add_subcommand("replay", "Publish a recorded stream on the bus");
    replay_cmd->add_option("file", file, "Stream file")->required();
    replay_cmd->add_option("--speed", speed, "Delay multiplier; 0 = as fast as possible")->check(CLI::NonNegativeNumber);
    replay_cmd->add_option("--bus", bus_addr, "Bridge address host:port or ws://host:port");
    replay_cmd->add_option("--config", config, "YAML config file");

    auto* record_cmd = app.add_subcommand("record", "Record skeleton frames from the bus");
    record_cmd->add_option("file", file, "Output stream file")->required();
    record_cmd->add_option("--bus", bus_addr, "Bridge address");
    record_cmd->add_option("--config", config, "YAML config file");
    record_cmd->add_option("--seconds", seconds, "Stop after this long");
    record_cmd->add_option("--frames", max_frames, "Stop after this many frames");

    auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic stream");
    synth_cmd->add_option("scenario", scenario, "idle | arm_wave | forward_step | backward_step | turn(<rad>)")
        ->required();
    synth_cmd->add_option("--out", out, "Output file (default stdout)");
    synth_cmd->add_option("--duration", params.duration_s, "Seconds (default per scenario)");
    synth_cmd->add_option("--fps", params.fps, "Frame rate")->check(CLI::PositiveNumber);
    synth_cmd->add_option("--angle", params.angle, "Torso yaw for 'turn'");
    synth_cmd->add_option("--leg", leg, "Stepping leg")->check(CLI::IsMember({"left", "right"}));
    synth_cmd->add_flag("--wave", params.wave_arms, "Wave the arms throughout");

    auto* pipeline_cmd = app.add_subcommand("pipeline", "Run the arbiter node");
    pipeline_cmd->add_option("--config", config, "YAML config file");
    pipeline_cmd->add_option("--bus", bus_addr, "Bridge address");
    pipeline_cmd->add_option("--seconds", seconds, "Stop after this long");

    auto* sim_cmd = app.add_subcommand("sim", "Run the kinematic robot simulator node");
    sim_cmd->add_option("--rate", rate, "Tick rate in Hz")->check(CLI::PositiveNumber);
    sim_cmd->add_option("--config", config, "YAML config file");
    sim_cmd->add_option("--bus", bus_addr, "Bridge address");
    sim_cmd->add_option("--seconds", seconds, "Stop after this long");

    auto* bridge_cmd = app.add_subcommand("bridge", "Serve the bus over TCP and WebSocket");
    bridge_cmd->add_option("--tcp", tcp, "TCP port")->check(CLI::Range(0, 65535));
    bridge_cmd->add_option("--ws", ws, "WebSocket port")->check(CLI::Range(0, 65535));
    bridge_cmd->add_option("--host", host, "Listen address");
    bridge_cmd->add_option("--config", config, "YAML config file");
    bridge_cmd->add_option("--seconds", seconds, "Stop after this long");

    auto* bench_cmd = app.add_subcommand("bench-latency", "Frame ingress to command egress latency");
    bench_cmd->add_option("file", file, "Stream file")->required();
    bench_cmd->add_option("--speed", speed, "Delay multiplier")->check(CLI::PositiveNumber);
    bench_cmd->add_option("--config", config, "YAML config file");

    auto* process_cmd = app.add_subcommand("process", "Run the pipeline offline and print its messages");
    process_cmd->add_option("file", file, "Stream file")->required();
    process_cmd->add_option("--config", config, "YAML config file");
    process_cmd->add_option("--out", out, "Output file (default stdout)");

    CLI11_PARSE(app, argc, argv);

    std::signal(SIGINT, on_signal);
    std::signal(SIGTERM, on_signal);
    try {
        if (*replay_cmd) return cmd_replay(file, speed, bus_addr, config);
        if (*record_cmd) return cmd_record(file, bus_addr, config, seconds, max_frames);
        if (*synth_cmd) {
            params.leg = leg == "left" ? Side::left : Side::right;
            return cmd_synth(scenario, out, params);
        }
        if (*pipeline_cmd) return cmd_pipeline(config, bus_addr, seconds);
        if (*sim_cmd) return cmd_sim(rate, config, bus_addr, seconds);
        if (*bridge_cmd) return cmd_bridge(config, host, tcp, ws, seconds);
        if (*bench_cmd) return cmd_bench(file, speed, config);
        if (*process_cmd) return cmd_process(file, config, out);
    } catch (const std::exception& e) {
        std::cerr << "teleop: error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}
