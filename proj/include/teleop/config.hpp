#pragma once

// YAML configuration. Every section and key is optional; missing values keep
// their defaults. See config/teleop.yaml for the full schema.
//
//   pipeline:    frame_rate_hz, imitation_interval_frames, starvation_timeout_s,
//                turn_settle_frames, turn_settle_tolerance
//   governor:    base_speed_rad_s
//   gait:        knee_lift_threshold, knee_place_threshold, depth_threshold,
//                yaw_threshold, turn_step_quantum, max_turn_steps
//   limits:      list of {joint, axis, min, max}; all 20 joints when present
//   motion_sets: list of {name, heading_delta, displacement,
//                         keyframes: [{hold_ms, angles: {joint: rad}}]}
//   bus:         host, tcp_port, ws_port
//   sim:         rate_hz

#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include <yaml-cpp/yaml.h>

#include "teleop/errors.hpp"
#include "teleop/locomotion.hpp"
#include "teleop/pipeline.hpp"
#include "teleop/robot_model.hpp"

namespace teleop {

struct BusConfig {
    std::string host = "127.0.0.1";
    std::uint16_t tcp_port = 7401;
    std::uint16_t ws_port = 7402;
};

struct SimConfig {
    double rate_hz = 100.0;
};

struct TeleopConfig {
    PipelineConfig pipeline;
    RobotModel robot;
    MotionLibrary motion_sets;  // empty = built-in sets
    BusConfig bus;
    SimConfig sim;
};

namespace config_detail {

inline std::string where(const YAML::Node& n) {
    return n.Mark().line >= 0 ? " (line " + std::to_string(n.Mark().line + 1) + ")" : "";
}

template <class T>
void read(const YAML::Node& section, const char* key, T& out) {
    const YAML::Node n = section[key];
    if (!n) return;
    try {
        out = n.as<T>();
    } catch (const YAML::Exception&) {
        throw InvalidConfig(std::string("bad value for '") + key + "'" + where(n));
    }
}

inline void check_keys(const YAML::Node& section, const char* name, std::set<std::string> allowed) {
    if (!section) return;
    if (!section.IsMap()) throw InvalidConfig(std::string("section '") + name + "' must be a map" + where(section));
    for (const auto& kv : section) {
        const auto key = kv.first.as<std::string>();
        if (!allowed.count(key)) throw InvalidConfig("unknown key '" + key + "' in '" + name + "'" + where(kv.first));
    }
}

inline RobotJoint joint(const YAML::Node& n) {
    const auto name = n.as<std::string>();
    const auto j = robot_joint_from_string(name);
    if (!j) throw InvalidConfig("unknown robot joint '" + name + "'" + where(n));
    return *j;
}

inline RobotModel read_limits(const YAML::Node& list) {
    if (!list.IsSequence()) throw InvalidConfig("'limits' must be a list" + where(list));
    std::vector<JointDescriptor> table;
    for (const auto& item : list) {
        check_keys(item, "limits", {"joint", "axis", "min", "max"});
        JointDescriptor d;
        if (!item["joint"] || !item["min"] || !item["max"])
            throw InvalidConfig("limits entries need joint, min and max" + where(item));
        d.joint = joint(item["joint"]);
        read(item, "axis", d.axis);
        read(item, "min", d.theta_min);
        read(item, "max", d.theta_max);
        table.push_back(d);
    }
    return RobotModel(table);
}

inline MotionLibrary read_motion_sets(const YAML::Node& list, const RobotModel& robot) {
    if (!list.IsSequence()) throw InvalidConfig("'motion_sets' must be a list" + where(list));
    MotionLibrary lib;
    for (const auto& item : list) {
        check_keys(item, "motion_sets", {"name", "heading_delta", "displacement", "keyframes"});
        MotionSet set;
        read(item, "name", set.name);
        if (set.name.empty()) throw InvalidConfig("motion set without a name" + where(item));
        read(item, "heading_delta", set.heading_delta);
        read(item, "displacement", set.displacement);
        const YAML::Node frames = item["keyframes"];
        if (!frames || !frames.IsSequence()) throw InvalidConfig("motion set '" + set.name + "' needs keyframes");
        for (const auto& f : frames) {
            check_keys(f, "keyframes", {"hold_ms", "angles"});
            Keyframe kf;
            read(f, "hold_ms", kf.hold_ms);
            const YAML::Node angles = f["angles"];
            if (angles) {
                if (!angles.IsMap()) throw InvalidConfig("keyframe angles must be a map" + where(angles));
                for (const auto& kv : angles) {
                    try {
                        kf.angles.angles[joint(kv.first)] = kv.second.as<double>();
                    } catch (const YAML::Exception&) {
                        throw InvalidConfig("bad angle" + where(kv.second));
                    }
                }
            }
            set.keyframes.push_back(std::move(kf));
        }
        try {
            validate(set, robot);
        } catch (const InvalidMotionSet& e) {
            throw InvalidConfig(e.what());
        }
        if (!lib.emplace(set.name, set).second) throw InvalidConfig("duplicate motion set '" + set.name + "'");
    }
    return lib;
}

} // namespace config_detail

inline TeleopConfig parse_config(const YAML::Node& root) {
    using namespace config_detail;
    TeleopConfig cfg;
    if (!root || root.IsNull()) return cfg;
    check_keys(root, "<root>", {"pipeline", "governor", "gait", "limits", "motion_sets", "bus", "sim"});

    const YAML::Node p = root["pipeline"];
    check_keys(p, "pipeline", {"frame_rate_hz", "imitation_interval_frames", "starvation_timeout_s",
                               "turn_settle_frames", "turn_settle_tolerance"});
    if (p) {
        read(p, "frame_rate_hz", cfg.pipeline.frame_rate_hz);
        read(p, "imitation_interval_frames", cfg.pipeline.imitation_interval_frames);
        read(p, "starvation_timeout_s", cfg.pipeline.starvation_timeout_s);
        read(p, "turn_settle_frames", cfg.pipeline.turn_settle_frames);
        read(p, "turn_settle_tolerance", cfg.pipeline.turn_settle_tolerance);
    }

    const YAML::Node g = root["governor"];
    check_keys(g, "governor", {"base_speed_rad_s"});
    if (g) read(g, "base_speed_rad_s", cfg.pipeline.governor.base_speed_rad_s);

    const YAML::Node gait = root["gait"];
    check_keys(gait, "gait", {"knee_lift_threshold", "knee_place_threshold", "depth_threshold", "yaw_threshold",
                              "turn_step_quantum", "max_turn_steps"});
    if (gait) {
        auto& c = cfg.pipeline.gait;
        read(gait, "knee_lift_threshold", c.knee_lift_threshold);
        read(gait, "knee_place_threshold", c.knee_place_threshold);
        read(gait, "depth_threshold", c.depth_threshold);
        read(gait, "yaw_threshold", c.yaw_threshold);
        read(gait, "turn_step_quantum", c.turn_step_quantum);
        read(gait, "max_turn_steps", c.max_turn_steps);
    }

    if (root["limits"]) cfg.robot = read_limits(root["limits"]);
    if (root["motion_sets"]) cfg.motion_sets = read_motion_sets(root["motion_sets"], cfg.robot);

    const YAML::Node b = root["bus"];
    check_keys(b, "bus", {"host", "tcp_port", "ws_port"});
    if (b) {
        read(b, "host", cfg.bus.host);
        read(b, "tcp_port", cfg.bus.tcp_port);
        read(b, "ws_port", cfg.bus.ws_port);
    }

    const YAML::Node s = root["sim"];
    check_keys(s, "sim", {"rate_hz"});
    if (s) read(s, "rate_hz", cfg.sim.rate_hz);
    if (!(cfg.sim.rate_hz > 0.0)) throw InvalidConfig("sim.rate_hz must be > 0");

    cfg.pipeline.validate();
    return cfg;
}

inline TeleopConfig parse_config(const std::string& yaml_text) {
    try {
        return parse_config(YAML::Load(yaml_text));
    } catch (const YAML::ParserException& e) {
        throw InvalidConfig(std::string("config: ") + e.what());
    }
}

inline TeleopConfig load_config(const std::string& path) {
    try {
        return parse_config(YAML::LoadFile(path));
    } catch (const YAML::BadFile&) {
        throw InvalidConfig("cannot read config file " + path);
    } catch (const YAML::ParserException& e) {
        throw InvalidConfig(path + ": " + e.what());
    }
}

} // namespace teleop
