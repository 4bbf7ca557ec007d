#pragma once

// Envelope and payload codecs. One JSON object per line, keys in sorted order
// (nlohmann's default object map), doubles printed round-trip exact.
//
// Envelope:  {"kind": K, "payload": {...}, "seq": N, "stamp_us": T, "topic": S}

#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <variant>

#include <json.hpp>

#include "teleop/actuation.hpp"
#include "teleop/errors.hpp"
#include "teleop/locomotion.hpp"
#include "teleop/robot_model.hpp"
#include "teleop/skeleton.hpp"

namespace teleop {

using json = nlohmann::json;

inline constexpr std::string_view kProtocolVersion = "teleop/1";

enum class PayloadKind : std::uint8_t { skeleton_frame, joint_angles, joint_commands, robot_state, gait_event };

inline constexpr std::array<std::string_view, 5> kPayloadKindNames = {
    "skeleton_frame", "joint_angles", "joint_commands", "robot_state", "gait_event",
};

inline std::string_view to_string(PayloadKind k) { return kPayloadKindNames[static_cast<std::size_t>(k)]; }

inline std::optional<PayloadKind> payload_kind_from_string(std::string_view s) {
    for (std::size_t i = 0; i < kPayloadKindNames.size(); ++i)
        if (kPayloadKindNames[i] == s) return static_cast<PayloadKind>(i);
    return std::nullopt;
}

// Alternative order matches PayloadKind.
using Payload = std::variant<SkeletonFrame, JointAngleSet, CommandBatch, SimRobotState, GaitEvent>;

inline PayloadKind kind_of(const Payload& p) { return static_cast<PayloadKind>(p.index()); }

inline std::int64_t stamp_of(const Payload& p) {
    return std::visit([](const auto& v) { return v.stamp_us; }, p);
}

struct Envelope {
    std::string topic;
    std::uint64_t seq = 0;
    std::int64_t stamp_us = 0;
    Payload payload;

    PayloadKind kind() const { return kind_of(payload); }
    friend bool operator==(const Envelope&, const Envelope&) = default;
};

namespace wire {

inline json encode_point(const Point3& p) { return json::array({p.x, p.y, p.z}); }
inline json encode_quat(const Quaternion& q) { return json::array({q.w, q.x, q.y, q.z}); }

inline json encode_angles(const std::map<RobotJoint, double>& angles) {
    json j = json::object();
    for (const auto& [joint, v] : angles) j[std::string(to_string(joint))] = v;
    return j;
}

inline json encode(const SkeletonFrame& f) {
    json joints = json::object();
    for (std::size_t i = 0; i < kSkeletonJointCount; ++i) {
        const JointSample& s = f.joints[i];
        joints[std::string(kSkeletonJointNames[i])] = {
            {"position", encode_point(s.position)},
            {"orientation", encode_quat(s.orientation)},
            {"confidence", s.confidence},
        };
    }
    return {{"stamp_us", f.stamp_us}, {"joints", std::move(joints)}};
}

inline json encode(const JointAngleSet& s) { return {{"stamp_us", s.stamp_us}, {"angles", encode_angles(s.angles)}}; }

inline json encode(const CommandBatch& b) {
    json cmds = json::array();
    for (const JointCommand& c : b.commands) {
        cmds.push_back({{"joint", std::string(to_string(c.joint))},
                        {"target", c.target_angle},
                        {"speed", c.speed},
                        {"stamp_us", c.stamp_us}});
    }
    return {{"stamp_us", b.stamp_us}, {"commands", std::move(cmds)}};
}

inline json encode(const SimRobotState& s) {
    json angles = json::object();
    json active = json::object();
    for (std::size_t i = 0; i < kRobotJointCount; ++i) {
        const std::string name(kRobotJointNames[i]);
        angles[name] = s.current_angles[i];
        if (s.active[i]) active[name] = {{"target", s.active[i]->target}, {"speed", s.active[i]->speed}};
    }
    return {{"stamp_us", s.stamp_us},
            {"angles", std::move(angles)},
            {"active", std::move(active)},
            {"base", {{"heading", s.base.heading}, {"x", s.base.x}, {"z", s.base.z}}}};
}

inline json encode(const GaitEvent& e) {
    json j = {{"stamp_us", e.stamp_us},
              {"event", std::string(to_string(e.type))},
              {"direction", std::string(to_string(e.direction))},
              {"steps", e.steps},
              {"motion_set", e.motion_set},
              {"heading_delta", e.heading_delta},
              {"displacement", e.displacement}};
    j["leg"] = e.leg ? json(std::string(to_string(*e.leg))) : json(nullptr);
    j["step"] = e.step ? json(std::string(to_string(*e.step))) : json(nullptr);
    j["depth_diff"] = e.depth_diff ? json(*e.depth_diff) : json(nullptr);
    return j;
}

inline json encode(const Payload& p) {
    return std::visit([](const auto& v) { return encode(v); }, p);
}

// --- decoding ------------------------------------------------------------

// Strict field access; json type errors surface as ParseError.
inline const json& field(const json& j, const char* key) {
    if (!j.is_object()) throw ParseError(0, std::string("expected object holding '") + key + "'");
    auto it = j.find(key);
    if (it == j.end()) throw ParseError(0, std::string("missing field '") + key + "'");
    return *it;
}

inline double finite_number(const json& j, const char* what) {
    if (!j.is_number()) throw ParseError(0, std::string(what) + ": expected number");
    const double v = j.get<double>();
    if (!std::isfinite(v)) throw ParseError(0, std::string(what) + ": non-finite");
    return v;
}

inline std::int64_t integer(const json& j, const char* what) {
    if (!j.is_number_integer()) throw ParseError(0, std::string(what) + ": expected integer");
    return j.get<std::int64_t>();
}

inline std::string string_field(const json& j, const char* key) {
    const json& v = field(j, key);
    if (!v.is_string()) throw ParseError(0, std::string(key) + ": expected string");
    return v.get<std::string>();
}

template <std::size_t N>
std::array<double, N> number_array(const json& j, const char* what) {
    if (!j.is_array() || j.size() != N)
        throw ParseError(0, std::string(what) + ": expected array of " + std::to_string(N));
    std::array<double, N> out{};
    for (std::size_t i = 0; i < N; ++i) out[i] = finite_number(j[i], what);
    return out;
}

inline RobotJoint robot_joint(const std::string& name) {
    auto j = robot_joint_from_string(name);
    if (!j) throw ParseError(0, "unknown robot joint '" + name + "'");
    return *j;
}

inline std::map<RobotJoint, double> decode_angles(const json& j) {
    if (!j.is_object()) throw ParseError(0, "angles: expected object");
    std::map<RobotJoint, double> out;
    for (const auto& [name, v] : j.items()) out[robot_joint(name)] = finite_number(v, "angle");
    return out;
}

inline SkeletonFrame decode_skeleton(const json& j) {
    SkeletonFrame f;
    f.stamp_us = integer(field(j, "stamp_us"), "stamp_us");
    const json& joints = field(j, "joints");
    if (!joints.is_object() || joints.size() != kSkeletonJointCount)
        throw ParseError(0, "joints: expected exactly 15 named joints");
    for (const auto& [name, s] : joints.items()) {
        auto id = skeleton_joint_from_string(name);
        if (!id) throw ParseError(0, "unknown skeleton joint '" + name + "'");
        const auto p = number_array<3>(field(s, "position"), "position");
        const auto q = number_array<4>(field(s, "orientation"), "orientation");
        JointSample& sample = f[*id];
        sample.position = {p[0], p[1], p[2]};
        sample.orientation = {q[0], q[1], q[2], q[3]};
        sample.confidence = finite_number(field(s, "confidence"), "confidence");
    }
    try {
        validate(f);
    } catch (const InvalidFrame& e) {
        throw ParseError(0, e.what());
    }
    return f;
}

inline JointAngleSet decode_joint_angles(const json& j) {
    return {integer(field(j, "stamp_us"), "stamp_us"), decode_angles(field(j, "angles"))};
}

inline CommandBatch decode_commands(const json& j) {
    CommandBatch b;
    b.stamp_us = integer(field(j, "stamp_us"), "stamp_us");
    const json& cmds = field(j, "commands");
    if (!cmds.is_array()) throw ParseError(0, "commands: expected array");
    for (const json& c : cmds) {
        b.commands.push_back({robot_joint(string_field(c, "joint")), finite_number(field(c, "target"), "target"),
                              finite_number(field(c, "speed"), "speed"), integer(field(c, "stamp_us"), "stamp_us")});
    }
    return b;
}

inline SimRobotState decode_robot_state(const json& j) {
    SimRobotState s;
    s.stamp_us = integer(field(j, "stamp_us"), "stamp_us");
    const auto angles = decode_angles(field(j, "angles"));
    if (angles.size() != kRobotJointCount) throw ParseError(0, "robot_state: expected all 20 joint angles");
    for (const auto& [joint, v] : angles) s.current_angles[joint_index(joint)] = v;
    const json& active = field(j, "active");
    if (!active.is_object()) throw ParseError(0, "active: expected object");
    for (const auto& [name, c] : active.items()) {
        s.active[joint_index(robot_joint(name))] =
            ActiveCommand{finite_number(field(c, "target"), "target"), finite_number(field(c, "speed"), "speed")};
    }
    const json& base = field(j, "base");
    s.base = {finite_number(field(base, "heading"), "heading"), finite_number(field(base, "x"), "x"),
              finite_number(field(base, "z"), "z")};
    return s;
}

inline GaitEvent decode_gait_event(const json& j) {
    GaitEvent e;
    e.stamp_us = integer(field(j, "stamp_us"), "stamp_us");
    const auto type = gait_event_from_string(string_field(j, "event"));
    if (!type) throw ParseError(0, "unknown gait event");
    e.type = *type;
    const std::string dir = string_field(j, "direction");
    if (dir == "left") e.direction = TurnDirection::left;
    else if (dir == "right") e.direction = TurnDirection::right;
    else if (dir == "none") e.direction = TurnDirection::none;
    else throw ParseError(0, "unknown turn direction '" + dir + "'");
    e.steps = static_cast<int>(integer(field(j, "steps"), "steps"));
    e.motion_set = string_field(j, "motion_set");
    e.heading_delta = finite_number(field(j, "heading_delta"), "heading_delta");
    e.displacement = finite_number(field(j, "displacement"), "displacement");
    if (const json& leg = field(j, "leg"); !leg.is_null()) {
        const std::string s = leg.is_string() ? leg.get<std::string>() : "";
        if (s == "left") e.leg = Side::left;
        else if (s == "right") e.leg = Side::right;
        else throw ParseError(0, "leg: expected left|right|null");
    }
    if (const json& step = field(j, "step"); !step.is_null()) {
        const std::string s = step.is_string() ? step.get<std::string>() : "";
        if (s == "forward") e.step = StepKind::forward;
        else if (s == "back") e.step = StepKind::back;
        else throw ParseError(0, "step: expected forward|back|null");
    }
    if (const json& d = field(j, "depth_diff"); !d.is_null()) e.depth_diff = finite_number(d, "depth_diff");
    return e;
}

inline Payload decode(PayloadKind kind, const json& j) {
    switch (kind) {
    case PayloadKind::skeleton_frame: return decode_skeleton(j);
    case PayloadKind::joint_angles: return decode_joint_angles(j);
    case PayloadKind::joint_commands: return decode_commands(j);
    case PayloadKind::robot_state: return decode_robot_state(j);
    case PayloadKind::gait_event: return decode_gait_event(j);
    }
    throw ParseError(0, "unknown payload kind");
}

} // namespace wire

inline json envelope_to_json(const Envelope& e) {
    return {{"topic", e.topic},
            {"seq", e.seq},
            {"stamp_us", e.stamp_us},
            {"kind", std::string(to_string(e.kind()))},
            {"payload", wire::encode(e.payload)}};
}

// Canonical single-line serialization (no trailing newline).
inline std::string encode_envelope(const Envelope& e) { return envelope_to_json(e).dump(); }

inline bool is_envelope(const json& j) { return j.is_object() && j.contains("topic") && j.contains("payload"); }

inline Envelope envelope_from_json(const json& j) {
    Envelope e;
    e.topic = wire::string_field(j, "topic");
    const json& seq = wire::field(j, "seq");
    if (!seq.is_number_unsigned() && !(seq.is_number_integer() && seq.get<std::int64_t>() >= 0))
        throw ParseError(0, "seq: expected unsigned integer");
    e.seq = seq.get<std::uint64_t>();
    e.stamp_us = wire::integer(wire::field(j, "stamp_us"), "stamp_us");
    const auto kind = payload_kind_from_string(wire::string_field(j, "kind"));
    if (!kind) throw ParseError(0, "unknown payload kind");
    e.payload = wire::decode(*kind, wire::field(j, "payload"));
    return e;
}

// line_no tags errors with a file position (0 for sockets).
inline Envelope decode_envelope(std::string_view line, std::size_t line_no = 0) {
    json j;
    try {
        j = json::parse(line);
    } catch (const json::exception& e) {
        throw ParseError(line_no, std::string("malformed JSON: ") + e.what());
    }
    try {
        return envelope_from_json(j);
    } catch (const ParseError& e) {
        if (line_no == 0) throw;
        throw ParseError(line_no, e.what());
    } catch (const json::exception& e) {
        throw ParseError(line_no, e.what());
    }
}

} // namespace teleop
