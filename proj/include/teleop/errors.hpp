#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace teleop {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Two skeleton points coincide (|segment| <= 1e-6 m). Callers reuse the previous angle.
class DegenerateSegment : public Error {
public:
    DegenerateSegment() : Error("degenerate segment: skeleton points overlap") {}
};

class DegenerateQuaternion : public Error {
public:
    DegenerateQuaternion() : Error("degenerate quaternion: norm too small") {}
};

class MissingJoint : public Error {
public:
    explicit MissingJoint(const std::string& joint)
        : Error("missing joint: " + joint), joint_(joint) {}
    const std::string& joint() const noexcept { return joint_; }

private:
    std::string joint_;
};

class InvalidFrame : public Error {
public:
    using Error::Error;
};

class InvalidMotionSet : public Error {
public:
    using Error::Error;
};

class InvalidConfig : public Error {
public:
    using Error::Error;
};

class UnknownTopic : public Error {
public:
    explicit UnknownTopic(const std::string& topic) : Error("unknown topic: " + topic) {}
};

class KindMismatch : public Error {
public:
    KindMismatch(const std::string& topic, const std::string& expected, const std::string& got)
        : Error("kind mismatch on topic '" + topic + "': expected " + expected + ", got " + got) {}
};

class VersionMismatch : public Error {
public:
    using Error::Error;
};

class RegistryMismatch : public Error {
public:
    using Error::Error;
};

class UnknownScenario : public Error {
public:
    explicit UnknownScenario(const std::string& name) : Error("unknown scenario: " + name) {}
};

// Wire/stream decoding failure. line() is 1-based, 0 when not tied to a file.
class ParseError : public Error {
public:
    ParseError(std::size_t line, const std::string& what)
        : Error(line ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

} // namespace teleop
