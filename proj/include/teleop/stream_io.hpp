#pragma once

// Recorded skeleton streams: a header line followed by one skeleton envelope
// per line, the same line format the bridge speaks.
//
//   {"format":"teleop-stream/1","frame_rate_hz":20.0,"joints":["head",...]}
//   {"kind":"skeleton_frame","payload":{...},"seq":0,"stamp_us":0,"topic":"skeleton"}

#include <chrono>
#include <cstdint>
#include <functional>
#include <istream>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "teleop/bus.hpp"
#include "teleop/errors.hpp"
#include "teleop/skeleton.hpp"
#include "teleop/wire.hpp"

namespace teleop {

inline constexpr std::string_view kStreamFormat = "teleop-stream/1";

struct StreamHeader {
    double frame_rate_hz = 20.0;
};

inline std::string encode_stream_header(const StreamHeader& h) {
    json joints = json::array();
    for (auto name : kSkeletonJointNames) joints.push_back(std::string(name));
    return json{{"format", std::string(kStreamFormat)}, {"frame_rate_hz", h.frame_rate_hz}, {"joints", joints}}.dump();
}

class StreamWriter {
public:
    StreamWriter(std::ostream& out, StreamHeader header = {}) : out_(out) {
        out_ << encode_stream_header(header) << '\n';
        if (!out_) throw Error("stream write failed");
    }

    // Throws ParseError naming the line the frame would have occupied.
    void write(const SkeletonFrame& frame) {
        const std::size_t line = count_ + 2;
        try {
            validate(frame);
        } catch (const InvalidFrame& e) {
            throw ParseError(line, e.what());
        }
        if (last_stamp_ && frame.stamp_us <= *last_stamp_)
            throw ParseError(line, "stamp_us " + std::to_string(frame.stamp_us) + " does not increase");
        const Envelope e{std::string(topics::skeleton), count_, frame.stamp_us, frame};
        out_ << encode_envelope(e) << '\n';
        if (!out_) throw Error("stream write failed at line " + std::to_string(line));
        last_stamp_ = frame.stamp_us;
        ++count_;
    }

    std::size_t count() const { return count_; }

private:
    std::ostream& out_;
    std::size_t count_ = 0;
    std::optional<std::int64_t> last_stamp_;
};

// Returns the number of frames written (lines minus the header).
inline std::size_t record(std::span<const SkeletonFrame> frames, std::ostream& out, StreamHeader header = {}) {
    StreamWriter writer(out, header);
    for (const auto& f : frames) writer.write(f);
    out.flush();
    return writer.count();
}

class StreamReader {
public:
    explicit StreamReader(std::istream& in) : in_(in) {
        std::string line;
        if (!std::getline(in_, line)) throw ParseError(1, "missing stream header");
        line_ = 1;
        json h;
        try {
            h = json::parse(line);
        } catch (const json::exception&) {
            throw ParseError(1, "malformed stream header");
        }
        if (!h.is_object() || h.value("format", std::string()) != kStreamFormat)
            throw ParseError(1, "not a " + std::string(kStreamFormat) + " stream");
        const auto rate = h.find("frame_rate_hz");
        if (rate == h.end() || !rate->is_number() || !(rate->get<double>() > 0.0))
            throw ParseError(1, "header: frame_rate_hz must be a positive number");
        header_.frame_rate_hz = rate->get<double>();
        const auto joints = h.find("joints");
        if (joints == h.end() || !joints->is_array() || joints->size() != kSkeletonJointCount)
            throw ParseError(1, "header: expected the 15 joint names");
        for (std::size_t i = 0; i < kSkeletonJointCount; ++i)
            if (!(*joints)[i].is_string() || (*joints)[i].get<std::string>() != kSkeletonJointNames[i])
                throw ParseError(1, "header: unexpected joint list");
    }

    const StreamHeader& header() const { return header_; }
    std::size_t line() const { return line_; }

    // Next frame, or nullopt at end of stream. Blank lines are skipped.
    std::optional<SkeletonFrame> next() {
        std::string text;
        while (std::getline(in_, text)) {
            ++line_;
            if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
            Envelope e = decode_envelope(text, line_);
            if (e.topic != topics::skeleton || e.kind() != PayloadKind::skeleton_frame)
                throw ParseError(line_, "expected a skeleton_frame envelope on topic 'skeleton'");
            auto& frame = std::get<SkeletonFrame>(e.payload);
            if (last_stamp_ && frame.stamp_us <= *last_stamp_) throw ParseError(line_, "stamp_us does not increase");
            last_stamp_ = frame.stamp_us;
            return std::move(frame);
        }
        return std::nullopt;
    }

private:
    std::istream& in_;
    StreamHeader header_;
    std::size_t line_ = 0;
    std::optional<std::int64_t> last_stamp_;
};

inline std::vector<SkeletonFrame> read_stream(std::istream& in) {
    StreamReader reader(in);
    std::vector<SkeletonFrame> frames;
    while (auto f = reader.next()) frames.push_back(std::move(*f));
    return frames;
}

using FrameSink = std::function<void(const SkeletonFrame&)>;

// Publishes frames in file order. Inter-frame delays are the stamp gaps
// multiplied by `multiplier`; 0 publishes as fast as possible. A parse error
// surfaces after all earlier frames have been published.
inline std::size_t replay(std::istream& in, double multiplier, const FrameSink& publish) {
    if (!(multiplier >= 0.0)) throw Error("replay speed multiplier must be >= 0");
    StreamReader reader(in);
    const auto start = std::chrono::steady_clock::now();
    std::optional<std::int64_t> first;
    std::size_t count = 0;
    while (auto frame = reader.next()) {
        if (!first) first = frame->stamp_us;
        if (multiplier > 0.0) {
            const auto offset = std::chrono::duration<double, std::micro>(
                static_cast<double>(frame->stamp_us - *first) * multiplier);
            std::this_thread::sleep_until(start + std::chrono::duration_cast<std::chrono::nanoseconds>(offset));
        }
        publish(*frame);
        ++count;
    }
    return count;
}

inline std::size_t replay(std::istream& in, double multiplier, Bus& bus) {
    return replay(in, multiplier, [&](const SkeletonFrame& f) { bus.publish(topics::skeleton, f); });
}

} // namespace teleop
