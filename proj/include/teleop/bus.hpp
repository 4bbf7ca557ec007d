#pragma once

// Topic-based publish/subscribe. Publishing never blocks on readers: every
// subscription is a bounded queue that drops its oldest message on overflow.

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "teleop/errors.hpp"
#include "teleop/wire.hpp"

namespace teleop {

namespace topics {
inline constexpr std::string_view skeleton = "skeleton";
inline constexpr std::string_view skel_angles = "skel_angles";
inline constexpr std::string_view commands = "commands";
inline constexpr std::string_view robot_state = "robot_state";
inline constexpr std::string_view gait_events = "gait_events";
} // namespace topics

class TopicRegistry {
public:
    static TopicRegistry canonical() {
        TopicRegistry r;
        r.add(topics::skeleton, PayloadKind::skeleton_frame);
        r.add(topics::skel_angles, PayloadKind::joint_angles);
        r.add(topics::commands, PayloadKind::joint_commands);
        r.add(topics::robot_state, PayloadKind::robot_state);
        r.add(topics::gait_events, PayloadKind::gait_event);
        return r;
    }

    void add(std::string_view topic, PayloadKind kind) {
        if (!kinds_.emplace(std::string(topic), kind).second)
            throw Error("topic registered twice: " + std::string(topic));
    }

    PayloadKind kind(std::string_view topic) const {
        auto it = kinds_.find(std::string(topic));
        if (it == kinds_.end()) throw UnknownTopic(std::string(topic));
        return it->second;
    }

    bool contains(std::string_view topic) const { return kinds_.count(std::string(topic)) != 0; }

    const std::map<std::string, PayloadKind>& entries() const { return kinds_; }

    // "topic=kind\n" lines in sorted topic order.
    std::string canonical_string() const {
        std::string s;
        for (const auto& [topic, kind] : kinds_) s += topic + "=" + std::string(to_string(kind)) + "\n";
        return s;
    }

    // FNV-1a 64 of canonical_string(), 16 lowercase hex digits.
    std::string hash() const {
        std::uint64_t h = 0xcbf29ce484222325ULL;
        for (unsigned char c : canonical_string()) {
            h ^= c;
            h *= 0x100000001b3ULL;
        }
        static constexpr char digits[] = "0123456789abcdef";
        std::string out(16, '0');
        for (int i = 15; i >= 0; --i, h >>= 4) out[static_cast<std::size_t>(i)] = digits[h & 0xf];
        return out;
    }

private:
    std::map<std::string, PayloadKind> kinds_;
};

inline constexpr std::size_t kDefaultSubscriptionCapacity = 64;

// Single-reader message stream handle.
class Subscription {
public:
    Subscription(std::string topic, std::size_t capacity) : topic_(std::move(topic)), capacity_(capacity) {}

    const std::string& topic() const { return topic_; }
    std::size_t capacity() const { return capacity_; }

    // Blocks until a message arrives, the timeout expires, or the bus closes.
    template <class Rep, class Period>
    std::optional<Envelope> pop(std::chrono::duration<Rep, Period> timeout) {
        std::unique_lock lock(mutex_);
        cv_.wait_for(lock, timeout, [&] { return !queue_.empty() || closed_; });
        return take(lock);
    }

    std::optional<Envelope> try_pop() {
        std::unique_lock lock(mutex_);
        return take(lock);
    }

    std::vector<Envelope> drain() {
        std::lock_guard lock(mutex_);
        std::vector<Envelope> out(std::make_move_iterator(queue_.begin()), std::make_move_iterator(queue_.end()));
        queue_.clear();
        return out;
    }

    std::uint64_t dropped() const {
        std::lock_guard lock(mutex_);
        return dropped_;
    }

    std::size_t size() const {
        std::lock_guard lock(mutex_);
        return queue_.size();
    }

    bool closed() const {
        std::lock_guard lock(mutex_);
        return closed_ && queue_.empty();
    }

    void push(const Envelope& e) {
        {
            std::lock_guard lock(mutex_);
            if (closed_) return;
            if (queue_.size() >= capacity_) {
                queue_.pop_front();
                ++dropped_;
            }
            queue_.push_back(e);
        }
        cv_.notify_one();
    }

    void close() {
        {
            std::lock_guard lock(mutex_);
            closed_ = true;
        }
        cv_.notify_all();
    }

private:
    std::optional<Envelope> take(std::unique_lock<std::mutex>&) {
        if (queue_.empty()) return std::nullopt;
        Envelope e = std::move(queue_.front());
        queue_.pop_front();
        return e;
    }

    std::string topic_;
    std::size_t capacity_;
    mutable std::mutex mutex_;
    std::condition_variable cv_;
    std::deque<Envelope> queue_;
    std::uint64_t dropped_ = 0;
    bool closed_ = false;
};

using LinkId = std::uint64_t;
using LinkSink = std::function<void(const Envelope&)>;

inline std::int64_t wall_clock_us() {
    return std::chrono::duration_cast<std::chrono::microseconds>(
               std::chrono::system_clock::now().time_since_epoch())
        .count();
}

class Bus {
public:
    explicit Bus(TopicRegistry registry = TopicRegistry::canonical(),
                 std::size_t default_capacity = kDefaultSubscriptionCapacity)
        : registry_(std::move(registry)), default_capacity_(default_capacity) {}

    Bus(const Bus&) = delete;
    Bus& operator=(const Bus&) = delete;
    ~Bus() { close(); }

    const TopicRegistry& registry() const { return registry_; }

    // Stamped with the sender's wall clock. Returns the assigned seq.
    std::uint64_t publish(std::string_view topic, Payload payload) {
        return publish(topic, std::move(payload), wall_clock_us());
    }

    std::uint64_t publish(std::string_view topic, Payload payload, std::int64_t stamp_us) {
        const PayloadKind expected = registry_.kind(topic);
        if (kind_of(payload) != expected)
            throw KindMismatch(std::string(topic), std::string(to_string(expected)),
                               std::string(to_string(kind_of(payload))));
        std::lock_guard lock(mutex_);
        std::string name(topic);
        const std::uint64_t seq = next_seq_[name]++;
        Envelope e{std::move(name), seq, stamp_us, std::move(payload)};
        deliver_locked(e, 0);
        return e.seq;
    }

    // Delivers an envelope that arrived over a link, keeping its seq and stamp.
    // It is not echoed back to `origin`.
    void inject(const Envelope& e, LinkId origin) {
        const PayloadKind expected = registry_.kind(e.topic);
        if (e.kind() != expected)
            throw KindMismatch(e.topic, std::string(to_string(expected)), std::string(to_string(e.kind())));
        std::lock_guard lock(mutex_);
        deliver_locked(e, origin);
    }

    std::shared_ptr<Subscription> subscribe(std::string_view topic, std::size_t capacity = 0) {
        registry_.kind(topic);
        auto sub = std::make_shared<Subscription>(std::string(topic), capacity ? capacity : default_capacity_);
        std::lock_guard lock(mutex_);
        if (closed_) sub->close();
        else subscribers_[sub->topic()].push_back(sub);
        return sub;
    }

    // Links see every message; the sink runs under the bus lock and must not block.
    LinkId attach(LinkSink sink) {
        std::lock_guard lock(mutex_);
        const LinkId id = ++last_link_;
        links_.emplace(id, std::move(sink));
        return id;
    }

    void detach(LinkId id) {
        std::lock_guard lock(mutex_);
        links_.erase(id);
    }

    void close() {
        std::lock_guard lock(mutex_);
        closed_ = true;
        for (auto& [topic, subs] : subscribers_)
            for (auto& weak : subs)
                if (auto s = weak.lock()) s->close();
        subscribers_.clear();
    }

    bool closed() const {
        std::lock_guard lock(mutex_);
        return closed_;
    }

private:
    void deliver_locked(const Envelope& e, LinkId origin) {
        if (closed_) return;
        auto it = subscribers_.find(e.topic);
        if (it != subscribers_.end()) {
            auto& subs = it->second;
            for (auto s = subs.begin(); s != subs.end();) {
                if (auto sub = s->lock()) {
                    sub->push(e);
                    ++s;
                } else {
                    s = subs.erase(s);
                }
            }
        }
        for (const auto& [id, sink] : links_)
            if (id != origin) sink(e);
    }

    TopicRegistry registry_;
    std::size_t default_capacity_;
    mutable std::mutex mutex_;
    std::map<std::string, std::uint64_t> next_seq_;
    std::map<std::string, std::vector<std::weak_ptr<Subscription>>> subscribers_;
    std::map<LinkId, LinkSink> links_;
    LinkId last_link_ = 0;
    bool closed_ = false;
};

} // namespace teleop
