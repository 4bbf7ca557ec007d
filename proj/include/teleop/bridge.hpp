#pragma once

// Links buses in different processes over TCP (one JSON object per line) or
// WebSocket (one JSON object per text message). Both transports carry the
// same messages:
//
//   client -> server  {"type":"hello","version":"teleop/1","registry_hash":"…","topics":[…]}
//   server -> client  {"type":"welcome","version":"teleop/1","registry_hash":"…","topics":[…]}
//                     or {"type":"error","error":"RegistryMismatch","message":"…"} and close
//   either way        {"type":"subscribe","topics":[…]}
//   either way        envelopes (no "type" field)
//
// "topics" lists what the sender wants to receive. Envelopes a peer sends are
// injected into the receiving bus with their seq and stamp intact. The server
// subscribes to every topic from its clients, so it relays between them.

#include <atomic>
#include <chrono>
#include <cstdint>
#include <deque>
#include <future>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/websocket.hpp>

#include "teleop/bus.hpp"
#include "teleop/errors.hpp"
#include "teleop/wire.hpp"

namespace teleop {

inline constexpr std::uint16_t kDefaultTcpPort = 7401;
inline constexpr std::uint16_t kDefaultWsPort = 7402;
inline constexpr std::size_t kDefaultLinkQueue = 8192;

enum class Transport : std::uint8_t { tcp, websocket };

struct BridgeAddress {
    std::string host = "127.0.0.1";
    std::uint16_t port = kDefaultTcpPort;
    Transport transport = Transport::tcp;
};

// "host:port", "tcp://host:port" or "ws://host:port".
inline BridgeAddress parse_bridge_address(std::string_view text) {
    BridgeAddress a;
    std::string_view rest = text;
    if (rest.starts_with("ws://")) {
        a.transport = Transport::websocket;
        a.port = kDefaultWsPort;
        rest.remove_prefix(5);
    } else if (rest.starts_with("tcp://")) {
        rest.remove_prefix(6);
    }
    const auto colon = rest.rfind(':');
    if (colon != std::string_view::npos) {
        const std::string port(rest.substr(colon + 1));
        int value = 0;
        try {
            std::size_t used = 0;
            value = std::stoi(port, &used);
            if (used != port.size()) value = -1;
        } catch (const std::logic_error&) {
            value = -1;
        }
        if (value <= 0 || value > 65535) throw Error("bad bridge address: " + std::string(text));
        a.port = static_cast<std::uint16_t>(value);
        rest = rest.substr(0, colon);
    }
    if (!rest.empty()) a.host = std::string(rest);
    return a;
}

namespace bridge_detail {

namespace asio = boost::asio;
namespace beast = boost::beast;
namespace websocket = beast::websocket;
using tcp = asio::ip::tcp;
using error_code = boost::system::error_code;

inline std::set<std::string> all_topics(const TopicRegistry& r) {
    std::set<std::string> s;
    for (const auto& [topic, kind] : r.entries()) s.insert(topic);
    return s;
}

inline std::string greeting(std::string_view type, const TopicRegistry& r, const std::set<std::string>& topics) {
    return json{{"type", type},
                {"version", kProtocolVersion},
                {"registry_hash", r.hash()},
                {"topics", json(topics)}}
        .dump();
}

inline std::string error_message(std::string_view error, std::string_view message) {
    return json{{"type", "error"}, {"error", error}, {"message", message}}.dump();
}

inline std::set<std::string> topic_set(const json& j, const TopicRegistry& r) {
    std::set<std::string> topics;
    if (!j.is_array()) throw Error("topics must be an array");
    for (const auto& t : j) {
        if (!t.is_string()) throw Error("topic names must be strings");
        const auto name = t.get<std::string>();
        if (!r.contains(name)) throw UnknownTopic(name);
        topics.insert(name);
    }
    return topics;
}

// Checks a hello or welcome and returns the topics the sender wants.
inline std::set<std::string> check_greeting(const json& j, std::string_view type, const TopicRegistry& r) {
    if (!j.is_object() || j.value("type", std::string()) != type)
        throw Error("expected " + std::string(type) + " message");
    const std::string version = j.value("version", std::string());
    if (version != kProtocolVersion)
        throw VersionMismatch("protocol version '" + version + "', expected '" + std::string(kProtocolVersion) + "'");
    const std::string hash = j.value("registry_hash", std::string());
    if (hash != r.hash()) throw RegistryMismatch("registry hash " + hash + " does not match " + r.hash());
    return j.contains("topics") ? topic_set(j.at("topics"), r) : std::set<std::string>{};
}

// Rethrows a remote {"type":"error"} reply as the matching exception.
[[noreturn]] inline void raise_remote_error(const json& j) {
    const std::string error = j.value("error", std::string("Error"));
    const std::string message = "bridge refused: " + j.value("message", error);
    if (error == "VersionMismatch") throw VersionMismatch(message);
    if (error == "RegistryMismatch") throw RegistryMismatch(message);
    throw Error(message);
}

// One end of a link. Protocol handling is shared; subclasses move bytes.
class Peer : public std::enable_shared_from_this<Peer> {
public:
    Peer(asio::io_context& ioc, Bus& bus, std::size_t queue_capacity)
        : strand_(asio::make_strand(ioc)), bus_(bus), capacity_(queue_capacity) {}
    virtual ~Peer() = default;

    // Server side: wait for a hello.
    void start_accepting() {
        asio::dispatch(strand_, [self = shared_from_this()] { self->accept_transport(); });
    }

    // Client side: the handshake already happened.
    void start_linked(std::set<std::string> remote_wants) {
        {
            std::lock_guard lock(mutex_);
            remote_topics_ = std::move(remote_wants);
        }
        linked_ = true;
        attach();
        asio::dispatch(strand_, [self = shared_from_this()] { self->read_next(); });
    }

    void send(std::string text) { enqueue(std::move(text)); }

    void subscribe(const std::set<std::string>& topics) {
        send(json{{"type", "subscribe"}, {"topics", json(topics)}}.dump());
    }

    void close() {
        detach();
        asio::post(strand_, [self = shared_from_this()] { self->fail(); });
    }

    // Runs on the I/O thread: drops the connection without waiting.
    void abort() { fail(); }

    bool linked() const { return linked_; }
    bool closed() const { return closed_; }

    // Nothing queued and nothing in flight.
    bool idle() const {
        std::lock_guard lock(mutex_);
        return queue_.empty() && !writing_;
    }

    std::uint64_t dropped() const {
        std::lock_guard lock(mutex_);
        return dropped_;
    }

    std::uint64_t protocol_errors() const { return protocol_errors_; }

    // Detaches from the bus; must not be called from inside a bus sink.
    void detach() {
        if (const LinkId id = link_.exchange(0)) bus_.detach(id);
    }

protected:
    virtual void accept_transport() { read_next(); }
    virtual void read_next() = 0;
    virtual void write_batch(std::shared_ptr<std::vector<std::string>> batch) = 0;
    virtual void shutdown_transport() = 0;

    void on_read(error_code ec, std::string text) {
        if (ec) {
            fail();
            return;
        }
        handle(text);
        if (!closed_ && !closing_) read_next();
    }

    void on_written(error_code ec) {
        if (ec) {
            fail();
            return;
        }
        flush();
    }

    void fail() {
        detach();
        if (closed_.exchange(true)) return;
        {
            std::lock_guard lock(mutex_);
            queue_.clear();
        }
        shutdown_transport();
    }

    asio::strand<asio::io_context::executor_type> strand_;

private:
    void handle(const std::string& text) {
        json j;
        try {
            j = json::parse(text);
        } catch (const json::exception&) {
            ++protocol_errors_;
            return;
        }
        if (!linked_) {
            accept_hello(j);
            return;
        }
        if (j.is_object() && j.contains("type")) {
            const std::string type = j.value("type", std::string());
            if (type == "subscribe") {
                try {
                    auto topics = topic_set(j.value("topics", json::array()), bus_.registry());
                    std::lock_guard lock(mutex_);
                    remote_topics_.insert(topics.begin(), topics.end());
                } catch (const Error& e) {
                    ++protocol_errors_;
                    enqueue(error_message("UnknownTopic", e.what()));
                }
            } else if (type == "error") {
                fail();
            } else {
                ++protocol_errors_;
            }
            return;
        }
        try {
            bus_.inject(envelope_from_json(j), link_);
        } catch (const Error&) {
            ++protocol_errors_;
        }
    }

    void accept_hello(const json& j) {
        std::set<std::string> wants;
        try {
            wants = check_greeting(j, "hello", bus_.registry());
        } catch (const VersionMismatch& e) {
            reject("VersionMismatch", e.what());
            return;
        } catch (const RegistryMismatch& e) {
            reject("RegistryMismatch", e.what());
            return;
        } catch (const Error& e) {
            reject("ProtocolError", e.what());
            return;
        }
        {
            std::lock_guard lock(mutex_);
            remote_topics_ = std::move(wants);
        }
        enqueue(greeting("welcome", bus_.registry(), all_topics(bus_.registry())));
        linked_ = true;
        attach();
    }

    void reject(std::string_view error, std::string_view message) {
        closing_ = true;
        enqueue(error_message(error, message));
    }

    void attach() {
        std::weak_ptr<Peer> weak = shared_from_this();
        link_ = bus_.attach([weak](const Envelope& e) {
            if (auto self = weak.lock()) self->forward(e);
        });
    }

    void forward(const Envelope& e) {
        {
            std::lock_guard lock(mutex_);
            if (!remote_topics_.count(e.topic)) return;
        }
        enqueue(encode_envelope(e));
    }

    void enqueue(std::string text) {
        bool kick = false;
        {
            std::lock_guard lock(mutex_);
            if (closed_) return;
            if (queue_.size() >= capacity_) {
                queue_.pop_front();
                ++dropped_;
            }
            queue_.push_back(std::move(text));
            if (!writing_) writing_ = kick = true;
        }
        if (kick) asio::post(strand_, [self = shared_from_this()] { self->flush(); });
    }

    void flush() {
        auto batch = std::make_shared<std::vector<std::string>>();
        {
            std::lock_guard lock(mutex_);
            if (queue_.empty()) {
                writing_ = false;
                if (closing_) {
                    closed_ = true;
                    shutdown_transport();
                }
                return;
            }
            batch->assign(std::make_move_iterator(queue_.begin()), std::make_move_iterator(queue_.end()));
            queue_.clear();
        }
        write_batch(std::move(batch));
    }

    Bus& bus_;
    std::size_t capacity_;
    mutable std::mutex mutex_;
    std::deque<std::string> queue_;
    std::set<std::string> remote_topics_;
    std::uint64_t dropped_ = 0;
    bool writing_ = false;
    std::atomic<bool> linked_{false};
    std::atomic<bool> closing_{false};
    std::atomic<bool> closed_{false};
    std::atomic<LinkId> link_{0};
    std::atomic<std::uint64_t> protocol_errors_{0};
};

class TcpPeer final : public Peer {
public:
    TcpPeer(asio::io_context& ioc, tcp::socket socket, Bus& bus, std::size_t capacity, std::string pending = {})
        : Peer(ioc, bus, capacity), socket_(std::move(socket)), buffer_(std::move(pending)) {}

protected:
    void read_next() override {
        asio::async_read_until(
            socket_, asio::dynamic_buffer(buffer_), '\n',
            asio::bind_executor(strand_, [self = shared(), this](error_code ec, std::size_t n) {
                if (ec) {
                    on_read(ec, {});
                    return;
                }
                std::string line = buffer_.substr(0, n - 1);
                buffer_.erase(0, n);
                if (!line.empty() && line.back() == '\r') line.pop_back();
                if (line.empty()) {
                    read_next();
                    return;
                }
                on_read(ec, std::move(line));
            }));
    }

    void write_batch(std::shared_ptr<std::vector<std::string>> batch) override {
        auto data = std::make_shared<std::string>();
        for (auto& s : *batch) {
            *data += s;
            *data += '\n';
        }
        asio::async_write(socket_, asio::buffer(*data),
                          asio::bind_executor(strand_, [self = shared(), data](error_code ec, std::size_t) {
                              self->on_written(ec);
                          }));
    }

    void shutdown_transport() override {
        error_code ignored;
        socket_.shutdown(tcp::socket::shutdown_both, ignored);
        socket_.close(ignored);
    }

private:
    std::shared_ptr<TcpPeer> shared() { return std::static_pointer_cast<TcpPeer>(shared_from_this()); }

    tcp::socket socket_;
    std::string buffer_;
};

class WsPeer final : public Peer {
public:
    using Stream = websocket::stream<tcp::socket>;

    WsPeer(asio::io_context& ioc, Stream stream, Bus& bus, std::size_t capacity, bool handshake_done)
        : Peer(ioc, bus, capacity), ws_(std::move(stream)), handshake_done_(handshake_done) {
        ws_.text(true);
    }

protected:
    void accept_transport() override {
        if (handshake_done_) {
            read_next();
            return;
        }
        ws_.async_accept(asio::bind_executor(strand_, [self = shared()](error_code ec) {
            if (ec) {
                self->fail();
                return;
            }
            self->handshake_done_ = true;
            self->read_next();
        }));
    }

    void read_next() override {
        ws_.async_read(buffer_, asio::bind_executor(strand_, [self = shared(), this](error_code ec, std::size_t) {
                           if (ec) {
                               on_read(ec, {});
                               return;
                           }
                           std::string text = beast::buffers_to_string(buffer_.data());
                           buffer_.consume(buffer_.size());
                           on_read(ec, std::move(text));
                       }));
    }

    void write_batch(std::shared_ptr<std::vector<std::string>> batch) override { write_one(std::move(batch), 0); }

    void shutdown_transport() override {
        error_code ignored;
        beast::get_lowest_layer(ws_).shutdown(tcp::socket::shutdown_both, ignored);
        beast::get_lowest_layer(ws_).close(ignored);
    }

private:
    std::shared_ptr<WsPeer> shared() { return std::static_pointer_cast<WsPeer>(shared_from_this()); }

    void write_one(std::shared_ptr<std::vector<std::string>> batch, std::size_t i) {
        if (i == batch->size()) {
            on_written({});
            return;
        }
        ws_.async_write(asio::buffer((*batch)[i]),
                        asio::bind_executor(strand_, [self = shared(), batch, i](error_code ec, std::size_t) {
                            if (ec) {
                                self->on_written(ec);
                                return;
                            }
                            self->write_one(batch, i + 1);
                        }));
    }

    Stream ws_;
    beast::flat_buffer buffer_;
    bool handshake_done_;
};

} // namespace bridge_detail

struct BridgeServerOptions {
    std::string host = "127.0.0.1";
    std::uint16_t tcp_port = kDefaultTcpPort;  // 0 picks a free port
    std::uint16_t ws_port = kDefaultWsPort;
    bool enable_tcp = true;
    bool enable_ws = true;
    std::size_t queue_capacity = kDefaultLinkQueue;
};

// Accepts TCP and WebSocket peers on its own I/O thread. Stop it (or destroy
// it) before the bus it serves.
class BridgeServer {
public:
    BridgeServer(Bus& bus, BridgeServerOptions options = {}) : bus_(bus), options_(std::move(options)) {
        namespace asio = bridge_detail::asio;
        using bridge_detail::tcp;
        try {
            const auto address = asio::ip::make_address(options_.host);
            if (options_.enable_tcp) {
                tcp_acceptor_.emplace(ioc_, tcp::endpoint(address, options_.tcp_port));
                accept_tcp();
            }
            if (options_.enable_ws) {
                ws_acceptor_.emplace(ioc_, tcp::endpoint(address, options_.ws_port));
                accept_ws();
            }
        } catch (const boost::system::system_error& e) {
            throw Error("bridge: cannot listen on " + options_.host + ": " + e.what());
        }
        thread_ = std::thread([this] { ioc_.run(); });
    }

    BridgeServer(const BridgeServer&) = delete;
    BridgeServer& operator=(const BridgeServer&) = delete;
    ~BridgeServer() { stop(); }

    std::uint16_t tcp_port() const { return tcp_acceptor_ ? tcp_acceptor_->local_endpoint().port() : 0; }
    std::uint16_t ws_port() const { return ws_acceptor_ ? ws_acceptor_->local_endpoint().port() : 0; }

    std::size_t linked_peers() const {
        std::lock_guard lock(mutex_);
        std::size_t n = 0;
        for (const auto& p : peers_)
            if (p->linked() && !p->closed()) ++n;
        return n;
    }

    void stop() {
        if (stopped_.exchange(true)) return;
        {
            std::lock_guard lock(mutex_);
            for (auto& p : peers_) p->detach();
        }
        std::promise<void> done;
        bridge_detail::asio::post(ioc_, [this, &done] {
            bridge_detail::error_code ignored;
            if (tcp_acceptor_) tcp_acceptor_->close(ignored);
            if (ws_acceptor_) ws_acceptor_->close(ignored);
            {
                std::lock_guard lock(mutex_);
                for (auto& p : peers_) p->abort();
            }
            done.set_value();
        });
        done.get_future().wait();
        ioc_.stop();
        if (thread_.joinable()) thread_.join();
        std::lock_guard lock(mutex_);
        peers_.clear();
    }

private:
    void keep(std::shared_ptr<bridge_detail::Peer> peer) {
        std::lock_guard lock(mutex_);
        std::erase_if(peers_, [](const auto& p) { return p->closed(); });
        peers_.push_back(peer);
        peer->start_accepting();
    }

    void accept_tcp() {
        tcp_acceptor_->async_accept([this](bridge_detail::error_code ec, bridge_detail::tcp::socket socket) {
            if (ec) return;
            socket.set_option(bridge_detail::tcp::no_delay(true));
            keep(std::make_shared<bridge_detail::TcpPeer>(ioc_, std::move(socket), bus_, options_.queue_capacity));
            accept_tcp();
        });
    }

    void accept_ws() {
        ws_acceptor_->async_accept([this](bridge_detail::error_code ec, bridge_detail::tcp::socket socket) {
            if (ec) return;
            socket.set_option(bridge_detail::tcp::no_delay(true));
            keep(std::make_shared<bridge_detail::WsPeer>(ioc_, bridge_detail::WsPeer::Stream(std::move(socket)), bus_,
                                                         options_.queue_capacity, false));
            accept_ws();
        });
    }

    Bus& bus_;
    BridgeServerOptions options_;
    bridge_detail::asio::io_context ioc_;
    std::optional<bridge_detail::tcp::acceptor> tcp_acceptor_;
    std::optional<bridge_detail::tcp::acceptor> ws_acceptor_;
    mutable std::mutex mutex_;
    std::vector<std::shared_ptr<bridge_detail::Peer>> peers_;
    std::thread thread_;
    std::atomic<bool> stopped_{false};
};

// Client end of a link. The constructor connects and completes the
// handshake, throwing VersionMismatch, RegistryMismatch or Error.
class BridgeClient {
public:
    BridgeClient(Bus& bus, const BridgeAddress& address, std::set<std::string> topics = {},
                 std::size_t queue_capacity = kDefaultLinkQueue) {
        namespace asio = bridge_detail::asio;
        namespace websocket = bridge_detail::websocket;
        using bridge_detail::tcp;
        for (const auto& t : topics) bus.registry().kind(t);
        const std::string hello = bridge_detail::greeting("hello", bus.registry(), topics);
        const std::string where = address.host + ":" + std::to_string(address.port);

        tcp::socket socket(ioc_);
        try {
            tcp::resolver resolver(ioc_);
            asio::connect(socket, resolver.resolve(address.host, std::to_string(address.port)));
            socket.set_option(tcp::no_delay(true));
        } catch (const boost::system::system_error& e) {
            throw Error("bridge: cannot connect to " + where + ": " + e.code().message());
        }

        std::string reply;
        std::string pending;
        std::optional<websocket::stream<tcp::socket>> ws;
        try {
            if (address.transport == Transport::tcp) {
                asio::write(socket, asio::buffer(hello + "\n"));
                const std::size_t n = asio::read_until(socket, asio::dynamic_buffer(pending), '\n');
                reply = pending.substr(0, n - 1);
                pending.erase(0, n);
            } else {
                ws.emplace(std::move(socket));
                ws->handshake(address.host, "/");
                ws->text(true);
                ws->write(asio::buffer(hello));
                boost::beast::flat_buffer buffer;
                ws->read(buffer);
                reply = boost::beast::buffers_to_string(buffer.data());
            }
        } catch (const boost::system::system_error& e) {
            throw Error("bridge: handshake with " + where + " failed: " + e.code().message());
        }

        json j;
        try {
            j = json::parse(reply);
        } catch (const json::exception&) {
            throw Error("bridge: malformed handshake reply from " + where);
        }
        if (j.is_object() && j.value("type", std::string()) == "error") bridge_detail::raise_remote_error(j);
        auto remote_wants = bridge_detail::check_greeting(j, "welcome", bus.registry());

        if (ws)
            peer_ = std::make_shared<bridge_detail::WsPeer>(ioc_, std::move(*ws), bus, queue_capacity, true);
        else
            peer_ = std::make_shared<bridge_detail::TcpPeer>(ioc_, std::move(socket), bus, queue_capacity, std::move(pending));
        peer_->start_linked(std::move(remote_wants));
        thread_ = std::thread([this] { ioc_.run(); });
    }

    BridgeClient(const BridgeClient&) = delete;
    BridgeClient& operator=(const BridgeClient&) = delete;
    ~BridgeClient() { close(); }

    // Asks the remote end for more topics.
    void subscribe(const std::set<std::string>& topics) { peer_->subscribe(topics); }

    bool connected() const { return peer_ && !peer_->closed(); }

    // Waits until everything queued so far has been written to the socket.
    template <class Rep, class Period>
    bool drain(std::chrono::duration<Rep, Period> timeout) {
        const auto until = std::chrono::steady_clock::now() + timeout;
        while (!peer_->idle()) {
            if (peer_->closed() || std::chrono::steady_clock::now() >= until) return false;
            std::this_thread::sleep_for(std::chrono::milliseconds(1));
        }
        return true;
    }
    std::uint64_t dropped() const { return peer_->dropped(); }

    void close() {
        if (closed_.exchange(true)) return;
        peer_->close();
        if (thread_.joinable()) thread_.join();
    }

private:
    bridge_detail::asio::io_context ioc_;
    std::shared_ptr<bridge_detail::Peer> peer_;
    std::thread thread_;
    std::atomic<bool> closed_{false};
};

inline std::unique_ptr<BridgeServer> serve_bridge(Bus& bus, BridgeServerOptions options = {}) {
    return std::make_unique<BridgeServer>(bus, std::move(options));
}

inline std::unique_ptr<BridgeClient> connect_bridge(Bus& bus, const BridgeAddress& address,
                                                     std::set<std::string> topics = {}) {
    return std::make_unique<BridgeClient>(bus, address, std::move(topics));
}

} // namespace teleop
