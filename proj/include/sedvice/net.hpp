#pragma once
// TCP transport: line-framed connections, listeners and a request/response
// channel speaking the wire envelope.

#include "sedvice/wire.hpp"

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <functional>
#include <future>
#include <map>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <string>
#include <thread>

namespace sedvice::net {

class net_error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class timeout_error : public net_error {
public:
    using net_error::net_error;
};

// "tcp:<host>:<port>"
struct Endpoint {
    std::string host;
    std::uint16_t port = 0;

    static Endpoint parse(std::string_view spec);
    std::string str() const;

    friend bool operator==(const Endpoint&, const Endpoint&) = default;
    friend auto operator<=>(const Endpoint&, const Endpoint&) = default;
};

// Rewrites an incoming line before it is decoded. Listeners ship none.
using LinePreprocessor = std::function<std::string(std::string)>;

// One TCP stream. A reader thread splits incoming bytes on LF; a writer
// thread drains the outbound queue so every frame goes out whole. Both
// threads hold a reference, so the object lives until they finish.
class Connection : public std::enable_shared_from_this<Connection> {
public:
    struct Handlers {
        std::function<void(std::string)> on_line;
        // A line exceeded max_frame_bytes; the stream is abandoned after this.
        std::function<void()> on_overflow;
        std::function<void()> on_close;
    };

    static std::shared_ptr<Connection> connect(const Endpoint& ep,
                                               std::chrono::milliseconds timeout = std::chrono::seconds(5));
    static std::shared_ptr<Connection> adopt(int fd, std::string peer);

    ~Connection();
    Connection(const Connection&) = delete;
    Connection& operator=(const Connection&) = delete;

    void start(Handlers h, LinePreprocessor pre = nullptr);

    // Queues bytes; false once the connection is closing.
    bool send(std::string bytes);
    // Flushes queued bytes, then shuts the socket down.
    void close();
    // Shuts down immediately, dropping anything queued.
    void abort();

    bool closed() const noexcept { return closing_.load(); }
    const std::string& peer() const noexcept { return peer_; }
    std::uint64_t id() const noexcept { return id_; }

private:
    Connection(int fd, std::string peer);
    void read_loop();
    void write_loop();
    void shutdown_socket();

    int fd_;
    std::string peer_;
    std::uint64_t id_;
    Handlers handlers_;
    LinePreprocessor pre_;
    std::mutex mu_;
    std::condition_variable cv_;
    std::deque<std::string> outbox_;
    std::atomic<bool> closing_{false};
    bool abort_ = false;
    bool shut_ = false;
    std::thread reader_;
    std::thread writer_;
};

// Accepts TCP connections on one endpoint; port 0 binds an ephemeral port.
class Listener {
public:
    using AcceptFn = std::function<void(std::shared_ptr<Connection>)>;

    Listener(const Endpoint& ep, AcceptFn on_accept);
    ~Listener();
    Listener(const Listener&) = delete;
    Listener& operator=(const Listener&) = delete;

    // The endpoint actually bound (with the real port).
    const Endpoint& bound() const noexcept { return bound_; }
    void stop();

private:
    void accept_loop();

    int fd_ = -1;
    Endpoint bound_;
    AcceptFn on_accept_;
    std::atomic<bool> stopping_{false};
    std::thread thread_;
};

// Envelope traffic over one connection. Replies are matched to pending
// requests by txid; everything else goes to the inbound handler on the
// reader thread. Undecodable frames get an ERROR reply carrying the wire
// error code; an oversized frame also closes the connection.
class Channel : public std::enable_shared_from_this<Channel> {
public:
    using InboundFn = std::function<void(const wire::Envelope&)>;

    static std::shared_ptr<Channel> open(std::shared_ptr<Connection> conn, InboundFn inbound,
                                         std::function<void()> on_close = nullptr, LinePreprocessor pre = nullptr);
    static std::shared_ptr<Channel> dial(const Endpoint& ep, InboundFn inbound, std::function<void()> on_close = nullptr,
                                         std::chrono::milliseconds timeout = std::chrono::seconds(5));

    ~Channel();

    // Sends a request with a fresh txid and waits for its reply.
    // Throws timeout_error or net_error when the channel closes first.
    wire::Envelope request(wire::Envelope e, std::chrono::milliseconds timeout);
    // Asynchronous variant returning the txid used; the future fails with
    // net_error on close. cancel() drops interest in a reply.
    std::pair<std::uint64_t, std::future<wire::Envelope>> request_async(wire::Envelope e);
    void cancel(std::uint64_t txid);

    // Sends with a fresh txid, expecting no reply.
    bool push(wire::Envelope e);
    // Sends a reply echoing the request's txid.
    bool reply(const wire::Envelope& request, wire::Kind kind, wire::json body);
    bool send_raw(const wire::Envelope& e);

    void close();
    void abort();
    bool closed() const noexcept;
    const std::shared_ptr<Connection>& connection() const noexcept { return conn_; }

private:
    Channel() = default;
    void on_line(std::string line);
    void on_closed();
    void fail_pending();

    std::shared_ptr<Connection> conn_;
    InboundFn inbound_;
    std::function<void()> on_close_;
    std::mutex mu_;
    std::uint64_t next_txid_ = 1;
    std::map<std::uint64_t, std::promise<wire::Envelope>> pending_;
    bool dead_ = false;
};

bool is_reply(wire::Kind k);

} // namespace sedvice::net
