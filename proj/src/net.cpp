#include "sedvice/net.hpp"

#include "sedvice/log.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <fcntl.h>

namespace sedvice::net {

namespace {

std::atomic<std::uint64_t> next_connection_id{1};

std::string errno_text() { return std::strerror(errno); }

void join_or_detach(std::thread& t) {
    if (!t.joinable())
        return;
    if (t.get_id() == std::this_thread::get_id())
        t.detach();
    else
        t.join();
}

addrinfo* resolve(const Endpoint& ep, bool passive) {
    addrinfo hints{};
    hints.ai_family = AF_INET;
    hints.ai_socktype = SOCK_STREAM;
    if (passive)
        hints.ai_flags = AI_PASSIVE;
    addrinfo* res = nullptr;
    std::string port = std::to_string(ep.port);
    int rc = ::getaddrinfo(ep.host.empty() ? nullptr : ep.host.c_str(), port.c_str(), &hints, &res);
    if (rc != 0)
        throw net_error("cannot resolve " + ep.str() + ": " + ::gai_strerror(rc));
    return res;
}

} // namespace

Endpoint Endpoint::parse(std::string_view spec) {
    constexpr std::string_view scheme = "tcp:";
    if (spec.substr(0, scheme.size()) != scheme)
        throw net_error("endpoint must look like tcp:<host>:<port>: " + std::string(spec));
    auto rest = spec.substr(scheme.size());
    auto colon = rest.rfind(':');
    if (colon == std::string_view::npos || colon == 0 || colon + 1 == rest.size())
        throw net_error("endpoint must look like tcp:<host>:<port>: " + std::string(spec));
    Endpoint ep;
    ep.host = std::string(rest.substr(0, colon));
    auto port_text = rest.substr(colon + 1);
    unsigned long port = 0;
    for (char c : port_text) {
        if (c < '0' || c > '9')
            throw net_error("bad port in endpoint " + std::string(spec));
        port = port * 10 + static_cast<unsigned>(c - '0');
        if (port > 65535)
            throw net_error("bad port in endpoint " + std::string(spec));
    }
    ep.port = static_cast<std::uint16_t>(port);
    return ep;
}

std::string Endpoint::str() const { return "tcp:" + host + ":" + std::to_string(port); }

// --- Connection ---

Connection::Connection(int fd, std::string peer) : fd_(fd), peer_(std::move(peer)), id_(next_connection_id++) {}

std::shared_ptr<Connection> Connection::adopt(int fd, std::string peer) {
    int one = 1;
    ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
    return std::shared_ptr<Connection>(new Connection(fd, std::move(peer)));
}

std::shared_ptr<Connection> Connection::connect(const Endpoint& ep, std::chrono::milliseconds timeout) {
    addrinfo* res = resolve(ep, false);
    std::string last_error = "no address";
    for (addrinfo* ai = res; ai; ai = ai->ai_next) {
        int fd = ::socket(ai->ai_family, ai->ai_socktype | SOCK_CLOEXEC, ai->ai_protocol);
        if (fd < 0) {
            last_error = errno_text();
            continue;
        }
        int flags = ::fcntl(fd, F_GETFL, 0);
        ::fcntl(fd, F_SETFL, flags | O_NONBLOCK);
        int rc = ::connect(fd, ai->ai_addr, ai->ai_addrlen);
        if (rc != 0 && errno == EINPROGRESS) {
            pollfd p{fd, POLLOUT, 0};
            int ready = ::poll(&p, 1, static_cast<int>(timeout.count()));
            if (ready == 1) {
                int err = 0;
                socklen_t len = sizeof err;
                ::getsockopt(fd, SOL_SOCKET, SO_ERROR, &err, &len);
                rc = err == 0 ? 0 : -1;
                errno = err;
            } else {
                if (ready == 0)
                    errno = ETIMEDOUT;
                rc = -1;
            }
        }
        if (rc == 0) {
            ::fcntl(fd, F_SETFL, flags);
            ::freeaddrinfo(res);
            return adopt(fd, ep.str());
        }
        last_error = errno_text();
        ::close(fd);
    }
    ::freeaddrinfo(res);
    throw net_error("cannot connect to " + ep.str() + ": " + last_error);
}

Connection::~Connection() {
    shutdown_socket();
    join_or_detach(reader_);
    join_or_detach(writer_);
    ::close(fd_);
}

void Connection::start(Handlers h, LinePreprocessor pre) {
    handlers_ = std::move(h);
    pre_ = std::move(pre);
    auto self = shared_from_this();
    reader_ = std::thread([self] { self->read_loop(); });
    writer_ = std::thread([self] { self->write_loop(); });
}

bool Connection::send(std::string bytes) {
    {
        std::lock_guard lk(mu_);
        if (closing_)
            return false;
        outbox_.push_back(std::move(bytes));
    }
    cv_.notify_one();
    return true;
}

void Connection::close() {
    {
        std::lock_guard lk(mu_);
        closing_ = true;
    }
    cv_.notify_all();
}

void Connection::abort() {
    {
        std::lock_guard lk(mu_);
        abort_ = true;
        closing_ = true;
    }
    cv_.notify_all();
    shutdown_socket();
}

void Connection::shutdown_socket() {
    std::lock_guard lk(mu_);
    if (!shut_) {
        shut_ = true;
        ::shutdown(fd_, SHUT_RDWR);
    }
}

void Connection::read_loop() {
    std::string buf;
    char chunk[65536];
    bool overflow = false;
    for (;;) {
        ssize_t n = ::recv(fd_, chunk, sizeof chunk, 0);
        if (n < 0 && errno == EINTR)
            continue;
        if (n <= 0)
            break;
        buf.append(chunk, static_cast<std::size_t>(n));
        std::size_t start = 0;
        for (;;) {
            auto lf = buf.find('\n', start);
            if (lf == std::string::npos)
                break;
            std::string line = buf.substr(start, lf - start);
            start = lf + 1;
            if (line.size() > wire::max_frame_bytes) {
                overflow = true;
                break;
            }
            if (pre_)
                line = pre_(std::move(line));
            if (handlers_.on_line)
                handlers_.on_line(std::move(line));
        }
        if (overflow)
            break;
        buf.erase(0, start);
        if (buf.size() > wire::max_frame_bytes) {
            overflow = true;
            break;
        }
    }
    if (overflow) {
        if (handlers_.on_overflow)
            handlers_.on_overflow();
        close();
    }
    close();
    if (!overflow)
        shutdown_socket();
    if (handlers_.on_close)
        handlers_.on_close();
    handlers_ = {};
}

void Connection::write_loop() {
    for (;;) {
        std::string next;
        {
            std::unique_lock lk(mu_);
            cv_.wait(lk, [&] { return !outbox_.empty() || closing_; });
            if (abort_ || outbox_.empty())
                break;
            next = std::move(outbox_.front());
            outbox_.pop_front();
        }
        std::size_t off = 0;
        while (off < next.size()) {
            ssize_t n = ::send(fd_, next.data() + off, next.size() - off, MSG_NOSIGNAL);
            if (n < 0 && errno == EINTR)
                continue;
            if (n <= 0) {
                abort();
                return;
            }
            off += static_cast<std::size_t>(n);
        }
    }
    shutdown_socket();
}

// --- Listener ---

Listener::Listener(const Endpoint& ep, AcceptFn on_accept) : on_accept_(std::move(on_accept)) {
    addrinfo* res = resolve(ep, true);
    std::string last_error = "no address";
    for (addrinfo* ai = res; ai && fd_ < 0; ai = ai->ai_next) {
        int fd = ::socket(ai->ai_family, ai->ai_socktype | SOCK_CLOEXEC, ai->ai_protocol);
        if (fd < 0) {
            last_error = errno_text();
            continue;
        }
        int one = 1;
        ::setsockopt(fd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
        if (::bind(fd, ai->ai_addr, ai->ai_addrlen) != 0 || ::listen(fd, 64) != 0) {
            last_error = errno_text();
            ::close(fd);
            continue;
        }
        fd_ = fd;
    }
    ::freeaddrinfo(res);
    if (fd_ < 0)
        throw net_error("cannot listen on " + ep.str() + ": " + last_error);
    sockaddr_in addr{};
    socklen_t len = sizeof addr;
    ::getsockname(fd_, reinterpret_cast<sockaddr*>(&addr), &len);
    bound_.host = ep.host;
    bound_.port = ntohs(addr.sin_port);
    thread_ = std::thread([this] { accept_loop(); });
}

Listener::~Listener() { stop(); }

void Listener::stop() {
    if (stopping_.exchange(true))
        return;
    ::shutdown(fd_, SHUT_RDWR);
    join_or_detach(thread_);
    ::close(fd_);
}

void Listener::accept_loop() {
    while (!stopping_) {
        sockaddr_in addr{};
        socklen_t len = sizeof addr;
        int fd = ::accept4(fd_, reinterpret_cast<sockaddr*>(&addr), &len, SOCK_CLOEXEC);
        if (fd < 0) {
            if (errno == EINTR || errno == ECONNABORTED)
                continue;
            break;
        }
        char host[INET_ADDRSTRLEN] = {};
        ::inet_ntop(AF_INET, &addr.sin_addr, host, sizeof host);
        auto conn = Connection::adopt(fd, std::string("tcp:") + host + ":" + std::to_string(ntohs(addr.sin_port)));
        try {
            on_accept_(std::move(conn));
        } catch (const std::exception& e) {
            logger().error("accept handler failed: {}", e.what());
        }
    }
}

// --- Channel ---

bool is_reply(wire::Kind k) {
    using wire::Kind;
    switch (k) {
    case Kind::JOIN_OK:
    case Kind::JOIN_REFUSED:
    case Kind::LEAVE_OK:
    case Kind::UPDATE_OK:
    case Kind::QUERY_RESULT:
    case Kind::SUBSCRIBE_OK:
    case Kind::UNSUBSCRIBE_OK:
    case Kind::ERROR:
    case Kind::PEER_RESULT: return true;
    default: return false;
    }
}

std::shared_ptr<Channel> Channel::open(std::shared_ptr<Connection> conn, InboundFn inbound,
                                       std::function<void()> on_close, LinePreprocessor pre) {
    std::shared_ptr<Channel> ch(new Channel());
    ch->conn_ = std::move(conn);
    ch->inbound_ = std::move(inbound);
    ch->on_close_ = std::move(on_close);
    std::weak_ptr<Channel> weak = ch;
    Connection::Handlers h;
    h.on_line = [weak](std::string line) {
        if (auto c = weak.lock())
            c->on_line(std::move(line));
    };
    h.on_overflow = [weak] {
        if (auto c = weak.lock()) {
            wire::Envelope err;
            err.kind = wire::Kind::ERROR;
            err.body = wire::error_body(wire::error_code_name(wire::ErrorCode::FrameTooLarge), "frame exceeds 16 MiB");
            c->send_raw(err);
        }
    };
    h.on_close = [weak] {
        if (auto c = weak.lock())
            c->on_closed();
    };
    ch->conn_->start(std::move(h), std::move(pre));
    return ch;
}

std::shared_ptr<Channel> Channel::dial(const Endpoint& ep, InboundFn inbound, std::function<void()> on_close,
                                       std::chrono::milliseconds timeout) {
    return open(Connection::connect(ep, timeout), std::move(inbound), std::move(on_close));
}

Channel::~Channel() {
    if (conn_)
        conn_->close();
    fail_pending();
}

void Channel::on_line(std::string line) {
    wire::Envelope env;
    try {
        env = wire::decode_frame(line);
    } catch (const wire::wire_error& e) {
        logger().warn("bad frame from {}: {}", conn_->peer(), e.what());
        wire::Envelope err;
        err.kind = wire::Kind::ERROR;
        // Echo the txid when the header is readable at all.
        try {
            auto j = wire::json::parse(line);
            if (j.is_object() && j.contains("txid") && j["txid"].is_number_unsigned())
                err.txid = j["txid"].get<std::uint64_t>();
        } catch (...) {
        }
        err.body = wire::error_body(wire::error_code_name(e.code()), e.what());
        send_raw(err);
        return;
    }
    if (is_reply(env.kind)) {
        std::unique_lock lk(mu_);
        auto it = pending_.find(env.txid);
        if (it != pending_.end()) {
            auto p = std::move(it->second);
            pending_.erase(it);
            lk.unlock();
            p.set_value(std::move(env));
            return;
        }
    }
    if (inbound_)
        inbound_(env);
}

void Channel::on_closed() {
    fail_pending();
    std::function<void()> cb;
    {
        std::lock_guard lk(mu_);
        cb = std::move(on_close_);
        on_close_ = nullptr;
    }
    if (cb)
        cb();
}

void Channel::fail_pending() {
    std::map<std::uint64_t, std::promise<wire::Envelope>> pending;
    {
        std::lock_guard lk(mu_);
        dead_ = true;
        pending.swap(pending_);
    }
    for (auto& [txid, p] : pending)
        p.set_exception(std::make_exception_ptr(net_error("connection closed")));
}

std::pair<std::uint64_t, std::future<wire::Envelope>> Channel::request_async(wire::Envelope e) {
    std::promise<wire::Envelope> p;
    auto fut = p.get_future();
    std::string bytes;
    {
        std::lock_guard lk(mu_);
        e.txid = next_txid_++;
        if (dead_) {
            p.set_exception(std::make_exception_ptr(net_error("connection closed")));
            return {e.txid, std::move(fut)};
        }
        bytes = wire::encode_message(e);
        pending_.emplace(e.txid, std::move(p));
        // Sent under the lock so txids leave in increasing order.
        if (!conn_->send(std::move(bytes))) {
            auto it = pending_.find(e.txid);
            it->second.set_exception(std::make_exception_ptr(net_error("connection closed")));
            pending_.erase(it);
        }
    }
    return {e.txid, std::move(fut)};
}

void Channel::cancel(std::uint64_t txid) {
    std::lock_guard lk(mu_);
    pending_.erase(txid);
}

wire::Envelope Channel::request(wire::Envelope e, std::chrono::milliseconds timeout) {
    auto [txid, fut] = request_async(std::move(e));
    if (fut.wait_for(timeout) != std::future_status::ready) {
        cancel(txid);
        throw timeout_error("no reply within " + std::to_string(timeout.count()) + " ms");
    }
    return fut.get();
}

bool Channel::push(wire::Envelope e) {
    std::lock_guard lk(mu_);
    e.txid = next_txid_++;
    return conn_->send(wire::encode_message(e));
}

bool Channel::reply(const wire::Envelope& request, wire::Kind kind, wire::json body) {
    wire::Envelope r;
    r.kind = kind;
    r.space = request.space;
    r.kp = request.kp;
    r.txid = request.txid;
    r.body = std::move(body);
    return send_raw(r);
}

bool Channel::send_raw(const wire::Envelope& e) { return conn_->send(wire::encode_message(e)); }

void Channel::close() { conn_->close(); }
void Channel::abort() { conn_->abort(); }
bool Channel::closed() const noexcept { return conn_->closed(); }

} // namespace sedvice::net
