#pragma once
// The Node: a KP's connection to one or more spaces. Writes go to every
// joined space, queries and subscriptions merge what the spaces return.

#include "sedvice/net.hpp"
#include "sedvice/query.hpp"
#include "sedvice/store.hpp"

#include <chrono>
#include <functional>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace sedvice::kp {

// code is the server's error code, JOIN_REFUSED, TIMEOUT, TRANSPORT, or
// LOCAL for misuse caught before anything is sent.
class kp_error : public std::runtime_error {
public:
    kp_error(std::string code, const std::string& msg) : std::runtime_error(msg), code_(std::move(code)) {}
    const std::string& code() const noexcept { return code_; }

private:
    std::string code_;
};

struct SpaceHandle {
    std::uint64_t id = 0;
    std::string space;
    net::Endpoint endpoint;
    std::string session;
};

struct UpdateAck {
    SpaceHandle space;
    bool ok = false;
    Delta delta;
    std::string error;
};

using SubscriptionId = std::uint64_t;

// Called with the change to the merged result. The first call carries the
// initial result as added. version is the sending space's store version.
using Handler = std::function<void(const QueryResult& added, const QueryResult& removed, std::uint64_t version)>;

class Node {
public:
    explicit Node(std::string kp_id, std::chrono::milliseconds timeout = std::chrono::seconds(10));
    ~Node();
    Node(const Node&) = delete;
    Node& operator=(const Node&) = delete;

    const std::string& kp_id() const noexcept { return kp_id_; }
    std::vector<SpaceHandle> spaces() const;

    SpaceHandle join(const net::Endpoint& endpoint, const std::string& space,
                     const std::vector<std::string>& credentials = {});
    // The handle is dead afterwards even if the SIB could not be reached.
    void leave(const SpaceHandle& handle);

    std::vector<UpdateAck> update(const Graph& insert, const Graph& retract);
    std::vector<UpdateAck> insert(const Graph& g) { return update(g, {}); }
    std::vector<UpdateAck> retract(const Graph& g) { return update({}, g); }

    QueryResult query(const Query& q);

    SubscriptionId subscribe(const Query& q, Handler handler);
    void unsubscribe(SubscriptionId id);

    // REMOVE from a space: the handle is already dead when this runs.
    void on_remove(std::function<void(const SpaceHandle&, const std::string& reason)> fn);
    // Listens for INVITE frames; returns the bound endpoint.
    net::Endpoint accept_invites(const net::Endpoint& listen,
                                 std::function<void(const std::string& space, const net::Endpoint&)> fn);

    struct Impl;

private:
    std::string kp_id_;
    std::shared_ptr<Impl> impl_;
};

} // namespace sedvice::kp
