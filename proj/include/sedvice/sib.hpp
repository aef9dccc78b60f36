#pragma once
// A Semantic Information Broker: listeners in front of one Space, plus the
// peer links that make several SIBs answer as one space.

#include "sedvice/config.hpp"
#include "sedvice/federation.hpp"
#include "sedvice/net.hpp"
#include "sedvice/space.hpp"

#include <functional>
#include <memory>
#include <set>
#include <string>
#include <vector>

namespace sedvice {

class Sib {
public:
    // Starts every configured listener. Throws config_error when there is
    // none and net_error when one cannot bind. Peers are not contacted.
    explicit Sib(SibConfig cfg);
    ~Sib();
    Sib(const Sib&) = delete;
    Sib& operator=(const Sib&) = delete;

    void stop();

    const SibId& id() const;
    const std::string& space_name() const;
    // Bound listener endpoints, in configuration order.
    std::vector<net::Endpoint> endpoints() const;
    Space& space();
    const SibConfig& config() const;

    // Connects to peer and exchanges PEER_HELLO. Idempotent. Throws
    // std::invalid_argument for self and net_error when the handshake fails
    // (the table is left unchanged).
    void add_route(const SibId& peer, const net::Endpoint& address);
    std::set<SibId> route_peers() const;

    // Union of local results over every SIB reachable from here.
    QueryResult federated_query(const Query& q);

    // Membership announced by every known SIB, this one included.
    MembershipView membership() const;
    // Pushes this SIB's current membership to one peer and waits for the ack.
    bool sync_membership(const SibId& peer);
    // Waits until queued membership broadcasts and cancellations are done.
    void flush();

    void remove_session(const std::string& session, const std::string& reason);
    // Sends INVITE to a KP listening at address. Throws net_error when it
    // cannot be reached.
    void invite(const net::Endpoint& kp_address);

    // Sees every NOTIFY this SIB sends, with the receiving KP's id.
    using NotifyTap = std::function<void(const std::string& kp_id, const wire::Envelope&)>;
    void set_notify_tap(NotifyTap tap);
    // Frames handled so far; stable values mean the SIB is idle.
    std::uint64_t activity() const;

    struct Impl;

private:
    std::shared_ptr<Impl> impl_;
};

// Starts every SIB of a configuration, then adds their routes. Peers named
// without an endpoint resolve to the first listener of the SIB with that id.
std::vector<std::unique_ptr<Sib>> boot_sibs(const std::vector<SibConfig>& configs);

} // namespace sedvice
