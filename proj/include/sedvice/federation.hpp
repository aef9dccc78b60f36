#pragma once
// Routing between SIBs of one space, and the membership view they share.

#include "sedvice/net.hpp"
#include "sedvice/space.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace sedvice {

using SibId = std::string;

class RoutingTable {
public:
    explicit RoutingTable(SibId owner) : owner_(std::move(owner)) {}

    const SibId& owner() const noexcept { return owner_; }
    // False when the route already existed. Throws std::invalid_argument for
    // a route to the owner itself.
    bool add(const SibId& peer, const net::Endpoint& address);
    bool remove(const SibId& peer);
    bool contains(const SibId& peer) const { return routes_.count(peer) > 0; }
    std::optional<net::Endpoint> address(const SibId& peer) const;
    std::set<SibId> peers() const;
    std::size_t size() const noexcept { return routes_.size(); }

private:
    SibId owner_;
    std::map<SibId, net::Endpoint> routes_;
};

// Transitive closure of the route relation from start, start included.
std::set<SibId> reachable_sibs(const std::map<SibId, std::set<SibId>>& routes, const SibId& start);

// Carried by a forwarded query or subscription.
struct QueryToken {
    SibId origin;
    std::set<SibId> visited;
    std::string corr;
};

// The visited set a SIB hands to the peers it forwards to: everything seen
// so far, itself, and every peer it is about to contact.
std::set<SibId> forward_visited(const QueryToken& token, const SibId& self, const std::set<SibId>& targets);
// Peers of self still worth contacting.
std::set<SibId> forward_targets(const QueryToken& token, const std::set<SibId>& peers);

struct MemberEntry {
    std::string kp_id;
    std::string session;
    std::vector<std::string> credentials;
    SessionState state = SessionState::Joined;

    friend bool operator==(const MemberEntry&, const MemberEntry&) = default;
};

// Members joined at each SIB, as last announced by that SIB.
class MembershipView {
public:
    // Replaces origin's entry when epoch is newer. Returns whether it did.
    bool apply(const SibId& origin, std::uint64_t epoch, std::vector<MemberEntry> members);
    std::uint64_t epoch(const SibId& origin) const;
    std::vector<MemberEntry> members_of(const SibId& origin) const;
    // Every (origin, member) pair.
    std::vector<std::pair<SibId, MemberEntry>> all() const;
    bool knows_kp(const std::string& kp_id) const;
    std::set<SibId> origins() const;

private:
    struct Entry {
        std::uint64_t epoch = 0;
        std::vector<MemberEntry> members;
    };
    std::map<SibId, Entry> entries_;
};

wire::json members_to_json(const std::vector<MemberEntry>& members);
std::vector<MemberEntry> members_from_json(const wire::json& j);

} // namespace sedvice
