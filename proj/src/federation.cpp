#include "sedvice/federation.hpp"

#include <deque>

namespace sedvice {

bool RoutingTable::add(const SibId& peer, const net::Endpoint& address) {
    if (peer == owner_)
        throw std::invalid_argument("route to self rejected: " + peer);
    return routes_.emplace(peer, address).second;
}

bool RoutingTable::remove(const SibId& peer) { return routes_.erase(peer) > 0; }

std::optional<net::Endpoint> RoutingTable::address(const SibId& peer) const {
    if (auto it = routes_.find(peer); it != routes_.end())
        return it->second;
    return std::nullopt;
}

std::set<SibId> RoutingTable::peers() const {
    std::set<SibId> out;
    for (const auto& [id, ep] : routes_)
        out.insert(id);
    return out;
}

std::set<SibId> reachable_sibs(const std::map<SibId, std::set<SibId>>& routes, const SibId& start) {
    std::set<SibId> seen{start};
    std::deque<SibId> todo{start};
    while (!todo.empty()) {
        auto at = todo.front();
        todo.pop_front();
        auto it = routes.find(at);
        if (it == routes.end())
            continue;
        for (const auto& next : it->second)
            if (seen.insert(next).second)
                todo.push_back(next);
    }
    return seen;
}

std::set<SibId> forward_targets(const QueryToken& token, const std::set<SibId>& peers) {
    std::set<SibId> out;
    for (const auto& p : peers)
        if (!token.visited.count(p))
            out.insert(p);
    return out;
}

std::set<SibId> forward_visited(const QueryToken& token, const SibId& self, const std::set<SibId>& targets) {
    std::set<SibId> out = token.visited;
    out.insert(self);
    out.insert(targets.begin(), targets.end());
    return out;
}

bool MembershipView::apply(const SibId& origin, std::uint64_t epoch, std::vector<MemberEntry> members) {
    auto it = entries_.find(origin);
    if (it != entries_.end() && it->second.epoch >= epoch)
        return false;
    std::vector<MemberEntry> joined;
    for (auto& m : members)
        if (m.state == SessionState::Joined)
            joined.push_back(std::move(m));
    entries_[origin] = Entry{epoch, std::move(joined)};
    return true;
}

std::uint64_t MembershipView::epoch(const SibId& origin) const {
    auto it = entries_.find(origin);
    return it == entries_.end() ? 0 : it->second.epoch;
}

std::vector<MemberEntry> MembershipView::members_of(const SibId& origin) const {
    auto it = entries_.find(origin);
    return it == entries_.end() ? std::vector<MemberEntry>{} : it->second.members;
}

std::vector<std::pair<SibId, MemberEntry>> MembershipView::all() const {
    std::vector<std::pair<SibId, MemberEntry>> out;
    for (const auto& [origin, e] : entries_)
        for (const auto& m : e.members)
            out.emplace_back(origin, m);
    return out;
}

bool MembershipView::knows_kp(const std::string& kp_id) const {
    for (const auto& [origin, e] : entries_)
        for (const auto& m : e.members)
            if (m.kp_id == kp_id)
                return true;
    return false;
}

std::set<SibId> MembershipView::origins() const {
    std::set<SibId> out;
    for (const auto& [origin, e] : entries_)
        out.insert(origin);
    return out;
}

wire::json members_to_json(const std::vector<MemberEntry>& members) {
    wire::json arr = wire::json::array();
    for (const auto& m : members) {
        wire::json j;
        j["kp"] = m.kp_id;
        j["session"] = m.session;
        j["credentials"] = m.credentials;
        j["state"] = session_state_name(m.state);
        arr.push_back(std::move(j));
    }
    return arr;
}

std::vector<MemberEntry> members_from_json(const wire::json& j) {
    if (!j.is_array())
        throw wire::wire_error(wire::ErrorCode::BadBody, "members must be an array");
    std::vector<MemberEntry> out;
    for (const auto& m : j) {
        if (!m.is_object() || !m.contains("kp") || !m.contains("session") || !m["kp"].is_string() ||
            !m["session"].is_string())
            throw wire::wire_error(wire::ErrorCode::BadBody, "malformed member");
        MemberEntry e;
        e.kp_id = m["kp"].get<std::string>();
        e.session = m["session"].get<std::string>();
        if (m.contains("credentials") && m["credentials"].is_array())
            for (const auto& c : m["credentials"])
                if (c.is_string())
                    e.credentials.push_back(c.get<std::string>());
        std::string state = m.value("state", "joined");
        e.state = state == "joined" ? SessionState::Joined
                  : state == "left" ? SessionState::Left
                                    : SessionState::Removed;
        out.push_back(std::move(e));
    }
    return out;
}

} // namespace sedvice
