#include "sedvice/space.hpp"

#include "sedvice/log.hpp"

#include <future>

namespace sedvice {

std::string_view session_state_name(SessionState s) {
    switch (s) {
    case SessionState::Joined: return "joined";
    case SessionState::Left: return "left";
    case SessionState::Removed: return "removed";
    }
    return "?";
}

namespace policy {

Policy allow_all() {
    return [](const std::string&, const std::vector<std::string>&) { return std::optional<std::string>(); };
}

Policy allow_list(std::set<std::string> kp_ids) {
    return [ids = std::move(kp_ids)](const std::string& kp, const std::vector<std::string>&) {
        return ids.count(kp) ? std::optional<std::string>() : std::optional<std::string>("policy");
    };
}

Policy deny_list(std::set<std::string> kp_ids) {
    return [ids = std::move(kp_ids)](const std::string& kp, const std::vector<std::string>&) {
        return ids.count(kp) ? std::optional<std::string>("policy") : std::optional<std::string>();
    };
}

} // namespace policy

Space::Space(SpaceOptions options) : options_(std::move(options)), store_(options_.name) {
    if (!options_.policy)
        options_.policy = policy::allow_all();
    if (options_.reasoning_batch == 0)
        options_.reasoning_batch = 1;
}

// --- sessions ---

Space::JoinResult Space::join(const std::string& kp_id, const std::vector<std::string>& credentials,
                              SessionSink sink) {
    std::lock_guard lk(mu_);
    if (auto refusal = options_.policy(kp_id, credentials))
        return {std::nullopt, *refusal};
    std::string id = options_.sib_id + "/" + std::to_string(next_session_++);
    Session s;
    s.info = SessionInfo{id, kp_id, credentials, SessionState::Joined};
    s.sink = std::move(sink);
    sessions_.emplace(id, std::move(s));
    logger().info("{}: {} joined as {}", options_.sib_id, kp_id, id);
    membership_changed();
    return {id, {}};
}

Space::Session& Space::joined(const std::string& id) {
    auto it = sessions_.find(id);
    if (it == sessions_.end())
        throw space_error(errc::unknown_session, "unknown session " + id);
    return it->second;
}

void Space::end_session(const std::string& id, SessionState state, const std::string& reason) {
    Session& s = joined(id);
    for (const auto& sub : s.subs) {
        subs_.erase(sub);
        if (sub_ended_)
            sub_ended_(sub);
    }
    if (state == SessionState::Removed && s.sink.removed)
        s.sink.removed(reason);
    SessionInfo info = s.info;
    info.state = state;
    sessions_.erase(id);
    ended_[id] = std::move(info);
    membership_changed();
}

void Space::leave(const std::string& session) {
    std::lock_guard lk(mu_);
    end_session(session, SessionState::Left, {});
}

void Space::remove(const std::string& session, const std::string& reason) {
    std::lock_guard lk(mu_);
    end_session(session, SessionState::Removed, reason);
}

std::optional<SessionInfo> Space::session(const std::string& id) const {
    std::lock_guard lk(mu_);
    if (auto it = sessions_.find(id); it != sessions_.end())
        return it->second.info;
    if (auto it = ended_.find(id); it != ended_.end())
        return it->second;
    return std::nullopt;
}

std::vector<SessionInfo> Space::joined_sessions() const {
    std::lock_guard lk(mu_);
    std::vector<SessionInfo> out;
    for (const auto& [id, s] : sessions_)
        out.push_back(s.info);
    return out;
}

void Space::membership_changed() {
    if (membership_changed_)
        membership_changed_();
}

// --- pipeline ---

Delta Space::submit(const std::string& session, const Transaction& tx) {
    std::lock_guard lk(mu_);
    joined(session);
    Transaction t = tx;
    t.id = next_tx_++;
    Delta d = store_.apply(t);
    if (++pending_for_cycle_ >= options_.reasoning_batch) {
        pending_for_cycle_ = 0;
        reasoning_cycle_locked();
    }
    reevaluate_all();
    return d;
}

Delta Space::run_reasoning_cycle() {
    std::lock_guard lk(mu_);
    pending_for_cycle_ = 0;
    Delta d = reasoning_cycle_locked();
    reevaluate_all();
    return d;
}

namespace {

std::optional<Transaction> run_guarded(const Reasoner& r, const Graph& snapshot) {
    try {
        return r.run(snapshot);
    } catch (const std::exception& e) {
        logger().error("reasoner {} failed: {}", r.name, e.what());
    } catch (...) {
        logger().error("reasoner {} failed", r.name);
    }
    return std::nullopt;
}

} // namespace

Delta Space::reasoning_cycle_locked() {
    auto before = store_.snapshot();
    for (std::size_t ci = 0; ci < options_.schedule.classes.size(); ++ci) {
        const auto& cls = options_.schedule.classes[ci];
        auto snap = store_.snapshot();
        std::vector<std::optional<Transaction>> outs(cls.size());
        if (cls.size() == 1) {
            outs[0] = run_guarded(cls[0], *snap);
        } else {
            std::vector<std::future<std::optional<Transaction>>> running;
            for (const auto& r : cls)
                running.push_back(std::async(std::launch::async, [&r, snap] { return run_guarded(r, *snap); }));
            for (std::size_t i = 0; i < running.size(); ++i)
                outs[i] = running[i].get();
        }

        Transaction merged;
        std::map<Triple, std::pair<OpKind, std::string>> seen;
        for (std::size_t i = 0; i < cls.size(); ++i) {
            if (!outs[i])
                continue;
            for (const auto& [triple, kind] : normalize(*outs[i])) {
                auto [it, fresh] = seen.emplace(triple, std::make_pair(kind, cls[i].name));
                if (!fresh && it->second.first != kind)
                    logger().warn("class {}: reasoners {} and {} disagree on {}", ci + 1, it->second.second,
                                  cls[i].name, to_text(triple));
            }
            for (auto& op : outs[i]->ops)
                merged.ops.push_back(std::move(op));
        }
        if (merged.ops.empty())
            continue;
        merged.id = next_tx_++;
        store_.apply(merged);
    }
    auto after = store_.snapshot();
    auto diff = graph_diff(*before, *after);
    return Delta{std::move(diff.added), std::move(diff.removed), store_.version()};
}

// --- queries and subscriptions ---

QueryResult Space::eval(const Query& q) { return evaluate(q, *store_.snapshot(), store_.version(), &cache_); }

QueryResult Space::query(const std::string& session, const Query& q) {
    std::shared_ptr<const Graph> snap;
    std::uint64_t version;
    {
        std::lock_guard lk(mu_);
        joined(session);
        snap = store_.snapshot();
        version = store_.version();
    }
    return evaluate(q, *snap, version, &cache_);
}

QueryResult Space::evaluate_local(const Query& q, std::uint64_t* version_out) {
    std::shared_ptr<const Graph> snap;
    std::uint64_t version;
    {
        std::lock_guard lk(mu_);
        snap = store_.snapshot();
        version = store_.version();
    }
    if (version_out)
        *version_out = version;
    return evaluate(q, *snap, version, &cache_);
}

QueryResult Space::visible_of(const Subscription& s) const {
    QueryResult out = s.local;
    for (const auto& [sib, c] : s.remote)
        out = result_union(out, c.result);
    out.partial = false;
    return out;
}

void Space::refresh(Subscription& s) {
    auto vis = visible_of(s);
    auto d = result_diff(s.visible, vis);
    s.visible = std::move(vis);
    if (!s.active || d.empty())
        return;
    auto owner = sessions_.find(s.session);
    if (owner == sessions_.end() || !owner->second.sink.notify)
        return;
    owner->second.sink.notify(Notification{s.id, std::move(d.added), std::move(d.removed), store_.version()});
}

void Space::reevaluate_all() {
    for (auto& [id, s] : subs_) {
        s.local = eval(s.query);
        refresh(s);
    }
    for (auto& [key, r] : remote_subs_) {
        auto now = eval(r.query);
        if (now == r.last)
            continue;
        r.last = std::move(now);
        if (r.sink)
            r.sink(store_.version(), r.last);
    }
}

Space::Subscribed Space::subscribe(const std::string& session, const Query& q,
                                   const std::function<void(const Subscribed&)>& on_registered, bool active) {
    std::lock_guard lk(mu_);
    Session& owner = joined(session);
    Subscription s;
    s.id = "sub-" + std::to_string(next_sub_++);
    s.session = session;
    s.query = q;
    s.local = eval(q);
    s.visible = visible_of(s);
    s.active = active;
    Subscribed out{s.id, s.visible, store_.version()};
    owner.subs.insert(s.id);
    subs_.emplace(s.id, std::move(s));
    if (on_registered)
        on_registered(out);
    return out;
}

void Space::activate(const std::string& sub_id, const std::function<void(const Subscribed&)>& on_active) {
    std::lock_guard lk(mu_);
    auto it = subs_.find(sub_id);
    if (it == subs_.end())
        throw space_error(errc::unknown_subscription, "unknown subscription " + sub_id);
    it->second.active = true;
    if (on_active)
        on_active(Subscribed{sub_id, it->second.visible, store_.version()});
}

void Space::unsubscribe(const std::string& session, const std::string& sub_id) {
    std::lock_guard lk(mu_);
    Session& owner = joined(session);
    auto it = subs_.find(sub_id);
    if (it == subs_.end())
        throw space_error(errc::unknown_subscription, "unknown subscription " + sub_id);
    if (it->second.session != session)
        throw space_error(errc::foreign_subscription, "foreign subscription " + sub_id);
    subs_.erase(it);
    owner.subs.erase(sub_id);
    if (sub_ended_)
        sub_ended_(sub_id);
}

std::optional<Query> Space::subscription_query(const std::string& sub_id) const {
    std::lock_guard lk(mu_);
    if (auto it = subs_.find(sub_id); it != subs_.end())
        return it->second.query;
    return std::nullopt;
}

void Space::merge_contribution(const std::string& sub_id, const std::string& sib, std::uint64_t version,
                               const QueryResult& result) {
    std::lock_guard lk(mu_);
    auto it = subs_.find(sub_id);
    if (it == subs_.end())
        return;
    Subscription& s = it->second;
    if (result.type != query_type(s.query))
        return;
    auto c = s.remote.find(sib);
    if (c != s.remote.end() && version < c->second.version)
        return;
    s.remote[sib] = Contribution{version, result};
    refresh(s);
}

std::optional<Space::Subscribed> Space::add_remote_subscription(const std::string& key, const Query& q,
                                                                RemoteSink sink) {
    std::lock_guard lk(mu_);
    if (remote_subs_.count(key))
        return std::nullopt;
    RemoteSub r{q, eval(q), std::move(sink)};
    Subscribed out{key, r.last, store_.version()};
    remote_subs_.emplace(key, std::move(r));
    return out;
}

void Space::cancel_remote_subscription(const std::string& key) {
    std::lock_guard lk(mu_);
    remote_subs_.erase(key);
}

bool Space::hosts_remote(const std::string& key) const {
    std::lock_guard lk(mu_);
    return remote_subs_.count(key) > 0;
}

void Space::on_subscription_ended(std::function<void(const std::string&)> fn) {
    std::lock_guard lk(mu_);
    sub_ended_ = std::move(fn);
}

void Space::on_membership_changed(std::function<void()> fn) {
    std::lock_guard lk(mu_);
    membership_changed_ = std::move(fn);
}

std::shared_ptr<const Graph> Space::snapshot() const {
    std::lock_guard lk(mu_);
    return store_.snapshot();
}

std::uint64_t Space::version() const {
    std::lock_guard lk(mu_);
    return store_.version();
}

std::size_t Space::subscription_count() const {
    std::lock_guard lk(mu_);
    return subs_.size();
}

std::size_t Space::remote_subscription_count() const {
    std::lock_guard lk(mu_);
    return remote_subs_.size();
}

} // namespace sedvice
