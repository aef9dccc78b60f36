#include "sedvice/kp.hpp"

#include "sedvice/log.hpp"

#include <condition_variable>
#include <deque>
#include <map>
#include <thread>

namespace sedvice::kp {

using wire::Envelope;
using wire::json;
using wire::Kind;

namespace {

struct Link {
    SpaceHandle handle;
    std::shared_ptr<net::Channel> ch;
    bool live = true;
};

struct Sub {
    QueryType type = QueryType::Triple;
    Handler handler;
    std::map<std::uint64_t, std::string> remote; // link -> server sub id
    std::map<std::uint64_t, QueryResult> per_link;
    QueryResult merged;
};

QueryResult merge_all(QueryType t, const std::map<std::uint64_t, QueryResult>& parts) {
    QueryResult out = empty_result(t);
    for (const auto& [l, r] : parts)
        out = result_union(out, r);
    out.partial = false;
    return out;
}

[[noreturn]] void raise_reply(const Envelope& r, const std::string& what) {
    if (r.kind == Kind::ERROR)
        throw kp_error(r.body.value("code", "ERROR"), what + ": " + r.body.value("message", ""));
    if (r.kind == Kind::JOIN_REFUSED)
        throw kp_error("JOIN_REFUSED", what + " refused: " + r.body.value("reason", ""));
    throw kp_error("TRANSPORT", what + ": unexpected " + std::string(wire::kind_name(r.kind)));
}

} // namespace

struct Node::Impl : std::enable_shared_from_this<Node::Impl> {
    Impl(std::string id, std::chrono::milliseconds t) : kp_id(std::move(id)), timeout(t) {
        dispatcher = std::thread([this] { dispatch_loop(); });
    }

    std::string kp_id;
    std::chrono::milliseconds timeout;

    mutable std::mutex mu;
    std::uint64_t next_link = 1;
    std::uint64_t next_sub = 1;
    std::map<std::uint64_t, Link> links;
    std::map<SubscriptionId, Sub> subs;
    std::map<std::pair<std::uint64_t, std::string>, SubscriptionId> by_remote;
    // NOTIFY frames that beat our bookkeeping of their SUBSCRIBE_OK.
    std::map<std::pair<std::uint64_t, std::string>, std::vector<Envelope>> orphans;
    std::function<void(const SpaceHandle&, const std::string&)> removed_fn;
    std::unique_ptr<net::Listener> invite_listener;
    std::vector<std::shared_ptr<net::Channel>> invite_channels;

    std::mutex qmu;
    std::condition_variable qcv;
    std::deque<std::function<void()>> jobs;
    bool quit = false;
    // Held while a job runs, so leave() can wait out an invocation.
    std::mutex run_mu;
    std::thread dispatcher;

    void post(std::function<void()> job) {
        {
            std::lock_guard lk(qmu);
            jobs.push_back(std::move(job));
        }
        qcv.notify_one();
    }

    void dispatch_loop() {
        for (;;) {
            std::unique_lock lk(qmu);
            qcv.wait(lk, [&] { return quit || !jobs.empty(); });
            if (quit)
                return;
            auto job = std::move(jobs.front());
            jobs.pop_front();
            lk.unlock();
            // Jobs recheck their subscription under mu, so one popped just
            // before a leave() finds nothing to do.
            std::lock_guard run(run_mu);
            try {
                job();
            } catch (const std::exception& e) {
                logger().warn("{}: subscription handler failed: {}", kp_id, e.what());
            }
        }
    }

    void wait_handlers() {
        if (std::this_thread::get_id() == dispatcher.get_id())
            return;
        std::lock_guard run(run_mu);
    }

    void shutdown() {
        std::vector<std::shared_ptr<net::Channel>> chans;
        {
            std::lock_guard lk(mu);
            for (auto& [id, l] : links)
                chans.push_back(l.ch);
            chans.insert(chans.end(), invite_channels.begin(), invite_channels.end());
            if (invite_listener)
                invite_listener->stop();
        }
        for (auto& c : chans)
            c->abort();
        {
            std::lock_guard lk(qmu);
            quit = true;
        }
        qcv.notify_all();
        if (dispatcher.joinable()) {
            if (std::this_thread::get_id() == dispatcher.get_id())
                dispatcher.detach();
            else
                dispatcher.join();
        }
    }

    Envelope request(const Link& l, Kind kind, json body) {
        Envelope e;
        e.kind = kind;
        e.space = l.handle.space;
        e.kp = kp_id;
        e.body = std::move(body);
        try {
            return l.ch->request(std::move(e), timeout);
        } catch (const net::timeout_error& ex) {
            throw kp_error("TIMEOUT", l.handle.space + ": " + ex.what());
        } catch (const net::net_error& ex) {
            throw kp_error("TRANSPORT", l.handle.space + ": " + ex.what());
        }
    }

    std::vector<Link> live_links() const {
        std::lock_guard lk(mu);
        std::vector<Link> out;
        for (const auto& [id, l] : links)
            if (l.live)
                out.push_back(l);
        if (out.empty())
            throw kp_error("LOCAL", "no spaces");
        return out;
    }

    // --- inbound ---

    void inbound(std::uint64_t link, const Envelope& e) {
        if (e.kind == Kind::NOTIFY) {
            std::lock_guard lk(mu);
            auto key = std::make_pair(link, e.body["sub"].get<std::string>());
            if (by_remote.count(key)) {
                post([self = shared_from_this(), link, e] { self->deliver(link, e); });
            } else if (auto l = links.find(link); l != links.end() && l->second.live) {
                orphans[key].push_back(e);
            }
        } else if (e.kind == Kind::REMOVE) {
            drop_link(link, e.body.value("reason", ""), true);
        } else {
            logger().debug("{}: ignoring {}", kp_id, wire::kind_name(e.kind));
        }
    }

    void deliver(std::uint64_t link, const Envelope& e) {
        Handler h;
        QueryResult added, removed;
        std::uint64_t version = e.body["version"].get<std::uint64_t>();
        {
            std::lock_guard lk(mu);
            auto it = by_remote.find({link, e.body["sub"].get<std::string>()});
            if (it == by_remote.end())
                return;
            Sub& s = subs.at(it->second);
            ResultDelta d{wire::rows_from_json(s.type, e.body["added"]), wire::rows_from_json(s.type, e.body["removed"])};
            s.per_link[link] = result_apply(s.per_link[link], d);
            auto merged = merge_all(s.type, s.per_link);
            auto diff = result_diff(s.merged, merged);
            s.merged = std::move(merged);
            if (diff.empty())
                return;
            added = std::move(diff.added);
            removed = std::move(diff.removed);
            h = s.handler;
        }
        h(added, removed, version);
    }

    // The link is dead once this returns; subscriptions forget it.
    void drop_link(std::uint64_t link, const std::string& reason, bool notify) {
        std::optional<SpaceHandle> handle;
        std::function<void(const SpaceHandle&, const std::string&)> fn;
        {
            std::lock_guard lk(mu);
            auto it = links.find(link);
            if (it == links.end() || !it->second.live)
                return;
            it->second.live = false;
            handle = it->second.handle;
            fn = removed_fn;
            for (auto b = by_remote.begin(); b != by_remote.end();)
                b = b->first.first == link ? by_remote.erase(b) : std::next(b);
            for (auto o = orphans.begin(); o != orphans.end();)
                o = o->first.first == link ? orphans.erase(o) : std::next(o);
            for (auto& [id, s] : subs) {
                s.remote.erase(link);
                s.per_link.erase(link);
            }
        }
        if (notify && fn)
            post([fn, h = *handle, reason] { fn(h, reason); });
    }
};

Node::Node(std::string kp_id, std::chrono::milliseconds timeout)
    : kp_id_(kp_id), impl_(std::make_shared<Impl>(std::move(kp_id), timeout)) {}

Node::~Node() { impl_->shutdown(); }

std::vector<SpaceHandle> Node::spaces() const {
    std::lock_guard lk(impl_->mu);
    std::vector<SpaceHandle> out;
    for (const auto& [id, l] : impl_->links)
        if (l.live)
            out.push_back(l.handle);
    return out;
}

SpaceHandle Node::join(const net::Endpoint& endpoint, const std::string& space,
                       const std::vector<std::string>& credentials) {
    std::uint64_t id;
    {
        std::lock_guard lk(impl_->mu);
        id = impl_->next_link++;
    }
    std::weak_ptr<Impl> weak = impl_;
    std::shared_ptr<net::Channel> ch;
    try {
        ch = net::Channel::dial(
            endpoint,
            [weak, id](const Envelope& e) {
                if (auto self = weak.lock())
                    self->inbound(id, e);
            },
            [weak, id] {
                if (auto self = weak.lock())
                    self->drop_link(id, "connection closed", false);
            },
            impl_->timeout);
    } catch (const net::net_error& e) {
        throw kp_error("TRANSPORT", e.what());
    }
    Link l{SpaceHandle{id, space, endpoint, {}}, ch, true};
    Envelope r;
    try {
        r = impl_->request(l, Kind::JOIN, wire::join_body(credentials));
    } catch (...) {
        ch->abort();
        throw;
    }
    if (r.kind != Kind::JOIN_OK) {
        ch->abort();
        raise_reply(r, "join " + space);
    }
    l.handle.session = r.body["session"].get<std::string>();
    std::lock_guard lk(impl_->mu);
    impl_->links[id] = l;
    return l.handle;
}

void Node::leave(const SpaceHandle& handle) {
    Link l;
    {
        std::lock_guard lk(impl_->mu);
        auto it = impl_->links.find(handle.id);
        if (it == impl_->links.end() || !it->second.live)
            throw kp_error("LOCAL", "stale handle");
        l = it->second;
    }
    impl_->drop_link(handle.id, "", false);
    impl_->wait_handlers();
    try {
        auto r = impl_->request(l, Kind::LEAVE, json::object());
        l.ch->close();
        if (r.kind != Kind::LEAVE_OK)
            raise_reply(r, "leave " + handle.space);
    } catch (...) {
        l.ch->abort();
        throw;
    }
}

std::vector<UpdateAck> Node::update(const Graph& insert, const Graph& retract) {
    if (insert.empty() && retract.empty())
        throw kp_error("LOCAL", "empty update");
    auto links = impl_->live_links();
    std::vector<std::pair<std::uint64_t, std::future<Envelope>>> futs;
    std::vector<UpdateAck> acks;
    for (const auto& l : links) {
        Envelope e;
        e.kind = Kind::UPDATE;
        e.space = l.handle.space;
        e.kp = impl_->kp_id;
        e.body = wire::update_body(insert, retract);
        futs.push_back(l.ch->request_async(std::move(e)));
    }
    auto deadline = std::chrono::steady_clock::now() + impl_->timeout;
    for (std::size_t i = 0; i < links.size(); ++i) {
        UpdateAck ack{links[i].handle, false, {}, {}};
        auto& [txid, fut] = futs[i];
        try {
            if (fut.wait_until(deadline) != std::future_status::ready) {
                links[i].ch->cancel(txid);
                ack.error = "timeout";
            } else if (auto r = fut.get(); r.kind == Kind::UPDATE_OK) {
                ack.ok = true;
                ack.delta.added = wire::graph_from_json(r.body["added"]);
                ack.delta.removed = wire::graph_from_json(r.body["removed"]);
                ack.delta.version_after = r.body["version"].get<std::uint64_t>();
            } else {
                ack.error = r.body.value("code", "ERROR") + ": " + r.body.value("message", "");
            }
        } catch (const std::exception& e) {
            ack.error = e.what();
        }
        acks.push_back(std::move(ack));
    }
    return acks;
}

QueryResult Node::query(const Query& q) {
    auto links = impl_->live_links();
    std::vector<std::pair<std::uint64_t, std::future<Envelope>>> futs;
    for (const auto& l : links) {
        Envelope e;
        e.kind = Kind::QUERY;
        e.space = l.handle.space;
        e.kp = impl_->kp_id;
        e.body = wire::query_body(q);
        futs.push_back(l.ch->request_async(std::move(e)));
    }
    auto deadline = std::chrono::steady_clock::now() + impl_->timeout;
    QueryResult out = empty_result(query_type(q));
    std::vector<std::string> silent;
    for (std::size_t i = 0; i < links.size(); ++i) {
        auto& [txid, fut] = futs[i];
        if (fut.wait_until(deadline) != std::future_status::ready) {
            links[i].ch->cancel(txid);
            silent.push_back(links[i].handle.space);
            continue;
        }
        Envelope r;
        try {
            r = fut.get();
        } catch (const std::exception&) {
            silent.push_back(links[i].handle.space);
            continue;
        }
        if (r.kind != Kind::QUERY_RESULT)
            raise_reply(r, "query " + links[i].handle.space);
        auto part = wire::rows_from_json(query_type(q), r.body["results"]);
        part.partial = r.body["partial"].get<bool>();
        out = result_union(out, part);
    }
    if (silent.size() == links.size()) {
        std::string names;
        for (const auto& s : silent)
            names += (names.empty() ? "" : ", ") + s;
        throw kp_error("TIMEOUT", "no answer from " + names);
    }
    if (!silent.empty())
        out.partial = true;
    return out;
}

SubscriptionId Node::subscribe(const Query& q, Handler handler) {
    auto links = impl_->live_links();
    const QueryType qt = query_type(q);
    Sub s;
    s.type = qt;
    s.handler = std::move(handler);
    std::uint64_t version = 0;
    auto undo = [&] {
        for (const auto& [link, sub] : s.remote)
            for (const auto& l : links)
                if (l.handle.id == link) {
                    try {
                        impl_->request(l, Kind::UNSUBSCRIBE, json{{"sub", sub}});
                    } catch (const std::exception&) {
                    }
                }
    };
    for (const auto& l : links) {
        Envelope r;
        try {
            r = impl_->request(l, Kind::SUBSCRIBE, wire::query_body(q));
        } catch (...) {
            undo();
            throw;
        }
        if (r.kind != Kind::SUBSCRIBE_OK) {
            undo();
            raise_reply(r, "subscribe " + l.handle.space);
        }
        s.remote[l.handle.id] = r.body["sub"].get<std::string>();
        s.per_link[l.handle.id] = wire::rows_from_json(qt, r.body["results"]);
        version = std::max(version, r.body["version"].get<std::uint64_t>());
    }
    s.merged = merge_all(qt, s.per_link);

    std::lock_guard lk(impl_->mu);
    SubscriptionId id = impl_->next_sub++;
    auto initial = s.merged;
    auto h = s.handler;
    for (const auto& [link, sub] : s.remote)
        impl_->by_remote[{link, sub}] = id;
    impl_->subs[id] = std::move(s);
    impl_->post([self = impl_, id, h, initial, version] {
        {
            std::lock_guard lk(self->mu);
            auto it = self->subs.find(id);
            if (it == self->subs.end() || it->second.remote.empty())
                return;
        }
        h(initial, empty_result(initial.type), version);
    });
    for (const auto& [link, sub] : impl_->subs[id].remote) {
        auto o = impl_->orphans.find({link, sub});
        if (o == impl_->orphans.end())
            continue;
        for (auto& e : o->second)
            impl_->post([self = impl_, l = link, e] { self->deliver(l, e); });
        impl_->orphans.erase(o);
    }
    return id;
}

void Node::unsubscribe(SubscriptionId id) {
    Sub s;
    std::vector<Link> links;
    {
        std::lock_guard lk(impl_->mu);
        auto it = impl_->subs.find(id);
        if (it == impl_->subs.end())
            throw kp_error("LOCAL", "unknown subscription");
        s = std::move(it->second);
        impl_->subs.erase(it);
        for (const auto& [link, sub] : s.remote) {
            impl_->by_remote.erase({link, sub});
            if (auto l = impl_->links.find(link); l != impl_->links.end() && l->second.live)
                links.push_back(l->second);
        }
    }
    impl_->wait_handlers();
    std::optional<kp_error> first;
    for (const auto& l : links) {
        try {
            auto r = impl_->request(l, Kind::UNSUBSCRIBE, json{{"sub", s.remote.at(l.handle.id)}});
            if (r.kind != Kind::UNSUBSCRIBE_OK)
                raise_reply(r, "unsubscribe " + l.handle.space);
        } catch (const kp_error& e) {
            if (!first)
                first = e;
        }
    }
    if (first)
        throw *first;
}

void Node::on_remove(std::function<void(const SpaceHandle&, const std::string&)> fn) {
    std::lock_guard lk(impl_->mu);
    impl_->removed_fn = std::move(fn);
}

net::Endpoint Node::accept_invites(const net::Endpoint& listen,
                                   std::function<void(const std::string&, const net::Endpoint&)> fn) {
    std::weak_ptr<Impl> weak = impl_;
    auto listener = std::make_unique<net::Listener>(listen, [weak, fn](std::shared_ptr<net::Connection> c) {
        auto self = weak.lock();
        if (!self)
            return;
        auto ch = net::Channel::open(std::move(c), [weak, fn](const Envelope& e) {
            auto self = weak.lock();
            if (!self || e.kind != Kind::INVITE)
                return;
            std::string space = e.body["space"].get<std::string>();
            net::Endpoint ep;
            try {
                ep = net::Endpoint::parse(e.body["listener"].get<std::string>());
            } catch (const std::exception& ex) {
                logger().warn("{}: bad INVITE listener: {}", self->kp_id, ex.what());
                return;
            }
            self->post([fn, space, ep] { fn(space, ep); });
        });
        std::lock_guard lk(self->mu);
        self->invite_channels.push_back(std::move(ch));
    });
    auto bound = listener->bound();
    std::lock_guard lk(impl_->mu);
    impl_->invite_listener = std::move(listener);
    return bound;
}

} // namespace sedvice::kp
