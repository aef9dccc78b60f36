#include "sedvice/sib.hpp"

#include "sedvice/log.hpp"

#include <condition_variable>
#include <deque>
#include <thread>

namespace sedvice {

using wire::Envelope;
using wire::json;
using wire::Kind;

namespace {

struct ConnState {
    std::shared_ptr<net::Channel> ch;
    std::mutex mu;
    std::optional<std::string> session;
    std::string kp;
    std::optional<SibId> peer;
};

struct PeerLink {
    net::Endpoint address;
    std::shared_ptr<net::Channel> ch;
};

struct Hosted {
    std::weak_ptr<ConnState> upstream;
    std::set<SibId> children;
};

struct Owned {
    std::string sub_id;
    std::set<SibId> children;
};

struct Contribution {
    SibId sib;
    std::uint64_t version = 0;
    json results;
};

// What a subtree of the forwarding tree returned.
struct Gathered {
    QueryResult result;
    std::set<SibId> accepted;
    std::vector<Contribution> contributions;
};

json contributions_to_json(const std::vector<Contribution>& cs) {
    json arr = json::array();
    for (const auto& c : cs) {
        json j;
        j["sib"] = c.sib;
        j["version"] = c.version;
        j["results"] = c.results;
        arr.push_back(std::move(j));
    }
    return arr;
}

std::vector<Contribution> contributions_from_json(const json& body) {
    std::vector<Contribution> out;
    auto it = body.find("contributions");
    if (it == body.end() || !it->is_array())
        return out;
    for (const auto& c : *it) {
        if (!c.is_object() || !c.contains("sib") || !c.contains("version") || !c.contains("results"))
            continue;
        out.push_back(Contribution{c["sib"].get<std::string>(), c["version"].get<std::uint64_t>(), c["results"]});
    }
    return out;
}

json peer_result(const std::string& corr, QueryType qt, const QueryResult& r) {
    json b;
    b["corr"] = corr;
    b["qtype"] = wire::qtype_name(qt);
    b["results"] = wire::rows_to_json(r);
    b["partial"] = r.partial;
    return b;
}

std::set<SibId> visited_from(const json& body) {
    std::set<SibId> out;
    for (const auto& v : body["visited"])
        if (v.is_string())
            out.insert(v.get<std::string>());
    return out;
}

} // namespace

struct Sib::Impl : std::enable_shared_from_this<Sib::Impl> {
    explicit Impl(SibConfig c)
        : cfg(std::move(c)),
          space(SpaceOptions{cfg.space, cfg.sib_id, cfg.policy, cfg.schedule, cfg.reasoning_batch}),
          routes(cfg.sib_id) {}

    SibConfig cfg;
    Space space;
    std::vector<std::unique_ptr<net::Listener>> listeners;

    mutable std::mutex mu;
    std::map<std::uint64_t, std::shared_ptr<ConnState>> conns;
    RoutingTable routes;
    std::map<SibId, PeerLink> links;
    std::map<std::string, Hosted> hosted;
    std::map<std::string, Owned> owned;
    std::map<std::string, std::string> key_of_sub;
    MembershipView view;
    std::uint64_t local_epoch = 0;
    std::uint64_t next_corr = 1;

    std::mutex wmu;
    std::condition_variable wcv;
    std::deque<std::function<void()>> work;
    bool worker_busy = false;
    bool worker_stop = false;
    std::thread worker;

    std::mutex tmu;
    std::condition_variable tcv;
    int tasks = 0;

    std::atomic<bool> stopping{false};
    std::mutex tap_mu;
    NotifyTap tap;
    std::atomic<std::uint64_t> activity{0};

    // --- lifecycle ---

    void start() {
        if (cfg.listeners.empty())
            throw config_error("SIB " + cfg.sib_id + " has no listener; at least one is required");
        std::weak_ptr<Impl> weak = shared_from_this();
        space.on_subscription_ended([weak](const std::string& sub) {
            if (auto self = weak.lock())
                self->enqueue([self, sub] { self->cancel_owned(sub); });
        });
        space.on_membership_changed([weak] {
            if (auto self = weak.lock())
                self->enqueue([self] { self->broadcast_membership(); });
        });
        {
            std::lock_guard lk(mu);
            view.apply(cfg.sib_id, 0, {});
        }
        worker = std::thread([this] { work_loop(); });
        for (const auto& ep : cfg.listeners)
            listeners.push_back(std::make_unique<net::Listener>(ep, [weak](std::shared_ptr<net::Connection> c) {
                if (auto self = weak.lock())
                    self->accept(std::move(c));
            }));
    }

    void stop() {
        if (stopping.exchange(true))
            return;
        for (auto& l : listeners)
            l->stop();
        std::vector<std::shared_ptr<net::Channel>> chans;
        {
            std::lock_guard lk(mu);
            for (auto& [id, c] : conns) {
                std::lock_guard clk(c->mu);
                if (c->ch)
                    chans.push_back(c->ch);
            }
            for (auto& [id, l] : links)
                if (l.ch)
                    chans.push_back(l.ch);
        }
        for (auto& c : chans)
            c->abort();
        {
            std::lock_guard lk(wmu);
            worker_stop = true;
        }
        wcv.notify_all();
        if (worker.joinable())
            worker.join();
        std::unique_lock lk(tmu);
        tcv.wait(lk, [&] { return tasks == 0; });
    }

    // --- background work ---

    void enqueue(std::function<void()> fn) {
        {
            std::lock_guard lk(wmu);
            if (worker_stop)
                return;
            work.push_back(std::move(fn));
        }
        wcv.notify_all();
    }

    void work_loop() {
        for (;;) {
            std::function<void()> fn;
            {
                std::unique_lock lk(wmu);
                worker_busy = false;
                wcv.notify_all();
                wcv.wait(lk, [&] { return worker_stop || !work.empty(); });
                if (worker_stop)
                    return;
                fn = std::move(work.front());
                work.pop_front();
                worker_busy = true;
            }
            try {
                fn();
            } catch (const std::exception& e) {
                logger().error("{}: background task failed: {}", cfg.sib_id, e.what());
            }
        }
    }

    void flush() {
        std::unique_lock lk(wmu);
        wcv.wait(lk, [&] { return worker_stop || (work.empty() && !worker_busy); });
    }

    void spawn(std::function<void()> fn) {
        {
            std::lock_guard lk(tmu);
            ++tasks;
        }
        std::thread([self = shared_from_this(), fn = std::move(fn)] {
            try {
                fn();
            } catch (const std::exception& e) {
                logger().error("{}: peer task failed: {}", self->cfg.sib_id, e.what());
            }
            {
                std::lock_guard lk(self->tmu);
                --self->tasks;
            }
            self->tcv.notify_all();
        }).detach();
    }

    // --- connections ---

    void accept(std::shared_ptr<net::Connection> conn) {
        if (stopping)
            return;
        auto state = std::make_shared<ConnState>();
        std::weak_ptr<Impl> weak = shared_from_this();
        std::weak_ptr<ConnState> ws = state;
        auto id = conn->id();
        {
            std::lock_guard lk(mu);
            conns[id] = state;
        }
        // Frames can arrive before open() returns; handle() waits on st->mu.
        std::lock_guard hold(state->mu);
        state->ch = net::Channel::open(
            std::move(conn),
            [weak, ws](const Envelope& e) {
                auto self = weak.lock();
                auto st = ws.lock();
                if (self && st)
                    self->handle(st, e);
            },
            [weak, ws, id] {
                auto self = weak.lock();
                if (self)
                    self->closed(id, ws.lock());
            });
    }

    void closed(std::uint64_t id, std::shared_ptr<ConnState> st) {
        {
            std::lock_guard lk(mu);
            conns.erase(id);
        }
        if (!st)
            return;
        std::optional<std::string> session;
        {
            std::lock_guard lk(st->mu);
            session.swap(st->session);
        }
        if (session) {
            try {
                space.leave(*session);
            } catch (const space_error&) {
            }
        }
        std::vector<std::string> orphaned;
        {
            std::lock_guard lk(mu);
            for (const auto& [key, h] : hosted)
                if (h.upstream.lock() == st || h.upstream.expired())
                    orphaned.push_back(key);
        }
        if (!orphaned.empty() && !stopping) {
            auto self = shared_from_this();
            enqueue([self, orphaned] {
                for (const auto& key : orphaned)
                    self->cancel_hosted(key);
            });
        }
    }

    void handle(const std::shared_ptr<ConnState>& st, const Envelope& e) {
        ++activity;
        { std::lock_guard ready(st->mu); }
        if (e.space != cfg.space && e.kind != Kind::PEER_HELLO) {
            if (e.kind == Kind::JOIN)
                st->ch->reply(e, Kind::JOIN_REFUSED, json{{"reason", "unknown space " + e.space}});
            else if (!net::is_reply(e.kind))
                st->ch->reply(e, Kind::ERROR, wire::error_body(errc::unknown_space, "this SIB serves " + cfg.space));
            return;
        }
        try {
            switch (e.kind) {
            case Kind::JOIN: on_join(st, e); break;
            case Kind::LEAVE: on_leave(st, e); break;
            case Kind::UPDATE: on_update(st, e); break;
            case Kind::QUERY: on_query(st, e); break;
            case Kind::SUBSCRIBE: on_subscribe(st, e); break;
            case Kind::UNSUBSCRIBE: on_unsubscribe(st, e); break;
            case Kind::PEER_HELLO: on_hello(st, e); break;
            case Kind::PEER_SYNC: on_sync(st, e); break;
            case Kind::PEER_QUERY: on_peer_query(st, e); break;
            case Kind::PEER_SUB: on_peer_sub(st, e); break;
            case Kind::PEER_NOTIFY: on_peer_notify(e); break;
            case Kind::ERROR: logger().warn("{}: peer reported {}", cfg.sib_id, e.body.dump()); break;
            case Kind::PEER_RESULT: break;
            default:
                st->ch->reply(e, Kind::ERROR,
                              wire::error_body(errc::malformed, std::string("unexpected ") +
                                                                    std::string(wire::kind_name(e.kind))));
            }
        } catch (const space_error& ex) {
            st->ch->reply(e, Kind::ERROR, wire::error_body(ex.code(), ex.what()));
        } catch (const parse_error& ex) {
            st->ch->reply(e, Kind::ERROR, wire::error_body(errc::parse_error, ex.what()));
        } catch (const wire::wire_error& ex) {
            st->ch->reply(e, Kind::ERROR, wire::error_body(wire::error_code_name(ex.code()), ex.what()));
        } catch (const rdf_error& ex) {
            st->ch->reply(e, Kind::ERROR, wire::error_body(errc::malformed, ex.what()));
        } catch (const std::exception& ex) {
            logger().error("{}: {} failed: {}", cfg.sib_id, wire::kind_name(e.kind), ex.what());
            st->ch->reply(e, Kind::ERROR, wire::error_body(errc::internal, ex.what()));
        }
    }

    std::string session_of(const std::shared_ptr<ConnState>& st) {
        std::lock_guard lk(st->mu);
        if (!st->session)
            throw space_error(errc::not_joined, "JOIN first");
        return *st->session;
    }

    // --- KP requests ---

    void on_join(const std::shared_ptr<ConnState>& st, const Envelope& e) {
        {
            std::lock_guard lk(st->mu);
            if (st->session)
                throw space_error(errc::already_joined, "connection already holds session " + *st->session);
        }
        std::vector<std::string> creds;
        for (const auto& c : e.body["credentials"])
            creds.push_back(c.get<std::string>());
        std::weak_ptr<ConnState> ws = st;
        std::weak_ptr<Impl> weak = shared_from_this();
        const std::string kp = e.kp, space_name = cfg.space;
        SessionSink sink;
        sink.notify = [ws, weak, kp, space_name](const Notification& n) {
            auto s = ws.lock();
            auto self = weak.lock();
            if (!s || !self)
                return;
            Envelope out;
            out.kind = Kind::NOTIFY;
            out.space = space_name;
            out.kp = kp;
            out.body["sub"] = n.sub_id;
            out.body["qtype"] = wire::qtype_name(n.added.type);
            out.body["added"] = wire::rows_to_json(n.added);
            out.body["removed"] = wire::rows_to_json(n.removed);
            out.body["version"] = n.version;
            {
                std::lock_guard lk(self->tap_mu);
                if (self->tap)
                    self->tap(kp, out);
            }
            ++self->activity;
            s->ch->push(std::move(out));
        };
        sink.removed = [ws, kp, space_name](const std::string& reason) {
            auto s = ws.lock();
            if (!s)
                return;
            Envelope out;
            out.kind = Kind::REMOVE;
            out.space = space_name;
            out.kp = kp;
            out.body["reason"] = reason;
            s->ch->push(std::move(out));
            s->ch->close();
        };
        auto res = space.join(e.kp, creds, std::move(sink));
        if (!res.session) {
            st->ch->reply(e, Kind::JOIN_REFUSED, json{{"reason", res.refusal}});
            return;
        }
        {
            std::lock_guard lk(st->mu);
            st->session = *res.session;
            st->kp = e.kp;
        }
        json body;
        body["session"] = *res.session;
        body["caps"] = json{{"invite", true}, {"remove", true}};
        st->ch->reply(e, Kind::JOIN_OK, std::move(body));
    }

    void on_leave(const std::shared_ptr<ConnState>& st, const Envelope& e) {
        auto session = session_of(st);
        space.leave(session);
        {
            std::lock_guard lk(st->mu);
            st->session.reset();
        }
        st->ch->reply(e, Kind::LEAVE_OK, json::object());
    }

    void on_update(const std::shared_ptr<ConnState>& st, const Envelope& e) {
        auto session = session_of(st);
        Graph ins = wire::graph_from_json(e.body["insert"]);
        Graph ret = wire::graph_from_json(e.body["retract"]);
        Transaction tx;
        if (!ret.empty())
            tx.ops.push_back(TxOp::retract(std::move(ret)));
        if (!ins.empty())
            tx.ops.push_back(TxOp::insert(std::move(ins)));
        Delta d = space.submit(session, tx);
        json body;
        body["added"] = wire::to_json(d.added);
        body["removed"] = wire::to_json(d.removed);
        body["version"] = d.version_after;
        st->ch->reply(e, Kind::UPDATE_OK, std::move(body));
    }

    bool federated() const {
        std::lock_guard lk(mu);
        return routes.size() > 0;
    }

    void on_query(const std::shared_ptr<ConnState>& st, const Envelope& e) {
        auto session = session_of(st);
        Query q = wire::query_from_body(e.body, cfg.namespaces);
        QueryResult r;
        if (federated()) {
            if (!space.session(session) || space.session(session)->state != SessionState::Joined)
                throw space_error(errc::unknown_session, "unknown session " + session);
            r = gather_query(q, QueryToken{cfg.sib_id, {}, new_corr()});
        } else {
            r = space.query(session, q);
        }
        json body;
        body["qtype"] = wire::qtype_name(query_type(q));
        body["results"] = wire::rows_to_json(r);
        body["partial"] = r.partial;
        body["version"] = space.version();
        st->ch->reply(e, Kind::QUERY_RESULT, std::move(body));
    }

    void on_subscribe(const std::shared_ptr<ConnState>& st, const Envelope& e) {
        auto session = session_of(st);
        Query q = wire::query_from_body(e.body, cfg.namespaces);
        auto send_ok = [&](const Space::Subscribed& s) {
            json body;
            body["sub"] = s.sub_id;
            body["qtype"] = wire::qtype_name(query_type(q));
            body["results"] = wire::rows_to_json(s.initial);
            body["version"] = s.version;
            st->ch->reply(e, Kind::SUBSCRIBE_OK, std::move(body));
        };
        if (!federated()) {
            space.subscribe(session, q, send_ok, true);
            return;
        }
        auto sub = space.subscribe(session, q, {}, false);
        const std::string key = cfg.sib_id + "/" + sub.sub_id;
        {
            std::lock_guard lk(mu);
            owned[key] = Owned{sub.sub_id, {}};
            key_of_sub[sub.sub_id] = key;
        }
        Gathered g = gather_sub(key, q, QueryToken{cfg.sib_id, {}, key});
        {
            std::lock_guard lk(mu);
            if (auto it = owned.find(key); it != owned.end())
                it->second.children = g.accepted;
        }
        for (const auto& c : g.contributions)
            space.merge_contribution(sub.sub_id, c.sib, c.version, wire::rows_from_json(query_type(q), c.results));
        space.activate(sub.sub_id, send_ok);
    }

    void on_unsubscribe(const std::shared_ptr<ConnState>& st, const Envelope& e) {
        auto session = session_of(st);
        auto sub = e.body["sub"].get<std::string>();
        space.unsubscribe(session, sub);
        st->ch->reply(e, Kind::UNSUBSCRIBE_OK, json{{"sub", sub}});
    }

    // --- peer requests ---

    std::string new_corr() {
        std::lock_guard lk(mu);
        return cfg.sib_id + ":" + std::to_string(next_corr++);
    }

    void on_hello(const std::shared_ptr<ConnState>& st, const Envelope& e) {
        {
            std::lock_guard lk(st->mu);
            st->peer = e.body["sib"].get<std::string>();
        }
        json body = peer_result("hello", QueryType::Triple, empty_result(QueryType::Triple));
        body["sib"] = cfg.sib_id;
        st->ch->reply(e, Kind::PEER_RESULT, std::move(body));
    }

    void on_sync(const std::shared_ptr<ConnState>& st, const Envelope& e) {
        auto origin = e.body["origin"].get<std::string>();
        auto epoch = e.body["epoch"].get<std::uint64_t>();
        auto members = members_from_json(e.body["members"]);
        bool applied = false;
        if (origin != cfg.sib_id) {
            std::lock_guard lk(mu);
            applied = view.apply(origin, epoch, members);
        }
        json body = peer_result("sync", QueryType::Triple, empty_result(QueryType::Triple));
        body["applied"] = applied;
        st->ch->reply(e, Kind::PEER_RESULT, std::move(body));
        if (applied) {
            auto self = shared_from_this();
            json fwd = e.body;
            enqueue([self, fwd, origin] {
                for (const auto& peer : self->route_peers())
                    if (peer != origin)
                        self->send_sync(peer, fwd);
            });
        }
    }

    void on_peer_query(const std::shared_ptr<ConnState>& st, const Envelope& e) {
        auto self = shared_from_this();
        spawn([self, st, e] {
            QueryToken token{e.body["origin"].get<std::string>(), visited_from(e.body), e.body["corr"].get<std::string>()};
            QueryResult r;
            Query q;
            try {
                q = wire::query_from_body(e.body, self->cfg.namespaces);
            } catch (const std::exception& ex) {
                st->ch->reply(e, Kind::ERROR, wire::error_body(errc::parse_error, ex.what()));
                return;
            }
            r = self->gather_query(q, token);
            st->ch->reply(e, Kind::PEER_RESULT, peer_result(token.corr, query_type(q), r));
        });
    }

    void on_peer_sub(const std::shared_ptr<ConnState>& st, const Envelope& e) {
        auto self = shared_from_this();
        spawn([self, st, e] {
            const auto key = e.body["key"].get<std::string>();
            if (e.body["op"] == "cancel") {
                self->cancel_hosted(key);
                st->ch->reply(e, Kind::PEER_RESULT, peer_result(key, QueryType::Triple, empty_result(QueryType::Triple)));
                return;
            }
            Query q;
            try {
                q = wire::query_from_body(e.body, self->cfg.namespaces);
            } catch (const std::exception& ex) {
                st->ch->reply(e, Kind::ERROR, wire::error_body(errc::parse_error, ex.what()));
                return;
            }
            const QueryType qt = query_type(q);
            bool fresh;
            {
                std::lock_guard lk(self->mu);
                fresh = !self->hosted.count(key) && !self->owned.count(key);
                if (fresh)
                    self->hosted[key] = Hosted{st, {}};
            }
            std::optional<Space::Subscribed> init;
            if (fresh) {
                std::weak_ptr<ConnState> ws = st;
                const std::string me = self->cfg.sib_id, space_name = self->cfg.space;
                init = self->space.add_remote_subscription(
                    key, q, [ws, key, me, space_name, qt](std::uint64_t version, const QueryResult& r) {
                        auto up = ws.lock();
                        if (!up)
                            return;
                        Envelope out;
                        out.kind = Kind::PEER_NOTIFY;
                        out.space = space_name;
                        out.kp = me;
                        out.body["key"] = key;
                        out.body["sib"] = me;
                        out.body["version"] = version;
                        out.body["qtype"] = wire::qtype_name(qt);
                        out.body["results"] = wire::rows_to_json(r);
                        up->ch->push(std::move(out));
                    });
            }
            if (!init) {
                json body = peer_result(key, qt, empty_result(qt));
                body["accepted"] = false;
                body["contributions"] = json::array();
                st->ch->reply(e, Kind::PEER_RESULT, std::move(body));
                return;
            }
            QueryToken token{e.body["origin"].get<std::string>(), visited_from(e.body), key};
            Gathered g = self->gather_sub(key, q, token);
            g.contributions.insert(g.contributions.begin(),
                                   Contribution{self->cfg.sib_id, init->version, wire::rows_to_json(init->initial)});
            g.result = result_union(g.result, init->initial);
            bool still_hosted;
            {
                std::lock_guard lk(self->mu);
                auto it = self->hosted.find(key);
                still_hosted = it != self->hosted.end();
                if (still_hosted)
                    it->second.children = g.accepted;
            }
            if (!still_hosted)
                for (const auto& child : g.accepted)
                    self->send_cancel(child, key);
            json body = peer_result(key, qt, g.result);
            body["accepted"] = true;
            body["contributions"] = contributions_to_json(g.contributions);
            st->ch->reply(e, Kind::PEER_RESULT, std::move(body));
        });
    }

    void on_peer_notify(const Envelope& e) {
        const auto key = e.body["key"].get<std::string>();
        std::optional<std::string> sub;
        std::shared_ptr<ConnState> upstream;
        {
            std::lock_guard lk(mu);
            if (auto it = owned.find(key); it != owned.end())
                sub = it->second.sub_id;
            else if (auto h = hosted.find(key); h != hosted.end())
                upstream = h->second.upstream.lock();
        }
        if (sub) {
            auto qt = wire::qtype_from_name(e.body["qtype"].get<std::string>());
            space.merge_contribution(*sub, e.body["sib"].get<std::string>(), e.body["version"].get<std::uint64_t>(),
                                     wire::rows_from_json(qt, e.body["results"]));
        } else if (upstream) {
            Envelope out = e;
            upstream->ch->push(std::move(out));
        }
    }

    // --- links to peers ---

    std::set<SibId> route_peers() const {
        std::lock_guard lk(mu);
        return routes.peers();
    }

    std::shared_ptr<net::Channel> dial_link(const SibId& peer, const net::Endpoint& address) {
        std::weak_ptr<Impl> weak = shared_from_this();
        auto ch = net::Channel::dial(
            address,
            [weak](const Envelope& e) {
                auto self = weak.lock();
                if (!self)
                    return;
                ++self->activity;
                if (e.kind == Kind::PEER_NOTIFY)
                    self->on_peer_notify(e);
            },
            nullptr, cfg.peer_timeout);
        Envelope hello;
        hello.kind = Kind::PEER_HELLO;
        hello.space = cfg.space;
        hello.kp = cfg.sib_id;
        hello.body["sib"] = cfg.sib_id;
        Envelope reply;
        try {
            reply = ch->request(hello, cfg.peer_timeout);
        } catch (...) {
            ch->abort();
            throw;
        }
        if (reply.kind != Kind::PEER_RESULT || reply.body.value("sib", "") != peer) {
            ch->abort();
            throw net::net_error("handshake with " + address.str() + " failed: expected " + peer + ", got " +
                                 reply.body.dump());
        }
        return ch;
    }

    // Live channel to a routed peer, redialled if the old one closed.
    std::shared_ptr<net::Channel> link(const SibId& peer) {
        net::Endpoint address;
        {
            std::lock_guard lk(mu);
            auto it = links.find(peer);
            if (it == links.end())
                return nullptr;
            if (it->second.ch && !it->second.ch->closed())
                return it->second.ch;
            address = it->second.address;
        }
        try {
            auto ch = dial_link(peer, address);
            std::lock_guard lk(mu);
            links[peer].ch = ch;
            return ch;
        } catch (const std::exception& e) {
            if (!stopping)
                logger().warn("{}: peer {} unreachable: {}", cfg.sib_id, peer, e.what());
            return nullptr;
        }
    }

    void add_route(const SibId& peer, const net::Endpoint& address) {
        if (peer == cfg.sib_id)
            throw std::invalid_argument("route to self rejected: " + peer);
        {
            std::lock_guard lk(mu);
            if (routes.contains(peer))
                return;
        }
        auto ch = dial_link(peer, address);
        {
            std::lock_guard lk(mu);
            if (!routes.add(peer, address)) {
                ch->close();
                return;
            }
            links[peer] = PeerLink{address, ch};
        }
        auto self = shared_from_this();
        enqueue([self, peer] { self->sync_membership(peer); });
    }

    // Scatter to unvisited peers and wait for everyone up to the timeout.
    template <typename Body, typename OnReply>
    bool scatter(const QueryToken& token, Body make_body, OnReply on_reply) {
        auto targets = forward_targets(token, route_peers());
        if (targets.empty())
            return true;
        auto visited = forward_visited(token, cfg.sib_id, targets);
        json vis = json::array();
        for (const auto& v : visited)
            vis.push_back(v);
        struct Out {
            SibId peer;
            std::shared_ptr<net::Channel> ch;
            std::uint64_t txid;
            std::future<Envelope> fut;
        };
        std::vector<Out> outs;
        bool complete = true;
        for (const auto& peer : targets) {
            auto ch = link(peer);
            if (!ch) {
                complete = false;
                continue;
            }
            Envelope req = make_body(vis);
            req.space = cfg.space;
            req.kp = cfg.sib_id;
            auto [txid, fut] = ch->request_async(std::move(req));
            outs.push_back(Out{peer, ch, txid, std::move(fut)});
        }
        auto deadline = std::chrono::steady_clock::now() + cfg.peer_timeout;
        for (auto& o : outs) {
            if (o.fut.wait_until(deadline) != std::future_status::ready) {
                o.ch->cancel(o.txid);
                logger().warn("{}: peer {} timed out", cfg.sib_id, o.peer);
                complete = false;
                continue;
            }
            try {
                auto reply = o.fut.get();
                if (reply.kind != Kind::PEER_RESULT) {
                    logger().warn("{}: peer {} answered {}", cfg.sib_id, o.peer, reply.body.dump());
                    complete = false;
                    continue;
                }
                if (!on_reply(o.peer, reply))
                    complete = false;
            } catch (const std::exception& e) {
                logger().warn("{}: peer {} failed: {}", cfg.sib_id, o.peer, e.what());
                complete = false;
            }
        }
        return complete;
    }

    QueryResult gather_query(const Query& q, const QueryToken& token) {
        const QueryType qt = query_type(q);
        QueryResult out = space.evaluate_local(q);
        json qbody = wire::query_body(q);
        bool complete = scatter(
            token,
            [&](const json& vis) {
                Envelope req;
                req.kind = Kind::PEER_QUERY;
                req.body["origin"] = token.origin;
                req.body["visited"] = vis;
                req.body["corr"] = token.corr;
                req.body["qtype"] = qbody["qtype"];
                req.body["q"] = qbody["q"];
                return req;
            },
            [&](const SibId&, const Envelope& reply) {
                auto r = wire::rows_from_json(qt, reply.body["results"]);
                out = result_union(out, r);
                return !reply.body["partial"].get<bool>();
            });
        out.partial = out.partial || !complete;
        return out;
    }

    Gathered gather_sub(const std::string& key, const Query& q, const QueryToken& token) {
        const QueryType qt = query_type(q);
        Gathered g;
        g.result = empty_result(qt);
        json qbody = wire::query_body(q);
        bool complete = scatter(
            token,
            [&](const json& vis) {
                Envelope req;
                req.kind = Kind::PEER_SUB;
                req.body["op"] = "add";
                req.body["key"] = key;
                req.body["origin"] = token.origin;
                req.body["visited"] = vis;
                req.body["qtype"] = qbody["qtype"];
                req.body["q"] = qbody["q"];
                return req;
            },
            [&](const SibId& peer, const Envelope& reply) {
                if (!reply.body.value("accepted", false))
                    return true;
                g.accepted.insert(peer);
                g.result = result_union(g.result, wire::rows_from_json(qt, reply.body["results"]));
                for (auto& c : contributions_from_json(reply.body))
                    g.contributions.push_back(std::move(c));
                return !reply.body["partial"].get<bool>();
            });
        g.result.partial = !complete;
        return g;
    }

    void send_cancel(const SibId& peer, const std::string& key) {
        auto ch = link(peer);
        if (!ch)
            return;
        Envelope req;
        req.kind = Kind::PEER_SUB;
        req.space = cfg.space;
        req.kp = cfg.sib_id;
        req.body["op"] = "cancel";
        req.body["key"] = key;
        req.body["origin"] = cfg.sib_id;
        req.body["visited"] = json::array();
        try {
            ch->request(req, cfg.peer_timeout);
        } catch (const std::exception& e) {
            logger().warn("{}: cancel of {} at {} failed: {}", cfg.sib_id, key, peer, e.what());
        }
    }

    void cancel_owned(const std::string& sub_id) {
        std::string key;
        std::set<SibId> children;
        {
            std::lock_guard lk(mu);
            auto k = key_of_sub.find(sub_id);
            if (k == key_of_sub.end())
                return;
            key = k->second;
            key_of_sub.erase(k);
            if (auto o = owned.find(key); o != owned.end()) {
                children = o->second.children;
                owned.erase(o);
            }
        }
        for (const auto& c : children)
            send_cancel(c, key);
    }

    void cancel_hosted(const std::string& key) {
        std::set<SibId> children;
        {
            std::lock_guard lk(mu);
            auto it = hosted.find(key);
            if (it == hosted.end())
                return;
            children = it->second.children;
            hosted.erase(it);
        }
        space.cancel_remote_subscription(key);
        for (const auto& c : children)
            send_cancel(c, key);
    }

    // --- membership ---

    json local_sync_body(bool bump) {
        std::vector<MemberEntry> members;
        for (const auto& s : space.joined_sessions())
            members.push_back(MemberEntry{s.kp_id, s.id, s.credentials, s.state});
        std::lock_guard lk(mu);
        if (bump) {
            ++local_epoch;
            view.apply(cfg.sib_id, local_epoch, members);
        }
        json body;
        body["origin"] = cfg.sib_id;
        body["epoch"] = local_epoch;
        body["members"] = members_to_json(view.members_of(cfg.sib_id));
        return body;
    }

    bool send_sync(const SibId& peer, const json& body) {
        auto delay = std::chrono::milliseconds(50);
        for (int attempt = 0; attempt < 4 && !stopping; ++attempt) {
            if (auto ch = link(peer)) {
                Envelope req;
                req.kind = Kind::PEER_SYNC;
                req.space = cfg.space;
                req.kp = cfg.sib_id;
                req.body = body;
                try {
                    auto reply = ch->request(req, cfg.peer_timeout);
                    if (reply.kind == Kind::PEER_RESULT)
                        return true;
                } catch (const std::exception& e) {
                    logger().warn("{}: sync to {} failed: {}", cfg.sib_id, peer, e.what());
                }
            }
            std::this_thread::sleep_for(delay);
            delay *= 2;
        }
        if (!stopping)
            logger().error("{}: giving up membership sync with {}", cfg.sib_id, peer);
        return false;
    }

    void broadcast_membership() {
        json body = local_sync_body(true);
        for (const auto& peer : route_peers())
            send_sync(peer, body);
    }

    bool sync_membership(const SibId& peer) { return send_sync(peer, local_sync_body(false)); }
};

// --- Sib ---

Sib::Sib(SibConfig cfg) : impl_(std::make_shared<Impl>(std::move(cfg))) {
    try {
        impl_->start();
    } catch (...) {
        impl_->stop();
        throw;
    }
}

Sib::~Sib() { stop(); }

void Sib::stop() { impl_->stop(); }

const SibId& Sib::id() const { return impl_->cfg.sib_id; }
const std::string& Sib::space_name() const { return impl_->cfg.space; }
Space& Sib::space() { return impl_->space; }
const SibConfig& Sib::config() const { return impl_->cfg; }

std::vector<net::Endpoint> Sib::endpoints() const {
    std::vector<net::Endpoint> out;
    for (const auto& l : impl_->listeners)
        out.push_back(l->bound());
    return out;
}

void Sib::add_route(const SibId& peer, const net::Endpoint& address) { impl_->add_route(peer, address); }
std::set<SibId> Sib::route_peers() const { return impl_->route_peers(); }

QueryResult Sib::federated_query(const Query& q) {
    return impl_->gather_query(q, QueryToken{impl_->cfg.sib_id, {}, impl_->new_corr()});
}

MembershipView Sib::membership() const {
    std::lock_guard lk(impl_->mu);
    return impl_->view;
}

bool Sib::sync_membership(const SibId& peer) { return impl_->sync_membership(peer); }
void Sib::flush() { impl_->flush(); }

void Sib::remove_session(const std::string& session, const std::string& reason) {
    impl_->space.remove(session, reason);
}

void Sib::invite(const net::Endpoint& kp_address) {
    auto ch = net::Channel::dial(kp_address, nullptr, nullptr, impl_->cfg.peer_timeout);
    Envelope e;
    e.kind = Kind::INVITE;
    e.space = impl_->cfg.space;
    e.kp = impl_->cfg.sib_id;
    e.body["space"] = impl_->cfg.space;
    e.body["listener"] = endpoints().front().str();
    ch->push(std::move(e));
    ch->close();
}

void Sib::set_notify_tap(NotifyTap tap) {
    std::lock_guard lk(impl_->tap_mu);
    impl_->tap = std::move(tap);
}

std::uint64_t Sib::activity() const { return impl_->activity.load(); }

std::vector<std::unique_ptr<Sib>> boot_sibs(const std::vector<SibConfig>& configs) {
    std::vector<std::unique_ptr<Sib>> sibs;
    for (const auto& c : configs)
        sibs.push_back(std::make_unique<Sib>(c));
    auto endpoint_of = [&](const SibId& id) -> std::optional<net::Endpoint> {
        for (const auto& s : sibs)
            if (s->id() == id) {
                auto ep = s->endpoints().front();
                if (ep.host.empty() || ep.host == "0.0.0.0")
                    ep.host = "127.0.0.1";
                return ep;
            }
        return std::nullopt;
    };
    for (std::size_t i = 0; i < sibs.size(); ++i)
        for (const auto& p : configs[i].peers) {
            auto ep = p.endpoint ? p.endpoint : endpoint_of(p.id);
            if (!ep)
                throw config_error("no endpoint for peer " + p.id);
            sibs[i]->add_route(p.id, *ep);
        }
    for (auto& s : sibs)
        s->flush();
    return sibs;
}

} // namespace sedvice
