#pragma once
// One SIB's view of a space: sessions, the transaction pipeline, reasoner
// classes and subscriptions. Transport-free; the server in sib.hpp feeds it.

#include "sedvice/query.hpp"
#include "sedvice/store.hpp"

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace sedvice {

enum class SessionState { Joined, Left, Removed };
std::string_view session_state_name(SessionState s);

// Error codes carried in ERROR replies.
namespace errc {
inline constexpr std::string_view unknown_session = "UNKNOWN_SESSION";
inline constexpr std::string_view not_joined = "NOT_JOINED";
inline constexpr std::string_view already_joined = "ALREADY_JOINED";
inline constexpr std::string_view unknown_subscription = "UNKNOWN_SUBSCRIPTION";
inline constexpr std::string_view foreign_subscription = "FOREIGN_SUBSCRIPTION";
inline constexpr std::string_view parse_error = "PARSE_ERROR";
inline constexpr std::string_view malformed = "MALFORMED";
inline constexpr std::string_view unknown_space = "UNKNOWN_SPACE";
inline constexpr std::string_view internal = "INTERNAL";
} // namespace errc

class space_error : public std::runtime_error {
public:
    space_error(std::string_view code, const std::string& msg) : std::runtime_error(msg), code_(code) {}
    const std::string& code() const noexcept { return code_; }

private:
    std::string code_;
};

struct Notification {
    std::string sub_id;
    QueryResult added;
    QueryResult removed;
    std::uint64_t version = 0;
};

// Delivery hooks for one session. Called with the space lock held, so they
// must only enqueue.
struct SessionSink {
    std::function<void(const Notification&)> notify;
    std::function<void(const std::string& reason)> removed;
};

// Returns a refusal reason, or nothing to admit.
using Policy = std::function<std::optional<std::string>(const std::string& kp_id,
                                                        const std::vector<std::string>& credentials)>;

namespace policy {
Policy allow_all();
// Admits only the listed kp ids.
Policy allow_list(std::set<std::string> kp_ids);
// Refuses the listed kp ids.
Policy deny_list(std::set<std::string> kp_ids);
} // namespace policy

struct Reasoner {
    std::string name;
    std::function<Transaction(const Graph&)> run;
};

// Priority classes in execution order. The same reasoner may sit in
// several classes and then runs once per class.
struct ReasonerSchedule {
    std::vector<std::vector<Reasoner>> classes;
};

struct SpaceOptions {
    std::string name = "space";
    std::string sib_id = "sib";
    Policy policy = policy::allow_all();
    ReasonerSchedule schedule;
    // Transactions per reasoning cycle.
    std::size_t reasoning_batch = 1;
};

struct SessionInfo {
    std::string id;
    std::string kp_id;
    std::vector<std::string> credentials;
    SessionState state = SessionState::Joined;
};

class Space {
public:
    explicit Space(SpaceOptions options);
    Space(const Space&) = delete;
    Space& operator=(const Space&) = delete;

    const std::string& name() const noexcept { return options_.name; }
    const std::string& sib_id() const noexcept { return options_.sib_id; }

    struct JoinResult {
        std::optional<std::string> session;
        std::string refusal;
    };
    JoinResult join(const std::string& kp_id, const std::vector<std::string>& credentials, SessionSink sink);
    void leave(const std::string& session);
    // Like leave, but the session's sink hears about it first.
    void remove(const std::string& session, const std::string& reason);

    // State of any session this space has seen.
    std::optional<SessionInfo> session(const std::string& id) const;
    std::vector<SessionInfo> joined_sessions() const;

    // skolemize, normalize, apply, reason, notify. Returns the delta of the
    // KP's own transaction.
    Delta submit(const std::string& session, const Transaction& tx);
    // One pass over all priority classes; returns the aggregate change.
    Delta run_reasoning_cycle();

    QueryResult query(const std::string& session, const Query& q);
    // Local evaluation on the current snapshot, no session needed.
    QueryResult evaluate_local(const Query& q, std::uint64_t* version = nullptr);

    struct Subscribed {
        std::string sub_id;
        QueryResult initial;
        std::uint64_t version = 0;
    };
    // Registers a subscription. When active, on_registered runs under the
    // space lock before any notification can be emitted for it. An inactive
    // subscription tracks its result silently until activate().
    Subscribed subscribe(const std::string& session, const Query& q,
                         const std::function<void(const Subscribed&)>& on_registered = {}, bool active = true);
    // Starts notifications; on_active sees the current result first.
    void activate(const std::string& sub_id, const std::function<void(const Subscribed&)>& on_active);
    void unsubscribe(const std::string& session, const std::string& sub_id);
    std::optional<Query> subscription_query(const std::string& sub_id) const;

    // Replaces one peer's contribution to a subscription's visible result.
    // Stale versions are ignored.
    void merge_contribution(const std::string& sub_id, const std::string& sib, std::uint64_t version,
                            const QueryResult& result);

    // Subscriptions held here on behalf of another SIB. The sink hears the
    // full local result whenever it changes.
    using RemoteSink = std::function<void(std::uint64_t version, const QueryResult& result)>;
    std::optional<Subscribed> add_remote_subscription(const std::string& key, const Query& q, RemoteSink sink);
    void cancel_remote_subscription(const std::string& key);
    bool hosts_remote(const std::string& key) const;

    void on_subscription_ended(std::function<void(const std::string& sub_id)> fn);
    void on_membership_changed(std::function<void()> fn);

    std::shared_ptr<const Graph> snapshot() const;
    std::uint64_t version() const;
    std::size_t subscription_count() const;
    std::size_t remote_subscription_count() const;

private:
    struct Session {
        SessionInfo info;
        SessionSink sink;
        std::set<std::string> subs;
    };
    struct Contribution {
        std::uint64_t version = 0;
        QueryResult result;
    };
    struct Subscription {
        std::string id;
        std::string session;
        Query query;
        QueryResult local;
        std::map<std::string, Contribution> remote;
        QueryResult visible;
        bool active = false;
    };
    struct RemoteSub {
        Query query;
        QueryResult last;
        RemoteSink sink;
    };

    Session& joined(const std::string& id);
    void end_session(const std::string& id, SessionState state, const std::string& reason);
    QueryResult eval(const Query& q);
    QueryResult visible_of(const Subscription& s) const;
    void refresh(Subscription& s);
    void reevaluate_all();
    Delta reasoning_cycle_locked();
    void membership_changed();

    SpaceOptions options_;
    mutable std::mutex mu_;
    Store store_;
    ClosureCache cache_;
    std::map<std::string, Session> sessions_;
    std::map<std::string, SessionInfo> ended_;
    std::map<std::string, Subscription> subs_;
    std::map<std::string, RemoteSub> remote_subs_;
    std::uint64_t next_session_ = 1;
    std::uint64_t next_sub_ = 1;
    std::uint64_t next_tx_ = 1;
    std::size_t pending_for_cycle_ = 0;
    std::function<void(const std::string&)> sub_ended_;
    std::function<void()> membership_changed_;
};

} // namespace sedvice
