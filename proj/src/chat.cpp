#include "sedvice/chat.hpp"

#include "sedvice/log.hpp"

#include <algorithm>
#include <cctype>
#include <sstream>

namespace sedvice::chat {

namespace {

Term c(std::string_view local) { return Term::uri(std::string(ns) + std::string(local)); }
Term w(std::string_view local) { return Term::uri(std::string(weather_ns) + std::string(local)); }

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char ch) { return std::tolower(ch); });
    return s;
}

bool word_char(char ch) { return std::isalnum(static_cast<unsigned char>(ch)) || ch == '_'; }

// First value of ?v in (s p ?v), if any.
std::optional<Term> value_of(kp::Node& node, const Term& s, const Term& p) {
    auto r = node.query(TriplePattern{s, p, Variable{"v"}});
    if (r.bindings.empty())
        return std::nullopt;
    return r.bindings.begin()->at("v");
}

std::optional<std::string> text_of(kp::Node& node, const Term& s, const Term& p) {
    auto v = value_of(node, s, p);
    if (!v)
        return std::nullopt;
    return v->value();
}

std::pair<std::string, std::string> split_command(const std::string& line) {
    auto b = line.find_first_not_of(' ');
    if (b == std::string::npos)
        return {};
    auto e = line.find(' ', b);
    if (e == std::string::npos)
        return {line.substr(b), {}};
    auto rest = line.find_first_not_of(' ', e);
    return {line.substr(b, e - b), rest == std::string::npos ? std::string() : line.substr(rest)};
}

void require_ok(const std::vector<kp::UpdateAck>& acks) {
    for (const auto& a : acks)
        if (!a.ok)
            throw kp::kp_error("UPDATE", a.space.space + ": " + a.error);
}

} // namespace

Term Conversation() { return c("Conversation"); }
Term Message() { return c("Message"); }
Term messages() { return c("messages"); }
Term writer() { return c("writer"); }
Term content() { return c("content"); }
Term replyTo() { return c("replyTo"); }
Term participant() { return c("participant"); }
Term WeatherReport() { return w("WeatherReport"); }
Term location() { return w("location"); }
Term report() { return w("report"); }

NamespaceTable namespaces() {
    auto t = NamespaceTable::standard();
    t.add("chat", std::string(ns));
    t.add("ns", std::string(ns));
    t.add("weather", std::string(weather_ns));
    return t;
}

Term conversation_uri(const std::string& name_or_uri) {
    if (name_or_uri.find(':') != std::string::npos)
        return Term::uri(name_or_uri);
    return Term::uri("http://sedspace.example/chat/conversation/" + name_or_uri);
}

Term message_uri(const std::string& kp_id, std::uint64_t n) {
    return Term::uri("http://sedspace.example/chat/message/" + kp_id + "/" + std::to_string(n));
}

Term report_uri(const std::string& id) { return Term::uri("http://sedspace.example/weather/report/" + id); }

PathQuery messages_query(const Term& conversation) {
    return PathQuery{conversation, PathExpr::seq({PathExpr::arc(messages())})};
}

PathQuery conversations_query() { return PathQuery{Conversation(), PathExpr::inv(PathExpr::arc(vocab::rdf_type()))}; }

bool mentions(const std::string& text, const std::string& place) {
    if (place.empty())
        return false;
    const std::string hay = lower(text), needle = lower(place);
    for (auto at = hay.find(needle); at != std::string::npos; at = hay.find(needle, at + 1)) {
        bool left = at == 0 || !word_char(hay[at - 1]);
        auto end = at + needle.size();
        bool right = end == hay.size() || !word_char(hay[end]);
        if (left && right)
            return true;
    }
    return false;
}

// --- Sender ---

Sender::Sender(kp::Node& node, std::string user, Term conversation)
    : node_(node), user_(std::move(user)), conversation_(std::move(conversation)) {}

std::optional<Term> Sender::send(const std::string& text, const std::optional<Term>& reply_to) {
    if (text.empty())
        return std::nullopt;
    Term m = message_uri(node_.kp_id(), next_++);
    Graph g{Triple(m, vocab::rdf_type(), Message()), Triple(m, writer(), Term::literal(user_)),
            Triple(m, content(), Term::literal(text)), Triple(conversation_, messages(), m)};
    if (reply_to)
        g.insert(Triple(m, replyTo(), *reply_to));
    require_ok(node_.insert(g));
    return m;
}

// --- Viewer ---

Viewer::Viewer(kp::Node& node, Term conversation, Output out) : node_(node), out_(std::move(out)) {
    sub_ = node_.subscribe(messages_query(conversation),
                           [this](const QueryResult& added, const QueryResult&, std::uint64_t) { on_change(added); });
}

Viewer::~Viewer() {
    if (sub_) {
        try {
            node_.unsubscribe(*sub_);
        } catch (const std::exception&) {
        }
    }
}

std::string Viewer::render(const std::optional<std::string>& who, const std::optional<std::string>& text,
                           bool is_reply) {
    std::string line = is_reply ? "  " : "";
    std::string body = text ? "\"" + *text + "\"" : "?";
    if (who)
        return line + *who + ": " + body;
    return line + (text ? *text : "?");
}

void Viewer::on_change(const QueryResult& added) {
    for (const auto& m : added.terms) {
        auto who = text_of(node_, m, writer());
        auto text = text_of(node_, m, content());
        bool reply = value_of(node_, m, replyTo()).has_value();
        out_(render(who, text, reply));
    }
}

// --- ConversationList ---

ConversationList::ConversationList(kp::Node& node, Output out) : node_(node) {
    sub_ = node_.subscribe(conversations_query(),
                           [out](const QueryResult& added, const QueryResult& removed, std::uint64_t) {
                               for (const auto& t : removed.terms)
                                   out("- " + t.value());
                               for (const auto& t : added.terms)
                                   out("+ " + t.value());
                           });
}

ConversationList::~ConversationList() {
    if (sub_) {
        try {
            node_.unsubscribe(*sub_);
        } catch (const std::exception&) {
        }
    }
}

// --- Membership ---

Membership::Membership(kp::Node& node, std::string user, Output out)
    : node_(node), user_(std::move(user)), out_(std::move(out)) {}

void Membership::command(const std::string& line) {
    auto [cmd, arg] = split_command(line);
    if (cmd.empty())
        return;
    if ((cmd == "new" || cmd == "enter" || cmd == "exit") && arg.empty()) {
        out_("usage: " + cmd + " <conversation>");
        return;
    }
    Term conv = conversation_uri(arg);
    if (cmd == "new") {
        require_ok(node_.insert(Graph{Triple(conv, vocab::rdf_type(), Conversation())}));
        out_("created " + conv.value());
    } else if (cmd == "enter") {
        require_ok(node_.insert(Graph{Triple(conv, participant(), Term::literal(user_))}));
        out_("entered " + conv.value());
    } else if (cmd == "exit") {
        require_ok(node_.retract(Graph{Triple(conv, participant(), Term::literal(user_))}));
        out_("left " + conv.value());
    } else {
        out_("unknown command: " + cmd);
    }
}

// --- WeatherLinker ---

WeatherLinker::WeatherLinker(kp::Node& node, Output log) : node_(node), log_(std::move(log)) {
    subs_.push_back(node_.subscribe(TriplePattern{Variable{"r"}, location(), Variable{"place"}},
                                    [this](const QueryResult& a, const QueryResult& r, std::uint64_t) {
                                        on_reports(a, r);
                                    }));
    subs_.push_back(node_.subscribe(TriplePattern{Variable{"c"}, messages(), Variable{"m"}},
                                    [this](const QueryResult& a, const QueryResult&, std::uint64_t) {
                                        on_messages(a);
                                    }));
}

WeatherLinker::~WeatherLinker() {
    for (auto id : subs_) {
        try {
            node_.unsubscribe(id);
        } catch (const std::exception&) {
        }
    }
}

void WeatherLinker::on_messages(const QueryResult& added) {
    for (const auto& b : added.bindings) {
        const Term& m = b.at("m");
        std::map<Term, Report> reports;
        Msg msg{b.at("c"), {}};
        {
            std::lock_guard lk(mu_);
            if (reports_.count(m))
                continue;
        }
        auto text = text_of(node_, m, content());
        if (!text)
            continue;
        msg.text = *text;
        {
            std::lock_guard lk(mu_);
            msgs_[m] = msg;
            reports = reports_;
        }
        for (const auto& [r, rep] : reports)
            if (mentions(msg.text, rep.place))
                link(m, msg, r, rep);
    }
}

void WeatherLinker::on_reports(const QueryResult& added, const QueryResult& removed) {
    {
        std::lock_guard lk(mu_);
        for (const auto& b : removed.bindings)
            reports_.erase(b.at("r"));
    }
    for (const auto& b : added.bindings) {
        const Term& r = b.at("r");
        Report rep{b.at("place").value(), text_of(node_, r, report()).value_or("")};
        std::map<Term, Msg> msgs;
        {
            std::lock_guard lk(mu_);
            reports_[r] = rep;
            msgs = msgs_;
        }
        for (const auto& [m, msg] : msgs)
            if (mentions(msg.text, rep.place))
                link(m, msg, r, rep);
    }
}

void WeatherLinker::link(const Term& msg, const Msg& m, const Term& r, const Report& rep) {
    Graph g{Triple(m.conversation, messages(), r), Triple(r, content(), Term::literal(rep.text)),
            Triple(r, replyTo(), msg)};
    auto acks = node_.insert(g);
    for (const auto& a : acks)
        if (!a.ok)
            logger().warn("linker: {} rejected link: {}", a.space.space, a.error);
    if (log_)
        log_("linked " + r.value() + " to " + msg.value());
}

// --- WeatherFeed ---

WeatherFeed::WeatherFeed(kp::Node& node, Output out) : node_(node), out_(std::move(out)) {}

void WeatherFeed::command(const std::string& line) {
    auto [cmd, rest] = split_command(line);
    if (cmd.empty())
        return;
    if (cmd == "report") {
        auto [id, tail] = split_command(rest);
        auto bar = tail.find('|');
        if (id.empty() || bar == std::string::npos) {
            out_("usage: report <id> <place> | <text>");
            return;
        }
        auto trim = [](std::string s) {
            s.erase(0, s.find_first_not_of(' '));
            s.erase(s.find_last_not_of(' ') + 1);
            return s;
        };
        std::string place = trim(tail.substr(0, bar)), text = trim(tail.substr(bar + 1));
        Term r = report_uri(id);
        Graph g{Triple(r, vocab::rdf_type(), WeatherReport()), Triple(r, location(), Term::literal(place)),
                Triple(r, report(), Term::literal(text))};
        require_ok(node_.insert(g));
        published_[id] = g;
        out_("published " + id);
    } else if (cmd == "retract") {
        auto it = published_.find(rest);
        if (it == published_.end()) {
            out_("unknown report " + rest);
            return;
        }
        require_ok(node_.retract(it->second));
        published_.erase(it);
        out_("retracted " + rest);
    } else {
        out_("unknown command: " + cmd);
    }
}

} // namespace sedvice::chat
