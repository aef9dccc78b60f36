#pragma once
// The chat application: ontology constants and the KP roles. Each role wraps
// a joined kp::Node and reports what a terminal user would see through an
// output callback.

#include "sedvice/kp.hpp"

#include <functional>
#include <map>
#include <mutex>
#include <set>
#include <string>

namespace sedvice::chat {

inline constexpr std::string_view ns = "http://sedspace.example/chat#";
inline constexpr std::string_view weather_ns = "http://sedspace.example/weather#";

Term Conversation();
Term Message();
Term messages();
Term writer();
Term content();
Term replyTo();
// Not in the original ontology; added for the membership KP.
Term participant();

Term WeatherReport();
Term location();
Term report();

// standard prefixes plus chat, ns (both the chat namespace) and weather.
NamespaceTable namespaces();

// Names without a scheme become http://sedspace.example/chat/conversation/<name>.
Term conversation_uri(const std::string& name_or_uri);
Term message_uri(const std::string& kp_id, std::uint64_t n);
Term report_uri(const std::string& id);

// "conversation | (:seq chat#messages)"
PathQuery messages_query(const Term& conversation);
// "chat#Conversation | (:inv !rdf:type)"
PathQuery conversations_query();

using Output = std::function<void(const std::string& line)>;

// Whole-word, case-insensitive.
bool mentions(const std::string& text, const std::string& place);

class Sender {
public:
    Sender(kp::Node& node, std::string user, Term conversation);
    // Empty text sends nothing and returns nullopt.
    std::optional<Term> send(const std::string& text, const std::optional<Term>& reply_to = std::nullopt);

private:
    kp::Node& node_;
    std::string user_;
    Term conversation_;
    std::uint64_t next_ = 1;
};

// Prints `writer: "content"` for each message as it appears; replies are
// indented by two spaces, a message without writer prints its content alone.
class Viewer {
public:
    Viewer(kp::Node& node, Term conversation, Output out);
    ~Viewer();

    // Pure rendering of one message.
    static std::string render(const std::optional<std::string>& writer, const std::optional<std::string>& content,
                              bool is_reply);

private:
    void on_change(const QueryResult& added);

    kp::Node& node_;
    Output out_;
    std::optional<kp::SubscriptionId> sub_;
};

class ConversationList {
public:
    ConversationList(kp::Node& node, Output out);
    ~ConversationList();

private:
    kp::Node& node_;
    std::optional<kp::SubscriptionId> sub_;
};

// new <name> | enter <conversation> | exit <conversation>
class Membership {
public:
    Membership(kp::Node& node, std::string user, Output out);
    void command(const std::string& line);

private:
    kp::Node& node_;
    std::string user_;
    Output out_;
};

// Links weather reports into conversations whose messages mention the
// report's location. Writes only (conversation messages report),
// (report content text) and (report replyTo message).
class WeatherLinker {
public:
    WeatherLinker(kp::Node& node, Output log = nullptr);
    ~WeatherLinker();

private:
    struct Msg {
        Term conversation;
        std::string text;
    };
    struct Report {
        std::string place;
        std::string text;
    };

    void on_messages(const QueryResult& added);
    void on_reports(const QueryResult& added, const QueryResult& removed);
    void link(const Term& msg, const Msg& m, const Term& report, const Report& r);

    kp::Node& node_;
    Output log_;
    std::mutex mu_;
    std::map<Term, Msg> msgs_;
    std::map<Term, Report> reports_;
    std::vector<kp::SubscriptionId> subs_;
};

// Scripted weather reports: report <id> <place> | <text>  or  retract <id>
class WeatherFeed {
public:
    WeatherFeed(kp::Node& node, Output out);
    void command(const std::string& line);

private:
    kp::Node& node_;
    Output out_;
    std::map<std::string, Graph> published_;
};

} // namespace sedvice::chat
