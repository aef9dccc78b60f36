#include "cluster.hpp"
#include "sedvice/chat.hpp"
#include "sedvice/scenario.hpp"

#include <gtest/gtest.h>

using namespace sedvice;
using namespace testkit;

namespace {

struct Lines {
    std::mutex mu;
    std::vector<std::string> got;
    chat::Output out() {
        return [this](const std::string& l) {
            std::lock_guard lk(mu);
            got.push_back(l);
        };
    }
    std::vector<std::string> all() {
        std::lock_guard lk(mu);
        return got;
    }
    std::size_t size() { return all().size(); }
};

SibConfig chat_sib() { return sib_config("A", "chat"); }

} // namespace

TEST(Chat, MentionsWholeWordsIgnoringCase) {
    EXPECT_TRUE(chat::mentions("I'm in Helsinki", "Helsinki"));
    EXPECT_TRUE(chat::mentions("HELSINKI!", "helsinki"));
    EXPECT_TRUE(chat::mentions("see you in New York soon", "new york"));
    EXPECT_FALSE(chat::mentions("Helsinkians unite", "Helsinki"));
    EXPECT_FALSE(chat::mentions("in Turku", "Helsinki"));
    EXPECT_FALSE(chat::mentions("anything", ""));
}

TEST(Chat, RenderHandlesMissingFields) {
    EXPECT_EQ(chat::Viewer::render("Alice", "I'm in Helsinki", false), "Alice: \"I'm in Helsinki\"");
    EXPECT_EQ(chat::Viewer::render(std::nullopt, "23C and sunny", true), "  23C and sunny");
    EXPECT_EQ(chat::Viewer::render("Bob", std::nullopt, false), "Bob: ?");
    EXPECT_EQ(chat::Viewer::render(std::nullopt, std::nullopt, false), "?");
}

TEST(Chat, ChatQueriesMatchHelpers) {
    auto ns = chat::namespaces();
    EXPECT_EQ(parse_path_query("ns#Conversation | (:inv !rdf:type)", ns), chat::conversations_query());
    auto c = chat::conversation_uri("xyz");
    EXPECT_EQ(parse_path_query("<" + c.value() + "> | (:seq chat#messages)", ns), chat::messages_query(c));
}

TEST(Chat, SenderViewerRoundTrip) {
    Sib sib(chat_sib());
    kp::Node a("alice"), b("bob");
    a.join(ep(sib), "chat");
    b.join(ep(sib), "chat");
    auto conv = chat::conversation_uri("trip");
    Lines seen;
    chat::Viewer viewer(b, conv, seen.out());
    chat::Sender sender(a, "Alice", conv);
    EXPECT_FALSE(sender.send(""));
    auto m1 = sender.send("I'm in Helsinki");
    auto m2 = sender.send("it's cold", m1);
    ASSERT_TRUE(m1 && m2);
    EXPECT_NE(*m1, *m2);
    ASSERT_TRUE(eventually([&] { return seen.size() == 2; }));
    EXPECT_EQ(seen.all(), (std::vector<std::string>{"Alice: \"I'm in Helsinki\"", "  Alice: \"it's cold\""}));
}

TEST(Chat, ViewerOfEmptyConversationIsSilent) {
    Sib sib(chat_sib());
    kp::Node b("bob");
    b.join(ep(sib), "chat");
    Lines seen;
    chat::Viewer viewer(b, chat::conversation_uri("empty"), seen.out());
    std::this_thread::sleep_for(std::chrono::milliseconds(50));
    EXPECT_EQ(seen.size(), 0u);
}

TEST(Chat, ConversationListTracksTypeTriples) {
    Sib sib(chat_sib());
    kp::Node n("n"), l("l");
    n.join(ep(sib), "chat");
    l.join(ep(sib), "chat");
    Lines out, list;
    chat::ConversationList cl(l, list.out());
    chat::Membership m(n, "Carol", out.out());
    m.command("new c1");
    auto c1 = chat::conversation_uri("c1");
    ASSERT_TRUE(eventually([&] { return list.size() == 1; }));
    n.retract(Graph{Triple(c1, vocab::rdf_type(), chat::Conversation())});
    ASSERT_TRUE(eventually([&] { return list.size() == 2; }));
    EXPECT_EQ(list.all(), (std::vector<std::string>{"+ " + c1.value(), "- " + c1.value()}));
}

TEST(Chat, MembershipEnterExit) {
    Sib sib(chat_sib());
    kp::Node n("n");
    n.join(ep(sib), "chat");
    Lines out;
    chat::Membership m(n, "Carol", out.out());
    auto c1 = chat::conversation_uri("c1");
    Triple part(c1, chat::participant(), Term::literal("Carol"));
    m.command("exit c1");
    EXPECT_FALSE(sib.space().snapshot()->contains(part));
    m.command("enter c1");
    EXPECT_TRUE(sib.space().snapshot()->contains(part));
    m.command("exit c1");
    EXPECT_FALSE(sib.space().snapshot()->contains(part));
    m.command("juggle");
    m.command("new");
    auto lines = out.all();
    EXPECT_EQ(lines.at(3), "unknown command: juggle");
    EXPECT_EQ(lines.at(4), "usage: new <conversation>");
}

TEST(Chat, LinkerWritesOnlyLinks) {
    Sib sib(chat_sib());
    kp::Node a("alice"), f("feed"), l("linker"), v("viewer");
    for (auto* n : {&a, &f, &l, &v})
        n->join(ep(sib), "chat");
    auto conv = chat::conversation_uri("trip");
    Lines seen, fed;
    chat::Viewer viewer(v, conv, seen.out());
    chat::WeatherLinker linker(l);
    chat::Sender sender(a, "Alice", conv);
    chat::WeatherFeed feed(f, fed.out());

    sender.send("nothing about places");
    feed.command("report hel Helsinki | 23C and sunny");
    ASSERT_TRUE(eventually([&] { return seen.size() == 1; }));
    auto before = *sib.space().snapshot();

    auto m = sender.send("I'm in Helsinki");
    ASSERT_TRUE(eventually([&] { return seen.size() == 3; }));
    EXPECT_EQ(seen.all().back(), "  23C and sunny");

    auto after = *sib.space().snapshot();
    auto r = chat::report_uri("hel");
    Graph added;
    for (const auto& t : after)
        if (!before.contains(t) && t.subject != *m && t.object != *m)
            added.insert(t);
    Graph expected{Triple(conv, chat::messages(), r), Triple(r, chat::content(), Term::literal("23C and sunny"))};
    EXPECT_EQ(added, expected);
    EXPECT_TRUE(after.contains(Triple(r, chat::replyTo(), *m)));

    // A second matching message adds one more replyTo and nothing else new for the viewer.
    auto m3 = sender.send("still in helsinki");
    ASSERT_TRUE(eventually([&] { return sib.space().snapshot()->contains(Triple(r, chat::replyTo(), *m3)); }));
    std::this_thread::sleep_for(std::chrono::milliseconds(50));
    EXPECT_EQ(seen.size(), 4u);
}

TEST(Scenario, ScriptParsing) {
    auto s = chat::parse_script("# c\nKP a@B chatkp viewer --conversation x\nAT 5 a hello   world\n");
    ASSERT_EQ(s.kps.size(), 1u);
    EXPECT_EQ(s.kps[0].sib, "B");
    EXPECT_EQ(s.kps[0].args, (std::vector<std::string>{"viewer", "--conversation", "x"}));
    EXPECT_EQ(s.actions[0].command, "hello   world");
    EXPECT_FALSE(s.config_text.empty());
    EXPECT_THROW(chat::parse_script("AT 0 ghost hi\n"), chat::scenario_error);
    EXPECT_THROW(chat::parse_script("KP a x\nAT 9 a x\nAT 3 a y\n"), chat::scenario_error);
    EXPECT_THROW(chat::parse_script("JUMP\n"), chat::scenario_error);
}

TEST(Scenario, CompareTranscripts) {
    EXPECT_EQ(chat::compare_transcripts({"a", "b"}, {"a", "b"}), "");
    EXPECT_NE(chat::compare_transcripts({"a", "b"}, {"a", "c"}).find("line 2"), std::string::npos);
    EXPECT_NE(chat::compare_transcripts({"a"}, {"a", "x"}).find("extra"), std::string::npos);
}
