#include "sedvice/config.hpp"
#include "sedvice/federation.hpp"

#include <gtest/gtest.h>

using namespace sedvice;

TEST(Config, SingleSib) {
    auto c = parse_config(R"(# chat space
space = chat
sib = A
listener = tcp:127.0.0.1:7001
listener = tcp:127.0.0.1:7002
policy = deny mallory eve
reasoner_class = type-inheritance noop
reasoner_class = noop
reasoning_batch = 3
namespace = chat http://sedspace.example/chat#
peer = B tcp:10.0.0.2:7001
peer_timeout_ms = 500
)");
    ASSERT_EQ(c.size(), 1u);
    const auto& s = c[0];
    EXPECT_EQ(s.space, "chat");
    EXPECT_EQ(s.sib_id, "A");
    EXPECT_EQ(s.listeners.size(), 2u);
    EXPECT_EQ(s.listeners[1].port, 7002);
    EXPECT_TRUE(s.policy("alice", {}) == std::nullopt);
    EXPECT_TRUE(s.policy("eve", {}).has_value());
    ASSERT_EQ(s.schedule.classes.size(), 2u);
    EXPECT_EQ(s.schedule.classes[0].size(), 2u);
    EXPECT_EQ(s.reasoning_batch, 3u);
    EXPECT_EQ(s.namespaces.expand("chat#Message"), "http://sedspace.example/chat#Message");
    ASSERT_EQ(s.peers.size(), 1u);
    EXPECT_EQ(s.peers[0].endpoint->host, "10.0.0.2");
    EXPECT_EQ(s.peer_timeout.count(), 500);
}

TEST(Config, SectionsInheritDefaults) {
    auto c = parse_config(R"(space = chat
policy = allow alice
[sib A]
listener = tcp:127.0.0.1:0
peer = B
[sib B]
listener = tcp:127.0.0.1:0
)");
    ASSERT_EQ(c.size(), 2u);
    EXPECT_EQ(c[1].space, "chat");
    EXPECT_TRUE(c[1].policy("bob", {}).has_value());
    EXPECT_FALSE(c[0].peers[0].endpoint);
    EXPECT_TRUE(c[1].peers.empty());
}

TEST(Config, Rejections) {
    auto bad = [](const char* text) {
        try {
            parse_config(text);
        } catch (const config_error& e) {
            return std::string(e.what());
        }
        return std::string("accepted");
    };
    EXPECT_NE(bad("space = s\n").find("no listener"), std::string::npos);
    EXPECT_NE(bad("listener = tcp:h:1\nlistener = tcp:h:1\n").find("duplicate listener"), std::string::npos);
    EXPECT_NE(bad("sib = A\nlistener = tcp:h:1\npeer = A\n").find("itself"), std::string::npos);
    EXPECT_NE(bad("[sib A]\nlistener = tcp:h:1\n[sib A]\nlistener = tcp:h:2\n").find("duplicate SIB"),
              std::string::npos);
    EXPECT_NE(bad("[sib A]\nlistener = tcp:h:1\npeer = Z\n").find("no endpoint"), std::string::npos);
    EXPECT_NE(bad("listener = tcp:h:1\nreasoner_class = oracle\n").find("line 2"), std::string::npos);
    EXPECT_NE(bad("listener = udp:h:1\n").find("line 1"), std::string::npos);
    EXPECT_NE(bad("listener = tcp:h:1\ncolour = blue\n").find("unknown key"), std::string::npos);
    EXPECT_NE(bad("listener tcp:h:1\n").find("key = value"), std::string::npos);
    EXPECT_EQ(bad("listener = tcp:h:0\nlistener = tcp:h:0\n"), "accepted");
}

TEST(Routing, TableRejectsSelfAndDuplicates) {
    RoutingTable t("A");
    EXPECT_THROW(t.add("A", {"h", 1}), std::invalid_argument);
    EXPECT_TRUE(t.add("B", {"h", 2}));
    EXPECT_FALSE(t.add("B", {"h", 3}));
    EXPECT_EQ(t.address("B")->port, 2);
    EXPECT_TRUE(t.remove("B"));
    EXPECT_FALSE(t.contains("B"));
}

TEST(Routing, Reachability) {
    std::map<SibId, std::set<SibId>> line{{"A", {"B"}}, {"B", {"C"}}};
    EXPECT_EQ(reachable_sibs(line, "A"), (std::set<SibId>{"A", "B", "C"}));
    EXPECT_EQ(reachable_sibs(line, "C"), (std::set<SibId>{"C"}));
    std::map<SibId, std::set<SibId>> cycle{{"A", {"B"}}, {"B", {"C"}}, {"C", {"A"}}};
    EXPECT_EQ(reachable_sibs(cycle, "B").size(), 3u);
}

TEST(Routing, TokenNeverRevisits) {
    QueryToken t{"A", {}, "c"};
    auto targets = forward_targets(t, {"B", "C"});
    auto visited = forward_visited(t, "A", targets);
    EXPECT_EQ(visited, (std::set<SibId>{"A", "B", "C"}));
    QueryToken at_b{"A", visited, "c"};
    EXPECT_TRUE(forward_targets(at_b, {"A", "C"}).empty());
    EXPECT_EQ(forward_targets(at_b, {"A", "D"}), std::set<SibId>{"D"});
}

TEST(Membership, NewerEpochWins) {
    MembershipView v;
    EXPECT_TRUE(v.apply("A", 2, {{"alice", "A/1", {}, SessionState::Joined}, {"bob", "A/2", {}, SessionState::Left}}));
    EXPECT_TRUE(v.knows_kp("alice"));
    EXPECT_FALSE(v.knows_kp("bob"));
    EXPECT_FALSE(v.apply("A", 2, {}));
    EXPECT_FALSE(v.apply("A", 1, {}));
    EXPECT_TRUE(v.knows_kp("alice"));
    EXPECT_TRUE(v.apply("A", 3, {}));
    EXPECT_FALSE(v.knows_kp("alice"));
    auto back = members_from_json(members_to_json({{"k", "s", {"c"}, SessionState::Joined}}));
    ASSERT_EQ(back.size(), 1u);
    EXPECT_EQ(back[0].credentials, std::vector<std::string>{"c"});
}
