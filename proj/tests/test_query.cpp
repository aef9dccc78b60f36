#include "oracles.hpp"
#include "sedvice/query.hpp"

#include <gtest/gtest.h>

using namespace sedvice;

namespace {

const std::string chat = "http://sedspace.example/chat#";
Term u(const std::string& s) { return Term::uri(s); }
Term c(const std::string& local) { return Term::uri(chat + local); }

NamespaceTable chat_ns() {
    NamespaceTable ns = NamespaceTable::standard();
    ns.add("ns", chat);
    ns.add("chat", chat);
    ns.add("", chat);
    return ns;
}

// Two conversations, xyz holding two messages.
Graph chat_instance() {
    return Graph{
        Triple(c("xyz"), vocab::rdf_type(), c("Conversation")),
        Triple(c("c2"), vocab::rdf_type(), c("Conversation")),
        Triple(c("xyz"), c("messages"), c("m1")),
        Triple(c("xyz"), c("messages"), c("m2")),
        Triple(c("c2"), c("messages"), c("m3")),
        Triple(c("m1"), c("writer"), Term::literal("Alice")),
        Triple(c("m1"), c("content"), Term::literal("I'm in Helsinki")),
        Triple(c("m2"), c("writer"), Term::literal("Bob")),
        Triple(c("m2"), c("content"), Term::literal("Nice")),
        Triple(c("m2"), c("replyTo"), c("m1")),
    };
}

} // namespace

TEST(ParsePathQuery, ConversationListQueryVerbatim) {
    auto q = parse_path_query("ns#Conversation | (:inv !rdf:type)", chat_ns());
    EXPECT_EQ(q.start, c("Conversation"));
    EXPECT_EQ(q.path, PathExpr::inv(PathExpr::arc(vocab::rdf_type())));
}

TEST(ParsePathQuery, MessagesQueryVerbatim) {
    auto q = parse_path_query("xyz | (:seq messages)", chat_ns());
    EXPECT_EQ(q.start, c("xyz"));
    EXPECT_EQ(q.path, PathExpr::seq({PathExpr::arc(c("messages"))}));
}

TEST(ParsePathQuery, UnbalancedParenReportsEndOfInput) {
    std::string text = "x | (:seq";
    try {
        parse_path_query(text, chat_ns());
        FAIL() << "expected parse_error";
    } catch (const parse_error& e) {
        EXPECT_EQ(e.position(), text.size());
    }
}

TEST(ParsePathQuery, Errors) {
    auto ns = chat_ns();
    auto pos_of = [&](const std::string& text) -> std::size_t {
        try {
            parse_path_query(text, ns);
        } catch (const parse_error& e) {
            return e.position();
        }
        return std::string::npos;
    };
    EXPECT_EQ(pos_of("x | (:bogus a)"), 5u);
    EXPECT_EQ(pos_of("x | (:seq nope#a)"), 10u);
    EXPECT_EQ(pos_of("x |"), 3u);
    EXPECT_EQ(pos_of("x | (:inv a b)"), 5u);
    EXPECT_EQ(pos_of("x | (:or a)"), 5u);
    EXPECT_EQ(pos_of("x | a )"), 6u);
    EXPECT_EQ(pos_of("x | (:seq)"), 5u);
    EXPECT_EQ(pos_of("x (:seq a)"), 2u);
}

TEST(ParsePathQuery, WhitespaceInsensitiveAndUriForms) {
    auto a = parse_path_query("  <urn:x>|(:seq   !<urn:p>(:rep* rdf:type)  )", chat_ns());
    auto b = parse_path_query("<urn:x> | (:seq <urn:p> (:rep* !rdf:type))", chat_ns());
    EXPECT_EQ(a, b);
    EXPECT_EQ(a.path.parts.size(), 2u);
}

TEST(ParsePathQuery, RenderRoundTrips) {
    std::mt19937 rng(9);
    auto v = oracle::Vocabulary::small();
    for (int i = 0; i < 200; ++i) {
        PathQuery q{v.nodes[0], oracle::random_path(rng, v, 4)};
        ASSERT_EQ(parse_path_query(render(q), NamespaceTable{}), q) << render(q);
    }
}

TEST(Closure, SubclassTransitivity) {
    Graph base{Triple(u("urn:a"), vocab::rdfs_subclass_of(), u("urn:b")),
               Triple(u("urn:b"), vocab::rdfs_subclass_of(), u("urn:c"))};
    auto idx = compute_closure(base);
    EXPECT_TRUE(idx.derived().contains(Triple(u("urn:a"), vocab::rdfs_subclass_of(), u("urn:c"))));
    EXPECT_EQ(idx.derived(), oracle::naive_closure(base));
    EXPECT_EQ(idx.superclasses(u("urn:a")), (std::set<Term>{u("urn:b"), u("urn:c")}));
}

TEST(Closure, SameAsSubstitution) {
    Graph base{Triple(u("urn:x"), vocab::owl_same_as(), u("urn:y")), Triple(u("urn:x"), u("urn:p"), u("urn:o"))};
    auto idx = compute_closure(base);
    EXPECT_TRUE(idx.derived().contains(Triple(u("urn:y"), u("urn:p"), u("urn:o"))));
    EXPECT_TRUE(idx.same_as(u("urn:x"), u("urn:y")));
    EXPECT_EQ(idx.derived(), oracle::naive_closure(base));
}

TEST(Closure, NoRulesFireLeavesBase) {
    Graph base = chat_instance();
    EXPECT_EQ(compute_closure(base).derived(), base);
}

TEST(Closure, SameAsOnPredicatesFeedsBackIntoRules) {
    // rdf:type declared equivalent to a custom predicate; the custom-typed
    // fact must then inherit through the subclass edge.
    Graph base{Triple(u("urn:isa"), vocab::owl_same_as(), vocab::rdf_type()),
               Triple(u("urn:x"), u("urn:isa"), u("urn:A")),
               Triple(u("urn:A"), vocab::rdfs_subclass_of(), u("urn:B"))};
    auto idx = compute_closure(base);
    EXPECT_TRUE(idx.derived().contains(Triple(u("urn:x"), vocab::rdf_type(), u("urn:B"))));
    EXPECT_TRUE(idx.derived().contains(Triple(u("urn:x"), u("urn:isa"), u("urn:B"))));
    EXPECT_EQ(idx.derived(), oracle::naive_closure(base));
}

TEST(Closure, EqualsNaiveFixpointOnRandomGraphs) {
    std::mt19937 rng(21);
    auto v = oracle::Vocabulary::small(6);
    for (int i = 0; i < 200; ++i) {
        Graph g = oracle::random_graph(rng, v, 40);
        ASSERT_EQ(compute_closure(g).derived(), oracle::naive_closure(g)) << to_text(g);
    }
}

TEST(Closure, SameAsClassesArePartitions) {
    std::mt19937 rng(2);
    auto v = oracle::Vocabulary::small(6);
    for (int i = 0; i < 50; ++i) {
        auto idx = compute_closure(oracle::random_graph(rng, v, 30));
        for (const auto& a : v.nodes) {
            EXPECT_TRUE(idx.same_as(a, a));
            for (const auto& b : v.nodes) {
                EXPECT_EQ(idx.same_as(a, b), idx.same_as(b, a));
                for (const auto& c3 : v.nodes)
                    if (idx.same_as(a, b) && idx.same_as(b, c3))
                        EXPECT_TRUE(idx.same_as(a, c3));
            }
        }
    }
}

TEST(TripleQuery, DirectMatch) {
    Graph g{Triple(c("c1"), vocab::rdf_type(), c("Conversation"))};
    auto r = eval_triple_query(g, TriplePattern{Variable{"c"}, vocab::rdf_type(), c("Conversation")});
    ASSERT_EQ(r.bindings.size(), 1u);
    EXPECT_EQ(r.bindings.begin()->at("c"), c("c1"));
}

TEST(TripleQuery, NeverSeesClosure) {
    Graph g{Triple(c("c1"), vocab::rdf_type(), c("GroupConversation")),
            Triple(c("GroupConversation"), vocab::rdfs_subclass_of(), c("Conversation"))};
    auto pattern = TriplePattern{Variable{"c"}, vocab::rdf_type(), c("Conversation")};
    EXPECT_TRUE(eval_triple_query(g, pattern).empty());
    // the closure oracle does derive it
    EXPECT_TRUE(oracle::naive_closure(g).contains(Triple(c("c1"), vocab::rdf_type(), c("Conversation"))));
    EXPECT_TRUE(eval_triple_query(Graph{}, TriplePattern{}).empty());
}

TEST(PathQuery, ConversationList) {
    auto q = parse_path_query("ns#Conversation | (:inv !rdf:type)", chat_ns());
    auto r = eval_path_query(chat_instance(), q);
    EXPECT_EQ(r.terms, (std::set<Term>{c("xyz"), c("c2")}));
    EXPECT_EQ(r.type, QueryType::Path);
}

TEST(PathQuery, MessagesThenPerMessageFields) {
    Graph g = chat_instance();
    auto ns = chat_ns();
    auto msgs = eval_path_query(g, parse_path_query("xyz | (:seq messages)", ns));
    EXPECT_EQ(msgs.terms, (std::set<Term>{c("m1"), c("m2")}));
    std::vector<std::string> rendered;
    for (const auto& m : msgs.terms) {
        PathQuery writer{m, PathExpr::seq({PathExpr::arc(c("writer"))})};
        PathQuery content{m, PathExpr::seq({PathExpr::arc(c("content"))})};
        rendered.push_back(eval_path_query(g, writer).terms.begin()->value() + ": " +
                           eval_path_query(g, content).terms.begin()->value());
    }
    EXPECT_EQ(rendered, (std::vector<std::string>{"Alice: I'm in Helsinki", "Bob: Nice"}));
    PathQuery reply{c("m2"), PathExpr::seq({PathExpr::arc(c("replyTo"))})};
    EXPECT_EQ(eval_path_query(g, reply).terms, std::set<Term>{c("m1")});
}

TEST(PathQuery, EmptyStoreAndUnknownStart) {
    auto q = parse_path_query("ns#Conversation | (:inv !rdf:type)", chat_ns());
    EXPECT_TRUE(eval_path_query(Graph{}, q).empty());
    EXPECT_TRUE(eval_path_query(chat_instance(), PathQuery{u("urn:nobody"), PathExpr::rep_star(PathExpr::arc(c("messages")))}).empty());
}

TEST(PathQuery, SubclassInstancesIncluded) {
    Graph g = chat_instance();
    g.insert(Triple(c("c3"), vocab::rdf_type(), c("GroupConversation")));
    g.insert(Triple(c("GroupConversation"), vocab::rdfs_subclass_of(), c("Conversation")));
    auto q = parse_path_query("ns#Conversation | (:inv !rdf:type)", chat_ns());
    auto r = eval_path_query(g, q);
    EXPECT_TRUE(r.terms.contains(c("c3")));
    EXPECT_EQ(r.terms, oracle::brute_path(g, q));
}

TEST(PathQuery, EqualsBruteForceRelations) {
    std::mt19937 rng(77);
    auto v = oracle::Vocabulary::small(5);
    for (int i = 0; i < 300; ++i) {
        Graph g = oracle::random_graph(rng, v, 40);
        PathQuery q{v.nodes[std::uniform_int_distribution<std::size_t>(0, v.nodes.size() - 1)(rng)],
                    oracle::random_path(rng, v, 4)};
        ASSERT_EQ(eval_path_query(g, q).terms, oracle::brute_path(g, q)) << render(q) << "\n" << to_text(g);
    }
}

TEST(PathQuery, InverseIsAnInvolution) {
    std::mt19937 rng(8);
    auto v = oracle::Vocabulary::small(5);
    for (int i = 0; i < 100; ++i) {
        Graph g = oracle::random_graph(rng, v, 30);
        auto e = oracle::random_path(rng, v, 3);
        PathQuery once{v.nodes[0], e};
        PathQuery twice{v.nodes[0], PathExpr::inv(PathExpr::inv(e))};
        ASSERT_EQ(eval_path_query(g, once), eval_path_query(g, twice));
    }
}

TEST(ResultOps, DiffApplyRoundTrip) {
    QueryResult a = empty_result(QueryType::Path), b = empty_result(QueryType::Path);
    a.terms = {c("x"), c("y")};
    b.terms = {c("y"), c("z")};
    auto d = result_diff(a, b);
    EXPECT_EQ(d.added.terms, std::set<Term>{c("z")});
    EXPECT_EQ(d.removed.terms, std::set<Term>{c("x")});
    EXPECT_EQ(result_apply(a, d), b);
    EXPECT_THROW(result_union(a, empty_result(QueryType::Triple)), std::invalid_argument);
}

TEST(ClosureCache, MemoizesPerVersion) {
    ClosureCache cache;
    Graph g = chat_instance();
    auto first = cache.get(1, g);
    EXPECT_EQ(cache.get(1, g), first);
    EXPECT_NE(cache.get(2, g), first);
}
