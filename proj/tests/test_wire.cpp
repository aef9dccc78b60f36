#include "wire_samples.hpp"

#include <gtest/gtest.h>

#include <set>

using namespace sedvice;
using namespace sedvice::wire;

TEST(Wire, LeaveGoldenBytes) {
    Envelope e;
    e.kind = Kind::LEAVE;
    e.space = "s1";
    e.kp = "k1";
    e.txid = 7;
    const std::string bytes = R"({"v":1,"kind":"LEAVE","space":"s1","kp":"k1","txid":7,"body":{}})"
                              "\n";
    EXPECT_EQ(encode_message(e), bytes);
    EXPECT_EQ(decode_frame(bytes), e);
}

TEST(Wire, GoldenSampleForEveryKind) {
    auto samples = wire_samples::goldens();
    std::set<Kind> covered;
    for (const auto& g : samples) {
        SCOPED_TRACE(std::string(kind_name(g.env.kind)));
        EXPECT_EQ(encode_message(g.env), g.bytes);
        EXPECT_EQ(decode_frame(g.bytes), g.env);
        covered.insert(g.env.kind);
    }
    EXPECT_EQ(covered.size(), std::size(all_kinds));
}

TEST(Wire, LineFeedInStringIsEscaped) {
    Envelope e;
    e.kind = Kind::REMOVE;
    e.body = json::object({{"reason", "line one\nline two"}});
    auto bytes = encode_message(e);
    EXPECT_EQ(bytes.find('\n'), bytes.size() - 1);
    EXPECT_NE(bytes.find(R"(line one\nline two)"), std::string::npos);
    EXPECT_EQ(decode_frame(bytes), e);
}

TEST(Wire, RoundTripGenerated) {
    wire_samples::Generator gen(42);
    for (int i = 0; i < 10000; ++i) {
        auto e = gen.envelope();
        auto bytes = encode_message(e);
        ASSERT_EQ(bytes.find('\n'), bytes.size() - 1);
        ASSERT_EQ(decode_frame(bytes), e) << bytes;
        ASSERT_EQ(encode_message(decode_frame(bytes)), bytes);
    }
}

namespace {
ErrorCode code_of(std::string_view frame) {
    try {
        decode_frame(frame);
    } catch (const wire_error& e) {
        return e.code();
    }
    ADD_FAILURE() << "decoded: " << frame;
    return ErrorCode::BadBody;
}
} // namespace

TEST(Wire, MalformedInputCodes) {
    EXPECT_EQ(code_of("not json\n"), ErrorCode::BadJson);
    EXPECT_EQ(code_of("[1,2]\n"), ErrorCode::BadJson);
    EXPECT_EQ(code_of(R"({"v":1,"kind":"FOO","space":"s","kp":"k","txid":1,"body":{}})"), ErrorCode::BadKind);
    EXPECT_EQ(code_of(R"({"v":2,"kind":"LEAVE","space":"s","kp":"k","txid":1,"body":{}})"), ErrorCode::BadVersion);
    EXPECT_EQ(code_of(R"({"kind":"LEAVE","space":"s","kp":"k","txid":1,"body":{}})"), ErrorCode::BadVersion);
    EXPECT_EQ(code_of(R"({"v":1,"kind":"REMOVE","space":"s","kp":"k","txid":1,"body":{}})"), ErrorCode::BadBody);
    EXPECT_EQ(code_of(R"({"v":1,"kind":"LEAVE","space":"s","kp":"k","txid":-1,"body":{}})"), ErrorCode::BadBody);
    EXPECT_EQ(code_of(R"({"v":1,"kind":"QUERY","space":"s","kp":"k","txid":1,"body":{"qtype":"sql","q":""}})"),
              ErrorCode::BadBody);

    std::string big(max_frame_bytes + 1, ' ');
    try {
        decode_frame(big);
        FAIL();
    } catch (const wire_error& e) {
        EXPECT_EQ(e.code(), ErrorCode::FrameTooLarge);
        EXPECT_TRUE(e.corrupts_stream());
    }
    EXPECT_EQ(error_code_name(ErrorCode::BadJson), "BAD_JSON");
    EXPECT_EQ(error_code_name(ErrorCode::BadKind), "BAD_KIND");
    EXPECT_EQ(error_code_name(ErrorCode::BadVersion), "BAD_VERSION");
    EXPECT_EQ(error_code_name(ErrorCode::FrameTooLarge), "FRAME_TOO_LARGE");
}

TEST(Wire, EncodeRejectsInvalidEnvelope) {
    Envelope e;
    e.kind = Kind::LEAVE;
    e.v = 2;
    EXPECT_THROW(encode_message(e), std::invalid_argument);
    e.v = 1;
    e.body = json::array();
    EXPECT_THROW(encode_message(e), std::invalid_argument);
    e.body = json::object({{"reason", "\xff"}});
    EXPECT_THROW(encode_message(e), std::invalid_argument);
}

TEST(Wire, DomainCodecsRoundTrip) {
    Graph g{Triple(Term::uri("urn:a"), Term::uri("urn:p"), Term::literal("x", "urn:dt")),
            Triple(Term::blank("b"), Term::uri("urn:p"), Term::literal("plain"))};
    EXPECT_EQ(graph_from_json(to_json(g)), g);

    TriplePattern p{Variable{"x"}, Term::uri("urn:p"), Wildcard{}};
    EXPECT_EQ(pattern_from_json(to_json(p)), p);
    EXPECT_THROW(triple_from_json(json::parse(R"({"s":{"t":"lit","v":"a"},"p":{"t":"uri","v":"urn:p"},"o":{"t":"uri","v":"urn:b"}})")),
                 wire_error);

    auto ns = NamespaceTable::standard();
    ns.add("ns", "http://example.org/ns#");
    Query q = parse_path_query("ns#Conversation | (:inv !rdf:type)", ns);
    auto body = query_body(q);
    EXPECT_EQ(body["qtype"], "path");
    auto back = query_from_body(body, NamespaceTable{});
    EXPECT_EQ(render(std::get<PathQuery>(back)), render(std::get<PathQuery>(q)));

    json with_ns = json::parse(R"J({"qtype":"path","q":"x#a | (:seq x#b)","ns":{"x":"urn:x/"}})J");
    auto pq = std::get<PathQuery>(query_from_body(with_ns, NamespaceTable{}));
    EXPECT_EQ(pq.start, Term::uri("urn:x/a"));

    QueryResult r = empty_result(QueryType::Triple);
    r.bindings.insert(Binding{{"x", Term::uri("urn:a")}});
    r.bindings.insert(Binding{});
    EXPECT_EQ(rows_from_json(QueryType::Triple, rows_to_json(r)).bindings, r.bindings);
    QueryResult t = empty_result(QueryType::Path);
    t.terms = {Term::uri("urn:a"), Term::literal("l")};
    EXPECT_EQ(rows_from_json(QueryType::Path, rows_to_json(t)).terms, t.terms);
}
