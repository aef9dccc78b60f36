#pragma once
// Newline-delimited JSON framing shared by KP<->SIB and SIB<->SIB traffic.
//
// A frame is one JSON object on one line:
//   {"v":1,"kind":K,"space":S,"kp":P,"txid":N,"body":{...}}\n
// Keys appear in exactly that order with no insignificant whitespace, so
// equal envelopes always encode to identical bytes.

#include "sedvice/query.hpp"
#include "sedvice/rdf.hpp"

#include "json.hpp"

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace sedvice::wire {

using json = nlohmann::ordered_json;

inline constexpr int protocol_version = 1;
inline constexpr std::size_t max_frame_bytes = 16u * 1024u * 1024u;

enum class Kind {
    JOIN,
    JOIN_OK,
    JOIN_REFUSED,
    LEAVE,
    LEAVE_OK,
    UPDATE,
    UPDATE_OK,
    QUERY,
    QUERY_RESULT,
    SUBSCRIBE,
    SUBSCRIBE_OK,
    NOTIFY,
    UNSUBSCRIBE,
    UNSUBSCRIBE_OK,
    INVITE,
    REMOVE,
    ERROR,
    PEER_HELLO,
    PEER_SYNC,
    PEER_QUERY,
    PEER_RESULT,
    PEER_SUB,
    PEER_NOTIFY,
};

inline constexpr Kind all_kinds[] = {
    Kind::JOIN,      Kind::JOIN_OK,      Kind::JOIN_REFUSED, Kind::LEAVE,          Kind::LEAVE_OK,
    Kind::UPDATE,    Kind::UPDATE_OK,    Kind::QUERY,        Kind::QUERY_RESULT,   Kind::SUBSCRIBE,
    Kind::SUBSCRIBE_OK, Kind::NOTIFY,    Kind::UNSUBSCRIBE,  Kind::UNSUBSCRIBE_OK, Kind::INVITE,
    Kind::REMOVE,    Kind::ERROR,        Kind::PEER_HELLO,   Kind::PEER_SYNC,      Kind::PEER_QUERY,
    Kind::PEER_RESULT, Kind::PEER_SUB,   Kind::PEER_NOTIFY,
};

std::string_view kind_name(Kind k);
std::optional<Kind> kind_from_name(std::string_view name);

// Frames the peer sends without a matching request.
bool is_push(Kind k);

struct Envelope {
    int v = protocol_version;
    Kind kind = Kind::ERROR;
    std::string space;
    std::string kp;
    std::uint64_t txid = 0;
    json body = json::object();

    friend bool operator==(const Envelope&, const Envelope&) = default;
};

enum class ErrorCode { FrameTooLarge, BadJson, BadKind, BadVersion, BadBody };

std::string_view error_code_name(ErrorCode c);

class wire_error : public std::runtime_error {
public:
    wire_error(ErrorCode code, const std::string& msg) : std::runtime_error(msg), code_(code) {}
    ErrorCode code() const noexcept { return code_; }
    // The byte stream cannot be trusted after this error.
    bool corrupts_stream() const noexcept { return code_ == ErrorCode::FrameTooLarge; }

private:
    ErrorCode code_;
};

// Throws std::invalid_argument if the envelope cannot be represented
// (wrong version, non-object body, invalid UTF-8).
std::string encode_message(const Envelope& e);

// Accepts one line with or without its trailing LF. Checks size, JSON,
// version, kind, header field types and the body shape for the kind.
Envelope decode_frame(std::string_view frame);

// Body shape check for one kind; throws wire_error(BadBody).
void validate_body(Kind kind, const json& body);

// --- codecs for domain values ---

json to_json(const Term& t);
Term term_from_json(const json& j);
json to_json(const Triple& t);
Triple triple_from_json(const json& j);
json to_json(const Graph& g);
Graph graph_from_json(const json& j);

// Pattern slot: a term object, {"var":name}, or null for a wildcard.
json to_json(const TriplePattern& p);
TriplePattern pattern_from_json(const json& j);

std::string_view qtype_name(QueryType t);
QueryType qtype_from_name(std::string_view s);

// {"qtype":..., "q":...}; path queries travel as rendered text.
json query_body(const Query& q);
// Reads "qtype"/"q" (and an optional "ns" prefix map) from a QUERY,
// SUBSCRIBE, PEER_QUERY or PEER_SUB body. Throws parse_error for bad path
// text and wire_error(BadBody) for shape problems.
Query query_from_body(const json& body, const NamespaceTable& ns);

// Result rows: binding objects for triple queries, term objects for path queries.
json rows_to_json(const QueryResult& r);
QueryResult rows_from_json(QueryType type, const json& rows);

// --- body builders for the common kinds (keys in fixed order) ---

json join_body(const std::vector<std::string>& credentials);
json update_body(const Graph& insert, const Graph& retract);
json error_body(std::string_view code, std::string_view message);

} // namespace sedvice::wire
