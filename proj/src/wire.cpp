#include "sedvice/wire.hpp"

#include <array>

namespace sedvice::wire {

namespace {

constexpr std::array<std::string_view, 23> kind_names = {
    "JOIN",      "JOIN_OK",      "JOIN_REFUSED", "LEAVE",          "LEAVE_OK",
    "UPDATE",    "UPDATE_OK",    "QUERY",        "QUERY_RESULT",   "SUBSCRIBE",
    "SUBSCRIBE_OK", "NOTIFY",    "UNSUBSCRIBE",  "UNSUBSCRIBE_OK", "INVITE",
    "REMOVE",    "ERROR",        "PEER_HELLO",   "PEER_SYNC",      "PEER_QUERY",
    "PEER_RESULT", "PEER_SUB",   "PEER_NOTIFY",
};

[[noreturn]] void bad_body(Kind k, const std::string& why) {
    throw wire_error(ErrorCode::BadBody, std::string(kind_name(k)) + " body: " + why);
}

} // namespace

std::string_view kind_name(Kind k) { return kind_names[static_cast<std::size_t>(k)]; }

std::optional<Kind> kind_from_name(std::string_view name) {
    for (std::size_t i = 0; i < kind_names.size(); ++i)
        if (kind_names[i] == name)
            return static_cast<Kind>(i);
    return std::nullopt;
}

bool is_push(Kind k) {
    return k == Kind::NOTIFY || k == Kind::REMOVE || k == Kind::INVITE || k == Kind::PEER_NOTIFY;
}

std::string_view error_code_name(ErrorCode c) {
    switch (c) {
    case ErrorCode::FrameTooLarge: return "FRAME_TOO_LARGE";
    case ErrorCode::BadJson: return "BAD_JSON";
    case ErrorCode::BadKind: return "BAD_KIND";
    case ErrorCode::BadVersion: return "BAD_VERSION";
    case ErrorCode::BadBody: return "BAD_BODY";
    }
    return "UNKNOWN";
}

std::string encode_message(const Envelope& e) {
    if (e.v != protocol_version)
        throw std::invalid_argument("unsupported protocol version " + std::to_string(e.v));
    if (!e.body.is_object())
        throw std::invalid_argument("envelope body must be a JSON object");
    json j;
    j["v"] = e.v;
    j["kind"] = kind_name(e.kind);
    j["space"] = e.space;
    j["kp"] = e.kp;
    j["txid"] = e.txid;
    j["body"] = e.body;
    std::string out;
    try {
        out = j.dump();
    } catch (const json::type_error& ex) {
        throw std::invalid_argument(std::string("envelope not encodable: ") + ex.what());
    }
    out += '\n';
    return out;
}

Envelope decode_frame(std::string_view frame) {
    if (!frame.empty() && frame.back() == '\n')
        frame.remove_suffix(1);
    if (frame.size() > max_frame_bytes)
        throw wire_error(ErrorCode::FrameTooLarge, "frame exceeds " + std::to_string(max_frame_bytes) + " bytes");
    json j;
    try {
        j = json::parse(frame);
    } catch (const json::exception& ex) {
        throw wire_error(ErrorCode::BadJson, ex.what());
    }
    if (!j.is_object())
        throw wire_error(ErrorCode::BadJson, "frame is not a JSON object");

    auto v = j.find("v");
    if (v == j.end() || !v->is_number_integer() || v->get<std::int64_t>() != protocol_version)
        throw wire_error(ErrorCode::BadVersion, "expected protocol version 1");
    auto kind = j.find("kind");
    if (kind == j.end() || !kind->is_string())
        throw wire_error(ErrorCode::BadKind, "missing kind");
    auto k = kind_from_name(kind->get<std::string>());
    if (!k)
        throw wire_error(ErrorCode::BadKind, "unknown kind " + kind->get<std::string>());

    Envelope e;
    e.kind = *k;
    auto str_field = [&](const char* key) {
        auto it = j.find(key);
        if (it == j.end() || !it->is_string())
            throw wire_error(ErrorCode::BadBody, std::string("header field '") + key + "' must be a string");
        return it->get<std::string>();
    };
    e.space = str_field("space");
    e.kp = str_field("kp");
    auto txid = j.find("txid");
    if (txid == j.end() || !txid->is_number_unsigned())
        throw wire_error(ErrorCode::BadBody, "header field 'txid' must be a non-negative integer");
    e.txid = txid->get<std::uint64_t>();
    auto body = j.find("body");
    if (body == j.end() || !body->is_object())
        throw wire_error(ErrorCode::BadBody, "body must be an object");
    e.body = std::move(*body);
    validate_body(e.kind, e.body);
    return e;
}

namespace {

enum class T { Str, Arr, Obj, UInt, Bool, Any };

bool has_type(const json& v, T t) {
    switch (t) {
    case T::Str: return v.is_string();
    case T::Arr: return v.is_array();
    case T::Obj: return v.is_object();
    case T::UInt: return v.is_number_unsigned();
    case T::Bool: return v.is_boolean();
    case T::Any: return true;
    }
    return false;
}

void need(Kind k, const json& body, std::initializer_list<std::pair<const char*, T>> fields) {
    for (const auto& [key, type] : fields) {
        auto it = body.find(key);
        if (it == body.end())
            bad_body(k, std::string("missing '") + key + "'");
        if (!has_type(*it, type))
            bad_body(k, std::string("wrong type for '") + key + "'");
    }
}

void need_query(Kind k, const json& body) {
    need(k, body, {{"qtype", T::Str}, {"q", T::Any}});
    const auto& qt = body["qtype"].get_ref<const std::string&>();
    if (qt == "triple") {
        if (!body["q"].is_object())
            bad_body(k, "triple query must be an object");
    } else if (qt == "path") {
        if (!body["q"].is_string())
            bad_body(k, "path query must be a string");
    } else {
        bad_body(k, "unknown qtype '" + qt + "'");
    }
    if (auto ns = body.find("ns"); ns != body.end() && !ns->is_object())
        bad_body(k, "'ns' must be an object");
}

} // namespace

void validate_body(Kind k, const json& body) {
    if (!body.is_object())
        bad_body(k, "not an object");
    switch (k) {
    case Kind::JOIN:
        need(k, body, {{"credentials", T::Arr}});
        for (const auto& c : body["credentials"])
            if (!c.is_string())
                bad_body(k, "credentials must be strings");
        break;
    case Kind::JOIN_OK: need(k, body, {{"session", T::Str}, {"caps", T::Obj}}); break;
    case Kind::JOIN_REFUSED: need(k, body, {{"reason", T::Str}}); break;
    case Kind::LEAVE:
    case Kind::LEAVE_OK: break;
    case Kind::UPDATE: need(k, body, {{"insert", T::Arr}, {"retract", T::Arr}}); break;
    case Kind::UPDATE_OK: need(k, body, {{"added", T::Arr}, {"removed", T::Arr}, {"version", T::UInt}}); break;
    case Kind::QUERY:
    case Kind::SUBSCRIBE: need_query(k, body); break;
    case Kind::QUERY_RESULT:
        need(k, body, {{"qtype", T::Str}, {"results", T::Arr}, {"partial", T::Bool}, {"version", T::UInt}});
        break;
    case Kind::SUBSCRIBE_OK:
        need(k, body, {{"sub", T::Str}, {"qtype", T::Str}, {"results", T::Arr}, {"version", T::UInt}});
        break;
    case Kind::NOTIFY:
        need(k, body,
             {{"sub", T::Str}, {"qtype", T::Str}, {"added", T::Arr}, {"removed", T::Arr}, {"version", T::UInt}});
        break;
    case Kind::UNSUBSCRIBE:
    case Kind::UNSUBSCRIBE_OK: need(k, body, {{"sub", T::Str}}); break;
    case Kind::INVITE: need(k, body, {{"space", T::Str}, {"listener", T::Str}}); break;
    case Kind::REMOVE: need(k, body, {{"reason", T::Str}}); break;
    case Kind::ERROR: need(k, body, {{"code", T::Str}, {"message", T::Str}}); break;
    case Kind::PEER_HELLO: need(k, body, {{"sib", T::Str}}); break;
    case Kind::PEER_SYNC: need(k, body, {{"origin", T::Str}, {"epoch", T::UInt}, {"members", T::Arr}}); break;
    case Kind::PEER_QUERY:
        need(k, body, {{"origin", T::Str}, {"visited", T::Arr}, {"corr", T::Str}});
        need_query(k, body);
        break;
    case Kind::PEER_RESULT:
        need(k, body, {{"corr", T::Str}, {"qtype", T::Str}, {"results", T::Arr}, {"partial", T::Bool}});
        break;
    case Kind::PEER_SUB:
        need(k, body, {{"op", T::Str}, {"key", T::Str}, {"origin", T::Str}, {"visited", T::Arr}});
        if (body["op"] == "add")
            need_query(k, body);
        else if (body["op"] != "cancel")
            bad_body(k, "op must be add or cancel");
        break;
    case Kind::PEER_NOTIFY:
        need(k, body, {{"key", T::Str}, {"sib", T::Str}, {"version", T::UInt}, {"qtype", T::Str}, {"results", T::Arr}});
        break;
    }
}

json to_json(const Term& t) {
    json j;
    switch (t.kind()) {
    case TermKind::Uri: j["t"] = "uri"; break;
    case TermKind::Literal: j["t"] = "lit"; break;
    case TermKind::Blank: j["t"] = "bnode"; break;
    }
    j["v"] = t.value();
    if (t.datatype())
        j["dt"] = *t.datatype();
    return j;
}

Term term_from_json(const json& j) {
    if (!j.is_object() || !j.contains("t") || !j.contains("v") || !j["t"].is_string() || !j["v"].is_string())
        throw wire_error(ErrorCode::BadBody, "malformed term");
    const auto& t = j["t"].get_ref<const std::string&>();
    const auto& v = j["v"].get_ref<const std::string&>();
    try {
        if (t == "uri")
            return Term::uri(v);
        if (t == "bnode")
            return Term::blank(v);
        if (t == "lit") {
            if (auto dt = j.find("dt"); dt != j.end()) {
                if (!dt->is_string())
                    throw wire_error(ErrorCode::BadBody, "literal datatype must be a string");
                return Term::literal(v, dt->get<std::string>());
            }
            return Term::literal(v);
        }
    } catch (const rdf_error& e) {
        throw wire_error(ErrorCode::BadBody, e.what());
    }
    throw wire_error(ErrorCode::BadBody, "unknown term type '" + t + "'");
}

json to_json(const Triple& t) {
    json j;
    j["s"] = to_json(t.subject);
    j["p"] = to_json(t.predicate);
    j["o"] = to_json(t.object);
    return j;
}

Triple triple_from_json(const json& j) {
    if (!j.is_object() || !j.contains("s") || !j.contains("p") || !j.contains("o"))
        throw wire_error(ErrorCode::BadBody, "malformed triple");
    try {
        return Triple(term_from_json(j["s"]), term_from_json(j["p"]), term_from_json(j["o"]));
    } catch (const rdf_error& e) {
        throw wire_error(ErrorCode::BadBody, e.what());
    }
}

json to_json(const Graph& g) {
    json arr = json::array();
    for (const auto& t : g)
        arr.push_back(to_json(t));
    return arr;
}

Graph graph_from_json(const json& j) {
    if (!j.is_array())
        throw wire_error(ErrorCode::BadBody, "graph must be an array");
    Graph g;
    for (const auto& t : j)
        g.insert(triple_from_json(t));
    return g;
}

namespace {

json slot_to_json(const PatternSlot& s) {
    if (const auto* t = std::get_if<Term>(&s))
        return to_json(*t);
    if (const auto* v = std::get_if<Variable>(&s)) {
        json j;
        j["var"] = v->name;
        return j;
    }
    return nullptr;
}

PatternSlot slot_from_json(const json& j) {
    if (j.is_null())
        return Wildcard{};
    if (j.is_object() && j.contains("var")) {
        if (!j["var"].is_string() || j["var"].get_ref<const std::string&>().empty())
            throw wire_error(ErrorCode::BadBody, "variable name must be a non-empty string");
        return Variable{j["var"].get<std::string>()};
    }
    return term_from_json(j);
}

} // namespace

json to_json(const TriplePattern& p) {
    json j;
    j["s"] = slot_to_json(p.subject);
    j["p"] = slot_to_json(p.predicate);
    j["o"] = slot_to_json(p.object);
    return j;
}

TriplePattern pattern_from_json(const json& j) {
    if (!j.is_object())
        throw wire_error(ErrorCode::BadBody, "pattern must be an object");
    auto get = [&](const char* k) { return j.contains(k) ? slot_from_json(j[k]) : PatternSlot{Wildcard{}}; };
    return TriplePattern{get("s"), get("p"), get("o")};
}

std::string_view qtype_name(QueryType t) { return t == QueryType::Triple ? "triple" : "path"; }

QueryType qtype_from_name(std::string_view s) {
    if (s == "triple")
        return QueryType::Triple;
    if (s == "path")
        return QueryType::Path;
    throw wire_error(ErrorCode::BadBody, "unknown qtype '" + std::string(s) + "'");
}

json query_body(const Query& q) {
    json j;
    j["qtype"] = qtype_name(query_type(q));
    if (const auto* p = std::get_if<TriplePattern>(&q))
        j["q"] = to_json(*p);
    else
        j["q"] = render(std::get<PathQuery>(q));
    return j;
}

Query query_from_body(const json& body, const NamespaceTable& ns) {
    if (!body.contains("qtype") || !body["qtype"].is_string() || !body.contains("q"))
        throw wire_error(ErrorCode::BadBody, "query needs qtype and q");
    auto type = qtype_from_name(body["qtype"].get<std::string>());
    if (type == QueryType::Triple)
        return pattern_from_json(body["q"]);
    if (!body["q"].is_string())
        throw wire_error(ErrorCode::BadBody, "path query must be a string");
    NamespaceTable table = ns;
    if (auto extra = body.find("ns"); extra != body.end() && extra->is_object()) {
        for (const auto& [prefix, base] : extra->items()) {
            if (!base.is_string())
                throw wire_error(ErrorCode::BadBody, "namespace base must be a string");
            try {
                table.add(prefix, base.get<std::string>());
            } catch (const rdf_error& e) {
                throw wire_error(ErrorCode::BadBody, e.what());
            }
        }
    }
    return parse_path_query(body["q"].get<std::string>(), table);
}

json rows_to_json(const QueryResult& r) {
    json rows = json::array();
    if (r.type == QueryType::Triple) {
        for (const auto& b : r.bindings) {
            json row = json::object();
            for (const auto& [var, term] : b)
                row[var] = to_json(term);
            rows.push_back(std::move(row));
        }
    } else {
        for (const auto& t : r.terms)
            rows.push_back(to_json(t));
    }
    return rows;
}

QueryResult rows_from_json(QueryType type, const json& rows) {
    if (!rows.is_array())
        throw wire_error(ErrorCode::BadBody, "results must be an array");
    QueryResult r = empty_result(type);
    for (const auto& row : rows) {
        if (type == QueryType::Triple) {
            if (!row.is_object())
                throw wire_error(ErrorCode::BadBody, "binding row must be an object");
            Binding b;
            for (const auto& [var, term] : row.items())
                b.emplace(var, term_from_json(term));
            r.bindings.insert(std::move(b));
        } else {
            r.terms.insert(term_from_json(row));
        }
    }
    return r;
}

json join_body(const std::vector<std::string>& credentials) {
    json j;
    j["credentials"] = credentials;
    return j;
}

json update_body(const Graph& insert, const Graph& retract) {
    json j;
    j["insert"] = to_json(insert);
    j["retract"] = to_json(retract);
    return j;
}

json error_body(std::string_view code, std::string_view message) {
    json j;
    j["code"] = code;
    j["message"] = message;
    return j;
}

} // namespace sedvice::wire
