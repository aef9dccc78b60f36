#pragma once
// One hand-written sample per message kind with its exact encoding, and a
// random envelope generator for round-trip checks.

#include "sedvice/wire.hpp"

#include <random>
#include <string>
#include <utility>
#include <vector>

namespace sedvice::wire_samples {

using wire::json;
using wire::Kind;

struct Golden {
    wire::Envelope env;
    std::string bytes;
};

inline wire::Envelope env(Kind k, std::uint64_t txid, json body, std::string space = "s1", std::string kp = "k1") {
    wire::Envelope e;
    e.kind = k;
    e.space = std::move(space);
    e.kp = std::move(kp);
    e.txid = txid;
    e.body = std::move(body);
    return e;
}

inline json J(const char* text) { return json::parse(text); }

#define SEDVICE_TRIPLE R"({"s":{"t":"uri","v":"urn:a"},"p":{"t":"uri","v":"urn:p"},"o":{"t":"lit","v":"x\ny","dt":"urn:dt"}})"
#define SEDVICE_BTRIPLE R"({"s":{"t":"bnode","v":"m"},"p":{"t":"uri","v":"urn:p"},"o":{"t":"uri","v":"urn:b"}})"

inline std::vector<Golden> goldens() {
    std::vector<std::pair<wire::Envelope, std::string>> raw;
    auto add = [&](Kind k, std::uint64_t txid, const char* body) {
        raw.emplace_back(env(k, txid, J(body)), std::string());
        auto& last = raw.back();
        last.second = std::string(R"({"v":1,"kind":")") + std::string(wire::kind_name(k)) +
                      R"(","space":"s1","kp":"k1","txid":)" + std::to_string(txid) + R"(,"body":)" + body + "}\n";
    };
    add(Kind::JOIN, 1, R"({"credentials":["alice","token-1"]})");
    add(Kind::JOIN_OK, 1, R"({"session":"sib1/1","caps":{"invite":true,"remove":true}})");
    add(Kind::JOIN_REFUSED, 1, R"({"reason":"policy"})");
    add(Kind::LEAVE, 7, R"({})");
    add(Kind::LEAVE_OK, 7, R"({})");
    add(Kind::UPDATE, 2, R"({"insert":[)" SEDVICE_BTRIPLE R"(],"retract":[)" SEDVICE_TRIPLE R"(]})");
    add(Kind::UPDATE_OK, 2, R"({"added":[{"s":{"t":"uri","v":"urn:skolem:s1:1"},"p":{"t":"uri","v":"urn:p"},"o":{"t":"uri","v":"urn:b"}}],"removed":[],"version":3})");
    add(Kind::QUERY, 3, R"({"qtype":"triple","q":{"s":{"var":"x"},"p":{"t":"uri","v":"urn:p"},"o":null}})");
    add(Kind::QUERY_RESULT, 3, R"({"qtype":"triple","results":[{"x":{"t":"uri","v":"urn:a"}}],"partial":false,"version":3})");
    add(Kind::SUBSCRIBE, 4, R"J({"qtype":"path","q":"<urn:c> | (:seq <urn:messages>)"})J");
    add(Kind::SUBSCRIBE_OK, 4, R"({"sub":"sub-1","qtype":"path","results":[{"t":"uri","v":"urn:m1"}],"version":3})");
    add(Kind::NOTIFY, 1, R"({"sub":"sub-1","qtype":"path","added":[{"t":"uri","v":"urn:m2"}],"removed":[],"version":4})");
    add(Kind::UNSUBSCRIBE, 5, R"({"sub":"sub-1"})");
    add(Kind::UNSUBSCRIBE_OK, 5, R"({"sub":"sub-1"})");
    add(Kind::INVITE, 2, R"({"space":"s2","listener":"tcp:127.0.0.1:7001"})");
    add(Kind::REMOVE, 3, R"({"reason":"removed by k2"})");
    add(Kind::ERROR, 9, R"({"code":"UNKNOWN_SUBSCRIPTION","message":"no subscription \"sub-9\""})");
    add(Kind::PEER_HELLO, 1, R"({"sib":"A"})");
    add(Kind::PEER_SYNC, 2, R"({"origin":"A","epoch":4,"members":[{"kp":"k1","session":"A/1","credentials":["alice"],"state":"joined"}]})");
    add(Kind::PEER_QUERY, 3, R"J({"origin":"A","visited":["A","B"],"corr":"A:3","qtype":"path","q":"<urn:a> | (:rep* <urn:p>)"})J");
    add(Kind::PEER_RESULT, 3, R"({"corr":"A:3","qtype":"path","results":[{"t":"uri","v":"urn:b"}],"partial":false})");
    add(Kind::PEER_SUB, 4, R"({"op":"add","key":"A/sub-1","origin":"A","visited":["A"],"qtype":"triple","q":{"s":null,"p":null,"o":null}})");
    add(Kind::PEER_NOTIFY, 5, R"({"key":"A/sub-1","sib":"B","version":8,"qtype":"triple","results":[{}]})");
    std::vector<Golden> out;
    for (auto& [e, b] : raw)
        out.push_back({std::move(e), std::move(b)});
    return out;
}

#undef SEDVICE_TRIPLE
#undef SEDVICE_BTRIPLE

// --- generator ---

class Generator {
public:
    explicit Generator(std::uint32_t seed) : rng_(seed) {}

    wire::Envelope envelope() {
        auto k = wire::all_kinds[pick(std::size(wire::all_kinds))];
        return env(k, u64(), body(k), str(), str());
    }

private:
    std::size_t pick(std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng_); }
    bool coin() { return pick(2) == 0; }
    std::uint64_t u64() {
        switch (pick(3)) {
        case 0: return pick(10);
        case 1: return rng_();
        default: return (std::uint64_t(rng_()) << 32) | rng_();
        }
    }

    std::string str() {
        static const std::vector<std::string> atoms = {"a", "Z", "0", " ", "\n", "\"", "\\", "/", "\t", "\x01",
                                                       "\xc3\xa4", "\xe2\x82\xac", "\xf0\x9f\x98\x80", "#", ":"};
        std::string s;
        std::size_t n = pick(8);
        for (std::size_t i = 0; i < n; ++i)
            s += atoms[pick(atoms.size())];
        return s;
    }
    std::string nonblank() { return "urn:" + std::to_string(pick(1000)); }

    json term(bool allow_lit = true, bool allow_bnode = true) {
        json j;
        std::size_t k = pick(3);
        if (k == 1 && !allow_lit)
            k = 0;
        if (k == 2 && !allow_bnode)
            k = 0;
        if (k == 0) {
            j["t"] = "uri";
            j["v"] = nonblank();
        } else if (k == 1) {
            j["t"] = "lit";
            j["v"] = str();
            if (coin())
                j["dt"] = nonblank();
        } else {
            j["t"] = "bnode";
            j["v"] = "b" + std::to_string(pick(50));
        }
        return j;
    }
    json triple() {
        json j;
        j["s"] = term(false);
        j["p"] = term(false, false);
        j["o"] = term();
        return j;
    }
    json list(std::size_t max, auto&& make) {
        json a = json::array();
        std::size_t n = pick(max + 1);
        for (std::size_t i = 0; i < n; ++i)
            a.push_back(make());
        return a;
    }
    json strings() {
        return list(4, [&] { return json(str()); });
    }
    json triples() {
        return list(4, [&] { return triple(); });
    }
    json slot() {
        switch (pick(3)) {
        case 0: return nullptr;
        case 1: {
            json j;
            j["var"] = "v" + std::to_string(pick(5));
            return j;
        }
        default: return term();
        }
    }
    void query_into(json& j) {
        if (coin()) {
            j["qtype"] = "triple";
            json q;
            q["s"] = slot();
            q["p"] = slot();
            q["o"] = slot();
            j["q"] = q;
        } else {
            j["qtype"] = "path";
            j["q"] = str();
        }
    }
    json rows() {
        return list(3, [&]() -> json {
            if (coin())
                return term();
            json row = json::object();
            row["x"] = term();
            return row;
        });
    }

    json body(Kind k) {
        json j = json::object();
        switch (k) {
        case Kind::JOIN: j["credentials"] = strings(); break;
        case Kind::JOIN_OK:
            j["session"] = str();
            j["caps"] = {{"invite", coin()}, {"remove", coin()}};
            break;
        case Kind::JOIN_REFUSED:
        case Kind::REMOVE: j["reason"] = str(); break;
        case Kind::LEAVE:
        case Kind::LEAVE_OK: break;
        case Kind::UPDATE:
            j["insert"] = triples();
            j["retract"] = triples();
            break;
        case Kind::UPDATE_OK:
            j["added"] = triples();
            j["removed"] = triples();
            j["version"] = u64();
            break;
        case Kind::QUERY:
        case Kind::SUBSCRIBE: query_into(j); break;
        case Kind::QUERY_RESULT:
            j["qtype"] = coin() ? "triple" : "path";
            j["results"] = rows();
            j["partial"] = coin();
            j["version"] = u64();
            break;
        case Kind::SUBSCRIBE_OK:
            j["sub"] = str();
            j["qtype"] = "path";
            j["results"] = rows();
            j["version"] = u64();
            break;
        case Kind::NOTIFY:
            j["sub"] = str();
            j["qtype"] = "triple";
            j["added"] = rows();
            j["removed"] = rows();
            j["version"] = u64();
            break;
        case Kind::UNSUBSCRIBE:
        case Kind::UNSUBSCRIBE_OK: j["sub"] = str(); break;
        case Kind::INVITE:
            j["space"] = str();
            j["listener"] = str();
            break;
        case Kind::ERROR:
            j["code"] = str();
            j["message"] = str();
            break;
        case Kind::PEER_HELLO: j["sib"] = str(); break;
        case Kind::PEER_SYNC:
            j["origin"] = str();
            j["epoch"] = u64();
            j["members"] = list(3, [&] {
                json m;
                m["kp"] = str();
                m["session"] = str();
                m["credentials"] = strings();
                m["state"] = "joined";
                return m;
            });
            break;
        case Kind::PEER_QUERY:
            j["origin"] = str();
            j["visited"] = strings();
            j["corr"] = str();
            query_into(j);
            break;
        case Kind::PEER_RESULT:
            j["corr"] = str();
            j["qtype"] = "path";
            j["results"] = rows();
            j["partial"] = coin();
            break;
        case Kind::PEER_SUB:
            j["op"] = coin() ? "add" : "cancel";
            j["key"] = str();
            j["origin"] = str();
            j["visited"] = strings();
            if (j["op"] == "add")
                query_into(j);
            break;
        case Kind::PEER_NOTIFY:
            j["key"] = str();
            j["sib"] = str();
            j["version"] = u64();
            j["qtype"] = "path";
            j["results"] = rows();
            break;
        }
        return j;
    }

    std::mt19937 rng_;
};

} // namespace sedvice::wire_samples
