// One-shot KP operations against a SIB, with JSON output.
#include "sedvice/chat.hpp"
#include "sedvice/kp.hpp"
#include "sedvice/wire.hpp"

#include <CLI11.hpp>

#include <csignal>
#include <fstream>
#include <iostream>
#include <sstream>

using namespace sedvice;
using wire::json;

namespace {

// "<s> ?p _" style patterns; prefixed names use the chat namespaces.
PatternSlot slot(const std::string& tok, const NamespaceTable& ns) {
    if (tok == "_")
        return Wildcard{};
    if (tok.size() > 1 && tok[0] == '?')
        return Variable{tok.substr(1)};
    if (tok[0] == '<' || tok[0] == '"' || tok.rfind("_:", 0) == 0)
        return parse_term(tok);
    return Term::uri(ns.expand(tok));
}

std::vector<std::string> pattern_tokens(const std::string& text) {
    std::vector<std::string> out;
    std::size_t i = 0;
    while (i < text.size()) {
        if (std::isspace(static_cast<unsigned char>(text[i]))) {
            ++i;
            continue;
        }
        std::size_t j = i;
        if (text[i] == '<') {
            j = text.find('>', i);
            j = j == std::string::npos ? text.size() : j + 1;
        } else if (text[i] == '"') {
            for (j = i + 1; j < text.size() && text[j] != '"'; ++j)
                if (text[j] == '\\')
                    ++j;
            j = std::min(j + 1, text.size());
            if (text.compare(j, 3, "^^<") == 0) {
                auto end = text.find('>', j);
                j = end == std::string::npos ? text.size() : end + 1;
            }
        } else {
            while (j < text.size() && !std::isspace(static_cast<unsigned char>(text[j])))
                ++j;
        }
        out.push_back(text.substr(i, j - i));
        i = j;
    }
    return out;
}

Query build_query(const std::string& pattern, const std::string& path, const NamespaceTable& ns) {
    if (!path.empty())
        return parse_path_query(path, ns);
    auto toks = pattern_tokens(pattern);
    if (toks.size() != 3)
        throw std::invalid_argument("a pattern needs three slots, got " + std::to_string(toks.size()));
    return TriplePattern{slot(toks[0], ns), slot(toks[1], ns), slot(toks[2], ns)};
}

Graph read_graph(const std::vector<std::string>& triples, const std::string& file) {
    std::string text;
    for (const auto& t : triples)
        text += t + "\n";
    if (file == "-") {
        std::stringstream buf;
        buf << std::cin.rdbuf();
        text += buf.str();
    } else if (!file.empty()) {
        std::ifstream in(file);
        if (!in)
            throw std::runtime_error("cannot read " + file);
        std::stringstream buf;
        buf << in.rdbuf();
        text += buf.str();
    }
    return parse_graph(text);
}

void emit(const json& j) { std::cout << j.dump() << std::endl; }

json acks_json(const std::vector<kp::UpdateAck>& acks) {
    json arr = json::array();
    for (const auto& a : acks) {
        json j;
        j["space"] = a.space.space;
        j["ok"] = a.ok;
        if (a.ok) {
            j["added"] = wire::to_json(a.delta.added);
            j["removed"] = wire::to_json(a.delta.removed);
            j["version"] = a.delta.version_after;
        } else {
            j["error"] = a.error;
        }
        arr.push_back(std::move(j));
    }
    return arr;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"KP command line"};
    std::string endpoint = "tcp:127.0.0.1:7001", space = "chat", kp_id = "kpctl";
    std::vector<std::string> credentials;
    int timeout_ms = 10000;
    app.add_option("--endpoint", endpoint, "SIB listener, tcp:<host>:<port>");
    app.add_option("--space", space, "Space name");
    app.add_option("--kp-id", kp_id, "KP identifier");
    app.add_option("--credentials", credentials, "Credentials sent with JOIN");
    app.add_option("--timeout", timeout_ms, "Request timeout in ms");
    app.require_subcommand(1);

    std::vector<std::string> triples;
    std::string file, pattern, path;
    int count = -1;
    auto* join = app.add_subcommand("join", "Join, print the session, disconnect");
    auto* leave = app.add_subcommand("leave", "Join and leave");
    auto* insert = app.add_subcommand("insert", "Insert triples");
    auto* retract = app.add_subcommand("retract", "Retract triples");
    for (auto* sc : {insert, retract}) {
        sc->add_option("--triple", triples, "'<s> <p> <o> .', repeatable");
        sc->add_option("--file", file, "Triples, one per line; - for stdin");
    }
    auto* query = app.add_subcommand("query", "Run a query once");
    auto* subscribe = app.add_subcommand("subscribe", "Print one JSON line per change");
    for (auto* sc : {query, subscribe}) {
        sc->add_option("--pattern", pattern, "Triple pattern, e.g. '?s rdf:type chat#Conversation'");
        sc->add_option("--path", path, "Path query, e.g. 'chat#Conversation | (:inv !rdf:type)'");
    }
    subscribe->add_option("--count", count, "Exit after this many changes");
    CLI11_PARSE(app, argc, argv);
    std::signal(SIGPIPE, SIG_IGN);

    try {
        kp::Node node(kp_id, std::chrono::milliseconds(timeout_ms));
        auto h = node.join(net::Endpoint::parse(endpoint), space, credentials);
        if (*join) {
            emit(json{{"space", h.space}, {"session", h.session}});
        } else if (*leave) {
            node.leave(h);
            emit(json{{"space", h.space}, {"left", h.session}});
        } else if (*insert || *retract) {
            Graph g = read_graph(triples, file);
            auto acks = *insert ? node.insert(g) : node.retract(g);
            emit(acks_json(acks));
            for (const auto& a : acks)
                if (!a.ok)
                    return 1;
        } else if (*query || *subscribe) {
            if (pattern.empty() == path.empty())
                throw std::invalid_argument("give exactly one of --pattern and --path");
            Query q = build_query(pattern, path, chat::namespaces());
            const std::string qt(wire::qtype_name(query_type(q)));
            if (*query) {
                auto r = node.query(q);
                emit(json{{"qtype", qt}, {"results", wire::rows_to_json(r)}, {"partial", r.partial}});
            } else {
                std::mutex mu;
                std::condition_variable cv;
                int seen = 0;
                node.subscribe(q, [&](const QueryResult& a, const QueryResult& r, std::uint64_t v) {
                    emit(json{{"qtype", qt},
                              {"added", wire::rows_to_json(a)},
                              {"removed", wire::rows_to_json(r)},
                              {"version", v}});
                    std::lock_guard lk(mu);
                    ++seen;
                    cv.notify_all();
                });
                std::unique_lock lk(mu);
                cv.wait(lk, [&] { return count >= 0 && seen >= count; });
            }
        }
    } catch (const kp::kp_error& e) {
        std::cerr << "kpctl: " << e.code() << ": " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "kpctl: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
