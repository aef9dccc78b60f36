#include "sedvice/config.hpp"

#include <fstream>
#include <sstream>

namespace sedvice {

ReasonerRegistry builtin_reasoners() {
    ReasonerRegistry r;
    r["noop"] = Reasoner{"noop", [](const Graph&) { return Transaction{}; }};
    r["type-inheritance"] = Reasoner{"type-inheritance", [](const Graph& g) {
                                         const Term type = vocab::rdf_type(), sc = vocab::rdfs_subclass_of();
                                         Graph add;
                                         for (const auto& t : g) {
                                             if (t.predicate != type)
                                                 continue;
                                             if (t.object.is_literal())
                                                 continue;
                                             for (const auto& up : g.with_subject(t.object))
                                                 if (up.predicate == sc) {
                                                     Triple derived(t.subject, type, up.object);
                                                     if (!g.contains(derived))
                                                         add.insert(derived);
                                                 }
                                         }
                                         Transaction tx;
                                         if (!add.empty())
                                             tx.ops.push_back(TxOp::insert(std::move(add)));
                                         return tx;
                                     }};
    return r;
}

namespace {

std::string trim(std::string_view s) {
    auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos)
        return {};
    auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> words(const std::string& s) {
    std::istringstream in(s);
    std::vector<std::string> out;
    for (std::string w; in >> w;)
        out.push_back(w);
    return out;
}

struct Section {
    std::string id;
    std::size_t line = 0;
    std::vector<std::pair<std::size_t, std::pair<std::string, std::string>>> entries;
};

[[noreturn]] void fail(std::size_t line, const std::string& msg) {
    throw config_error("line " + std::to_string(line) + ": " + msg);
}

void apply(SibConfig& cfg, std::size_t line, const std::string& key, const std::string& value,
           const ReasonerRegistry& registry) {
    try {
        if (key == "space") {
            cfg.space = value;
        } else if (key == "sib") {
            cfg.sib_id = value;
        } else if (key == "listener") {
            cfg.listeners.push_back(net::Endpoint::parse(value));
        } else if (key == "policy") {
            auto w = words(value);
            if (w.empty())
                fail(line, "empty policy");
            std::set<std::string> ids(w.begin() + 1, w.end());
            if (w[0] == "allow-all" && ids.empty())
                cfg.policy = policy::allow_all();
            else if (w[0] == "allow")
                cfg.policy = policy::allow_list(ids);
            else if (w[0] == "deny")
                cfg.policy = policy::deny_list(ids);
            else
                fail(line, "unknown policy '" + value + "'");
            cfg.policy_text = value;
        } else if (key == "reasoner_class") {
            std::vector<Reasoner> cls;
            auto names = words(value);
            for (const auto& n : names) {
                auto it = registry.find(n);
                if (it == registry.end())
                    fail(line, "unknown reasoner '" + n + "'");
                cls.push_back(it->second);
            }
            if (cls.empty())
                fail(line, "empty reasoner class");
            cfg.schedule.classes.push_back(std::move(cls));
            cfg.reasoner_names.push_back(names);
        } else if (key == "reasoning_batch") {
            std::size_t n = std::stoul(value);
            if (n == 0)
                fail(line, "reasoning_batch must be positive");
            cfg.reasoning_batch = n;
        } else if (key == "namespace") {
            auto w = words(value);
            if (w.size() != 2)
                fail(line, "namespace needs <prefix> <base>");
            cfg.namespaces.add(w[0], w[1]);
        } else if (key == "peer") {
            auto w = words(value);
            if (w.empty() || w.size() > 2)
                fail(line, "peer needs <id> [endpoint]");
            PeerSpec p{w[0], std::nullopt};
            if (w.size() == 2)
                p.endpoint = net::Endpoint::parse(w[1]);
            cfg.peers.push_back(std::move(p));
        } else if (key == "peer_timeout_ms") {
            cfg.peer_timeout = std::chrono::milliseconds(std::stoul(value));
        } else {
            fail(line, "unknown key '" + key + "'");
        }
    } catch (const net::net_error& e) {
        fail(line, e.what());
    } catch (const rdf_error& e) {
        fail(line, e.what());
    } catch (const std::logic_error& e) {
        fail(line, "bad value for " + key + ": " + e.what());
    }
}

void check(const SibConfig& cfg, std::size_t line) {
    if (cfg.listeners.empty())
        fail(line, "SIB " + cfg.sib_id + " has no listener; at least one is required");
    std::set<net::Endpoint> seen;
    for (const auto& ep : cfg.listeners)
        if (ep.port != 0 && !seen.insert(ep).second)
            fail(line, "duplicate listener " + ep.str());
    for (const auto& p : cfg.peers)
        if (p.id == cfg.sib_id)
            fail(line, "SIB " + cfg.sib_id + " lists itself as a peer");
}

} // namespace

std::vector<SibConfig> parse_config(std::string_view text, const ReasonerRegistry& registry) {
    Section defaults;
    std::vector<Section> sections;
    Section* current = &defaults;
    std::size_t lineno = 0;
    std::istringstream in{std::string(text)};
    for (std::string raw; std::getline(in, raw);) {
        ++lineno;
        auto line = trim(raw);
        if (line.empty() || line[0] == '#')
            continue;
        if (line.front() == '[') {
            if (line.back() != ']')
                fail(lineno, "unterminated section header");
            auto w = words(line.substr(1, line.size() - 2));
            if (w.size() != 2 || w[0] != "sib")
                fail(lineno, "section header must be [sib <id>]");
            sections.push_back(Section{w[1], lineno, {}});
            current = &sections.back();
            continue;
        }
        auto eq = line.find('=');
        if (eq == std::string::npos)
            fail(lineno, "expected key = value");
        current->entries.push_back({lineno, {trim(line.substr(0, eq)), trim(line.substr(eq + 1))}});
    }

    std::vector<SibConfig> out;
    if (sections.empty()) {
        SibConfig cfg;
        for (const auto& [ln, kv] : defaults.entries)
            apply(cfg, ln, kv.first, kv.second, registry);
        check(cfg, lineno);
        out.push_back(std::move(cfg));
        return out;
    }
    std::set<std::string> ids;
    for (const auto& sec : sections) {
        SibConfig cfg;
        for (const auto& [ln, kv] : defaults.entries)
            if (kv.first != "listener" && kv.first != "peer")
                apply(cfg, ln, kv.first, kv.second, registry);
        cfg.sib_id = sec.id;
        for (const auto& [ln, kv] : sec.entries)
            apply(cfg, ln, kv.first, kv.second, registry);
        if (!ids.insert(cfg.sib_id).second)
            fail(sec.line, "duplicate SIB " + cfg.sib_id);
        check(cfg, sec.line);
        out.push_back(std::move(cfg));
    }
    for (const auto& cfg : out)
        for (const auto& p : cfg.peers)
            if (!p.endpoint && !ids.count(p.id))
                fail(0, "peer " + p.id + " of " + cfg.sib_id + " has no endpoint and is not in this file");
    return out;
}

std::vector<SibConfig> load_config(const std::string& path, const ReasonerRegistry& registry) {
    std::ifstream in(path);
    if (!in)
        throw config_error("cannot read " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_config(buf.str(), registry);
}

} // namespace sedvice
