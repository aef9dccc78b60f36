#pragma once
// SIB configuration and its text file format.
//
//   # comment
//   space = chat
//   sib = A
//   listener = tcp:127.0.0.1:7001      (repeatable, at least one)
//   policy = allow-all | allow k1 k2 | deny k1
//   reasoner_class = type-inheritance noop   (repeatable, one line per class)
//   reasoning_batch = 1
//   namespace = chat http://sedspace.example/chat#
//   peer = B tcp:127.0.0.1:7002        (endpoint optional inside one file)
//   peer_timeout_ms = 2000
//
// Keys before the first "[sib <id>]" header are defaults for every section.
// A file without sections describes one SIB.

#include "sedvice/net.hpp"
#include "sedvice/space.hpp"

#include <chrono>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace sedvice {

class config_error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct PeerSpec {
    std::string id;
    // Unset when the peer is another SIB of the same file; resolved at boot.
    std::optional<net::Endpoint> endpoint;
};

struct SibConfig {
    std::string space = "space";
    std::string sib_id = "sib";
    std::vector<net::Endpoint> listeners;
    Policy policy = policy::allow_all();
    std::string policy_text = "allow-all";
    ReasonerSchedule schedule;
    std::vector<std::vector<std::string>> reasoner_names;
    std::size_t reasoning_batch = 1;
    NamespaceTable namespaces = NamespaceTable::standard();
    std::vector<PeerSpec> peers;
    std::chrono::milliseconds peer_timeout{2000};
};

using ReasonerRegistry = std::map<std::string, Reasoner>;

// noop, and type-inheritance: one rdf:type step along rdfs:subClassOf,
// materialized into the store.
ReasonerRegistry builtin_reasoners();

// One SibConfig per SIB, in file order. Throws config_error with a line number.
std::vector<SibConfig> parse_config(std::string_view text, const ReasonerRegistry& registry = builtin_reasoners());
std::vector<SibConfig> load_config(const std::string& path, const ReasonerRegistry& registry = builtin_reasoners());

} // namespace sedvice
