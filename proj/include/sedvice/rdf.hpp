#pragma once
// RDF substrate: terms, triples, graphs, namespaces and triple-pattern matching.

#include <compare>
#include <initializer_list>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace sedvice {

class rdf_error : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

enum class TermKind { Uri = 0, Literal = 1, Blank = 2 };

// Ordering is lexicographic on (kind, value, datatype).
class Term {
public:
    Term() = default;

    static Term uri(std::string value);
    static Term literal(std::string lexical, std::optional<std::string> datatype = std::nullopt);
    static Term blank(std::string label);

    TermKind kind() const noexcept { return kind_; }
    const std::string& value() const noexcept { return value_; }
    const std::optional<std::string>& datatype() const noexcept { return datatype_; }

    bool is_uri() const noexcept { return kind_ == TermKind::Uri; }
    bool is_literal() const noexcept { return kind_ == TermKind::Literal; }
    bool is_blank() const noexcept { return kind_ == TermKind::Blank; }

    friend bool operator==(const Term&, const Term&) = default;
    friend std::strong_ordering operator<=>(const Term& a, const Term& b);

private:
    Term(TermKind kind, std::string value, std::optional<std::string> datatype)
        : kind_(kind), value_(std::move(value)), datatype_(std::move(datatype)) {}

    TermKind kind_ = TermKind::Uri;
    std::string value_;
    std::optional<std::string> datatype_;
};

struct Triple {
    Term subject;
    Term predicate;
    Term object;

    // Throws rdf_error unless predicate is a URI and subject is not a literal.
    Triple(Term s, Term p, Term o);

    friend bool operator==(const Triple&, const Triple&) = default;
    friend auto operator<=>(const Triple&, const Triple&) = default;
};

// Triples whose subject/predicate kinds are legal.
bool is_valid_triple(const Term& s, const Term& p, const Term& o) noexcept;

class Graph {
public:
    using container = std::set<Triple>;
    using const_iterator = container::const_iterator;

    Graph() = default;
    Graph(std::initializer_list<Triple> triples) : triples_(triples) {}
    explicit Graph(container triples) : triples_(std::move(triples)) {}

    // Returns false when the triple was already present.
    bool insert(const Triple& t) { return triples_.insert(t).second; }
    bool erase(const Triple& t) { return triples_.erase(t) > 0; }
    bool contains(const Triple& t) const { return triples_.contains(t); }

    std::size_t size() const noexcept { return triples_.size(); }
    bool empty() const noexcept { return triples_.empty(); }
    const_iterator begin() const noexcept { return triples_.begin(); }
    const_iterator end() const noexcept { return triples_.end(); }
    const container& triples() const noexcept { return triples_; }

    // All triples with the given subject, using the subject-major set order.
    std::vector<Triple> with_subject(const Term& subject) const;

    friend bool operator==(const Graph&, const Graph&) = default;

private:
    container triples_;
};

Graph graph_merge(const Graph& a, const Graph& b);

struct GraphDiff {
    Graph added;   // b \ a
    Graph removed; // a \ b
};

GraphDiff graph_diff(const Graph& a, const Graph& b);

// One slot of a triple pattern.
struct Variable {
    std::string name;
    friend bool operator==(const Variable&, const Variable&) = default;
};
struct Wildcard {
    friend bool operator==(const Wildcard&, const Wildcard&) = default;
};
using PatternSlot = std::variant<Term, Variable, Wildcard>;

struct TriplePattern {
    PatternSlot subject = Wildcard{};
    PatternSlot predicate = Wildcard{};
    PatternSlot object = Wildcard{};

    friend bool operator==(const TriplePattern&, const TriplePattern&) = default;
};

using Binding = std::map<std::string, Term>;
using BindingSet = std::set<Binding>;

// Exactly the bindings b with b(pattern) in graph. A repeated variable must bind
// the same term in every slot it occupies.
BindingSet match_pattern(const Graph& graph, const TriplePattern& pattern);

// Substitutes a binding into a pattern. Returns nullopt when a slot stays
// unbound or the result is not a legal triple.
std::optional<Triple> substitute(const TriplePattern& pattern, const Binding& binding);

class NamespaceTable {
public:
    NamespaceTable() = default;
    NamespaceTable(std::initializer_list<std::pair<const std::string, std::string>> init)
        : map_(init) {}

    // rdf, rdfs, owl and xsd.
    static NamespaceTable standard();

    void add(const std::string& prefix, const std::string& base);
    std::optional<std::string> base(const std::string& prefix) const;
    const std::map<std::string, std::string>& entries() const noexcept { return map_; }

    // Expands "p#local" or "p:local" to base(p) + local; a name with no
    // separator expands against the empty (default) prefix. Throws rdf_error
    // on an unknown prefix.
    std::string expand(std::string_view name) const;

private:
    std::map<std::string, std::string> map_;
};

namespace vocab {
inline constexpr std::string_view rdf = "http://www.w3.org/1999/02/22-rdf-syntax-ns#";
inline constexpr std::string_view rdfs = "http://www.w3.org/2000/01/rdf-schema#";
inline constexpr std::string_view owl = "http://www.w3.org/2002/07/owl#";
inline constexpr std::string_view xsd = "http://www.w3.org/2001/XMLSchema#";

Term rdf_type();
Term rdfs_subclass_of();
Term owl_same_as();
} // namespace vocab

// Canonical text form: <uri>, "text" or "text"^^<dt>, _:label.
std::string to_text(const Term& t);
// "<s> <p> <o> ."
std::string to_text(const Triple& t);
// One triple per line, canonical order.
std::string to_text(const Graph& g);

Term parse_term(std::string_view text);
Triple parse_triple(std::string_view line);
// Blank lines and lines starting with '#' are skipped.
Graph parse_graph(std::string_view text);

} // namespace sedvice
