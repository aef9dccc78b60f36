#pragma once
// Triple-pattern queries over raw snapshots and lisp-like path queries over
// the deductive closure of a snapshot.
//
// Path query grammar:
//   query := start '|' path
//   path  := arc | '(' OPNAME path+ ')'
//   OPNAME in { :seq  :inv  :or  :rep* }
//   arc   := '!'? name          name := prefixed-name | '<' uri '>'
//   start := name
// The '!' marker is accepted and has no effect.

#include "sedvice/rdf.hpp"

#include <cstdint>
#include <memory>
#include <mutex>
#include <set>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace sedvice {

class parse_error : public std::runtime_error {
public:
    parse_error(const std::string& msg, std::size_t position)
        : std::runtime_error(msg + " at position " + std::to_string(position)), position_(position) {}
    std::size_t position() const noexcept { return position_; }

private:
    std::size_t position_;
};

struct PathExpr {
    enum class Op { Arc, Inv, Seq, Or, RepStar };

    Op op = Op::Arc;
    std::optional<Term> predicate; // Arc only
    std::vector<PathExpr> parts;   // Inv/RepStar: one; Seq: >= 1; Or: >= 2

    static PathExpr arc(Term predicate);
    static PathExpr inv(PathExpr inner);
    static PathExpr seq(std::vector<PathExpr> parts);
    static PathExpr alt(std::vector<PathExpr> alternatives);
    static PathExpr rep_star(PathExpr inner);

    friend bool operator==(const PathExpr&, const PathExpr&) = default;
};

struct PathQuery {
    Term start;
    PathExpr path;

    friend bool operator==(const PathQuery&, const PathQuery&) = default;
};

PathQuery parse_path_query(std::string_view text, const NamespaceTable& ns);

// Renders with full <uri> names; parse_path_query(render(q), {}) == q.
std::string render(const PathExpr& e);
std::string render(const PathQuery& q);

// Deductive closure of a base graph under
//   R1 rdfs:subClassOf transitivity,
//   R2 (x rdf:type a) & (a rdfs:subClassOf b) => (x rdf:type b),
//   R3 owl:sameAs substitution in any position,
// computed to the least fixpoint. Derived triples that would have a literal
// subject or a non-URI predicate are not materialized.
class ClosureIndex {
public:
    static ClosureIndex compute(const Graph& base);

    const Graph& derived() const noexcept { return derived_; }

    // Smallest member of x's owl:sameAs class (x itself when unrelated).
    const Term& representative(const Term& x) const;
    bool same_as(const Term& a, const Term& b) const { return representative(a) == representative(b); }
    std::set<Term> same_as_class(const Term& x) const;

    // Every b with (a rdfs:subClassOf b) in the derived view.
    std::set<Term> superclasses(const Term& a) const;

    // Neighbours in the derived view.
    const std::set<Term>& objects(const Term& s, const Term& p) const;
    const std::set<Term>& subjects(const Term& o, const Term& p) const;
    // Terms occurring in any position of the derived view.
    const std::set<Term>& terms() const noexcept { return terms_; }

private:
    Graph derived_;
    std::map<Term, Term> rep_;
    std::map<Term, std::set<Term>> classes_;
    std::map<std::pair<Term, Term>, std::set<Term>> out_;
    std::map<std::pair<Term, Term>, std::set<Term>> in_;
    std::set<Term> terms_;
};

inline ClosureIndex compute_closure(const Graph& base) { return ClosureIndex::compute(base); }

enum class QueryType { Triple, Path };

using Query = std::variant<TriplePattern, PathQuery>;

inline QueryType query_type(const Query& q) {
    return std::holds_alternative<TriplePattern>(q) ? QueryType::Triple : QueryType::Path;
}

struct QueryResult {
    QueryType type = QueryType::Triple;
    BindingSet bindings;  // triple queries
    std::set<Term> terms; // path queries, canonical order
    bool partial = false;

    bool empty() const noexcept { return bindings.empty() && terms.empty(); }
    std::size_t size() const noexcept { return bindings.size() + terms.size(); }

    friend bool operator==(const QueryResult&, const QueryResult&) = default;
};

QueryResult empty_result(QueryType type);

// Set union; partial flags are or-ed. Throws std::invalid_argument on mixed types.
QueryResult result_union(const QueryResult& a, const QueryResult& b);

struct ResultDelta {
    QueryResult added;   // after \ before
    QueryResult removed; // before \ after
    bool empty() const noexcept { return added.empty() && removed.empty(); }
};

ResultDelta result_diff(const QueryResult& before, const QueryResult& after);
// before \ removed ∪ added
QueryResult result_apply(const QueryResult& before, const ResultDelta& delta);

// Raw pattern match; the closure is never consulted.
QueryResult eval_triple_query(const Graph& snapshot, const TriplePattern& pattern);

QueryResult eval_path_query(const ClosureIndex& closure, const PathQuery& q);
QueryResult eval_path_query(const Graph& snapshot, const PathQuery& q);

// Memoizes the closure of the most recently seen store version.
class ClosureCache {
public:
    std::shared_ptr<const ClosureIndex> get(std::uint64_t version, const Graph& snapshot);

private:
    std::mutex mu_;
    std::uint64_t version_ = 0;
    std::shared_ptr<const ClosureIndex> cached_;
};

// Evaluates either query kind against a snapshot at a given version.
QueryResult evaluate(const Query& q, const Graph& snapshot, std::uint64_t version, ClosureCache* cache = nullptr);

} // namespace sedvice
