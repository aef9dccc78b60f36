#pragma once
// Brute-force reference implementations used only by tests. None of these
// share code paths with the library implementations they check.

#include "sedvice/query.hpp"
#include "sedvice/store.hpp"

#include <random>
#include <set>
#include <utility>
#include <vector>

namespace sedvice::oracle {

// --- pattern matching: enumerate every triple and every candidate binding ---

inline BindingSet brute_match(const Graph& g, const TriplePattern& p) {
    BindingSet out;
    for (const auto& t : g) {
        Binding b;
        bool ok = true;
        auto slot = [&](const PatternSlot& s, const Term& v) {
            if (!ok)
                return;
            if (std::holds_alternative<Term>(s)) {
                ok = std::get<Term>(s) == v;
            } else if (std::holds_alternative<Variable>(s)) {
                const auto& name = std::get<Variable>(s).name;
                if (b.count(name))
                    ok = b.at(name) == v;
                else
                    b[name] = v;
            }
        };
        slot(p.subject, t.subject);
        slot(p.predicate, t.predicate);
        slot(p.object, t.object);
        if (ok)
            out.insert(b);
    }
    return out;
}

// --- transactions: apply ops one at a time ---

inline Graph apply_sequentially(Graph g, const Transaction& tx) {
    for (const auto& op : tx.ops)
        for (const auto& t : op.payload) {
            if (op.kind == OpKind::Insert)
                g.insert(t);
            else
                g.erase(t);
        }
    return g;
}

// Per-triple rewriting of the op word, always firing the leftmost redex:
// "II"->"I", "RR"->"R", "IR"->"". The rule set is not confluent ("IRR" can
// reach both "R" and ""), so the strategy is part of the contract.
inline std::string reduce_word(std::string w) {
    for (bool fired = true; fired;) {
        fired = false;
        for (std::size_t i = 0; i + 1 < w.size() && !fired; ++i) {
            auto pair = w.substr(i, 2);
            if (pair == "II" || pair == "RR") {
                w.erase(i, 1);
                fired = true;
            } else if (pair == "IR") {
                w.erase(i, 2);
                fired = true;
            }
        }
    }
    return w;
}

// --- closure: naive fixpoint of R1, R2, R3 directly on triples ---

inline std::vector<std::set<Term>> same_as_classes(const Graph& g) {
    const Term sa = vocab::owl_same_as();
    std::vector<std::set<Term>> classes;
    for (const auto& t : g) {
        if (t.predicate != sa)
            continue;
        std::set<Term> merged{t.subject, t.object};
        std::vector<std::set<Term>> rest;
        for (auto& c : classes) {
            if (c.count(t.subject) || c.count(t.object))
                merged.insert(c.begin(), c.end());
            else
                rest.push_back(std::move(c));
        }
        rest.push_back(std::move(merged));
        classes = std::move(rest);
    }
    return classes;
}

inline Graph naive_closure(const Graph& base) {
    const Term type = vocab::rdf_type(), sc = vocab::rdfs_subclass_of();
    Graph g = base;
    for (;;) {
        Graph next = g;
        // R1
        for (const auto& a : g)
            for (const auto& b : g)
                if (a.predicate == sc && b.predicate == sc && a.object == b.subject)
                    next.insert(Triple(a.subject, sc, b.object));
        // R2
        for (const auto& a : g)
            for (const auto& b : g)
                if (a.predicate == type && b.predicate == sc && a.object == b.subject)
                    next.insert(Triple(a.subject, type, b.object));
        // R3: one substitution in one position at a time
        for (const auto& cls : same_as_classes(g)) {
            for (const auto& t : g) {
                for (const auto& y : cls) {
                    if (cls.count(t.subject) && is_valid_triple(y, t.predicate, t.object))
                        next.insert(Triple(y, t.predicate, t.object));
                    if (cls.count(t.predicate) && is_valid_triple(t.subject, y, t.object))
                        next.insert(Triple(t.subject, y, t.object));
                    if (cls.count(t.object))
                        next.insert(Triple(t.subject, t.predicate, y));
                }
            }
        }
        if (next == g)
            return g;
        g = std::move(next);
    }
}

// --- path queries: materialize each expression as a set of pairs ---

using Relation = std::set<std::pair<Term, Term>>;

inline std::set<Term> terms_of(const Graph& g) {
    std::set<Term> out;
    for (const auto& t : g) {
        out.insert(t.subject);
        out.insert(t.predicate);
        out.insert(t.object);
    }
    return out;
}

inline Relation compose(const Relation& a, const Relation& b) {
    Relation out;
    for (const auto& [x, y] : a)
        for (const auto& [y2, z] : b)
            if (y == y2)
                out.emplace(x, z);
    return out;
}

inline Relation relation_of(const PathExpr& e, const Graph& d) {
    switch (e.op) {
    case PathExpr::Op::Arc: {
        Relation r;
        for (const auto& t : d)
            if (t.predicate == *e.predicate)
                r.emplace(t.subject, t.object);
        return r;
    }
    case PathExpr::Op::Inv: {
        Relation r;
        for (const auto& [x, y] : relation_of(e.parts[0], d))
            r.emplace(y, x);
        return r;
    }
    case PathExpr::Op::Seq: {
        Relation r = relation_of(e.parts[0], d);
        for (std::size_t i = 1; i < e.parts.size(); ++i)
            r = compose(r, relation_of(e.parts[i], d));
        return r;
    }
    case PathExpr::Op::Or: {
        Relation r;
        for (const auto& p : e.parts) {
            auto part = relation_of(p, d);
            r.insert(part.begin(), part.end());
        }
        return r;
    }
    case PathExpr::Op::RepStar: {
        Relation r;
        for (const auto& x : terms_of(d))
            r.emplace(x, x);
        Relation step = relation_of(e.parts[0], d);
        r.insert(step.begin(), step.end());
        for (;;) {
            Relation next = r;
            auto more = compose(r, step);
            next.insert(more.begin(), more.end());
            if (next == r)
                return r;
            r = std::move(next);
        }
    }
    }
    return {};
}

inline std::set<Term> brute_path(const Graph& snapshot, const PathQuery& q) {
    Graph d = naive_closure(snapshot);
    std::set<Term> out;
    for (const auto& [x, y] : relation_of(q.path, d))
        if (x == q.start)
            out.insert(y);
    return out;
}

// --- random generators over a tiny vocabulary so rules actually fire ---

struct Vocabulary {
    std::vector<Term> nodes;
    std::vector<Term> predicates;
    std::vector<Term> literals;

    static Vocabulary small(std::size_t n_nodes = 6) {
        Vocabulary v;
        for (std::size_t i = 0; i < n_nodes; ++i)
            v.nodes.push_back(Term::uri("urn:n" + std::to_string(i)));
        v.predicates = {vocab::rdf_type(), vocab::rdfs_subclass_of(), vocab::owl_same_as(), Term::uri("urn:p"),
                        Term::uri("urn:q")};
        v.literals = {Term::literal("a"), Term::literal("b"), Term::literal("1", std::string(vocab::xsd) + "int")};
        return v;
    }
};

inline Triple random_triple(std::mt19937& rng, const Vocabulary& v, double literal_ratio = 0.1) {
    auto pick = [&](const std::vector<Term>& xs) { return xs[std::uniform_int_distribution<std::size_t>(0, xs.size() - 1)(rng)]; };
    Term s = pick(v.nodes);
    Term p = pick(v.predicates);
    Term o = std::bernoulli_distribution(literal_ratio)(rng) ? pick(v.literals) : pick(v.nodes);
    return Triple(s, p, o);
}

inline Graph random_graph(std::mt19937& rng, const Vocabulary& v, std::size_t max_triples,
                          double literal_ratio = 0.1) {
    Graph g;
    std::size_t n = std::uniform_int_distribution<std::size_t>(0, max_triples)(rng);
    for (std::size_t i = 0; i < n; ++i)
        g.insert(random_triple(rng, v, literal_ratio));
    return g;
}

inline PathExpr random_path(std::mt19937& rng, const Vocabulary& v, int depth) {
    auto pick_pred = [&] {
        return v.predicates[std::uniform_int_distribution<std::size_t>(0, v.predicates.size() - 1)(rng)];
    };
    if (depth <= 0)
        return PathExpr::arc(pick_pred());
    switch (std::uniform_int_distribution<int>(0, 4)(rng)) {
    case 0: return PathExpr::arc(pick_pred());
    case 1: return PathExpr::inv(random_path(rng, v, depth - 1));
    case 2: {
        std::vector<PathExpr> parts;
        int n = std::uniform_int_distribution<int>(1, 3)(rng);
        for (int i = 0; i < n; ++i)
            parts.push_back(random_path(rng, v, depth - 1));
        return PathExpr::seq(std::move(parts));
    }
    case 3: {
        std::vector<PathExpr> parts;
        int n = std::uniform_int_distribution<int>(2, 3)(rng);
        for (int i = 0; i < n; ++i)
            parts.push_back(random_path(rng, v, depth - 1));
        return PathExpr::alt(std::move(parts));
    }
    default: return PathExpr::rep_star(random_path(rng, v, depth - 1));
    }
}

} // namespace sedvice::oracle
