#include "sedvice/query.hpp"

#include <deque>
#include <tuple>

namespace sedvice {

namespace {

// Union-find over terms; the root of a class is always its smallest member.
class TermUnionFind {
public:
    const Term& find(const Term& x) {
        auto it = parent_.find(x);
        if (it == parent_.end())
            return x;
        if (it->second == x)
            return it->second;
        const Term& root = find(it->second);
        it->second = root;
        return root;
    }

    bool unite(const Term& a, const Term& b) {
        Term ra = find(a), rb = find(b);
        if (ra == rb)
            return false;
        if (rb < ra)
            std::swap(ra, rb);
        parent_.try_emplace(ra, ra);
        parent_[rb] = ra;
        return true;
    }

    std::map<Term, std::set<Term>> classes() {
        std::map<Term, std::set<Term>> out;
        std::vector<Term> keys;
        for (const auto& [k, _] : parent_)
            keys.push_back(k);
        for (const auto& k : keys)
            out[find(k)].insert(k);
        return out;
    }

private:
    std::map<Term, Term> parent_;
};

using CanonTriple = std::tuple<Term, Term, Term>;

// Unions subject and object of every triple whose predicate is in the
// owl:sameAs class, repeating while the predicate class itself grows.
bool absorb_same_as(const Graph& g, TermUnionFind& uf) {
    const Term same_as = vocab::owl_same_as();
    bool any = false;
    for (bool changed = true; changed;) {
        changed = false;
        Term sa = uf.find(same_as);
        for (const auto& t : g) {
            if (uf.find(t.predicate) == sa && uf.unite(t.subject, t.object)) {
                changed = true;
                any = true;
                sa = uf.find(same_as);
            }
        }
    }
    return any;
}

// R1 and R2 to fixpoint over canonical (representative) triples.
void saturate_classes(std::set<CanonTriple>& c, const Term& type, const Term& sub_class) {
    for (;;) {
        std::map<Term, std::set<Term>> sc;
        for (const auto& [s, p, o] : c)
            if (p == sub_class)
                sc[s].insert(o);

        std::map<Term, std::set<Term>> reach;
        for (const auto& [a, direct] : sc) {
            std::set<Term> seen;
            std::deque<Term> work(direct.begin(), direct.end());
            while (!work.empty()) {
                Term x = std::move(work.front());
                work.pop_front();
                if (!seen.insert(x).second)
                    continue;
                if (auto it = sc.find(x); it != sc.end())
                    work.insert(work.end(), it->second.begin(), it->second.end());
            }
            reach.emplace(a, std::move(seen));
        }

        std::vector<CanonTriple> fresh;
        for (const auto& [a, ups] : reach)
            for (const auto& b : ups)
                if (!c.contains({a, sub_class, b}))
                    fresh.emplace_back(a, sub_class, b);
        for (const auto& [x, p, a] : c) {
            if (p != type)
                continue;
            auto it = reach.find(a);
            if (it == reach.end())
                continue;
            for (const auto& b : it->second)
                if (!c.contains({x, type, b}))
                    fresh.emplace_back(x, type, b);
        }
        if (fresh.empty())
            return;
        c.insert(fresh.begin(), fresh.end());
    }
}

const std::set<Term>& empty_terms() {
    static const std::set<Term> empty;
    return empty;
}

} // namespace

ClosureIndex ClosureIndex::compute(const Graph& base) {
    Graph g = base;
    TermUnionFind uf;
    absorb_same_as(g, uf);
    for (;;) {
        std::set<CanonTriple> canon;
        for (const auto& t : g)
            canon.emplace(uf.find(t.subject), uf.find(t.predicate), uf.find(t.object));
        saturate_classes(canon, uf.find(vocab::rdf_type()), uf.find(vocab::rdfs_subclass_of()));

        auto classes = uf.classes();
        auto members = [&](const Term& r) -> std::vector<Term> {
            auto it = classes.find(r);
            if (it == classes.end())
                return {r};
            return {it->second.begin(), it->second.end()};
        };
        Graph expanded;
        for (const auto& [s, p, o] : canon)
            for (const auto& s2 : members(s))
                for (const auto& p2 : members(p))
                    for (const auto& o2 : members(o))
                        if (is_valid_triple(s2, p2, o2))
                            expanded.insert(Triple(s2, p2, o2));

        g = std::move(expanded);
        // New owl:sameAs facts may only appear through R1/R2 output whose
        // predicate is equivalent to owl:sameAs; go round again if so.
        if (!absorb_same_as(g, uf))
            break;
    }

    ClosureIndex idx;
    for (auto& [root, cls] : uf.classes()) {
        for (const auto& m : cls)
            idx.rep_.emplace(m, root);
        idx.classes_.emplace(root, std::move(cls));
    }
    for (const auto& t : g) {
        idx.out_[{t.subject, t.predicate}].insert(t.object);
        idx.in_[{t.object, t.predicate}].insert(t.subject);
        idx.terms_.insert(t.subject);
        idx.terms_.insert(t.predicate);
        idx.terms_.insert(t.object);
    }
    idx.derived_ = std::move(g);
    return idx;
}

const Term& ClosureIndex::representative(const Term& x) const {
    auto it = rep_.find(x);
    return it == rep_.end() ? x : it->second;
}

std::set<Term> ClosureIndex::same_as_class(const Term& x) const {
    auto it = classes_.find(representative(x));
    if (it == classes_.end())
        return {x};
    return it->second;
}

std::set<Term> ClosureIndex::superclasses(const Term& a) const {
    return objects(a, vocab::rdfs_subclass_of());
}

const std::set<Term>& ClosureIndex::objects(const Term& s, const Term& p) const {
    auto it = out_.find({s, p});
    return it == out_.end() ? empty_terms() : it->second;
}

const std::set<Term>& ClosureIndex::subjects(const Term& o, const Term& p) const {
    auto it = in_.find({o, p});
    return it == in_.end() ? empty_terms() : it->second;
}

} // namespace sedvice
