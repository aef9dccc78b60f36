#include "sedvice/query.hpp"

#include <algorithm>

namespace sedvice {

QueryResult empty_result(QueryType type) {
    QueryResult r;
    r.type = type;
    return r;
}

namespace {

template <typename T>
std::set<T> set_minus(const std::set<T>& a, const std::set<T>& b) {
    std::set<T> out;
    std::set_difference(a.begin(), a.end(), b.begin(), b.end(), std::inserter(out, out.end()));
    return out;
}

void require_same_type(const QueryResult& a, const QueryResult& b) {
    if (a.type != b.type)
        throw std::invalid_argument("query results of different types");
}

} // namespace

QueryResult result_union(const QueryResult& a, const QueryResult& b) {
    require_same_type(a, b);
    QueryResult out = a;
    out.bindings.insert(b.bindings.begin(), b.bindings.end());
    out.terms.insert(b.terms.begin(), b.terms.end());
    out.partial = a.partial || b.partial;
    return out;
}

ResultDelta result_diff(const QueryResult& before, const QueryResult& after) {
    require_same_type(before, after);
    ResultDelta d{empty_result(before.type), empty_result(before.type)};
    d.added.bindings = set_minus(after.bindings, before.bindings);
    d.added.terms = set_minus(after.terms, before.terms);
    d.removed.bindings = set_minus(before.bindings, after.bindings);
    d.removed.terms = set_minus(before.terms, after.terms);
    return d;
}

QueryResult result_apply(const QueryResult& before, const ResultDelta& delta) {
    QueryResult out = before;
    for (const auto& b : delta.removed.bindings)
        out.bindings.erase(b);
    for (const auto& t : delta.removed.terms)
        out.terms.erase(t);
    out.bindings.insert(delta.added.bindings.begin(), delta.added.bindings.end());
    out.terms.insert(delta.added.terms.begin(), delta.added.terms.end());
    return out;
}

QueryResult eval_triple_query(const Graph& snapshot, const TriplePattern& pattern) {
    QueryResult r = empty_result(QueryType::Triple);
    r.bindings = match_pattern(snapshot, pattern);
    return r;
}

namespace {

using TermSet = std::set<Term>;

class PathEvaluator {
public:
    explicit PathEvaluator(const ClosureIndex& idx) : idx_(idx) {}

    TermSet step(const PathExpr& e, const TermSet& from, bool forward) const {
        switch (e.op) {
        case PathExpr::Op::Arc: {
            TermSet out;
            for (const auto& x : from) {
                const auto& next = forward ? idx_.objects(x, *e.predicate) : idx_.subjects(x, *e.predicate);
                out.insert(next.begin(), next.end());
            }
            return out;
        }
        case PathExpr::Op::Inv:
            return step(e.parts.front(), from, !forward);
        case PathExpr::Op::Seq: {
            TermSet cur = from;
            if (forward) {
                for (const auto& p : e.parts)
                    cur = step(p, cur, true);
            } else {
                for (auto it = e.parts.rbegin(); it != e.parts.rend(); ++it)
                    cur = step(*it, cur, false);
            }
            return cur;
        }
        case PathExpr::Op::Or: {
            TermSet out;
            for (const auto& p : e.parts) {
                auto part = step(p, from, forward);
                out.insert(part.begin(), part.end());
            }
            return out;
        }
        case PathExpr::Op::RepStar: {
            // identity pairs exist only for terms of the derived view
            TermSet reached;
            TermSet frontier = from;
            while (!frontier.empty()) {
                TermSet next = set_minus(step(e.parts.front(), frontier, forward), reached);
                reached.insert(next.begin(), next.end());
                frontier = std::move(next);
            }
            for (const auto& x : from)
                if (idx_.terms().contains(x))
                    reached.insert(x);
            return reached;
        }
        }
        return {};
    }

private:
    const ClosureIndex& idx_;
};

} // namespace

QueryResult eval_path_query(const ClosureIndex& closure, const PathQuery& q) {
    QueryResult r = empty_result(QueryType::Path);
    r.terms = PathEvaluator(closure).step(q.path, TermSet{q.start}, true);
    return r;
}

QueryResult eval_path_query(const Graph& snapshot, const PathQuery& q) {
    return eval_path_query(ClosureIndex::compute(snapshot), q);
}

std::shared_ptr<const ClosureIndex> ClosureCache::get(std::uint64_t version, const Graph& snapshot) {
    std::lock_guard lock(mu_);
    if (!cached_ || version_ != version) {
        cached_ = std::make_shared<const ClosureIndex>(ClosureIndex::compute(snapshot));
        version_ = version;
    }
    return cached_;
}

QueryResult evaluate(const Query& q, const Graph& snapshot, std::uint64_t version, ClosureCache* cache) {
    if (const auto* pattern = std::get_if<TriplePattern>(&q))
        return eval_triple_query(snapshot, *pattern);
    const auto& path = std::get<PathQuery>(q);
    if (cache)
        return eval_path_query(*cache->get(version, snapshot), path);
    return eval_path_query(snapshot, path);
}

} // namespace sedvice
