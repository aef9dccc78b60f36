#include "sedvice/store.hpp"

namespace sedvice {

TxOp::TxOp(OpKind k, Graph g) : kind(k), payload(std::move(g)) {
    if (payload.empty())
        throw rdf_error("transaction operation with empty payload");
}

NetOps normalize(const Transaction& tx) {
    // Each triple's op sequence reduces to one of: nothing, I, R, or R I.
    // Only the last element matters once reduced, so track the tail.
    struct Reduced {
        bool has_retract_head = false; // the "R" of "R I"
        std::optional<OpKind> tail;
    };
    struct ByValue {
        bool operator()(const Triple* a, const Triple* b) const { return *a < *b; }
    };
    // Small transactions use a linear scan; an index takes over past a few
    // dozen distinct triples.
    constexpr std::size_t linear_limit = 32;
    std::vector<std::pair<const Triple*, Reduced>> state;
    state.reserve(linear_limit);
    std::map<const Triple*, std::size_t, ByValue> index;
    auto slot = [&](const Triple& t) -> Reduced& {
        if (index.empty()) {
            for (auto& [p, r] : state)
                if (*p == t)
                    return r;
            if (state.size() < linear_limit) {
                state.emplace_back(&t, Reduced{});
                return state.back().second;
            }
            for (std::size_t i = 0; i < state.size(); ++i)
                index.emplace(state[i].first, i);
        }
        auto [it, fresh] = index.emplace(&t, state.size());
        if (fresh)
            state.emplace_back(&t, Reduced{});
        return state[it->second].second;
    };
    for (const auto& op : tx.ops) {
        for (const auto& t : op.payload) {
            auto& r = slot(t);
            if (op.kind == OpKind::Insert) {
                if (r.tail == OpKind::Retract) {
                    r.has_retract_head = true;
                }
                r.tail = OpKind::Insert;
            } else {
                if (r.tail == OpKind::Insert) {
                    // insert, retract cancels; what remains is the head (if any)
                    r.tail = r.has_retract_head ? std::optional(OpKind::Retract) : std::nullopt;
                    r.has_retract_head = false;
                } else {
                    r.tail = OpKind::Retract;
                }
            }
        }
    }
    NetOps out;
    for (auto& [t, r] : state)
        if (r.tail)
            out.emplace(*t, *r.tail);
    return out;
}

Store::Store(std::string space_name)
    : space_name_(std::move(space_name)), content_(std::make_shared<const Graph>()) {}

Transaction Store::skolemize(const Transaction& tx) {
    std::map<std::string, Term> minted;
    auto map_term = [&](const Term& t) -> Term {
        if (!t.is_blank())
            return t;
        auto it = minted.find(t.value());
        if (it != minted.end())
            return it->second;
        Term u = Term::uri("urn:skolem:" + space_name_ + ":" + std::to_string(++skolem_counter_));
        minted.emplace(t.value(), u);
        return u;
    };
    Transaction out;
    out.id = tx.id;
    out.ops.reserve(tx.ops.size());
    for (const auto& op : tx.ops) {
        Graph g;
        for (const auto& t : op.payload)
            g.insert(Triple(map_term(t.subject), t.predicate, map_term(t.object)));
        out.ops.emplace_back(op.kind, std::move(g));
    }
    return out;
}

Delta Store::apply(const Transaction& tx) {
    for (const auto& op : tx.ops)
        for (const auto& t : op.payload)
            if (t.subject.is_blank() || t.object.is_blank())
                return commit(normalize(skolemize(tx)));
    return commit(normalize(tx));
}

Delta Store::commit(const NetOps& ops) {
    Delta delta;
    auto next = std::make_shared<Graph>(*content_);
    for (const auto& [t, kind] : ops) {
        if (kind == OpKind::Insert) {
            if (next->insert(t))
                delta.added.insert(t);
        } else if (next->erase(t)) {
            delta.removed.insert(t);
        }
    }
    content_ = std::move(next);
    delta.version_after = ++version_;
    return delta;
}

std::pair<Store, Delta> apply_transaction(Store store, const Transaction& tx) {
    Delta d = store.apply(tx);
    return {std::move(store), std::move(d)};
}

} // namespace sedvice
