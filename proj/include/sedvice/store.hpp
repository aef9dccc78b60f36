#pragma once
// The information store and its atomic transactions.

#include "sedvice/rdf.hpp"

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

namespace sedvice {

enum class OpKind { Insert, Retract };

struct TxOp {
    OpKind kind;
    Graph payload;

    // Throws rdf_error on an empty payload.
    TxOp(OpKind k, Graph g);

    static TxOp insert(Graph g) { return TxOp(OpKind::Insert, std::move(g)); }
    static TxOp retract(Graph g) { return TxOp(OpKind::Retract, std::move(g)); }
};

struct Transaction {
    std::uint64_t id = 0;
    std::vector<TxOp> ops;
};

// Net effect per triple after rewriting.
using NetOps = std::map<Triple, OpKind>;

// Decomposes graph ops into per-triple sequences and reduces each with
//   insert, insert -> insert
//   retract, retract -> retract
//   insert, retract -> (nothing)
// always rewriting the leftmost applicable pair (the rules are not confluent
// otherwise). A leftover "retract, insert" nets to insert.
NetOps normalize(const Transaction& tx);

struct Delta {
    Graph added;
    Graph removed;
    std::uint64_t version_after = 0;

    bool empty() const noexcept { return added.empty() && removed.empty(); }
};

class Store {
public:
    explicit Store(std::string space_name = "space");

    // Immutable view; later commits never touch it.
    std::shared_ptr<const Graph> snapshot() const noexcept { return content_; }
    const Graph& content() const noexcept { return *content_; }
    std::uint64_t version() const noexcept { return version_; }
    const std::string& space_name() const noexcept { return space_name_; }

    // Replaces every blank node by a fresh urn:skolem:<space>:<n> URI. A label
    // maps to the same URI throughout one transaction.
    Transaction skolemize(const Transaction& tx);

    // skolemize + normalize + commit. Bumps the version even when the net
    // effect is empty.
    Delta apply(const Transaction& tx);

    // Commits already-normalized, blank-free operations.
    Delta commit(const NetOps& ops);

private:
    std::string space_name_;
    std::shared_ptr<const Graph> content_;
    std::uint64_t version_ = 0;
    std::uint64_t skolem_counter_ = 0;
};

// Value-style wrapper over Store::apply.
std::pair<Store, Delta> apply_transaction(Store store, const Transaction& tx);

} // namespace sedvice
