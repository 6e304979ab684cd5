#pragma once

#include <atomic>
#include <map>
#include <span>

#include "reactordb/storage.hpp"

namespace reactordb::occ {

enum class CtxStatus { active, validated, committed, aborted };

// First check that failed during validate(), for abort attribution.
enum class ValidationFailure {
    none,
    lock_contention,  // phase 1 could not lock a write/insert within bounds
    insert_exists,    // insert of a key that is already visible
    read_version,     // a tracked read changed or is locked by another context
    node_version,     // a scanned leaf's structural version changed
};

// Per-(transaction, container) concurrency-control state: tracked reads and
// scans, buffered writes and inserts, and the validation/write/abort phases
// of the commit protocol.
//
// A context is single-owner at any instant (acquire/release), but ownership
// moves between threads across sub-transaction hops.
class DbContext {
public:
    DbContext(uint64_t tid, ContainerId container);

    DbContext(const DbContext&) = delete;
    DbContext& operator=(const DbContext&) = delete;

    uint64_t tid() const { return tid_; }
    ContainerId container() const { return container_; }
    uint64_t token() const { return token_; }  // record-lock owner token
    CtxStatus status() const { return status_; }

    // Single-owner guard. A false acquire signals concurrent access by a
    // sibling sub-transaction and triggers a conservative abort upstream.
    bool acquire();
    void release();

    // Tracked point read. Buffered writes/inserts are returned directly and
    // leave no read-set entry (read-your-own-writes).
    std::optional<Value> read(storage::Table& table, const Key& key);

    // Tracked range scan with node-version capture; buffered inserts and
    // writes in range are merged into the result.
    std::vector<std::pair<Key, Value>> scan(storage::Table& table, const Key& lo,
                                            const Key& hi, size_t limit = SIZE_MAX,
                                            bool reverse = false);

    // Buffered mutations; invisible to other contexts until the write phase.
    void write(storage::Table& table, const Key& key, const Value& value);
    void insert(storage::Table& table, const Key& key, const Value& value);

    // Phase 1 locks the write and insert sets in global (table id, key)
    // order with bounded try-lock retries; phase 2 checks read and node
    // sets. On success the locks stay held until write_phase or abort.
    // check_read_sets=false is a fault-injection hook for mutation testing:
    // it runs phase 1 only, modelling a validation-skip bug.
    bool validate(bool check_read_sets = true);

    // Installs every buffered write and insert under the held locks and
    // releases them. Requires a successful validate().
    void write_phase(uint64_t commit_tid);

    // Discards buffers and releases any held locks; safe at any point
    // before write_phase. Storage is left untouched by this transaction.
    void abort();

    // Largest committer tid observed by tracked reads; the coordinator's
    // commit tid must exceed it.
    uint64_t max_observed_tid() const { return max_observed_tid_; }

    ValidationFailure last_failure() const { return last_failure_; }

    size_t read_set_size() const { return read_set_.size(); }
    size_t node_set_size() const { return node_set_.size(); }
    size_t write_set_size() const { return write_set_.size(); }
    size_t insert_set_size() const { return insert_set_.size(); }

private:
    struct BufferKey {
        TableId table;
        Key key;
        auto operator<=>(const BufferKey&) const = default;
    };
    struct Buffered {
        storage::Table* table;
        Value value;
    };
    struct ReadEntry {
        storage::Table* table;
        Key key;
        storage::VersionWord observed;
    };
    struct NodeEntry {
        storage::Table* table;
        LeafId leaf;
        uint64_t observed;
    };
    struct HeldLock {
        storage::Table* table;
        Key key;
    };

    const Buffered* buffered(const storage::Table& table, const Key& key) const;
    void note_read(storage::Table& table, const Key& key,
                   const storage::VersionWord& vw);
    bool lock_with_retries(storage::Table& table, const Key& key);

    uint64_t tid_;
    ContainerId container_;
    uint64_t token_;
    std::atomic<bool> in_use_{false};
    CtxStatus status_ = CtxStatus::active;

    std::vector<ReadEntry> read_set_;
    std::vector<NodeEntry> node_set_;
    std::map<BufferKey, Buffered> write_set_;
    std::map<BufferKey, Buffered> insert_set_;
    std::vector<HeldLock> held_;
    uint64_t max_observed_tid_ = 0;
    ValidationFailure last_failure_ = ValidationFailure::none;
};

}  // namespace reactordb::occ
