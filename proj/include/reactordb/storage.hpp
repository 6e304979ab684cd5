#pragma once

#include <atomic>
#include <deque>
#include <memory>
#include <mutex>
#include <shared_mutex>
#include <utility>
#include <vector>

#include "reactordb/common.hpp"

namespace reactordb::storage {

// Snapshot of a record's concurrency-control word, taken consistently with
// the record bytes it guards.
struct VersionWord {
    static constexpr uint64_t kLockBit = 1ull << 63;
    static constexpr uint64_t kPresentBit = 1ull << 62;
    static constexpr uint64_t kVersionMask = kPresentBit - 1;

    uint64_t word = 0;
    uint64_t committer_tid = 0;

    bool locked() const { return word & kLockBit; }
    bool present() const { return word & kPresentBit; }
    uint64_t version() const { return word & kVersionMask; }

    bool operator==(const VersionWord& o) const {
        return word == o.word && committer_tid == o.committer_tid;
    }
};

// Validation probe of a record's current state.
struct VersionProbe {
    uint64_t word = 0;
    uint64_t lock_owner = 0;  // meaningful only while locked

    bool locked() const { return word & VersionWord::kLockBit; }
    uint64_t version() const { return word & VersionWord::kVersionMask; }
};

struct NodeObservation {
    LeafId leaf = 0;
    uint64_t version = 0;
};

struct ReadResult {
    std::optional<Value> value;
    VersionWord vw;                     // set when value present
    std::optional<NodeObservation> node;  // set when key absent (phantom coverage)
};

struct ScanResult {
    struct Row {
        Key key;
        Value value;
        VersionWord vw;
    };
    std::vector<Row> rows;
    std::vector<NodeObservation> nodes;
};

struct LockForInsertResult {
    bool acquired = false;
    bool already_visible = false;  // key exists as a committed row
    // Set when creating the placeholder split a leaf: the old leaf's id,
    // whose structural version was bumped by this call. Lets the owning
    // context discount its own bumps during node-set validation.
    std::optional<LeafId> split_bumped;
};

struct KeySchema {
    std::vector<std::string> components;  // at most 2, diagnostics only
};

namespace detail {

// One table row. Records are allocated once and never move or die, so
// readers may hold bare pointers across structure changes.
struct Record {
    static constexpr size_t kWords = Value::kCapacity / 8;

    std::atomic<uint64_t> word{0};       // lock | present | version
    std::atomic<uint64_t> committer{0};  // tid of last committed writer
    std::atomic<uint64_t> owner{0};      // lock-owner token, valid while locked
    std::atomic<uint32_t> size{0};
    std::array<std::atomic<uint64_t>, kWords> payload{};
};

struct Leaf {
    LeafId id = 0;
    Key lower;  // fence: smallest key routed to this leaf
    std::atomic<uint64_t> version{1};
    std::vector<std::pair<Key, Record*>> slots;  // sorted by key
};

}  // namespace detail

// Versioned, ordered, in-memory table. The key space is partitioned into
// fixed-capacity leaves carrying structural version counters so that scan
// validation can detect inserts (including splits) in the scanned range.
//
// Readers never block writers: point reads use the record version word as a
// seqlock; the leaf directory is guarded by a shared mutex that is never held
// while spinning on a record lock.
class Table {
public:
    Table(TableId id, std::string name, KeySchema schema, uint32_t value_size,
          size_t leaf_capacity = 64);

    TableId id() const { return id_; }
    const std::string& name() const { return name_; }
    uint32_t value_size() const { return value_size_; }
    const KeySchema& key_schema() const { return schema_; }

    // Point read: consistent (value, version word) snapshot. Absent keys
    // return the covering leaf observation instead.
    ReadResult get(const Key& key) const;

    // Range scan over [lo, hi], optionally reversed and truncated. The node
    // set covers every leaf visited, including leaves with no matching keys.
    ScanResult scan(const Key& lo, const Key& hi, size_t limit = SIZE_MAX,
                    bool reverse = false) const;

    // Write-phase record locking. try_lock is reentrant for the owning
    // context and returns false when another context holds the lock.
    bool try_lock(const Key& key, uint64_t owner);
    void unlock(const Key& key, uint64_t owner);

    // Get-or-create a locked insert placeholder for `key`. The placeholder
    // stays invisible to readers until install() publishes it.
    LockForInsertResult lock_for_insert(const Key& key, uint64_t owner);

    // Install a buffered write under the record lock: replaces the value,
    // bumps the record version, stamps the committer and releases the lock.
    // Publishing a placeholder also bumps the covering leaf version.
    void install(const Key& key, const Value& value, uint64_t commit_tid,
                 uint64_t owner);

    // Validation probes.
    VersionProbe probe(const Key& key) const;
    uint64_t leaf_version(LeafId leaf) const;

    // Bootstrap-time bulk insert; single-threaded, no locking protocol.
    void load_insert(const Key& key, const Value& value);

    // Sorted dump of visible rows. Only meaningful on a quiesced table.
    std::vector<std::pair<Key, Value>> dump() const;

    size_t leaf_count() const;
    size_t visible_rows() const;

private:
    using Record = detail::Record;
    using Leaf = detail::Leaf;

    size_t leaf_pos_for(const Key& key) const;  // requires structure lock
    Leaf* leaf_for(const Key& key) const;
    Record* find_record(const Key& key) const;
    Record* require_record(const Key& key, const char* op) const;
    // Requires unique lock; reports the leaf bumped by a split, if any.
    Record* insert_slot(const Key& key, std::optional<LeafId>* split_bumped = nullptr);

    struct RecordSnapshot {
        bool present = false;
        Value value;
        VersionWord vw;
    };
    static RecordSnapshot read_record(const Record& rec);

    TableId id_;
    std::string name_;
    KeySchema schema_;
    uint32_t value_size_;
    size_t leaf_capacity_;

    mutable std::shared_mutex structure_;
    std::vector<std::unique_ptr<Leaf>> leaves_;  // sorted by lower fence
    std::vector<Leaf*> leaf_index_;              // by LeafId
    std::deque<std::unique_ptr<Record>> arena_;  // stable record storage
    std::atomic<uint64_t> next_leaf_id_{0};
};

}  // namespace reactordb::storage
