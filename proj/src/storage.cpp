#include "reactordb/storage.hpp"

#include <algorithm>
#include <thread>

namespace reactordb::storage {

namespace {

inline void cpu_relax() {
#if defined(__x86_64__) || defined(__i386__)
    __builtin_ia32_pause();
#else
    std::this_thread::yield();
#endif
}

inline bool slot_less(const std::pair<Key, detail::Record*>& s, const Key& k) {
    return s.first < k;
}

}  // namespace

Table::Table(TableId id, std::string name, KeySchema schema, uint32_t value_size,
             size_t leaf_capacity)
    : id_(id),
      name_(std::move(name)),
      schema_(std::move(schema)),
      value_size_(value_size),
      leaf_capacity_(leaf_capacity) {
    if (value_size_ > Value::kCapacity)
        throw ConfigError("table " + name_ + ": value size exceeds record capacity");
    if (leaf_capacity_ < 4)
        throw ConfigError("table " + name_ + ": leaf capacity too small");
    auto first = std::make_unique<Leaf>();
    first->id = next_leaf_id_.fetch_add(1);
    first->lower = Key::min();
    leaf_index_.push_back(first.get());
    leaves_.push_back(std::move(first));
}

size_t Table::leaf_pos_for(const Key& key) const {
    // Rightmost leaf whose fence is <= key. The first fence is Key::min(),
    // so the search never underflows.
    auto it = std::upper_bound(leaves_.begin(), leaves_.end(), key,
                               [](const Key& k, const std::unique_ptr<Leaf>& l) {
                                   return k < l->lower;
                               });
    return static_cast<size_t>(it - leaves_.begin()) - 1;
}

Table::Leaf* Table::leaf_for(const Key& key) const {
    return leaves_[leaf_pos_for(key)].get();
}

Table::Record* Table::find_record(const Key& key) const {
    Leaf* leaf = leaf_for(key);
    auto it = std::lower_bound(leaf->slots.begin(), leaf->slots.end(), key, slot_less);
    if (it == leaf->slots.end() || it->first != key)
        return nullptr;
    return it->second;
}

Table::Record* Table::require_record(const Key& key, const char* op) const {
    Record* rec = find_record(key);
    if (!rec)
        throw ContractViolation(std::string(op) + ": no record for key " + key.str() +
                                " in table " + name_);
    return rec;
}

Table::RecordSnapshot Table::read_record(const Record& rec) {
    // Seqlock read: stable iff the version word is unchanged and unlocked
    // across the byte copy.
    for (uint32_t spins = 0;; ++spins) {
        uint64_t w1 = rec.word.load(std::memory_order_acquire);
        if (!(w1 & VersionWord::kPresentBit)) {
            // Insert placeholder (possibly locked by an in-flight insert):
            // not yet a member of the table.
            return {};
        }
        if (w1 & VersionWord::kLockBit) {
            if ((spins & 63u) == 63u)
                std::this_thread::yield();
            else
                cpu_relax();
            continue;
        }
        RecordSnapshot snap;
        uint32_t n = rec.size.load(std::memory_order_relaxed);
        uint64_t raw[Record::kWords];
        for (size_t i = 0; i < Record::kWords; ++i)
            raw[i] = rec.payload[i].load(std::memory_order_relaxed);
        uint64_t tid = rec.committer.load(std::memory_order_relaxed);
        std::atomic_thread_fence(std::memory_order_acquire);
        uint64_t w2 = rec.word.load(std::memory_order_relaxed);
        if (w1 == w2) {
            snap.present = true;
            snap.value.assign(raw, n);
            snap.vw = VersionWord{w1, tid};
            return snap;
        }
        cpu_relax();
    }
}

ReadResult Table::get(const Key& key) const {
    Record* rec = nullptr;
    NodeObservation obs;
    {
        std::shared_lock lk(structure_);
        Leaf* leaf = leaf_for(key);
        obs.leaf = leaf->id;
        obs.version = leaf->version.load(std::memory_order_acquire);
        auto it = std::lower_bound(leaf->slots.begin(), leaf->slots.end(), key, slot_less);
        if (it != leaf->slots.end() && it->first == key)
            rec = it->second;
    }
    ReadResult out;
    if (rec) {
        RecordSnapshot snap = read_record(*rec);
        if (snap.present) {
            out.value = std::move(snap.value);
            out.vw = snap.vw;
            return out;
        }
    }
    out.node = obs;
    return out;
}

ScanResult Table::scan(const Key& lo, const Key& hi, size_t limit, bool reverse) const {
    if (hi < lo)
        throw ContractViolation("scan: malformed range on table " + name_);
    ScanResult out;
    if (limit == 0)
        limit = SIZE_MAX;

    std::vector<std::pair<Key, Record*>> candidates;
    bool done = false;
    // Cursor: next key position to continue from, in scan direction.
    Key cursor = reverse ? hi : lo;
    bool first_leaf = true;

    while (!done) {
        candidates.clear();
        LeafId leaf_id;
        uint64_t leaf_ver;
        {
            std::shared_lock lk(structure_);
            size_t pos;
            if (first_leaf || !reverse) {
                pos = leaf_pos_for(cursor);
            } else {
                // Continuing a reverse scan: cursor holds the previous
                // leaf's fence; move to the rightmost leaf strictly below it.
                size_t p = leaf_pos_for(cursor);
                if (leaves_[p]->lower == cursor) {
                    if (p == 0) break;
                    pos = p - 1;
                } else {
                    pos = p;
                }
            }
            Leaf* leaf = leaves_[pos].get();
            leaf_id = leaf->id;
            leaf_ver = leaf->version.load(std::memory_order_acquire);
            for (const auto& s : leaf->slots) {
                if (s.first < lo || hi < s.first) continue;
                candidates.push_back(s);
            }
            if (!reverse) {
                if (pos + 1 < leaves_.size() && !(hi < leaves_[pos + 1]->lower)) {
                    cursor = leaves_[pos + 1]->lower;
                } else {
                    done = true;
                }
            } else {
                if (pos > 0 && !(leaf->lower < lo) && leaf->lower != Key::min()) {
                    cursor = leaf->lower;
                } else {
                    done = true;
                }
            }
        }
        first_leaf = false;
        out.nodes.push_back({leaf_id, leaf_ver});

        if (reverse)
            std::reverse(candidates.begin(), candidates.end());
        for (const auto& [k, rec] : candidates) {
            RecordSnapshot snap = read_record(*rec);
            if (!snap.present) continue;
            out.rows.push_back({k, std::move(snap.value), snap.vw});
            if (out.rows.size() >= limit) {
                done = true;
                break;
            }
        }
    }
    return out;
}

bool Table::try_lock(const Key& key, uint64_t owner) {
    Record* rec;
    {
        std::shared_lock lk(structure_);
        rec = require_record(key, "lock_record");
    }
    uint64_t w = rec->word.load(std::memory_order_relaxed);
    for (;;) {
        if (w & VersionWord::kLockBit) {
            // Reentrant within the owning context; anyone else loses.
            return rec->owner.load(std::memory_order_relaxed) == owner;
        }
        if (rec->word.compare_exchange_weak(w, w | VersionWord::kLockBit,
                                            std::memory_order_acquire,
                                            std::memory_order_relaxed)) {
            rec->owner.store(owner, std::memory_order_relaxed);
            return true;
        }
    }
}

void Table::unlock(const Key& key, uint64_t owner) {
    Record* rec;
    {
        std::shared_lock lk(structure_);
        rec = require_record(key, "unlock_record");
    }
    uint64_t w = rec->word.load(std::memory_order_relaxed);
    if (!(w & VersionWord::kLockBit) ||
        rec->owner.load(std::memory_order_relaxed) != owner)
        throw ContractViolation("unlock_record: caller does not hold lock on " +
                                key.str() + " in table " + name_);
    rec->owner.store(0, std::memory_order_relaxed);
    rec->word.store(w & ~VersionWord::kLockBit, std::memory_order_release);
}

Table::Record* Table::insert_slot(const Key& key, std::optional<LeafId>* split_bumped) {
    // Requires unique structure lock.
    size_t pos = leaf_pos_for(key);
    Leaf* leaf = leaves_[pos].get();
    if (leaf->slots.size() >= leaf_capacity_) {
        // Split: move the upper half into a fresh leaf. The old leaf's key
        // range shrinks, so its structural version must change.
        auto fresh = std::make_unique<Leaf>();
        fresh->id = next_leaf_id_.fetch_add(1);
        size_t mid = leaf->slots.size() / 2;
        fresh->lower = leaf->slots[mid].first;
        fresh->slots.assign(leaf->slots.begin() + static_cast<ptrdiff_t>(mid),
                            leaf->slots.end());
        leaf->slots.resize(mid);
        leaf->version.fetch_add(1, std::memory_order_acq_rel);
        if (split_bumped)
            *split_bumped = leaf->id;
        leaf_index_.push_back(fresh.get());
        leaves_.insert(leaves_.begin() + static_cast<ptrdiff_t>(pos) + 1,
                       std::move(fresh));
        if (!(key < leaves_[pos + 1]->lower))
            leaf = leaves_[pos + 1].get();
    }
    arena_.push_back(std::make_unique<Record>());
    Record* rec = arena_.back().get();
    auto it = std::lower_bound(leaf->slots.begin(), leaf->slots.end(), key, slot_less);
    leaf->slots.insert(it, {key, rec});
    return rec;
}

LockForInsertResult Table::lock_for_insert(const Key& key, uint64_t owner) {
    for (;;) {
        Record* rec;
        {
            std::shared_lock lk(structure_);
            rec = find_record(key);
        }
        if (!rec) {
            std::unique_lock lk(structure_);
            rec = find_record(key);
            if (!rec) {
                std::optional<LeafId> bumped;
                rec = insert_slot(key, &bumped);
                rec->word.store(VersionWord::kLockBit, std::memory_order_relaxed);
                rec->owner.store(owner, std::memory_order_relaxed);
                return {true, false, bumped};
            }
            // Raced with another inserter; fall through to the lock path.
        }
        if (!try_lock(key, owner))
            return {false, false, std::nullopt};
        uint64_t w = rec->word.load(std::memory_order_relaxed);
        return {true, (w & VersionWord::kPresentBit) != 0, std::nullopt};
    }
}

void Table::install(const Key& key, const Value& value, uint64_t commit_tid,
                    uint64_t owner) {
    // The shared structure lock pins the covering leaf so the visibility
    // bump on a published placeholder hits the leaf scanners would observe.
    std::shared_lock lk(structure_);
    Leaf* leaf = leaf_for(key);
    auto it = std::lower_bound(leaf->slots.begin(), leaf->slots.end(), key, slot_less);
    if (it == leaf->slots.end() || it->first != key)
        throw ContractViolation("install: no record for key " + key.str());
    Record* rec = it->second;
    uint64_t w = rec->word.load(std::memory_order_relaxed);
    if (!(w & VersionWord::kLockBit) ||
        rec->owner.load(std::memory_order_relaxed) != owner)
        throw ContractViolation("install: caller does not hold lock on " + key.str() +
                                " in table " + name_);
    bool was_visible = (w & VersionWord::kPresentBit) != 0;

    uint64_t raw[Record::kWords] = {};
    std::memcpy(raw, value.data(), value.size());
    for (size_t i = 0; i < Record::kWords; ++i)
        rec->payload[i].store(raw[i], std::memory_order_relaxed);
    rec->size.store(static_cast<uint32_t>(value.size()), std::memory_order_relaxed);
    rec->committer.store(commit_tid, std::memory_order_relaxed);
    rec->owner.store(0, std::memory_order_relaxed);
    uint64_t next = (((w & VersionWord::kVersionMask) + 1) & VersionWord::kVersionMask) |
                    VersionWord::kPresentBit;
    rec->word.store(next, std::memory_order_release);

    if (!was_visible)
        leaf->version.fetch_add(1, std::memory_order_acq_rel);
}

VersionProbe Table::probe(const Key& key) const {
    Record* rec;
    {
        std::shared_lock lk(structure_);
        rec = require_record(key, "probe");
    }
    VersionProbe p;
    p.word = rec->word.load(std::memory_order_acquire);
    p.lock_owner = rec->owner.load(std::memory_order_relaxed);
    return p;
}

uint64_t Table::leaf_version(LeafId leaf) const {
    std::shared_lock lk(structure_);
    if (leaf >= leaf_index_.size())
        throw ContractViolation("leaf_version: unknown leaf id");
    return leaf_index_[leaf]->version.load(std::memory_order_acquire);
}

void Table::load_insert(const Key& key, const Value& value) {
    std::unique_lock lk(structure_);
    Record* existing = find_record(key);
    if (existing)
        throw ContractViolation("load_insert: duplicate key " + key.str() +
                                " in table " + name_);
    Record* rec = insert_slot(key);
    uint64_t raw[Record::kWords] = {};
    std::memcpy(raw, value.data(), value.size());
    for (size_t i = 0; i < Record::kWords; ++i)
        rec->payload[i].store(raw[i], std::memory_order_relaxed);
    rec->size.store(static_cast<uint32_t>(value.size()), std::memory_order_relaxed);
    rec->word.store(VersionWord::kPresentBit | 1, std::memory_order_release);
}

std::vector<std::pair<Key, Value>> Table::dump() const {
    std::shared_lock lk(structure_);
    std::vector<std::pair<Key, Value>> out;
    for (const auto& leaf : leaves_) {
        for (const auto& [k, rec] : leaf->slots) {
            RecordSnapshot snap = read_record(*rec);
            if (snap.present)
                out.emplace_back(k, std::move(snap.value));
        }
    }
    return out;
}

size_t Table::leaf_count() const {
    std::shared_lock lk(structure_);
    return leaves_.size();
}

size_t Table::visible_rows() const {
    std::shared_lock lk(structure_);
    size_t n = 0;
    for (const auto& leaf : leaves_)
        for (const auto& [k, rec] : leaf->slots)
            if (rec->word.load(std::memory_order_acquire) & VersionWord::kPresentBit)
                ++n;
    return n;
}

}  // namespace reactordb::storage
