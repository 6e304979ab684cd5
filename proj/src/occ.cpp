#include "reactordb/occ.hpp"

#include <algorithm>
#include <thread>

namespace reactordb::occ {

namespace {

std::atomic<uint64_t> g_next_token{1};

constexpr int kLockRetries = 100;

inline void backoff(int attempt) {
    if (attempt % 16 == 15) {
        std::this_thread::yield();
        return;
    }
    for (int i = 0; i < attempt; ++i) {
#if defined(__x86_64__) || defined(__i386__)
        __builtin_ia32_pause();
#else
        std::this_thread::yield();
#endif
    }
}

}  // namespace

DbContext::DbContext(uint64_t tid, ContainerId container)
    : tid_(tid), container_(container), token_(g_next_token.fetch_add(1)) {}

bool DbContext::acquire() {
    bool expected = false;
    return in_use_.compare_exchange_strong(expected, true, std::memory_order_acquire);
}

void DbContext::release() {
    in_use_.store(false, std::memory_order_release);
}

const DbContext::Buffered* DbContext::buffered(const storage::Table& table,
                                               const Key& key) const {
    BufferKey bk{table.id(), key};
    if (auto it = write_set_.find(bk); it != write_set_.end())
        return &it->second;
    if (auto it = insert_set_.find(bk); it != insert_set_.end())
        return &it->second;
    return nullptr;
}

void DbContext::note_read(storage::Table& table, const Key& key,
                          const storage::VersionWord& vw) {
    read_set_.push_back({&table, key, vw});
    max_observed_tid_ = std::max(max_observed_tid_, vw.committer_tid);
}

std::optional<Value> DbContext::read(storage::Table& table, const Key& key) {
    if (const Buffered* b = buffered(table, key))
        return b->value;
    storage::ReadResult r = table.get(key);
    if (r.value) {
        note_read(table, key, r.vw);
        return r.value;
    }
    node_set_.push_back({&table, r.node->leaf, r.node->version});
    return std::nullopt;
}

std::vector<std::pair<Key, Value>> DbContext::scan(storage::Table& table,
                                                   const Key& lo, const Key& hi,
                                                   size_t limit, bool reverse) {
    // Own buffered entries falling in the range, in scan order.
    std::vector<std::pair<Key, const Buffered*>> own;
    auto gather = [&](const std::map<BufferKey, Buffered>& set) {
        auto it = set.lower_bound(BufferKey{table.id(), lo});
        auto end = set.upper_bound(BufferKey{table.id(), hi});
        for (; it != end; ++it)
            own.emplace_back(it->first.key, &it->second);
    };
    gather(insert_set_);
    gather(write_set_);
    std::sort(own.begin(), own.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    if (reverse)
        std::reverse(own.begin(), own.end());

    size_t fetch = limit;
    if (limit != SIZE_MAX && !own.empty()) {
        fetch = limit + own.size();
        if (fetch < limit)
            fetch = SIZE_MAX;
    }
    storage::ScanResult sr = table.scan(lo, hi, fetch, reverse);
    for (const auto& n : sr.nodes)
        node_set_.push_back({&table, n.leaf, n.version});

    auto before = [&](const Key& a, const Key& b) { return reverse ? b < a : a < b; };

    std::vector<std::pair<Key, Value>> out;
    size_t si = 0, oi = 0;
    while (out.size() < limit && (si < sr.rows.size() || oi < own.size())) {
        bool take_own;
        if (oi >= own.size()) {
            take_own = false;
        } else if (si >= sr.rows.size()) {
            take_own = true;
        } else if (sr.rows[si].key == own[oi].first) {
            // Storage row shadowed by an own buffered write; the storage
            // version still joins the read set below.
            note_read(table, sr.rows[si].key, sr.rows[si].vw);
            ++si;
            take_own = true;
        } else {
            take_own = before(own[oi].first, sr.rows[si].key);
        }
        if (take_own) {
            out.emplace_back(own[oi].first, own[oi].second->value);
            ++oi;
        } else {
            note_read(table, sr.rows[si].key, sr.rows[si].vw);
            out.emplace_back(sr.rows[si].key, sr.rows[si].value);
            ++si;
        }
    }
    return out;
}

void DbContext::write(storage::Table& table, const Key& key, const Value& value) {
    BufferKey bk{table.id(), key};
    if (auto it = insert_set_.find(bk); it != insert_set_.end()) {
        it->second.value = value;  // write over own pending insert
        return;
    }
    write_set_[bk] = Buffered{&table, value};
}

void DbContext::insert(storage::Table& table, const Key& key, const Value& value) {
    BufferKey bk{table.id(), key};
    insert_set_[bk] = Buffered{&table, value};
}

bool DbContext::lock_with_retries(storage::Table& table, const Key& key) {
    for (int attempt = 0; attempt < kLockRetries; ++attempt) {
        if (table.try_lock(key, token_)) {
            held_.push_back({&table, key});
            return true;
        }
        backoff(attempt);
    }
    return false;
}

bool DbContext::validate(bool check_read_sets) {
    if (status_ != CtxStatus::active)
        throw ContractViolation("validate: context not active");
    last_failure_ = ValidationFailure::none;

    // Phase 1: lock the union of write and insert sets in (table id, key)
    // order. Both maps are already sorted; merge them. Splits caused by our
    // own placeholders bump leaves we may have scanned ourselves; those
    // bumps are accounted for so phase 2 only fails on foreign changes.
    std::map<std::pair<storage::Table*, LeafId>, uint64_t> own_bumps;
    auto wi = write_set_.begin();
    auto ii = insert_set_.begin();
    while (wi != write_set_.end() || ii != insert_set_.end()) {
        bool take_insert;
        if (wi == write_set_.end())
            take_insert = true;
        else if (ii == insert_set_.end())
            take_insert = false;
        else
            take_insert = ii->first < wi->first;
        if (take_insert) {
            auto r = ii->second.table->lock_for_insert(ii->first.key, token_);
            if (r.acquired)
                held_.push_back({ii->second.table, ii->first.key});
            if (!r.acquired || r.already_visible) {
                last_failure_ = r.acquired ? ValidationFailure::insert_exists
                                           : ValidationFailure::lock_contention;
                return false;
            }
            if (r.split_bumped)
                ++own_bumps[{ii->second.table, *r.split_bumped}];
            ++ii;
        } else {
            if (!lock_with_retries(*wi->second.table, wi->first.key)) {
                last_failure_ = ValidationFailure::lock_contention;
                return false;
            }
            ++wi;
        }
    }

    if (check_read_sets) {
        // Phase 2: every tracked read must still carry the observed version
        // and must not be locked by another context; every scanned leaf must
        // have an unchanged structural version.
        for (const ReadEntry& e : read_set_) {
            storage::VersionProbe p = e.table->probe(e.key);
            if (p.version() != e.observed.version() ||
                (p.locked() && p.lock_owner != token_)) {
                last_failure_ = ValidationFailure::read_version;
                return false;
            }
        }
        for (const NodeEntry& n : node_set_) {
            uint64_t expected = n.observed;
            if (auto it = own_bumps.find({n.table, n.leaf}); it != own_bumps.end())
                expected += it->second;
            if (n.table->leaf_version(n.leaf) != expected) {
                last_failure_ = ValidationFailure::node_version;
                return false;
            }
        }
    }
    status_ = CtxStatus::validated;
    return true;
}

void DbContext::write_phase(uint64_t commit_tid) {
    if (status_ != CtxStatus::validated)
        throw ContractViolation("write_phase: context not validated");
    for (auto& [bk, b] : write_set_)
        b.table->install(bk.key, b.value, commit_tid, token_);
    for (auto& [bk, b] : insert_set_)
        b.table->install(bk.key, b.value, commit_tid, token_);
    held_.clear();
    status_ = CtxStatus::committed;
}

void DbContext::abort() {
    if (status_ == CtxStatus::committed)
        throw ContractViolation("abort: context already committed");
    for (const HeldLock& h : held_)
        h.table->unlock(h.key, token_);  // aborted placeholders stay invisible
    held_.clear();
    write_set_.clear();
    insert_set_.clear();
    read_set_.clear();
    node_set_.clear();
    status_ = CtxStatus::aborted;
}

}  // namespace reactordb::occ
