#pragma once

#include <mutex>

#include "reactordb/runtime.hpp"

namespace reactordb::commit {

// Test-only fault hooks, all off by default.
struct FaultInjection {
    // Force the first remote container's validation result to false on every
    // n-th root transaction whose function name matches `target_fn`.
    std::string target_fn;
    uint32_t every_nth = 0;
    // Skip read/node-set checks entirely (models a validation-skip bug; the
    // serializability oracle must catch the resulting anomalies).
    bool skip_read_validation = false;
};

// A committed root transaction, as recorded for the serial-replay oracle.
struct CommittedTxn {
    uint64_t commit_tid = 0;
    std::string reactor;
    std::string fn_name;
    ArgPack args;
};

// Linear two-phase commit over all containers spanned by a root transaction:
// validate the source container first, then each remote container in
// ascending id order, short-circuiting on the first failure; then run the
// write phase everywhere, or abort everywhere.
class TxnCoordinator : public runtime::CoordinatorIface {
public:
    explicit TxnCoordinator(runtime::Runtime& rt, FaultInjection fault = {});

    void commit_or_abort(runtime::TransactionTask& root, runtime::Container& src,
                         bool success, ArgPack result) override;

    // Deduplicated destination containers over the transitive sub-task tree,
    // excluding the source, in ascending container-id order.
    static std::vector<ContainerId> collect_remote_containers(
        const runtime::TransactionTask& root, ContainerId src);

    void enable_trace() { trace_enabled_ = true; }
    std::vector<CommittedTxn> trace() const;

    uint64_t commits() const { return commits_.load(std::memory_order_relaxed); }
    uint64_t validation_aborts() const {
        return validation_aborts_.load(std::memory_order_relaxed);
    }
    uint64_t exec_aborts() const { return exec_aborts_.load(std::memory_order_relaxed); }
    // Validation aborts whose first failed check was a leaf structural
    // version (scan invalidated by an insert or split).
    uint64_t node_version_aborts() const {
        return node_version_aborts_.load(std::memory_order_relaxed);
    }

private:
    uint64_t assign_commit_tid(uint64_t observed_max);

    runtime::Runtime& rt_;
    FaultInjection fault_;
    std::atomic<uint64_t> fault_counter_{0};
    std::atomic<uint64_t> commit_tid_{0};
    std::atomic<uint64_t> commits_{0};
    std::atomic<uint64_t> validation_aborts_{0};
    std::atomic<uint64_t> exec_aborts_{0};
    std::atomic<uint64_t> node_version_aborts_{0};

    bool trace_enabled_ = false;
    mutable std::mutex trace_mu_;
    std::vector<CommittedTxn> trace_;
};

}  // namespace reactordb::commit
