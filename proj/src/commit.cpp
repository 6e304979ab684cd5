#include "reactordb/commit.hpp"

#include <algorithm>
#include <chrono>

namespace reactordb::commit {

using runtime::Container;
using runtime::TransactionTask;

TxnCoordinator::TxnCoordinator(runtime::Runtime& rt, FaultInjection fault)
    : rt_(rt), fault_(std::move(fault)) {}

namespace {

void walk(const TransactionTask& t, ContainerId src, std::vector<ContainerId>& out) {
    for (const auto& child : t.children) {
        if (child->remote_dest && *child->remote_dest != src)
            out.push_back(*child->remote_dest);
        walk(*child, src, out);
    }
}

}  // namespace

std::vector<ContainerId> TxnCoordinator::collect_remote_containers(
    const TransactionTask& root, ContainerId src) {
    std::vector<ContainerId> out;
    walk(root, src, out);
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

uint64_t TxnCoordinator::assign_commit_tid(uint64_t observed_max) {
    uint64_t cur = commit_tid_.load(std::memory_order_relaxed);
    uint64_t want;
    do {
        want = std::max(cur, observed_max) + 1;
    } while (!commit_tid_.compare_exchange_weak(cur, want, std::memory_order_acq_rel));
    return want;
}

void TxnCoordinator::commit_or_abort(TransactionTask& root, Container& src,
                                     bool success, ArgPack result) {
    auto t0 = std::chrono::steady_clock::now();
    bool exec_ok = success;

    occ::DbContext* src_ctx = root.ctx;
    std::vector<ContainerId> remotes = collect_remote_containers(root, src.id());

    // The root's own context is still held by this thread; every remote
    // context was released when its last sub-transaction finished.
    std::vector<occ::DbContext*> remote_ctxs;
    remote_ctxs.reserve(remotes.size());
    for (ContainerId cid : remotes) {
        occ::DbContext* ctx = rt_.container(cid).find_ctx(root.tid);
        if (ctx && !ctx->acquire())
            throw ContractViolation("commit: remote db context still in use");
        if (ctx)
            remote_ctxs.push_back(ctx);
    }

    bool force_remote_failure = false;
    if (fault_.every_nth && root.fn_name == fault_.target_fn && !remote_ctxs.empty()) {
        uint64_t n = fault_counter_.fetch_add(1, std::memory_order_relaxed) + 1;
        force_remote_failure = (n % fault_.every_nth) == 0;
    }

    bool valid = success;
    occ::ValidationFailure why = occ::ValidationFailure::none;
    if (valid) {
        valid = src_ctx->validate(!fault_.skip_read_validation);
        if (!valid)
            why = src_ctx->last_failure();
    }
    if (valid) {
        for (size_t i = 0; i < remote_ctxs.size(); ++i) {
            bool ok = remote_ctxs[i]->validate(!fault_.skip_read_validation);
            if (!ok)
                why = remote_ctxs[i]->last_failure();
            if (ok && force_remote_failure && i == 0)
                ok = false;  // injected remote validation failure
            if (!ok) {
                valid = false;
                break;
            }
        }
    }

    CommitOutcome outcome;
    outcome.containers_spanned.push_back(src.id());
    outcome.containers_spanned.insert(outcome.containers_spanned.end(),
                                      remotes.begin(), remotes.end());

    if (valid) {
        uint64_t observed = src_ctx->max_observed_tid();
        for (occ::DbContext* c : remote_ctxs)
            observed = std::max(observed, c->max_observed_tid());
        uint64_t tid = assign_commit_tid(observed);
        src_ctx->write_phase(tid);
        for (occ::DbContext* c : remote_ctxs)
            c->write_phase(tid);
        outcome.committed = true;
        outcome.commit_tid = tid;
        commits_.fetch_add(1, std::memory_order_relaxed);
        if (trace_enabled_) {
            std::lock_guard lk(trace_mu_);
            trace_.push_back({tid, root.reactor, root.fn_name, root.args});
        }
    } else {
        // Abort everywhere, including contexts that already validated; this
        // releases the record locks they hold.
        src_ctx->abort();
        for (occ::DbContext* c : remote_ctxs)
            c->abort();
        if (exec_ok) {
            validation_aborts_.fetch_add(1, std::memory_order_relaxed);
            if (why == occ::ValidationFailure::node_version)
                node_version_aborts_.fetch_add(1, std::memory_order_relaxed);
        } else {
            exec_aborts_.fetch_add(1, std::memory_order_relaxed);
        }
    }

    outcome.commit_micros =
        std::chrono::duration<double, std::micro>(std::chrono::steady_clock::now() - t0)
            .count();

    root.ctx = nullptr;
    if (root.failed || !exec_ok)
        root.result->fail(root.error.empty() ? "transaction failed" : root.error,
                          outcome);
    else
        root.result->resolve(std::move(result), outcome);

    src.end_txn(root.tid);
    for (ContainerId cid : remotes)
        rt_.container(cid).end_txn(root.tid);
}

std::vector<CommittedTxn> TxnCoordinator::trace() const {
    std::lock_guard lk(trace_mu_);
    std::vector<CommittedTxn> out = trace_;
    std::sort(out.begin(), out.end(),
              [](const CommittedTxn& a, const CommittedTxn& b) {
                  return a.commit_tid < b.commit_tid;
              });
    return out;
}

}  // namespace reactordb::commit
