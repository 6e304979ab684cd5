#pragma once

#include <condition_variable>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <unordered_map>

#include "reactordb/occ.hpp"

namespace reactordb::runtime {

class Container;
class Runtime;
class TransactionExecutor;
class TransactionTask;

using TaskPtr = std::shared_ptr<TransactionTask>;

// Single-assignment result handle for a (sub-)transaction.
class FutureState {
public:
    struct Outcome {
        bool ok = false;
        ArgPack value;
        std::string error;
        std::optional<CommitOutcome> commit;  // set on root transactions
    };

    void resolve(ArgPack value, std::optional<CommitOutcome> commit = std::nullopt);
    void fail(std::string error, std::optional<CommitOutcome> commit = std::nullopt);

    bool settled() const;
    // Plain blocking wait; used by external client threads. Returns a copy:
    // the future may be the caller's only handle on the transaction.
    Outcome wait();

private:
    friend FutureState::Outcome await_future(const std::shared_ptr<FutureState>&);

    mutable std::mutex m_;
    std::condition_variable cv_;
    bool settled_ = false;
    Outcome outcome_;
};

using Future = std::shared_ptr<FutureState>;

// Fig. 3 thread lifecycle.
enum class ThreadState { READY, ACTIVE, BLOCKED, UNBLOCKED };

const char* to_string(ThreadState s);

// Per-executor cooperative scheduler: at most `active_limit` threads are
// ACTIVE at any instant. A thread that blocks on a future gives up its
// active slot and never re-enters ACTIVE until its current task ends.
class Scheduler {
public:
    explicit Scheduler(uint32_t active_limit);

    // READY -> ACTIVE; blocks until a slot frees. Returns false on stop.
    bool acquire_active(ThreadState& st, const std::atomic<bool>& stop);
    // ACTIVE -> BLOCKED (slot released) or UNBLOCKED -> BLOCKED.
    void on_blocked(ThreadState& st);
    // BLOCKED -> UNBLOCKED.
    void on_unblocked(ThreadState& st);
    // {ACTIVE, UNBLOCKED} -> READY at task end; releases the slot if held.
    void to_ready(ThreadState& st);

    void wake_all();

    uint32_t active_limit() const { return limit_; }
    uint32_t active_count() const { return active_.load(std::memory_order_relaxed); }
    uint32_t max_active_seen() const { return high_water_.load(std::memory_order_relaxed); }

private:
    void release_slot();

    uint32_t limit_;
    std::mutex m_;
    std::condition_variable cv_;
    std::atomic<uint32_t> active_{0};
    std::atomic<uint32_t> high_water_{0};
};

// A (sub-)transaction: function, args, target reactor, nesting links, and
// the per-container db context handle while executing.
class TransactionTask : public std::enable_shared_from_this<TransactionTask> {
public:
    using Body = std::function<ArgPack(TransactionTask&)>;

    std::string reactor;
    std::string fn_name;
    ArgPack args;
    Body body;
    bool is_root = false;
    uint64_t tid = 0;
    TransactionTask* parent = nullptr;
    std::vector<TaskPtr> children;
    occ::DbContext* ctx = nullptr;
    ContainerId home_container = 0;
    std::optional<ContainerId> remote_dest;  // set when dispatched cross-container
    Future result;
    bool failed = false;
    std::string error;

    // Awaits every transitive child; false if any failed. Sets error to the
    // first failure encountered.
    bool wait_for_subtxns();
};

// Commit protocol entry point; implemented by the commit module.
class CoordinatorIface {
public:
    virtual ~CoordinatorIface() = default;
    virtual void commit_or_abort(TransactionTask& root, Container& src, bool success,
                                 ArgPack result) = 0;
};

enum class RouterPolicy { affinity, round_robin };

struct ContainerSpec {
    ContainerId id = 0;
    uint32_t executors = 1;
    RouterPolicy router = RouterPolicy::affinity;
    uint32_t pool_size = 4;
    uint32_t active_limit = 1;
    std::vector<uint32_t> cores;  // optional per-executor logical core hints
};

struct ReactorPlacement {
    ContainerId container = 0;
    std::vector<ExecutorId> executors;
};

// Declarative mapping of reactors to executors to containers.
struct DeploymentConfig {
    std::vector<ContainerSpec> containers;
    std::map<std::string, ReactorPlacement> reactor_map;
    bool pin_cores = false;

    void validate() const;  // throws ConfigError with the offending key
    const ContainerSpec* container_spec(ContainerId id) const;
};

// Queue-draining worker pool with a cooperative scheduler.
class TransactionExecutor {
public:
    TransactionExecutor(ExecutorId id, Container& owner, uint32_t pool_size,
                        uint32_t active_limit, std::optional<uint32_t> core,
                        bool pin);
    ~TransactionExecutor();

    void start();
    void request_stop();
    void join();

    void enqueue(TaskPtr task);
    uint64_t enqueued_total() const { return enqueued_.load(std::memory_order_relaxed); }
    size_t queue_depth() const;
    Scheduler& scheduler() { return sched_; }
    ExecutorId id() const { return id_; }

private:
    void worker_main();
    TaskPtr pop(ThreadState& st);
    void run_task(TransactionTask& task);

    ExecutorId id_;
    Container& container_;
    uint32_t pool_size_;
    std::optional<uint32_t> core_;
    bool pin_;
    Scheduler sched_;

    mutable std::mutex qm_;
    std::condition_variable qcv_;
    std::deque<TaskPtr> queue_;
    std::atomic<uint64_t> enqueued_{0};

    std::vector<std::thread> pool_;
    std::atomic<bool> stop_{false};
};

// Shared-memory region plus its executors; transactions inside one container
// need OCC only, across containers they add 2PC.
class Container {
public:
    Container(const ContainerSpec& spec, Runtime& rt);

    ContainerId id() const { return id_; }
    Runtime& runtime() { return rt_; }

    void start();
    void request_stop();
    void join();

    void map_reactor(const std::string& name, std::vector<ExecutorId> executors);

    // Router: picks the destination executor for a reactor call.
    ExecutorId route(const std::string& reactor);
    // Transport driver: routes and enqueues (shared-memory dispatch).
    void schedule(TaskPtr task);

    occ::DbContext* create_ctx(uint64_t tid);        // acquired for the caller
    occ::DbContext* get_or_create_ctx(uint64_t tid);  // not acquired
    occ::DbContext* find_ctx(uint64_t tid);
    void end_txn(uint64_t tid);
    size_t live_ctx_count() const;

    TransactionExecutor& executor(ExecutorId id);
    size_t executor_count() const { return executors_.size(); }
    RouterPolicy router_policy() const { return policy_; }

private:
    struct ReactorRoute {
        std::vector<ExecutorId> executors;
        std::atomic<uint32_t> next{0};  // round-robin cursor
    };

    ContainerId id_;
    Runtime& rt_;
    RouterPolicy policy_;
    std::vector<std::unique_ptr<TransactionExecutor>> executors_;
    std::unordered_map<std::string, std::unique_ptr<ReactorRoute>> routes_;

    mutable std::mutex ctx_mu_;
    std::unordered_map<uint64_t, std::unique_ptr<occ::DbContext>> ctx_table_;
};

// The bootstrapped system: containers, executors, the global reactor
// directory, and the asynchronous function-call dispatch of a reactor call.
class Runtime {
public:
    explicit Runtime(DeploymentConfig cfg);
    ~Runtime();

    Runtime(const Runtime&) = delete;
    Runtime& operator=(const Runtime&) = delete;

    // Dispatch of a function call on a reactor (root when parent is null):
    // same-container calls chain synchronously on the calling thread; calls
    // to another container are enqueued at the routed destination executor.
    Future exec_call(TransactionTask* parent, const std::string& reactor,
                     std::string fn_name, ArgPack args, TransactionTask::Body body);

    std::optional<ContainerId> container_of(const std::string& reactor) const;
    Container& container(ContainerId id);
    size_t container_count() const { return containers_.size(); }
    const DeploymentConfig& config() const { return cfg_; }

    void set_coordinator(CoordinatorIface* c) { coordinator_ = c; }
    CoordinatorIface* coordinator() { return coordinator_; }

    void shutdown();

    static uint64_t next_root_tid();

private:
    DeploymentConfig cfg_;
    std::vector<std::unique_ptr<Container>> containers_;
    std::unordered_map<ContainerId, Container*> by_id_;
    std::unordered_map<std::string, ContainerId> directory_;
    CoordinatorIface* coordinator_ = nullptr;
    bool stopped_ = false;
};

// Scheduler-aware blocking wait. Executor workers transition through the
// Fig. 3 states; external client threads block on the future directly.
FutureState::Outcome await_future(const Future& f);

Future make_ready_future(ArgPack value);
Future make_failed_future(std::string error);

}  // namespace reactordb::runtime
