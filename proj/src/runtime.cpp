#include "reactordb/runtime.hpp"

#include <algorithm>
#include <cstdio>

#if defined(__linux__)
#include <pthread.h>
#include <sched.h>
#endif

namespace reactordb::runtime {

namespace {

std::atomic<uint64_t> g_root_tid{0};

struct WorkerTls {
    Scheduler* sched = nullptr;
    ThreadState* state = nullptr;
};
thread_local WorkerTls tls_worker;

void pin_current_thread(uint32_t core) {
#if defined(__linux__)
    cpu_set_t set;
    CPU_ZERO(&set);
    CPU_SET(core % std::max(1u, std::thread::hardware_concurrency()), &set);
    // Best-effort affinity hint; failure is not an error.
    pthread_setaffinity_np(pthread_self(), sizeof(set), &set);
#else
    (void)core;
#endif
}

}  // namespace

const char* to_string(ThreadState s) {
    switch (s) {
        case ThreadState::READY: return "READY";
        case ThreadState::ACTIVE: return "ACTIVE";
        case ThreadState::BLOCKED: return "BLOCKED";
        case ThreadState::UNBLOCKED: return "UNBLOCKED";
    }
    return "?";
}

// ---------------------------------------------------------------------------
// FutureState

void FutureState::resolve(ArgPack value, std::optional<CommitOutcome> commit) {
    {
        std::lock_guard lk(m_);
        if (settled_)
            throw ContractViolation("future resolved twice");
        outcome_.ok = true;
        outcome_.value = std::move(value);
        outcome_.commit = std::move(commit);
        settled_ = true;
    }
    cv_.notify_all();
}

void FutureState::fail(std::string error, std::optional<CommitOutcome> commit) {
    {
        std::lock_guard lk(m_);
        if (settled_)
            throw ContractViolation("future resolved twice");
        outcome_.ok = false;
        outcome_.error = std::move(error);
        outcome_.commit = std::move(commit);
        settled_ = true;
    }
    cv_.notify_all();
}

bool FutureState::settled() const {
    std::lock_guard lk(m_);
    return settled_;
}

FutureState::Outcome FutureState::wait() {
    std::unique_lock lk(m_);
    cv_.wait(lk, [&] { return settled_; });
    return outcome_;
}

FutureState::Outcome await_future(const Future& f) {
    {
        std::lock_guard lk(f->m_);
        if (f->settled_)
            return f->outcome_;
    }
    WorkerTls w = tls_worker;
    if (w.sched) {
        w.sched->on_blocked(*w.state);
        FutureState::Outcome out = f->wait();
        w.sched->on_unblocked(*w.state);
        return out;
    }
    return f->wait();
}

Future make_ready_future(ArgPack value) {
    auto f = std::make_shared<FutureState>();
    f->resolve(std::move(value));
    return f;
}

Future make_failed_future(std::string error) {
    auto f = std::make_shared<FutureState>();
    f->fail(std::move(error));
    return f;
}

// ---------------------------------------------------------------------------
// Scheduler

Scheduler::Scheduler(uint32_t active_limit) : limit_(std::max(1u, active_limit)) {}

bool Scheduler::acquire_active(ThreadState& st, const std::atomic<bool>& stop) {
    std::unique_lock lk(m_);
    cv_.wait(lk, [&] {
        return stop.load(std::memory_order_relaxed) ||
               active_.load(std::memory_order_relaxed) < limit_;
    });
    if (stop.load(std::memory_order_relaxed))
        return false;
    uint32_t now = active_.fetch_add(1, std::memory_order_relaxed) + 1;
    uint32_t hw = high_water_.load(std::memory_order_relaxed);
    while (now > hw && !high_water_.compare_exchange_weak(hw, now)) {
    }
    st = ThreadState::ACTIVE;
    return true;
}

void Scheduler::release_slot() {
    {
        std::lock_guard lk(m_);
        active_.fetch_sub(1, std::memory_order_relaxed);
    }
    cv_.notify_one();
}

void Scheduler::on_blocked(ThreadState& st) {
    if (st == ThreadState::ACTIVE)
        release_slot();
    st = ThreadState::BLOCKED;
}

void Scheduler::on_unblocked(ThreadState& st) {
    st = ThreadState::UNBLOCKED;
}

void Scheduler::to_ready(ThreadState& st) {
    if (st == ThreadState::ACTIVE)
        release_slot();
    st = ThreadState::READY;
}

void Scheduler::wake_all() {
    cv_.notify_all();
}

// ---------------------------------------------------------------------------
// TransactionTask

bool TransactionTask::wait_for_subtxns() {
    bool ok = true;
    for (const TaskPtr& child : children) {
        FutureState::Outcome out = await_future(child->result);
        if (!out.ok && ok) {
            ok = false;
            if (error.empty())
                error = out.error;
        }
        if (!child->wait_for_subtxns() && ok) {
            ok = false;
            if (error.empty())
                error = child->error;
        }
    }
    if (!ok)
        failed = true;
    return ok;
}

// ---------------------------------------------------------------------------
// TransactionExecutor

TransactionExecutor::TransactionExecutor(ExecutorId id, Container& owner,
                                         uint32_t pool_size, uint32_t active_limit,
                                         std::optional<uint32_t> core, bool pin)
    : id_(id),
      container_(owner),
      pool_size_(std::max(1u, pool_size)),
      core_(core),
      pin_(pin),
      sched_(active_limit) {}

TransactionExecutor::~TransactionExecutor() {
    request_stop();
    join();
}

void TransactionExecutor::start() {
    pool_.reserve(pool_size_);
    for (uint32_t i = 0; i < pool_size_; ++i)
        pool_.emplace_back([this] { worker_main(); });
}

void TransactionExecutor::request_stop() {
    stop_.store(true, std::memory_order_relaxed);
    {
        std::lock_guard lk(qm_);
    }
    qcv_.notify_all();
    sched_.wake_all();
}

void TransactionExecutor::join() {
    for (auto& t : pool_)
        if (t.joinable())
            t.join();
    pool_.clear();
}

void TransactionExecutor::enqueue(TaskPtr task) {
    {
        std::lock_guard lk(qm_);
        queue_.push_back(std::move(task));
    }
    enqueued_.fetch_add(1, std::memory_order_relaxed);
    qcv_.notify_one();
}

size_t TransactionExecutor::queue_depth() const {
    std::lock_guard lk(qm_);
    return queue_.size();
}

TaskPtr TransactionExecutor::pop(ThreadState& st) {
    (void)st;
    std::unique_lock lk(qm_);
    qcv_.wait(lk, [&] {
        return stop_.load(std::memory_order_relaxed) || !queue_.empty();
    });
    if (queue_.empty())
        return nullptr;
    TaskPtr t = std::move(queue_.front());
    queue_.pop_front();
    return t;
}

void TransactionExecutor::worker_main() {
    if (pin_ && core_)
        pin_current_thread(*core_);
    ThreadState st = ThreadState::READY;
    tls_worker = WorkerTls{&sched_, &st};
    while (!stop_.load(std::memory_order_relaxed)) {
        if (!sched_.acquire_active(st, stop_))
            break;
        // Drain the queue while this thread keeps running unblocked.
        while (st == ThreadState::ACTIVE && !stop_.load(std::memory_order_relaxed)) {
            TaskPtr task = pop(st);
            if (!task)
                break;
            try {
                run_task(*task);
            } catch (const std::exception& e) {
                // Engine-level failure: surface it, keep the worker alive.
                std::fprintf(stderr, "[reactordb] executor %u: task %s.%s died: %s\n",
                             id_, task->reactor.c_str(), task->fn_name.c_str(), e.what());
                if (!task->result->settled())
                    task->result->fail(std::string("internal error: ") + e.what());
            }
        }
        sched_.to_ready(st);
    }
    tls_worker = WorkerTls{};
}

void TransactionExecutor::run_task(TransactionTask& task) {
    Container& c = container_;
    occ::DbContext* ctx;
    if (task.is_root) {
        task.tid = Runtime::next_root_tid();
        ctx = c.create_ctx(task.tid);
    } else {
        ctx = c.get_or_create_ctx(task.tid);
        if (!ctx->acquire()) {
            // Two sub-transactions of one root overlap on this container's
            // db context: conservatively abort the transaction.
            task.failed = true;
            task.error = "conservative abort: db context in use by a sibling sub-transaction";
            task.result->fail(task.error);
            return;
        }
    }
    task.ctx = ctx;

    ArgPack out;
    bool ok = true;
    try {
        out = task.body(task);
    } catch (const std::exception& e) {
        ok = false;
        task.failed = true;
        task.error = e.what();
    }
    bool children_ok = task.wait_for_subtxns();
    ok = ok && children_ok;

    if (task.is_root) {
        c.runtime().coordinator()->commit_or_abort(task, c, ok, std::move(out));
    } else {
        ctx->release();
        if (ok)
            task.result->resolve(std::move(out));
        else
            task.result->fail(task.error.empty() ? "sub-transaction failed" : task.error);
    }
}

// ---------------------------------------------------------------------------
// Container

Container::Container(const ContainerSpec& spec, Runtime& rt)
    : id_(spec.id), rt_(rt), policy_(spec.router) {
    for (uint32_t e = 0; e < spec.executors; ++e) {
        std::optional<uint32_t> core;
        if (!spec.cores.empty())
            core = spec.cores[e % spec.cores.size()];
        executors_.push_back(std::make_unique<TransactionExecutor>(
            e, *this, spec.pool_size, spec.active_limit, core,
            rt.config().pin_cores));
    }
}

void Container::start() {
    for (auto& e : executors_)
        e->start();
}

void Container::request_stop() {
    for (auto& e : executors_)
        e->request_stop();
}

void Container::join() {
    for (auto& e : executors_)
        e->join();
}

void Container::map_reactor(const std::string& name, std::vector<ExecutorId> executors) {
    auto route = std::make_unique<ReactorRoute>();
    route->executors = std::move(executors);
    routes_[name] = std::move(route);
}

ExecutorId Container::route(const std::string& reactor) {
    auto it = routes_.find(reactor);
    if (it == routes_.end() || it->second->executors.empty())
        throw ConfigError("reactor '" + reactor + "' is not mapped to an executor in container " +
                          std::to_string(id_));
    ReactorRoute& r = *it->second;
    if (r.executors.size() == 1)
        return r.executors[0];
    if (policy_ == RouterPolicy::affinity) {
        size_t h = std::hash<std::string>{}(reactor);
        return r.executors[h % r.executors.size()];
    }
    uint32_t n = r.next.fetch_add(1, std::memory_order_relaxed);
    return r.executors[n % r.executors.size()];
}

void Container::schedule(TaskPtr task) {
    ExecutorId e = route(task->reactor);
    executors_[e]->enqueue(std::move(task));
}

occ::DbContext* Container::create_ctx(uint64_t tid) {
    std::lock_guard lk(ctx_mu_);
    auto [it, inserted] = ctx_table_.try_emplace(tid, nullptr);
    if (!inserted)
        throw ContractViolation("create_ctx: context already exists for tid " +
                                std::to_string(tid));
    it->second = std::make_unique<occ::DbContext>(tid, id_);
    it->second->acquire();
    return it->second.get();
}

occ::DbContext* Container::get_or_create_ctx(uint64_t tid) {
    std::lock_guard lk(ctx_mu_);
    auto [it, inserted] = ctx_table_.try_emplace(tid, nullptr);
    if (inserted)
        it->second = std::make_unique<occ::DbContext>(tid, id_);
    return it->second.get();
}

occ::DbContext* Container::find_ctx(uint64_t tid) {
    std::lock_guard lk(ctx_mu_);
    auto it = ctx_table_.find(tid);
    return it == ctx_table_.end() ? nullptr : it->second.get();
}

void Container::end_txn(uint64_t tid) {
    std::lock_guard lk(ctx_mu_);
    ctx_table_.erase(tid);
}

size_t Container::live_ctx_count() const {
    std::lock_guard lk(ctx_mu_);
    return ctx_table_.size();
}

TransactionExecutor& Container::executor(ExecutorId id) {
    return *executors_.at(id);
}

// ---------------------------------------------------------------------------
// DeploymentConfig

void DeploymentConfig::validate() const {
    if (containers.empty())
        throw ConfigError("deployment has no containers");
    std::map<ContainerId, const ContainerSpec*> by_id;
    for (const auto& c : containers) {
        if (!by_id.emplace(c.id, &c).second)
            throw ConfigError("duplicate container id " + std::to_string(c.id));
        if (c.executors == 0)
            throw ConfigError("container " + std::to_string(c.id) + " has no executors");
        if (c.pool_size == 0)
            throw ConfigError("container " + std::to_string(c.id) + " has pool_size 0");
        if (c.active_limit == 0)
            throw ConfigError("container " + std::to_string(c.id) + " has active_limit 0");
    }
    if (reactor_map.empty())
        throw ConfigError("deployment maps no reactors");
    for (const auto& [name, placement] : reactor_map) {
        auto it = by_id.find(placement.container);
        if (it == by_id.end())
            throw ConfigError("reactor '" + name + "' mapped to unknown container " +
                              std::to_string(placement.container));
        if (placement.executors.empty())
            throw ConfigError("reactor '" + name + "' mapped to no executors");
        for (ExecutorId e : placement.executors)
            if (e >= it->second->executors)
                throw ConfigError("reactor '" + name + "' mapped to unknown executor " +
                                  std::to_string(e) + " in container " +
                                  std::to_string(placement.container));
    }
}

const ContainerSpec* DeploymentConfig::container_spec(ContainerId id) const {
    for (const auto& c : containers)
        if (c.id == id)
            return &c;
    return nullptr;
}

// ---------------------------------------------------------------------------
// Runtime

Runtime::Runtime(DeploymentConfig cfg) : cfg_(std::move(cfg)) {
    cfg_.validate();
    for (const auto& spec : cfg_.containers) {
        auto c = std::make_unique<Container>(spec, *this);
        by_id_[spec.id] = c.get();
        containers_.push_back(std::move(c));
    }
    for (const auto& [name, placement] : cfg_.reactor_map) {
        directory_[name] = placement.container;
        by_id_.at(placement.container)->map_reactor(name, placement.executors);
    }
    for (auto& c : containers_)
        c->start();
}

Runtime::~Runtime() {
    shutdown();
}

void Runtime::shutdown() {
    if (stopped_)
        return;
    stopped_ = true;
    for (auto& c : containers_)
        c->request_stop();
    for (auto& c : containers_)
        c->join();
}

uint64_t Runtime::next_root_tid() {
    return g_root_tid.fetch_add(1, std::memory_order_relaxed) + 1;
}

std::optional<ContainerId> Runtime::container_of(const std::string& reactor) const {
    auto it = directory_.find(reactor);
    if (it == directory_.end())
        return std::nullopt;
    return it->second;
}

Container& Runtime::container(ContainerId id) {
    return *by_id_.at(id);
}

Future Runtime::exec_call(TransactionTask* parent, const std::string& reactor,
                          std::string fn_name, ArgPack args,
                          TransactionTask::Body body) {
    auto task = std::make_shared<TransactionTask>();
    task->reactor = reactor;
    task->fn_name = std::move(fn_name);
    task->args = std::move(args);
    task->body = std::move(body);
    task->result = std::make_shared<FutureState>();
    if (parent) {
        task->is_root = false;
        task->tid = parent->tid;
        parent->children.push_back(task);
    } else {
        task->is_root = true;
    }

    auto dst = container_of(reactor);
    if (!dst) {
        task->result->fail("unknown reactor '" + reactor + "'");
        return task->result;
    }
    task->home_container = *dst;

    if (parent && *dst == parent->home_container) {
        // Same container: share the parent's db context and chain the call
        // synchronously on this thread.
        task->ctx = parent->ctx;
        ArgPack out;
        bool ok = true;
        try {
            out = task->body(*task);
        } catch (const std::exception& e) {
            ok = false;
            task->failed = true;
            task->error = e.what();
        }
        if (ok)
            task->result->resolve(std::move(out));
        else
            task->result->fail(task->error);
        return task->result;
    }

    if (parent)
        task->remote_dest = *dst;
    by_id_.at(*dst)->schedule(task);
    return task->result;
}

}  // namespace reactordb::runtime
