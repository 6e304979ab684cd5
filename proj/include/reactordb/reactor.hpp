#pragma once

#include "reactordb/commit.hpp"

namespace reactordb::api {

class Database;
class ReactorContext;

using ReactorFn = std::function<ArgPack(ReactorContext&)>;

struct RelationSchema {
    std::string name;
    storage::KeySchema keys;
    uint32_t value_size = Value::kCapacity;
};

// Application-defined reactor type: encapsulated relations plus named
// function bodies over a record-manager interface.
struct ReactorType {
    std::string name;
    std::vector<RelationSchema> relations;
    std::map<std::string, ReactorFn> functions;
};

struct ReactorInstance {
    std::string name;
    const ReactorType* type = nullptr;
    ContainerId container = 0;
    std::map<std::string, std::unique_ptr<storage::Table>> tables;
};

// Quiesced-state snapshot keyed by (reactor, relation), used by the
// serial-replay oracle.
struct Snapshot {
    std::map<std::pair<std::string, std::string>,
             std::vector<std::pair<Key, Value>>> tables;

    struct Divergence {
        std::string table;
        Key key;
        std::string what;
    };
    std::optional<Divergence> first_divergence(const Snapshot& other) const;
    bool operator==(const Snapshot& other) const {
        return !first_divergence(other) && !other.first_divergence(*this);
    }
};

// Handle passed to executing reactor functions: tracked access to the
// reactor's own relations and nested asynchronous calls to other reactors.
class ReactorContext {
public:
    ReactorContext(Database& db, ReactorInstance& self, runtime::TransactionTask& task);

    const std::string& self() const { return self_.name; }
    const ArgPack& args() const { return task_.args; }
    int64_t arg_int(size_t i) const;
    double arg_num(size_t i) const;
    const std::string& arg_str(size_t i) const;
    const std::vector<int64_t>& arg_ints(size_t i) const;
    const std::vector<double>& arg_nums(size_t i) const;

    std::optional<Value> get(const std::string& relation, const Key& key);
    std::vector<std::pair<Key, Value>> scan(const std::string& relation, const Key& lo,
                                            const Key& hi, size_t limit = SIZE_MAX,
                                            bool reverse = false);
    void put(const std::string& relation, const Key& key, const Value& value);
    void insert(const std::string& relation, const Key& key, const Value& value);
    // Tracked-read decision between put and insert.
    void upsert(const std::string& relation, const Key& key, const Value& value);

    // Nested asynchronous function call: fn(args) on the named reactor.
    runtime::Future call(const std::string& reactor, const std::string& fn,
                         ArgPack args);
    // Scheduler-aware wait; rethrows sub-transaction failure as TxnFailure.
    ArgPack await(const runtime::Future& f);

private:
    storage::Table& table(const std::string& relation);

    Database& db_;
    ReactorInstance& self_;
    runtime::TransactionTask& task_;
};

// Application-facing faсade: reactor declaration and instantiation at
// bootstrap, root submission afterwards.
class Database {
public:
    explicit Database(runtime::DeploymentConfig cfg, commit::FaultInjection fault = {});
    ~Database();

    void declare_type(ReactorType type);
    void create_reactor(const std::string& type_name, const std::string& reactor_name);

    runtime::Future submit_root(const std::string& reactor, const std::string& fn,
                                ArgPack args);

    // Direct table access for the loader and tests; not transactional.
    storage::Table& table(const std::string& reactor, const std::string& relation);
    ReactorInstance& instance(const std::string& reactor);
    bool has_reactor(const std::string& reactor) const {
        return instances_.count(reactor) != 0;
    }
    std::vector<std::string> reactors() const;

    Snapshot snapshot() const;

    runtime::Runtime& rt() { return *rt_; }
    commit::TxnCoordinator& coordinator() { return *coordinator_; }

private:
    friend class ReactorContext;

    // Builds the dispatchable invocation; failed future on unknown targets.
    runtime::Future invoke(runtime::TransactionTask* parent, const std::string& reactor,
                           const std::string& fn, ArgPack args);

    std::map<std::string, ReactorType> types_;
    std::map<std::string, std::unique_ptr<ReactorInstance>> instances_;
    std::unique_ptr<runtime::Runtime> rt_;
    std::unique_ptr<commit::TxnCoordinator> coordinator_;
    TableId next_table_id_ = 0;
    bool sealed_ = false;  // set on first submit; declarations are bootstrap-only
};

}  // namespace reactordb::api
