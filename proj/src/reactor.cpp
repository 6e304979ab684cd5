#include "reactordb/reactor.hpp"

namespace reactordb::api {

// ---------------------------------------------------------------------------
// Snapshot

std::optional<Snapshot::Divergence> Snapshot::first_divergence(
    const Snapshot& other) const {
    for (const auto& [id, rows] : tables) {
        auto it = other.tables.find(id);
        std::string label = id.first + "." + id.second;
        if (it == other.tables.end())
            return Divergence{label, Key{}, "table missing"};
        const auto& orows = it->second;
        size_t n = std::min(rows.size(), orows.size());
        for (size_t i = 0; i < n; ++i) {
            if (rows[i].first != orows[i].first)
                return Divergence{label, rows[i].first, "key mismatch"};
            if (!(rows[i].second == orows[i].second))
                return Divergence{label, rows[i].first, "value mismatch"};
        }
        if (rows.size() != orows.size()) {
            Key k = rows.size() > n ? rows[n].first : orows[n].first;
            return Divergence{label, k, "row count mismatch"};
        }
    }
    return std::nullopt;
}

// ---------------------------------------------------------------------------
// ReactorContext

ReactorContext::ReactorContext(Database& db, ReactorInstance& self,
                               runtime::TransactionTask& task)
    : db_(db), self_(self), task_(task) {}

int64_t ReactorContext::arg_int(size_t i) const {
    return std::get<int64_t>(task_.args.at(i));
}
double ReactorContext::arg_num(size_t i) const {
    return std::get<double>(task_.args.at(i));
}
const std::string& ReactorContext::arg_str(size_t i) const {
    return std::get<std::string>(task_.args.at(i));
}
const std::vector<int64_t>& ReactorContext::arg_ints(size_t i) const {
    return std::get<std::vector<int64_t>>(task_.args.at(i));
}
const std::vector<double>& ReactorContext::arg_nums(size_t i) const {
    return std::get<std::vector<double>>(task_.args.at(i));
}

storage::Table& ReactorContext::table(const std::string& relation) {
    auto it = self_.tables.find(relation);
    if (it == self_.tables.end())
        throw ContractViolation("reactor '" + self_.name + "' has no relation '" +
                                relation + "'");
    return *it->second;
}

std::optional<Value> ReactorContext::get(const std::string& relation, const Key& key) {
    return task_.ctx->read(table(relation), key);
}

std::vector<std::pair<Key, Value>> ReactorContext::scan(const std::string& relation,
                                                        const Key& lo, const Key& hi,
                                                        size_t limit, bool reverse) {
    return task_.ctx->scan(table(relation), lo, hi, limit, reverse);
}

void ReactorContext::put(const std::string& relation, const Key& key,
                         const Value& value) {
    task_.ctx->write(table(relation), key, value);
}

void ReactorContext::insert(const std::string& relation, const Key& key,
                            const Value& value) {
    task_.ctx->insert(table(relation), key, value);
}

void ReactorContext::upsert(const std::string& relation, const Key& key,
                            const Value& value) {
    storage::Table& t = table(relation);
    if (task_.ctx->read(t, key))
        task_.ctx->write(t, key, value);
    else
        task_.ctx->insert(t, key, value);
}

runtime::Future ReactorContext::call(const std::string& reactor, const std::string& fn,
                                     ArgPack args) {
    return db_.invoke(&task_, reactor, fn, std::move(args));
}

ArgPack ReactorContext::await(const runtime::Future& f) {
    runtime::FutureState::Outcome out = runtime::await_future(f);
    if (!out.ok)
        throw TxnFailure(out.error);
    return std::move(out.value);
}

// ---------------------------------------------------------------------------
// Database

Database::Database(runtime::DeploymentConfig cfg, commit::FaultInjection fault) {
    rt_ = std::make_unique<runtime::Runtime>(std::move(cfg));
    coordinator_ = std::make_unique<commit::TxnCoordinator>(*rt_, std::move(fault));
    rt_->set_coordinator(coordinator_.get());
}

Database::~Database() {
    rt_->shutdown();
}

void Database::declare_type(ReactorType type) {
    if (sealed_)
        throw ConfigError("declare_type after bootstrap");
    if (type.name.empty())
        throw ConfigError("reactor type needs a name");
    std::map<std::string, int> seen;
    for (const auto& r : type.relations)
        if (++seen[r.name] > 1)
            throw ConfigError("type '" + type.name + "': duplicate relation '" + r.name + "'");
    auto [it, inserted] = types_.emplace(type.name, std::move(type));
    if (!inserted)
        throw ConfigError("duplicate reactor type '" + it->first + "'");
}

void Database::create_reactor(const std::string& type_name,
                              const std::string& reactor_name) {
    if (sealed_)
        throw ConfigError("create_reactor after bootstrap");
    auto tit = types_.find(type_name);
    if (tit == types_.end())
        throw ConfigError("unknown reactor type '" + type_name + "'");
    if (instances_.count(reactor_name))
        throw ConfigError("reactor '" + reactor_name + "' already exists");
    auto home = rt_->container_of(reactor_name);
    if (!home)
        throw ConfigError("reactor '" + reactor_name + "' is not mapped in the deployment");

    auto inst = std::make_unique<ReactorInstance>();
    inst->name = reactor_name;
    inst->type = &tit->second;
    inst->container = *home;
    for (const auto& rel : tit->second.relations) {
        inst->tables.emplace(rel.name, std::make_unique<storage::Table>(
                                           next_table_id_++,
                                           reactor_name + "." + rel.name, rel.keys,
                                           rel.value_size));
    }
    instances_.emplace(reactor_name, std::move(inst));
}

runtime::Future Database::invoke(runtime::TransactionTask* parent,
                                 const std::string& reactor, const std::string& fn,
                                 ArgPack args) {
    auto iit = instances_.find(reactor);
    if (iit == instances_.end())
        return runtime::make_failed_future("unknown reactor '" + reactor + "'");
    ReactorInstance* inst = iit->second.get();
    auto fit = inst->type->functions.find(fn);
    if (fit == inst->type->functions.end())
        return runtime::make_failed_future("reactor type '" + inst->type->name +
                                           "' has no function '" + fn + "'");
    const ReactorFn* body = &fit->second;
    return rt_->exec_call(parent, reactor, fn, std::move(args),
                          [this, inst, body](runtime::TransactionTask& t) -> ArgPack {
                              ReactorContext rc(*this, *inst, t);
                              return (*body)(rc);
                          });
}

runtime::Future Database::submit_root(const std::string& reactor, const std::string& fn,
                                      ArgPack args) {
    sealed_ = true;
    return invoke(nullptr, reactor, fn, std::move(args));
}

storage::Table& Database::table(const std::string& reactor, const std::string& relation) {
    ReactorInstance& inst = instance(reactor);
    auto it = inst.tables.find(relation);
    if (it == inst.tables.end())
        throw ConfigError("reactor '" + reactor + "' has no relation '" + relation + "'");
    return *it->second;
}

ReactorInstance& Database::instance(const std::string& reactor) {
    auto it = instances_.find(reactor);
    if (it == instances_.end())
        throw ConfigError("unknown reactor '" + reactor + "'");
    return *it->second;
}

std::vector<std::string> Database::reactors() const {
    std::vector<std::string> out;
    out.reserve(instances_.size());
    for (const auto& [name, inst] : instances_)
        out.push_back(name);
    return out;
}

Snapshot Database::snapshot() const {
    Snapshot snap;
    for (const auto& [name, inst] : instances_)
        for (const auto& [rel, tab] : inst->tables)
            snap.tables[{name, rel}] = tab->dump();
    return snap;
}

}  // namespace reactordb::api
