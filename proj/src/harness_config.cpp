#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "reactordb/harness.hpp"

namespace reactordb::harness {

using runtime::ContainerSpec;
using runtime::DeploymentConfig;
using runtime::ReactorPlacement;
using runtime::RouterPolicy;
using smartmart::LoadParams;

namespace {

std::vector<ExecutorId> all_executors(uint32_t n) {
    std::vector<ExecutorId> v(n);
    for (uint32_t i = 0; i < n; ++i)
        v[i] = i;
    return v;
}

// Cart_i and its customer set pin to executor i; sections, group managers
// and the store directory are reachable from every executor.
void map_front_container(DeploymentConfig& cfg, const LoadParams& p, ContainerId id,
                         uint32_t executors) {
    auto all = all_executors(executors);
    cfg.reactor_map[smartmart::store_name()] = {id, all};
    for (int64_t g = 0; g < p.group_managers; ++g)
        cfg.reactor_map[smartmart::group_manager_name(g)] = {id, all};
    for (int64_t c = 0; c < p.carts; ++c) {
        ExecutorId e = static_cast<ExecutorId>(c % executors);
        cfg.reactor_map[smartmart::cart_name(c)] = {id, {e}};
        for (int64_t u = 0; u < p.customers_per_cart; ++u)
            cfg.reactor_map[smartmart::customer_name(c * p.customers_per_cart + u)] =
                {id, {e}};
    }
}

}  // namespace

DeploymentConfig sync_deployment(const LoadParams& p) {
    DeploymentConfig cfg;
    uint32_t executors = static_cast<uint32_t>(p.carts);
    cfg.containers.push_back(
        ContainerSpec{0, executors, RouterPolicy::affinity, 4, 1, {}});
    map_front_container(cfg, p, 0, executors);
    auto all = all_executors(executors);
    for (int64_t s = 0; s < p.sections; ++s)
        cfg.reactor_map[smartmart::section_name(s)] = {0, all};
    cfg.validate();
    return cfg;
}

DeploymentConfig async_deployment(const LoadParams& p) {
    DeploymentConfig cfg;
    uint32_t executors = static_cast<uint32_t>(p.carts);
    cfg.containers.push_back(
        ContainerSpec{0, executors, RouterPolicy::affinity, 4, 1, {}});
    map_front_container(cfg, p, 0, executors);
    for (int64_t s = 0; s < p.sections; ++s) {
        ContainerId cid = static_cast<ContainerId>(1 + s);
        cfg.containers.push_back(ContainerSpec{cid, 1, RouterPolicy::affinity, 4, 1, {}});
        cfg.reactor_map[smartmart::section_name(s)] = {cid, {0}};
    }
    cfg.validate();
    return cfg;
}

DeploymentConfig replay_deployment(const LoadParams& p) {
    DeploymentConfig cfg;
    cfg.containers.push_back(ContainerSpec{0, 1, RouterPolicy::affinity, 2, 1, {}});
    for (const std::string& name : smartmart::reactor_names(p))
        cfg.reactor_map[name] = {0, {0}};
    cfg.validate();
    return cfg;
}

DeploymentConfig parse_deployment(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw ConfigError("cannot open deployment file '" + path + "'");

    DeploymentConfig cfg;
    ContainerSpec* current = nullptr;
    bool in_reactors = false;
    std::string line;
    size_t lineno = 0;

    auto fail = [&](const std::string& what) {
        throw ConfigError(path + ":" + std::to_string(lineno) + ": " + what);
    };

    while (std::getline(in, line)) {
        ++lineno;
        // strip comments and whitespace
        if (auto pos = line.find('#'); pos != std::string::npos)
            line.erase(pos);
        auto b = line.find_first_not_of(" \t\r");
        if (b == std::string::npos)
            continue;
        auto e = line.find_last_not_of(" \t\r");
        line = line.substr(b, e - b + 1);

        if (line.front() == '[') {
            if (line == "[reactors]") {
                in_reactors = true;
                current = nullptr;
                continue;
            }
            std::istringstream hdr(line);
            std::string word;
            ContainerId id;
            char open, close;
            if (!(hdr >> open >> word >> id >> close) || open != '[' || close != ']' ||
                word != "container")
                fail("malformed section header '" + line + "'");
            for (const auto& c : cfg.containers)
                if (c.id == id)
                    fail("duplicate container " + std::to_string(id));
            cfg.containers.push_back(ContainerSpec{id, 1, RouterPolicy::affinity, 4, 1, {}});
            current = &cfg.containers.back();
            in_reactors = false;
            continue;
        }

        auto eq = line.find('=');
        if (eq == std::string::npos)
            fail("expected 'key = value' in '" + line + "'");
        auto trim = [](std::string s) {
            auto b2 = s.find_first_not_of(" \t");
            auto e2 = s.find_last_not_of(" \t");
            return b2 == std::string::npos ? std::string() : s.substr(b2, e2 - b2 + 1);
        };
        std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));

        if (in_reactors) {
            auto colon = value.find(':');
            if (colon == std::string::npos)
                fail("reactor '" + key + "': expected container:executor_list");
            ReactorPlacement pl;
            pl.container = static_cast<ContainerId>(std::stoul(value.substr(0, colon)));
            std::istringstream execs(value.substr(colon + 1));
            std::string tok;
            while (std::getline(execs, tok, ','))
                pl.executors.push_back(static_cast<ExecutorId>(std::stoul(tok)));
            if (cfg.reactor_map.count(key))
                fail("reactor '" + key + "' mapped twice");
            cfg.reactor_map[key] = std::move(pl);
        } else {
            if (!current)
                fail("key '" + key + "' outside any [container] section");
            if (key == "executors")
                current->executors = static_cast<uint32_t>(std::stoul(value));
            else if (key == "router") {
                if (value == "affinity")
                    current->router = RouterPolicy::affinity;
                else if (value == "round_robin")
                    current->router = RouterPolicy::round_robin;
                else
                    fail("unknown router policy '" + value + "'");
            } else if (key == "pool_size")
                current->pool_size = static_cast<uint32_t>(std::stoul(value));
            else if (key == "active_limit")
                current->active_limit = static_cast<uint32_t>(std::stoul(value));
            else
                fail("unknown key '" + key + "'");
        }
    }
    cfg.validate();
    return cfg;
}

DeploymentConfig deployment_by_name(const std::string& name_or_path,
                                    const LoadParams& p) {
    if (name_or_path == "sync")
        return sync_deployment(p);
    if (name_or_path == "async")
        return async_deployment(p);
    return parse_deployment(name_or_path);
}

void assign_cores(DeploymentConfig& cfg) {
    uint32_t hw = std::max(1u, std::thread::hardware_concurrency());
    uint32_t next = 0;
    for (auto& c : cfg.containers) {
        c.cores.clear();
        for (uint32_t e = 0; e < c.executors; ++e)
            c.cores.push_back(next++ % hw);
    }
    cfg.pin_cores = true;
}

// ---------------------------------------------------------------------------
// zipf

ZipfGenerator::ZipfGenerator(double theta, size_t n) {
    if (n == 0)
        throw ConfigError("zipf: empty domain");
    if (theta < 0)
        throw ConfigError("zipf: negative skew constant");
    cdf_.resize(n);
    double acc = 0.0;
    for (size_t r = 1; r <= n; ++r) {
        acc += std::pow(static_cast<double>(r), -theta);
        cdf_[r - 1] = acc;
    }
    for (double& c : cdf_)
        c /= acc;
    cdf_.back() = 1.0;
}

size_t ZipfGenerator::operator()(std::mt19937_64& rng) const {
    double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
    if (it == cdf_.end())
        --it;
    return static_cast<size_t>(it - cdf_.begin());
}

double ZipfGenerator::probability(size_t rank0) const {
    if (rank0 >= cdf_.size())
        return 0.0;
    return rank0 == 0 ? cdf_[0] : cdf_[rank0] - cdf_[rank0 - 1];
}

// ---------------------------------------------------------------------------
// workload validation

void WorkloadConfig::validate(const LoadParams& p) const {
    if (workers == 0)
        throw ConfigError("workload: workers must be >= 1");
    if (order_size <= 0)
        throw ConfigError("workload: order_size must be positive");
    if (zipf_theta < 0)
        throw ConfigError("workload: zipf constant must be >= 0");
    if (scan_window <= 0)
        throw ConfigError("workload: scan_window must be positive");
    if (epochs == 0 && max_interactions_per_worker == 0)
        throw ConfigError("workload: needs epochs or an interaction count");
    if (epoch_seconds <= 0)
        throw ConfigError("workload: epoch_seconds must be positive");
    int64_t k = sections_spanned > 0 ? sections_spanned : p.sections;
    if (k > p.sections)
        throw ConfigError("workload: sections_spanned exceeds loaded sections");
    if (zipf_theta == 0 && order_size % k != 0)
        throw ConfigError("workload: sections (" + std::to_string(k) +
                          ") must divide order_size (" + std::to_string(order_size) +
                          ") for balanced orders");
}

// ---------------------------------------------------------------------------
// csv

void emit_csv(const std::vector<CsvRow>& rows, const std::string& path) {
    std::FILE* f = std::fopen(path.c_str(), "w");
    if (!f)
        throw ConfigError("cannot write CSV to '" + path + "'");
    std::fprintf(f,
                 "scenario,deployment,workers,order_size,sections,scan_window,zipf,"
                 "delay_ms,epoch,committed,aborted,abort_rate,throughput_ips,"
                 "mean_latency_us,stddev_latency_us,add_items_us,checkout_us,"
                 "commit_us,seed\n");
    for (const CsvRow& r : rows) {
        std::fprintf(f,
                     "%s,%s,%u,%lld,%lld,%lld,%.3f,%.3f,%u,%llu,%llu,%.6f,%.3f,%.3f,"
                     "%.3f,%.3f,%.3f,%.3f,%llu\n",
                     r.scenario.c_str(), r.deployment.c_str(), r.workers,
                     static_cast<long long>(r.order_size),
                     static_cast<long long>(r.sections),
                     static_cast<long long>(r.scan_window), r.zipf, r.delay_ms,
                     r.stats.epoch, static_cast<unsigned long long>(r.stats.committed),
                     static_cast<unsigned long long>(r.stats.aborted),
                     r.stats.abort_rate(), r.stats.throughput_ips,
                     r.stats.mean_latency_us, r.stats.stddev_latency_us,
                     r.stats.add_items_us, r.stats.checkout_us, r.stats.commit_us,
                     static_cast<unsigned long long>(r.seed));
    }
    std::fclose(f);
}

}  // namespace reactordb::harness
