#pragma once

#include <random>

#include "reactordb/smartmart.hpp"

namespace reactordb::harness {

// ---------------------------------------------------------------------------
// deployments

// Single container, one executor per cart, affinity router. Every
// transaction runs sequentially on its cart's executor.
runtime::DeploymentConfig sync_deployment(const smartmart::LoadParams& p);

// One single-executor container per store section plus one multi-executor
// container for carts, customers and group managers; section sub-calls are
// dispatched for asynchronous execution.
runtime::DeploymentConfig async_deployment(const smartmart::LoadParams& p);

// One container, one executor: fully serial, for the replay oracle.
runtime::DeploymentConfig replay_deployment(const smartmart::LoadParams& p);

// Line-oriented deployment files: `[container <id>]` sections with keys
// executors/router/pool_size/active_limit, then `[reactors]` entries of the
// form `name = container:exec[,exec...]`.
runtime::DeploymentConfig parse_deployment(const std::string& path);

// "sync"/"async" presets or a path to a deployment file.
runtime::DeploymentConfig deployment_by_name(const std::string& name_or_path,
                                             const smartmart::LoadParams& p);

// Sequential logical-core hints for every executor, container by container.
void assign_cores(runtime::DeploymentConfig& cfg);

// ---------------------------------------------------------------------------
// workload

class ZipfGenerator {
public:
    // P(rank r) proportional to 1/r^theta over ranks 1..n; theta 0 is uniform.
    ZipfGenerator(double theta, size_t n);
    size_t operator()(std::mt19937_64& rng) const;  // 0-based rank
    double probability(size_t rank0) const;
    size_t size() const { return cdf_.size(); }

private:
    std::vector<double> cdf_;
};

struct WorkloadConfig {
    uint32_t workers = 1;
    int64_t order_size = 32;       // N items per interaction
    int64_t sections_spanned = 0;  // k; 0 means every section in the deployment
    int64_t scan_window = 150;
    double zipf_theta = 0.0;  // > 0 selects per-item sections zipfian
    double delay_ms = 0.0;
    enum class SectionChoice { fixed, all };
    SectionChoice section_choice = SectionChoice::fixed;
    uint64_t seed = 42;
    uint32_t epochs = 5;
    uint32_t warmup_epochs = 2;
    double epoch_seconds = 1.0;
    bool history_inserts = true;
    bool disjoint_items = false;  // per-worker disjoint inventory slices
    uint64_t max_interactions_per_worker = 0;  // 0: run for the epoch schedule
    double pace_ips = 0.0;  // per-worker submission cap, 0 = unpaced
    bool verify = false;

    void validate(const smartmart::LoadParams& p) const;
};

struct Order {
    int64_t customer = 0;
    std::vector<int64_t> sections, items, qtys;
};

// Deterministic order construction; one rng stream per worker (seed + id).
Order next_order(const WorkloadConfig& wl, const smartmart::LoadParams& p,
                 uint32_t worker, std::mt19937_64& rng);

// ---------------------------------------------------------------------------
// measurement

struct EpochStats {
    uint32_t epoch = 0;
    uint64_t committed = 0;
    uint64_t aborted = 0;
    double throughput_ips = 0;
    double mean_latency_us = 0;
    double stddev_latency_us = 0;
    double add_items_us = 0;
    double checkout_us = 0;
    double commit_us = 0;

    uint64_t attempts() const { return committed + aborted; }
    double abort_rate() const {
        return attempts() ? static_cast<double>(aborted) / static_cast<double>(attempts())
                          : 0.0;
    }
};

struct VerifyReport {
    bool pass = true;
    std::string detail;
    uint64_t replayed = 0;
};

struct RunResult {
    std::vector<EpochStats> epochs;  // post-warmup
    uint64_t committed = 0;          // whole run
    uint64_t aborted = 0;
    uint64_t engine_commits = 0;
    uint64_t validation_aborts = 0;
    uint64_t node_version_aborts = 0;
    uint64_t exec_aborts = 0;
    std::optional<VerifyReport> verify;

    double mean_throughput() const;
    double mean_latency_us() const;
    double mean_commit_us() const;
};

struct RunOptions {
    smartmart::LoadParams load;
    commit::FaultInjection fault;
};

// One full measurement: bootstrap, register, load, drive W client workers,
// sample epochs, optionally verify by serial replay.
RunResult run_point(const runtime::DeploymentConfig& dep, const WorkloadConfig& wl,
                    const RunOptions& opt);

// Serial replay of the committed transactions in ascending commit-tid order
// on a fresh single-threaded engine; passes iff the final states match and
// the SmartMart conservation invariants hold.
VerifyReport verify_serializability(const api::Snapshot& live_final,
                                    const std::vector<commit::CommittedTxn>& trace,
                                    const smartmart::LoadParams& load,
                                    const smartmart::AppConfig& app);

// ---------------------------------------------------------------------------
// scenarios and CSV

struct CsvRow {
    std::string scenario;
    std::string deployment;
    uint32_t workers = 1;
    int64_t order_size = 0;
    int64_t sections = 0;
    int64_t scan_window = 0;
    double zipf = 0;
    double delay_ms = 0;
    EpochStats stats;
    uint64_t seed = 0;
};

void emit_csv(const std::vector<CsvRow>& rows, const std::string& path);

struct ScenarioOptions {
    std::string deployment;  // "", "both", "sync", "async", or a file path
    smartmart::LoadParams load;
    WorkloadConfig base;
    bool pin_cores = false;
};

extern const std::vector<std::string> kScenarioNames;

struct ScenarioResult {
    std::vector<CsvRow> rows;  // one per epoch per configuration point
    bool verify_ok = true;     // meaningful when the workload verifies
};

// Parameter sweeps mirroring the paper's studies.
ScenarioResult run_scenario(const std::string& name, const ScenarioOptions& opt);

}  // namespace reactordb::harness
