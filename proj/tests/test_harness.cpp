#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>

#include "reactordb/harness.hpp"

using namespace reactordb;
using harness::WorkloadConfig;
using smartmart::LoadParams;

namespace {

LoadParams tiny_params() {
    LoadParams p = LoadParams::desk();
    p.sections = 2;
    p.items_per_section = 50;
    p.history_per_item = 10;
    p.carts = 2;
    return p;
}

}  // namespace

TEST_CASE("zipf: degenerate domain and analytic head probability") {
    std::mt19937_64 rng(1);
    harness::ZipfGenerator one(0.5, 1);
    for (int i = 0; i < 100; ++i)
        CHECK(one(rng) == 0);

    // P(rank 1) = 1 / sum_{r=1..8} r^-5
    double denom = 0;
    for (int r = 1; r <= 8; ++r)
        denom += std::pow(r, -5.0);
    harness::ZipfGenerator steep(5.0, 8);
    CHECK(steep.probability(0) == doctest::Approx(1.0 / denom).epsilon(1e-12));
    CHECK(steep.probability(0) == doctest::Approx(0.96443).epsilon(1e-4));
}

TEST_CASE("zipf: empirical distribution within0.01 total variation of the CDF") {
    const size_t n = 8;
    const int draws = 1'000'000;
    for (double theta : {0.0, 0.5, 0.99, 5.0}) {
        harness::ZipfGenerator zipf(theta, n);
        std::mt19937_64 rng(42);
        std::vector<double> freq(n, 0);
        for (int i = 0; i < draws; ++i)
            freq[zipf(rng)] += 1.0;
        double tv = 0;
        for (size_t r = 0; r < n; ++r)
            tv += std::abs(freq[r] / draws - zipf.probability(r));
        tv /= 2;
        CHECK(tv <= 0.01);
    }
    // theta ~ 0: each of 8 ranks lands near 1/8
    harness::ZipfGenerator flat(0.01, 8);
    std::mt19937_64 rng(7);
    std::vector<double> freq(8, 0);
    for (int i = 0; i < draws; ++i)
        freq[flat(rng)] += 1.0;
    for (size_t r = 0; r < 8; ++r)
        CHECK(std::abs(freq[r] / draws - 0.125) <= 0.01);
}

TEST_CASE("deployment presets match the paper's two modes") {
    LoadParams p = LoadParams::paper();
    auto sync = harness::sync_deployment(p);
    CHECK(sync.containers.size() == 1);
    CHECK(sync.containers[0].executors == 8);
    CHECK(sync.containers[0].router == runtime::RouterPolicy::affinity);
    CHECK(sync.reactor_map.at("Cart_3").executors == std::vector<ExecutorId>{3});
    CHECK(sync.reactor_map.at("Store_Section_5").executors.size() == 8);

    auto async = harness::async_deployment(p);
    CHECK(async.containers.size() == 9);  // 8 single-executor sections + 1 front
    for (size_t i = 1; i < async.containers.size(); ++i)
        CHECK(async.containers[i].executors == 1);
    CHECK(async.reactor_map.at("Store_Section_0").container == 1);
    CHECK(async.reactor_map.at("Cart_0").container == 0);
}

TEST_CASE("deployment file parsing and rejection diagnostics") {
    const char* path = "/tmp/reactordb_dep_test.cfg";
    {
        std::ofstream f(path);
        f << "# two containers\n"
          << "[container 0]\n"
          << "executors = 2\n"
          << "router = round_robin\n"
          << "pool_size = 3\n"
          << "active_limit = 2\n"
          << "[container 1]\n"
          << "executors = 1\n"
          << "[reactors]\n"
          << "Alpha = 0:0,1\n"
          << "Beta = 1:0\n";
    }
    auto cfg = harness::parse_deployment(path);
    CHECK(cfg.containers.size() == 2);
    CHECK(cfg.containers[0].executors == 2);
    CHECK(cfg.containers[0].router == runtime::RouterPolicy::round_robin);
    CHECK(cfg.containers[0].pool_size == 3);
    CHECK(cfg.containers[0].active_limit == 2);
    CHECK(cfg.reactor_map.at("Alpha").executors == std::vector<ExecutorId>{0, 1});

    {
        std::ofstream f(path);
        f << "[container 0]\nexecutors = 1\n[reactors]\nR = 0:0\nR = 0:0\n";
    }
    CHECK_THROWS_WITH_AS(harness::parse_deployment(path),
                         doctest::Contains("mapped twice"), ConfigError);

    {
        std::ofstream f(path);
        f << "[container 0]\nexecutors = 1\nwat = 1\n";
    }
    CHECK_THROWS_WITH_AS(harness::parse_deployment(path),
                         doctest::Contains("unknown key"), ConfigError);
    std::remove(path);
}

TEST_CASE("workload validation names the broken constraint") {
    LoadParams p = tiny_params();
    WorkloadConfig wl;
    wl.order_size = 32;
    wl.sections_spanned = 3;  // 3 does not divide 32
    CHECK_THROWS_AS(wl.validate(p), ConfigError);
    wl.sections_spanned = 2;
    CHECK_NOTHROW(wl.validate(p));
    wl.zipf_theta = -1;
    CHECK_THROWS_AS(wl.validate(p), ConfigError);
}

TEST_CASE("order generation is deterministic per worker stream") {
    LoadParams p = tiny_params();
    WorkloadConfig wl;
    wl.order_size = 8;
    wl.sections_spanned = 2;
    wl.seed = 9;

    std::mt19937_64 r1(wl.seed + 1), r2(wl.seed + 1);
    for (int i = 0; i < 50; ++i) {
        auto a = harness::next_order(wl, p, 1, r1);
        auto b = harness::next_order(wl, p, 1, r2);
        CHECK(a.customer == b.customer);
        CHECK(a.sections == b.sections);
        CHECK(a.items == b.items);
    }
}

TEST_CASE("order construction modes: fixed, all, zipfian, disjoint") {
    LoadParams p = LoadParams::desk();
    std::mt19937_64 rng(3);

    WorkloadConfig fixed;
    fixed.order_size = 8;
    fixed.sections_spanned = 2;
    auto of = harness::next_order(fixed, p, 0, rng);
    CHECK(of.items.size() == 8);
    for (size_t i = 0; i < 4; ++i)
        CHECK(of.sections[i] == 0);
    for (size_t i = 4; i < 8; ++i)
        CHECK(of.sections[i] == 1);

    WorkloadConfig all = fixed;
    all.section_choice = WorkloadConfig::SectionChoice::all;
    bool saw_high_section = false;
    for (int i = 0; i < 64; ++i) {
        auto oa = harness::next_order(all, p, 0, rng);
        std::set<int64_t> uniq(oa.sections.begin(), oa.sections.end());
        CHECK(uniq.size() == 2);  // k distinct sections
        for (int64_t s : oa.sections)
            if (s >= 2)
                saw_high_section = true;
    }
    CHECK(saw_high_section);  // drawn from all sections, not just the first k

    WorkloadConfig skewed = fixed;
    skewed.zipf_theta = 5.0;
    skewed.sections_spanned = 4;
    size_t head = 0, total = 0;
    for (int i = 0; i < 50; ++i) {
        auto oz = harness::next_order(skewed, p, 0, rng);
        for (int64_t s : oz.sections) {
            head += s == 0;
            ++total;
        }
    }
    CHECK(static_cast<double>(head) / static_cast<double>(total) > 0.9);

    WorkloadConfig disj = fixed;
    disj.workers = 4;
    disj.disjoint_items = true;
    auto o0 = harness::next_order(disj, p, 0, rng);
    auto o3 = harness::next_order(disj, p, 3, rng);
    int64_t slice = p.items_per_section / 4;
    for (int64_t it : o0.items)
        CHECK((it >= 1 && it <= slice));
    for (int64_t it : o3.items)
        CHECK((it >= 1 + 3 * slice && it <= 4 * slice));
}

TEST_CASE("csv: exact header, definition columns, empty emission") {
    const char* path = "/tmp/reactordb_csv_test.csv";
    harness::emit_csv({}, path);
    {
        std::ifstream f(path);
        std::string header;
        std::getline(f, header);
        CHECK(header ==
              "scenario,deployment,workers,order_size,sections,scan_window,zipf,"
              "delay_ms,epoch,committed,aborted,abort_rate,throughput_ips,"
              "mean_latency_us,stddev_latency_us,add_items_us,checkout_us,"
              "commit_us,seed");
        std::string rest;
        CHECK(!std::getline(f, rest));
    }

    harness::CsvRow row;
    row.scenario = "single";
    row.deployment = "sync";
    row.stats.committed = 30;
    row.stats.aborted = 10;
    harness::emit_csv({row}, path);
    {
        std::ifstream f(path);
        std::string header, line;
        std::getline(f, header);
        REQUIRE(std::getline(f, line));
        CHECK(line.find(",30,10,0.250000,") != std::string::npos);  // abort rate
    }
    std::remove(path);
}

TEST_CASE("run_point: attempts add up and contexts drain") {
    LoadParams p = tiny_params();
    WorkloadConfig wl;
    wl.workers = 2;
    wl.order_size = 4;
    wl.sections_spanned = 2;
    wl.max_interactions_per_worker = 25;
    wl.verify = true;

    harness::RunOptions opt;
    opt.load = p;
    auto rr = harness::run_point(harness::async_deployment(p), wl, opt);
    CHECK(rr.committed + rr.aborted == 50);
    CHECK(rr.engine_commits >= rr.committed);
    REQUIRE(rr.verify.has_value());
    CHECK(rr.verify->pass);
    CHECK(rr.verify->replayed == rr.engine_commits);
}

TEST_CASE("single-worker throughput and latency are near inverses") {
    // Needs a realistically sized interaction so that driver-loop overhead
    // is negligible against the transaction latency it measures.
    LoadParams p = tiny_params();
    p.items_per_section = 500;
    p.history_per_item = 60;
    WorkloadConfig wl;
    wl.workers = 1;
    wl.order_size = 8;
    wl.sections_spanned = 2;
    wl.scan_window = 60;
    wl.epochs = 2;
    wl.warmup_epochs = 1;
    wl.epoch_seconds = 1.0;

    harness::RunOptions opt;
    opt.load = p;
    auto rr = harness::run_point(harness::sync_deployment(p), wl, opt);
    REQUIRE(rr.mean_throughput() > 0);
    double busy = rr.mean_throughput() * rr.mean_latency_us() / 1e6;
    CHECK(busy > 0.9);
    CHECK(busy < 1.1);
}

TEST_CASE("serial replay oracle passes a single-worker run trivially") {
    LoadParams p = tiny_params();
    WorkloadConfig wl;
    wl.workers = 1;
    wl.order_size = 4;
    wl.sections_spanned = 2;
    wl.max_interactions_per_worker = 20;
    wl.verify = true;
    harness::RunOptions opt;
    opt.load = p;
    auto rr = harness::run_point(harness::sync_deployment(p), wl, opt);
    REQUIRE(rr.verify.has_value());
    CHECK(rr.verify->pass);
}

TEST_CASE("mutation test: a validation-skip bug is caught by the oracle") {
    LoadParams p = tiny_params();
    p.items_per_section = 2;  // force constant read-write collisions
    WorkloadConfig wl;
    wl.workers = 2;
    wl.order_size = 2;
    wl.sections_spanned = 2;
    wl.history_inserts = false;  // keep phase 1 free of insert locks
    wl.max_interactions_per_worker = 1500;
    wl.verify = true;

    harness::RunOptions opt;
    opt.load = p;
    opt.fault.skip_read_validation = true;
    auto rr = harness::run_point(harness::sync_deployment(p), wl, opt);
    REQUIRE(rr.verify.has_value());
    CHECK(!rr.verify->pass);
}

TEST_CASE("run_scenario: unknown name rejected, single emits epoch rows") {
    LoadParams p = tiny_params();
    harness::ScenarioOptions opt;
    opt.load = p;
    opt.deployment = "sync";
    opt.base.workers = 1;
    opt.base.order_size = 4;
    opt.base.sections_spanned = 2;
    opt.base.epochs = 1;
    opt.base.warmup_epochs = 0;
    opt.base.epoch_seconds = 0.2;

    CHECK_THROWS_AS(harness::run_scenario("bogus", opt), ConfigError);

    auto res = harness::run_scenario("single", opt);
    REQUIRE(res.rows.size() == 1);
    CHECK(res.rows[0].scenario == "single");
    CHECK(res.rows[0].deployment == "sync");
    CHECK(res.rows[0].stats.attempts() ==
          res.rows[0].stats.committed + res.rows[0].stats.aborted);
}
