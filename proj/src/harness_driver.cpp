#include <chrono>
#include <cmath>
#include <set>
#include <thread>

#include "reactordb/harness.hpp"

namespace reactordb::harness {

using Clock = std::chrono::steady_clock;
using smartmart::LoadParams;

namespace {

double as_us(Clock::duration d) {
    return std::chrono::duration<double, std::micro>(d).count();
}

struct alignas(64) WorkerCounters {
    std::atomic<uint64_t> committed{0};
    std::atomic<uint64_t> aborted{0};
    std::atomic<uint64_t> lat_sum_us{0};
    std::atomic<uint64_t> lat_sumsq_us2{0};
    std::atomic<uint64_t> add_sum_us{0};
    std::atomic<uint64_t> checkout_sum_us{0};
    std::atomic<uint64_t> commit_sum_ns{0};
};

struct CounterSnapshot {
    uint64_t committed = 0, aborted = 0;
    uint64_t lat_sum = 0, lat_sumsq = 0, add_sum = 0, checkout_sum = 0, commit_ns = 0;
};

CounterSnapshot sample(const std::vector<std::unique_ptr<WorkerCounters>>& ctrs) {
    CounterSnapshot s;
    for (const auto& c : ctrs) {
        s.committed += c->committed.load(std::memory_order_relaxed);
        s.aborted += c->aborted.load(std::memory_order_relaxed);
        s.lat_sum += c->lat_sum_us.load(std::memory_order_relaxed);
        s.lat_sumsq += c->lat_sumsq_us2.load(std::memory_order_relaxed);
        s.add_sum += c->add_sum_us.load(std::memory_order_relaxed);
        s.checkout_sum += c->checkout_sum_us.load(std::memory_order_relaxed);
        s.commit_ns += c->commit_sum_ns.load(std::memory_order_relaxed);
    }
    return s;
}

EpochStats delta_stats(uint32_t epoch, double seconds, const CounterSnapshot& a,
                       const CounterSnapshot& b) {
    EpochStats st;
    st.epoch = epoch;
    st.committed = b.committed - a.committed;
    st.aborted = b.aborted - a.aborted;
    st.throughput_ips = static_cast<double>(st.committed) / seconds;
    if (st.committed) {
        double n = static_cast<double>(st.committed);
        double sum = static_cast<double>(b.lat_sum - a.lat_sum);
        double sumsq = static_cast<double>(b.lat_sumsq - a.lat_sumsq);
        st.mean_latency_us = sum / n;
        double var = sumsq / n - st.mean_latency_us * st.mean_latency_us;
        st.stddev_latency_us = var > 0 ? std::sqrt(var) : 0.0;
        st.add_items_us = static_cast<double>(b.add_sum - a.add_sum) / n;
        st.checkout_us = static_cast<double>(b.checkout_sum - a.checkout_sum) / n;
        st.commit_us = static_cast<double>(b.commit_ns - a.commit_ns) / 1000.0 / n;
    }
    return st;
}

}  // namespace

Order next_order(const WorkloadConfig& wl, const LoadParams& p, uint32_t worker,
                 std::mt19937_64& rng) {
    Order o;
    std::uniform_int_distribution<int64_t> cust(0, p.customers_per_cart - 1);
    o.customer = static_cast<int64_t>(worker) * p.customers_per_cart + cust(rng);

    int64_t k = wl.sections_spanned > 0 ? std::min(wl.sections_spanned, p.sections)
                                        : p.sections;
    int64_t n = wl.order_size;

    int64_t item_lo = 1, item_hi = p.items_per_section;
    if (wl.disjoint_items) {
        int64_t slice = p.items_per_section / wl.workers;
        if (slice < n)
            throw ConfigError("disjoint item slices too narrow for the order size");
        item_lo = 1 + static_cast<int64_t>(worker) * slice;
        item_hi = item_lo + slice - 1;
    }
    std::uniform_int_distribution<int64_t> item_dist(item_lo, item_hi);

    std::set<std::pair<int64_t, int64_t>> seen;
    auto push_line = [&](int64_t section) {
        int64_t item = item_dist(rng);
        while (!seen.emplace(section, item).second)
            item = item_dist(rng);
        o.sections.push_back(section);
        o.items.push_back(item);
        o.qtys.push_back(1);
    };

    if (wl.zipf_theta > 0) {
        ZipfGenerator zipf(wl.zipf_theta, static_cast<size_t>(k));
        for (int64_t i = 0; i < n; ++i)
            push_line(static_cast<int64_t>(zipf(rng)));
    } else if (wl.section_choice == WorkloadConfig::SectionChoice::fixed) {
        int64_t per = n / k;
        for (int64_t s = 0; s < k; ++s)
            for (int64_t i = 0; i < per; ++i)
                push_line(s);
    } else {
        // k distinct sections drawn uniformly from all loaded sections.
        std::vector<int64_t> pool(static_cast<size_t>(p.sections));
        for (size_t i = 0; i < pool.size(); ++i)
            pool[i] = static_cast<int64_t>(i);
        for (int64_t i = 0; i < k; ++i) {
            std::uniform_int_distribution<size_t> pick(static_cast<size_t>(i),
                                                       pool.size() - 1);
            std::swap(pool[static_cast<size_t>(i)], pool[pick(rng)]);
        }
        int64_t per = n / k;
        for (int64_t s = 0; s < k; ++s)
            for (int64_t i = 0; i < per; ++i)
                push_line(pool[static_cast<size_t>(s)]);
    }
    return o;
}

// ---------------------------------------------------------------------------
// run_point

namespace {

void worker_loop(uint32_t w, api::Database& db, const WorkloadConfig& wl,
                 const LoadParams& p, WorkerCounters& ctr, std::atomic<bool>& stop,
                 Clock::time_point start) {
    std::mt19937_64 rng(wl.seed + w);
    const std::string cart = smartmart::cart_name(w);
    uint64_t i = 0;
    while (!stop.load(std::memory_order_relaxed)) {
        if (wl.max_interactions_per_worker && i >= wl.max_interactions_per_worker)
            break;
        if (wl.pace_ips > 0) {
            auto due = start + std::chrono::duration_cast<Clock::duration>(
                                   std::chrono::duration<double>(
                                       static_cast<double>(i) / wl.pace_ips));
            std::this_thread::sleep_until(due);
        }
        Order o = next_order(wl, p, w, rng);

        auto t0 = Clock::now();
        auto add_fut = db.submit_root(cart, "add_items",
                                      {o.customer, o.sections, o.items, o.qtys});
        const auto& add_out = add_fut->wait();
        auto t1 = Clock::now();

        bool ok = add_out.ok && add_out.commit && add_out.commit->committed;
        double commit_us = add_out.commit ? add_out.commit->commit_micros : 0.0;
        double checkout_us = 0.0;
        if (ok) {
            auto co_fut = db.submit_root(cart, "checkout", {});
            const auto& co_out = co_fut->wait();
            auto t2 = Clock::now();
            checkout_us = as_us(t2 - t1);
            ok = co_out.ok && co_out.commit && co_out.commit->committed;
            commit_us += co_out.commit ? co_out.commit->commit_micros : 0.0;
        }
        auto tend = Clock::now();

        if (ok) {
            uint64_t lat = static_cast<uint64_t>(as_us(tend - t0));
            ctr.committed.fetch_add(1, std::memory_order_relaxed);
            ctr.lat_sum_us.fetch_add(lat, std::memory_order_relaxed);
            ctr.lat_sumsq_us2.fetch_add(lat * lat, std::memory_order_relaxed);
            ctr.add_sum_us.fetch_add(static_cast<uint64_t>(as_us(t1 - t0)),
                                     std::memory_order_relaxed);
            ctr.checkout_sum_us.fetch_add(static_cast<uint64_t>(checkout_us),
                                          std::memory_order_relaxed);
            ctr.commit_sum_ns.fetch_add(static_cast<uint64_t>(commit_us * 1000.0),
                                        std::memory_order_relaxed);
        } else {
            // Aborted interactions are data, not retried in this slot.
            ctr.aborted.fetch_add(1, std::memory_order_relaxed);
        }
        ++i;
    }
}

}  // namespace

double RunResult::mean_throughput() const {
    if (epochs.empty())
        return 0.0;
    double s = 0;
    for (const auto& e : epochs)
        s += e.throughput_ips;
    return s / static_cast<double>(epochs.size());
}

double RunResult::mean_latency_us() const {
    double s = 0;
    size_t n = 0;
    for (const auto& e : epochs)
        if (e.committed) {
            s += e.mean_latency_us;
            ++n;
        }
    return n ? s / static_cast<double>(n) : 0.0;
}

double RunResult::mean_commit_us() const {
    double s = 0;
    size_t n = 0;
    for (const auto& e : epochs)
        if (e.committed) {
            s += e.commit_us;
            ++n;
        }
    return n ? s / static_cast<double>(n) : 0.0;
}

RunResult run_point(const runtime::DeploymentConfig& dep, const WorkloadConfig& wl,
                    const RunOptions& opt) {
    LoadParams p = opt.load;
    if (static_cast<int64_t>(wl.workers) > p.carts)
        throw ConfigError("more workers than carts in the deployment");
    wl.validate(p);

    api::Database db(dep, opt.fault);
    smartmart::AppConfig app;
    app.scan_window = wl.scan_window;
    app.delay_ms = wl.delay_ms;
    app.history_inserts = wl.history_inserts;
    smartmart::register_types(db, app);
    smartmart::create_reactors(db, p);
    smartmart::load(db, p);
    if (wl.verify)
        db.coordinator().enable_trace();

    std::vector<std::unique_ptr<WorkerCounters>> counters;
    for (uint32_t w = 0; w < wl.workers; ++w)
        counters.push_back(std::make_unique<WorkerCounters>());

    std::atomic<bool> stop{false};
    auto start = Clock::now();
    std::vector<std::thread> workers;
    workers.reserve(wl.workers);
    for (uint32_t w = 0; w < wl.workers; ++w)
        workers.emplace_back([&, w] {
            worker_loop(w, db, wl, p, *counters[w], stop, start);
        });

    RunResult res;
    auto epoch_dur = std::chrono::duration<double>(wl.epoch_seconds);
    if (wl.max_interactions_per_worker > 0) {
        // Count mode: run to completion, report one epoch over the whole run.
        for (auto& t : workers)
            t.join();
        double secs = std::chrono::duration<double>(Clock::now() - start).count();
        CounterSnapshot zero, end = sample(counters);
        res.epochs.push_back(delta_stats(0, std::max(secs, 1e-9), zero, end));
    } else {
        for (uint32_t e = 0; e < wl.warmup_epochs; ++e)
            std::this_thread::sleep_for(epoch_dur);
        CounterSnapshot prev = sample(counters);
        for (uint32_t e = 0; e < wl.epochs; ++e) {
            std::this_thread::sleep_for(epoch_dur);
            CounterSnapshot cur = sample(counters);
            res.epochs.push_back(delta_stats(e, wl.epoch_seconds, prev, cur));
            prev = cur;
        }
        stop.store(true, std::memory_order_relaxed);
        for (auto& t : workers)
            t.join();
    }

    CounterSnapshot total = sample(counters);
    res.committed = total.committed;
    res.aborted = total.aborted;
    res.engine_commits = db.coordinator().commits();
    res.validation_aborts = db.coordinator().validation_aborts();
    res.node_version_aborts = db.coordinator().node_version_aborts();
    res.exec_aborts = db.coordinator().exec_aborts();

    if (wl.verify) {
        api::Snapshot live = db.snapshot();
        res.verify = verify_serializability(live, db.coordinator().trace(), p, app);
    }
    return res;
}

// ---------------------------------------------------------------------------
// serial-replay oracle

VerifyReport verify_serializability(const api::Snapshot& live_final,
                                    const std::vector<commit::CommittedTxn>& trace,
                                    const LoadParams& load,
                                    const smartmart::AppConfig& app) {
    VerifyReport rep;
    rep.replayed = trace.size();

    api::Database rdb(replay_deployment(load));
    smartmart::register_types(rdb, app);
    smartmart::create_reactors(rdb, load);
    smartmart::load(rdb, load);

    uint64_t checkouts = 0;
    for (const commit::CommittedTxn& txn : trace) {
        auto fut = rdb.submit_root(txn.reactor, txn.fn_name, txn.args);
        const auto& out = fut->wait();
        if (!out.ok || !out.commit || !out.commit->committed) {
            rep.pass = false;
            rep.detail = "replay aborted at commit_tid " + std::to_string(txn.commit_tid) +
                         " (" + txn.reactor + "." + txn.fn_name + "): " + out.error;
            return rep;
        }
        if (txn.fn_name == "checkout")
            ++checkouts;
    }

    api::Snapshot replayed = rdb.snapshot();
    auto div = live_final.first_divergence(replayed);
    if (!div)
        div = replayed.first_divergence(live_final);
    if (div) {
        rep.pass = false;
        rep.detail = "state divergence at " + div->table + " key " + div->key.str() +
                     ": " + div->what;
        return rep;
    }

    // SmartMart conservation invariants on the final state.
    for (int64_t s = 0; s < load.sections; ++s) {
        auto inv_it = live_final.tables.find({smartmart::section_name(s), "inventory"});
        auto hist_it =
            live_final.tables.find({smartmart::section_name(s), "purchase_history"});
        if (inv_it == live_final.tables.end() || hist_it == live_final.tables.end()) {
            rep.pass = false;
            rep.detail = "snapshot missing section relations";
            return rep;
        }
        std::map<int64_t, int64_t> sold;  // from history rows beyond the loaded ones
        for (const auto& [key, value] : hist_it->second)
            if (key.lo > load.history_per_item)
                sold[key.hi] += value.as<smartmart::HistoryRow>().qty;
        for (const auto& [key, value] : inv_it->second) {
            int64_t drop = load.initial_stock - value.as<smartmart::InventoryRow>().stock;
            int64_t appended = sold.count(key.hi) ? sold[key.hi] : 0;
            if (drop < 0 || (app.history_inserts && drop != appended)) {
                rep.pass = false;
                rep.detail = "inventory conservation violated for " +
                             smartmart::section_name(s) + " item " +
                             std::to_string(key.hi) + ": stock drop " +
                             std::to_string(drop) + ", history qty " +
                             std::to_string(appended);
                return rep;
            }
        }
    }

    uint64_t visits = 0;
    for (int64_t u = 0; u < load.customers(); ++u) {
        auto it = live_final.tables.find({smartmart::customer_name(u), "visits"});
        if (it != live_final.tables.end())
            visits += it->second.size();
    }
    if (visits != checkouts) {
        rep.pass = false;
        rep.detail = "visit rows (" + std::to_string(visits) +
                     ") do not match committed checkouts (" + std::to_string(checkouts) +
                     ")";
        return rep;
    }
    return rep;
}

}  // namespace reactordb::harness
