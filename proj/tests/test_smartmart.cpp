#include <doctest.h>

#include <cmath>
#include <random>
#include <set>

#include "reactordb/harness.hpp"

using namespace reactordb;
using smartmart::AppConfig;
using smartmart::LoadParams;

namespace {

// Independent two-pass oracle for the trend predictor.
double trend_oracle(const std::vector<int64_t>& q) {
    if (q.empty())
        return 0.0;
    double mean = 0;
    for (int64_t x : q)
        mean += static_cast<double>(x);
    mean /= static_cast<double>(q.size());
    double var = 0;
    for (int64_t x : q)
        var += (static_cast<double>(x) - mean) * (static_cast<double>(x) - mean);
    var /= static_cast<double>(q.size());
    return mean + std::sqrt(var);
}

struct Mart {
    LoadParams p;
    std::unique_ptr<api::Database> db;

    explicit Mart(LoadParams params = LoadParams::desk(), AppConfig app = {},
                  const char* deployment = "sync") {
        p = params;
        auto cfg = deployment == std::string("async") ? harness::async_deployment(p)
                                                      : harness::sync_deployment(p);
        db = std::make_unique<api::Database>(cfg);
        smartmart::register_types(*db, app);
        smartmart::create_reactors(*db, p);
        smartmart::load(*db, p);
    }

    runtime::FutureState::Outcome add(int64_t cart, int64_t customer,
                                      std::vector<int64_t> sections,
                                      std::vector<int64_t> items,
                                      std::vector<int64_t> qtys) {
        return db
            ->submit_root(smartmart::cart_name(cart), "add_items",
                          {customer, std::move(sections), std::move(items),
                           std::move(qtys)})
            ->wait();
    }

    runtime::FutureState::Outcome checkout(int64_t cart) {
        return db->submit_root(smartmart::cart_name(cart), "checkout", {})->wait();
    }

    int64_t stock(int64_t section, int64_t item) {
        return db->table(smartmart::section_name(section), "inventory")
            .get(Key(item))
            .value->as<smartmart::InventoryRow>()
            .stock;
    }
};

}  // namespace

TEST_CASE("predict_trend fixed points") {
    std::vector<int64_t> flat{5, 5, 5, 5};
    CHECK(smartmart::predict_trend(flat) == doctest::Approx(5.0).epsilon(1e-12));
    std::vector<int64_t> two{0, 2};
    CHECK(smartmart::predict_trend(two) == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(smartmart::predict_trend({}) == 0.0);
}

TEST_CASE("predict_trend matches the two-pass oracle on random windows") {
    std::mt19937_64 rng(7);
    std::uniform_int_distribution<int64_t> len(1, 300);
    std::uniform_int_distribution<int64_t> qty(0, 1000);
    for (int i = 0; i < 2000; ++i) {
        std::vector<int64_t> q(static_cast<size_t>(len(rng)));
        for (auto& x : q)
            x = qty(rng);
        double got = smartmart::predict_trend(q);
        double want = trend_oracle(q);
        CHECK(std::abs(got - want) <= 1e-9 * std::max(1.0, std::abs(want)));
    }
}

TEST_CASE("schema has five reactor types and eight relations") {
    LoadParams p = LoadParams::desk();
    Mart m(p);
    std::set<std::string> types;
    std::set<std::string> relations;
    for (const auto& name : m.db->reactors()) {
        const auto& inst = m.db->instance(name);
        types.insert(inst.type->name);
        for (const auto& [rel, tab] : inst.tables)
            relations.insert(inst.type->name + "." + rel);
    }
    CHECK(types.size() == 5);
    CHECK(relations.size() == 8);
}

TEST_CASE("loader populates paper-proportioned row counts deterministically") {
    LoadParams p = LoadParams::desk();
    p.seed = 99;
    Mart a(p), b(p);

    for (int64_t s = 0; s < p.sections; ++s) {
        CHECK(a.db->table(smartmart::section_name(s), "inventory").visible_rows() ==
              static_cast<size_t>(p.items_per_section));
        CHECK(a.db->table(smartmart::section_name(s), "purchase_history").visible_rows() ==
              static_cast<size_t>(p.items_per_section * p.history_per_item));
    }
    CHECK(a.stock(0, 7) == p.initial_stock);

    // same seed twice: bit-identical tables
    CHECK(a.db->snapshot() == b.db->snapshot());

    LoadParams q = p;
    q.seed = 100;
    Mart c(q);
    CHECK(!(a.db->snapshot() == c.db->snapshot()));
}

TEST_CASE("loader rejects non-positive parameters") {
    LoadParams p = LoadParams::desk();
    p.sections = 0;
    CHECK_THROWS_AS(p.validate(), ConfigError);
}

TEST_CASE("add_items inserts priced cart rows from every section") {
    LoadParams p = LoadParams::desk();
    Mart m(p);
    std::vector<int64_t> sections, items, qtys;
    for (int64_t s = 0; s < 4; ++s)
        for (int64_t i = 0; i < 2; ++i) {
            sections.push_back(s);
            items.push_back(10 + s * 2 + i);
            qtys.push_back(1);
        }
    auto out = m.add(0, 3, sections, items, qtys);
    REQUIRE(out.ok);
    REQUIRE(out.commit->committed);

    auto& cart_items = m.db->table(smartmart::cart_name(0), "cart_items");
    auto lines = cart_items.scan(Key(1, INT64_MIN), Key(1, INT64_MAX));
    REQUIRE(lines.rows.size() == items.size());
    double listed = 0;
    for (size_t i = 0; i < items.size(); ++i) {
        auto line = lines.rows[i].value.as<smartmart::CartItemRow>();
        CHECK(line.item == items[i]);
        CHECK(line.section == sections[i]);
        double price = m.db->table(smartmart::section_name(sections[i]), "inventory")
                           .get(Key(items[i]))
                           .value->as<smartmart::InventoryRow>()
                           .price;
        CHECK(line.unit_price == doctest::Approx(price));
        int64_t group = 3 % p.group_managers;
        CHECK(line.fixed_discount ==
              doctest::Approx(static_cast<double>((group + items[i]) % 10) / 100.0));
        listed += price;
    }
    CHECK(std::get<double>(out.value[0]) == doctest::Approx(listed));
}

TEST_CASE("add_items with zero items commits and binds the session") {
    Mart m;
    auto out = m.add(1, 9, {}, {}, {});
    REQUIRE(out.ok);
    CHECK(out.commit->committed);
    auto session = m.db->table(smartmart::cart_name(1), "cart_items")
                       .get(smartmart::kCartSessionKey)
                       .value->as<smartmart::CartSessionRow>();
    CHECK(session.customer == 9);
    CHECK(session.epoch == 1);

    // a different customer cannot join the active session
    auto clash = m.add(1, 10, {}, {}, {});
    CHECK(!clash.ok);
}

TEST_CASE("checkout of an empty cart returns 0 and records the visit") {
    Mart m;
    REQUIRE(m.add(0, 5, {}, {}, {}).ok);
    auto out = m.checkout(0);
    REQUIRE(out.ok);
    REQUIRE(out.commit->committed);
    CHECK(std::get<double>(out.value[0]) == 0.0);
    CHECK(m.db->table(smartmart::customer_name(5), "visits").visible_rows() == 1);

    // session terminated: checkout again fails
    auto again = m.checkout(0);
    CHECK(!again.ok);
}

TEST_CASE("checkout decrements stock, appends history, totals the discounts") {
    LoadParams p = LoadParams::desk();
    Mart m(p);
    std::vector<int64_t> sections, items, qtys;
    for (int64_t s = 0; s < 4; ++s)
        for (int64_t i = 0; i < 8; ++i) {
            sections.push_back(s);
            items.push_back(100 + i);
            qtys.push_back(1);
        }
    REQUIRE(m.add(2, 17, sections, items, qtys).ok);

    std::vector<size_t> hist_before;
    for (int64_t s = 0; s < 4; ++s)
        hist_before.push_back(
            m.db->table(smartmart::section_name(s), "purchase_history").visible_rows());

    auto out = m.checkout(2);
    REQUIRE(out.ok);
    REQUIRE(out.commit->committed);
    CHECK(std::get<double>(out.value[0]) > 0.0);

    int64_t total_decrement = 0;
    for (size_t i = 0; i < items.size(); ++i)
        total_decrement += p.initial_stock - m.stock(sections[i], items[i]);
    CHECK(total_decrement == 32);

    for (int64_t s = 0; s < 4; ++s) {
        size_t now =
            m.db->table(smartmart::section_name(s), "purchase_history").visible_rows();
        CHECK(now == hist_before[static_cast<size_t>(s)] + 8);
    }

    // async deployment spans one container per touched section
    CHECK(out.commit->containers_spanned.size() == 1);  // sync: all inline
}

TEST_CASE("checkout spans section containers under the async deployment") {
    Mart m(LoadParams::desk(), {}, "async");
    REQUIRE(m.add(0, 1, {0, 1, 2, 3}, {5, 5, 5, 5}, {1, 1, 1, 1}).ok);
    auto out = m.checkout(0);
    REQUIRE(out.ok);
    REQUIRE(out.commit->committed);
    CHECK(out.commit->containers_spanned == std::vector<ContainerId>{0, 1, 2, 3, 4});
}

TEST_CASE("insufficient stock aborts the whole checkout atomically") {
    LoadParams p = LoadParams::desk();
    p.initial_stock = 3;
    Mart m(p);
    // qty over stock is allowed at add time; the checkout decides
    REQUIRE(m.add(0, 1, {0, 1}, {4, 4}, {1, 5}).ok);
    auto out = m.checkout(0);
    CHECK(!out.ok);
    REQUIRE(out.commit.has_value());
    CHECK(!out.commit->committed);
    CHECK(m.stock(0, 4) == 3);  // section 0's decrement rolled back
    CHECK(m.stock(1, 4) == 3);
    CHECK(m.db->table(smartmart::customer_name(1), "visits").visible_rows() == 0);
}

TEST_CASE("trend window uses the most recent purchases including own append") {
    LoadParams p = LoadParams::desk();
    p.sections = 1;
    p.items_per_section = 4;
    p.history_per_item = 300;
    p.carts = 1;
    AppConfig app;
    app.scan_window = 150;
    Mart m(p, app);

    REQUIRE(m.add(0, 0, {0}, {1}, {1}).ok);
    REQUIRE(m.checkout(0).ok);

    // the appended row continues the per-item sequence
    auto& hist = m.db->table(smartmart::section_name(0), "purchase_history");
    auto last = hist.scan(Key(1, INT64_MIN), Key(1, INT64_MAX), 1, true);
    REQUIRE(last.rows.size() == 1);
    CHECK(last.rows[0].key == Key(1, 301));
    CHECK(last.rows[0].value.as<smartmart::HistoryRow>().qty == 1);
}

TEST_CASE("delay mode replaces the window scan with calibrated compute") {
    LoadParams p = LoadParams::desk();
    p.sections = 2;
    p.items_per_section = 8;
    p.history_per_item = 4;
    p.carts = 1;
    AppConfig app;
    app.delay_ms = 2.0;
    Mart m(p, app);

    REQUIRE(m.add(0, 0, {0, 1}, {1, 1}, {1, 1}).ok);
    auto t0 = std::chrono::steady_clock::now();
    auto out = m.checkout(0);
    double ms = std::chrono::duration<double, std::milli>(
                    std::chrono::steady_clock::now() - t0)
                    .count();
    REQUIRE(out.ok);
    CHECK(ms >= 3.0);  // two sections, ~2 ms busy work each, sequential in sync
    // stock and history unaffected by the delay control
    CHECK(m.stock(0, 1) == p.initial_stock - 1);
}

TEST_CASE("deployment transparency: identical committed state on sync and async") {
    LoadParams p = LoadParams::desk();
    p.items_per_section = 50;
    p.history_per_item = 10;
    api::Snapshot snaps[2];
    int idx = 0;
    for (const char* dep : {"sync", "async"}) {
        Mart m(p, {}, dep);
        for (int64_t c = 0; c < 2; ++c) {
            REQUIRE(m.add(c, c * p.customers_per_cart, {0, 1, 2, 3}, {7, 8, 9, 10},
                          {1, 1, 1, 1})
                        .ok);
            REQUIRE(m.checkout(c).ok);
        }
        snaps[idx++] = m.db->snapshot();
    }
    CHECK(snaps[0] == snaps[1]);
}
