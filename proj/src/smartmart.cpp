#include "reactordb/smartmart.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <map>
#include <random>

namespace reactordb::smartmart {

LoadParams LoadParams::desk() {
    return LoadParams{};
}

LoadParams LoadParams::paper() {
    LoadParams p;
    p.sections = 8;
    p.items_per_section = 10'000;
    p.history_per_item = 300;
    p.carts = 8;
    p.group_managers = 10;
    p.customers_per_cart = 30;
    p.initial_stock = 1'000'000;
    return p;
}

void LoadParams::validate() const {
    auto bad = [](const char* what) {
        throw ConfigError(std::string("load parameter ") + what + " must be positive");
    };
    if (sections <= 0) bad("sections");
    if (items_per_section <= 0) bad("items_per_section");
    if (history_per_item <= 0) bad("history_per_item");
    if (carts <= 0) bad("carts");
    if (group_managers <= 0) bad("group_managers");
    if (customers_per_cart <= 0) bad("customers_per_cart");
    if (initial_stock <= 0) bad("initial_stock");
}

double predict_trend(std::span<const int64_t> quantities) {
    if (quantities.empty())
        return 0.0;
    double mean = 0.0, m2 = 0.0;
    size_t n = 0;
    for (int64_t q : quantities) {
        ++n;
        double x = static_cast<double>(q);
        double d = x - mean;
        mean += d / static_cast<double>(n);
        m2 += d * (x - mean);
    }
    return mean + std::sqrt(m2 / static_cast<double>(n));
}

std::string cart_name(int64_t i) { return "Cart_" + std::to_string(i); }
std::string customer_name(int64_t i) { return "Customer_" + std::to_string(i); }
std::string group_manager_name(int64_t g) { return "Group_Manager_" + std::to_string(g); }
std::string section_name(int64_t s) { return "Store_Section_" + std::to_string(s); }

// ---------------------------------------------------------------------------
// delay mode

namespace {

uint64_t calibrate_iters_per_ms() {
    // Time a fixed chunk of xorshift iterations.
    uint64_t x = 0x9e3779b97f4a7c15ull;
    constexpr uint64_t chunk = 2'000'000;
    auto t0 = std::chrono::steady_clock::now();
    for (uint64_t i = 0; i < chunk; ++i) {
        x ^= x << 13;
        x ^= x >> 7;
        x ^= x << 17;
    }
    auto dt = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
                  .count();
    if (x == 0)  // keep the loop observable
        std::fprintf(stderr, "xorshift degenerated\n");
    if (dt <= 0.0)
        return chunk;
    return static_cast<uint64_t>(static_cast<double>(chunk) / dt);
}

uint64_t iters_per_ms() {
    static const uint64_t v = calibrate_iters_per_ms();
    return v;
}

}  // namespace

void busy_delay_ms(double ms) {
    uint64_t iters = static_cast<uint64_t>(ms * static_cast<double>(iters_per_ms()));
    uint64_t x = 0x2545f4914f6cdd1dull;
    for (uint64_t i = 0; i < iters; ++i) {
        x ^= x << 13;
        x ^= x >> 7;
        x ^= x << 17;
    }
    if (x == 0)
        std::fprintf(stderr, "xorshift degenerated\n");
}

// ---------------------------------------------------------------------------
// reactor types

namespace {

constexpr int64_t kPriceCentsMin = 100;
constexpr int64_t kPriceCentsMax = 9999;
constexpr int64_t kHistoryQtyMin = 1;
constexpr int64_t kHistoryQtyMax = 10;

ArgPack fn_get_group(api::ReactorContext& rc) {
    int64_t customer = rc.arg_int(0);
    auto row = rc.get("profile", Key(customer));
    if (!row)
        throw TxnFailure("unknown customer profile");
    return {row->as<ProfileRow>().group};
}

ArgPack fn_record_visit(api::ReactorContext& rc) {
    int64_t visit_ts = rc.arg_int(0);
    double total = rc.arg_num(1);
    rc.insert("visits", Key(visit_ts), Value::of(VisitRow{total}));
    return {};
}

ArgPack fn_get_discounts(api::ReactorContext& rc) {
    const auto& items = rc.arg_ints(0);
    std::vector<double> rates;
    rates.reserve(items.size());
    for (int64_t item : items) {
        auto row = rc.get("group_discounts", Key(item));
        rates.push_back(row ? row->as<DiscountRow>().rate : 0.0);
    }
    return {rates};
}

ArgPack fn_get_price(api::ReactorContext& rc) {
    int64_t item = rc.arg_int(0);
    auto row = rc.get("inventory", Key(item));
    if (!row)
        throw TxnFailure("unknown item " + std::to_string(item) + " in " + rc.self());
    return {row->as<InventoryRow>().price};
}

ArgPack fn_list_sections(api::ReactorContext& rc) {
    std::vector<int64_t> ids;
    for (const auto& [k, v] : rc.scan("sections", Key::min(), Key::max()))
        ids.push_back(k.hi);
    return {ids};
}

ArgPack fn_process_checkout(api::ReactorContext& rc, const AppConfig& cfg) {
    const auto& items = rc.arg_ints(0);
    const auto& qtys = rc.arg_ints(1);
    const auto& prices = rc.arg_nums(2);
    const auto& fixed = rc.arg_nums(3);

    double section_total = 0.0;
    for (size_t i = 0; i < items.size(); ++i) {
        int64_t item = items[i];
        int64_t qty = qtys[i];
        auto inv_raw = rc.get("inventory", Key(item));
        if (!inv_raw)
            throw TxnFailure("unknown item " + std::to_string(item) + " in " + rc.self());
        InventoryRow inv = inv_raw->as<InventoryRow>();
        if (inv.stock < qty)
            throw TxnFailure("insufficient stock for item " + std::to_string(item) +
                             " in " + rc.self());
        inv.stock -= qty;
        rc.put("inventory", Key(item), Value::of(inv));

        if (cfg.history_inserts) {
            auto last = rc.scan("purchase_history", Key(item, INT64_MIN),
                                Key(item, INT64_MAX), 1, /*reverse=*/true);
            int64_t seq = last.empty() ? 1 : last[0].first.lo + 1;
            rc.insert("purchase_history", Key(item, seq), Value::of(HistoryRow{qty}));
        }

        double variable = 0.0;
        if (cfg.delay_ms <= 0.0) {
            auto window = rc.scan("purchase_history", Key(item, INT64_MIN),
                                  Key(item, INT64_MAX),
                                  static_cast<size_t>(cfg.scan_window),
                                  /*reverse=*/true);
            std::vector<int64_t> q;
            q.reserve(window.size());
            for (const auto& [k, v] : window)
                q.push_back(v.as<HistoryRow>().qty);
            double pred = predict_trend(q);
            auto stats = rc.get("section_stats", Key(item));
            double ref = stats ? stats->as<SectionStatsRow>().ref_demand : 0.0;
            if (ref > 0.0 && pred < ref)
                variable = kMaxVariableDiscount * (1.0 - pred / ref);
        }
        section_total += static_cast<double>(qty) * prices[i] *
                         (1.0 - fixed[i] - variable);
    }
    if (cfg.delay_ms > 0.0)
        busy_delay_ms(cfg.delay_ms);
    return {section_total};
}

ArgPack fn_add_items(api::ReactorContext& rc) {
    int64_t customer = rc.arg_int(0);
    const auto& sections = rc.arg_ints(1);
    const auto& items = rc.arg_ints(2);
    const auto& qtys = rc.arg_ints(3);
    if (sections.size() != items.size() || items.size() != qtys.size())
        throw TxnFailure("add_items: ragged order");

    CartSessionRow session =
        rc.get("cart_items", kCartSessionKey)->as<CartSessionRow>();
    if (session.customer < 0) {
        session.customer = customer;
        session.epoch += 1;
        rc.put("cart_items", kCartSessionKey, Value::of(session));
    } else if (session.customer != customer) {
        throw TxnFailure("cart session bound to another customer");
    }

    // Price lookups carry no control-flow dependency; issue them before the
    // group -> discount chain and await afterwards.
    std::vector<runtime::Future> price_futs;
    price_futs.reserve(items.size());
    for (size_t i = 0; i < items.size(); ++i)
        price_futs.push_back(rc.call(section_name(sections[i]), "get_price", {items[i]}));

    int64_t group =
        std::get<int64_t>(rc.await(rc.call(customer_name(customer), "get_group",
                                           {customer}))[0]);
    std::vector<double> rates = std::get<std::vector<double>>(
        rc.await(rc.call(group_manager_name(group), "get_discounts",
                         {std::vector<int64_t>(items)}))[0]);

    // Continue the session's line numbering across add_items calls.
    auto last = rc.scan("cart_items", Key(session.epoch, INT64_MIN),
                        Key(session.epoch, INT64_MAX), 1, /*reverse=*/true);
    int64_t next_line = last.empty() ? 0 : last[0].first.lo + 1;

    double total_listed = 0.0;
    for (size_t i = 0; i < items.size(); ++i) {
        double price = std::get<double>(rc.await(price_futs[i])[0]);
        CartItemRow row;
        row.item = items[i];
        row.section = sections[i];
        row.qty = qtys[i];
        row.unit_price = price;
        row.fixed_discount = rates[i];
        rc.insert("cart_items", Key(session.epoch, next_line + static_cast<int64_t>(i)),
                  Value::of(row));
        total_listed += static_cast<double>(qtys[i]) * price;
    }
    return {total_listed};
}

ArgPack fn_checkout(api::ReactorContext& rc) {
    CartSessionRow session =
        rc.get("cart_items", kCartSessionKey)->as<CartSessionRow>();
    if (session.customer < 0)
        throw TxnFailure("checkout without an active session");

    // Cart lines of the current session, grouped by store section.
    struct SectionOrder {
        std::vector<int64_t> items, qtys;
        std::vector<double> prices, fixed;
    };
    std::map<int64_t, SectionOrder> by_section;
    for (const auto& [key, raw] : rc.scan("cart_items", Key(session.epoch, INT64_MIN),
                                          Key(session.epoch, INT64_MAX))) {
        CartItemRow row = raw.as<CartItemRow>();
        SectionOrder& so = by_section[row.section];
        so.items.push_back(row.item);
        so.qtys.push_back(row.qty);
        so.prices.push_back(row.unit_price);
        so.fixed.push_back(row.fixed_discount);
    }

    // High asynchronicity: every section sub-call is issued before any
    // result is awaited.
    std::vector<runtime::Future> futs;
    futs.reserve(by_section.size());
    for (const auto& [section, so] : by_section)
        futs.push_back(rc.call(section_name(section), "process_checkout",
                               {so.items, so.qtys, so.prices, so.fixed}));

    double total = 0.0;
    for (const auto& f : futs)
        total += std::get<double>(rc.await(f)[0]);

    rc.await(rc.call(customer_name(session.customer), "record_visit",
                     {session.epoch, total}));

    session.customer = -1;  // terminate the session; epoch stays
    rc.put("cart_items", kCartSessionKey, Value::of(session));
    return {total};
}

}  // namespace

void register_types(api::Database& db, const AppConfig& cfg) {
    storage::KeySchema one{{ "id" }};
    storage::KeySchema item_seq{{ "item_id", "seq_ts" }};
    storage::KeySchema session_line{{ "session_epoch", "line" }};

    api::ReactorType store;
    store.name = "Store";
    store.relations = {{"sections", one, sizeof(SectionRow)}};
    store.functions["list_sections"] = fn_list_sections;
    db.declare_type(std::move(store));

    api::ReactorType cart;
    cart.name = "Cart";
    cart.relations = {{"cart_items", session_line, sizeof(CartItemRow)}};
    cart.functions["add_items"] = fn_add_items;
    cart.functions["checkout"] = fn_checkout;
    db.declare_type(std::move(cart));

    api::ReactorType customer;
    customer.name = "Customer";
    customer.relations = {{"profile", one, sizeof(ProfileRow)},
                          {"visits", one, sizeof(VisitRow)}};
    customer.functions["get_group"] = fn_get_group;
    customer.functions["record_visit"] = fn_record_visit;
    db.declare_type(std::move(customer));

    api::ReactorType gm;
    gm.name = "Group_Manager";
    gm.relations = {{"group_discounts", one, sizeof(DiscountRow)}};
    gm.functions["get_discounts"] = fn_get_discounts;
    db.declare_type(std::move(gm));

    api::ReactorType section;
    section.name = "Store_Section";
    section.relations = {{"inventory", one, sizeof(InventoryRow)},
                         {"purchase_history", item_seq, sizeof(HistoryRow)},
                         {"section_stats", one, sizeof(SectionStatsRow)}};
    section.functions["get_price"] = fn_get_price;
    section.functions["process_checkout"] = [cfg](api::ReactorContext& rc) {
        return fn_process_checkout(rc, cfg);
    };
    db.declare_type(std::move(section));
}

void create_reactors(api::Database& db, const LoadParams& p) {
    p.validate();
    db.create_reactor("Store", store_name());
    for (int64_t s = 0; s < p.sections; ++s)
        db.create_reactor("Store_Section", section_name(s));
    for (int64_t g = 0; g < p.group_managers; ++g)
        db.create_reactor("Group_Manager", group_manager_name(g));
    for (int64_t c = 0; c < p.carts; ++c)
        db.create_reactor("Cart", cart_name(c));
    for (int64_t u = 0; u < p.customers(); ++u)
        db.create_reactor("Customer", customer_name(u));
}

std::vector<std::string> reactor_names(const LoadParams& p) {
    std::vector<std::string> out;
    out.push_back(store_name());
    for (int64_t s = 0; s < p.sections; ++s)
        out.push_back(section_name(s));
    for (int64_t g = 0; g < p.group_managers; ++g)
        out.push_back(group_manager_name(g));
    for (int64_t c = 0; c < p.carts; ++c)
        out.push_back(cart_name(c));
    for (int64_t u = 0; u < p.customers(); ++u)
        out.push_back(customer_name(u));
    return out;
}

void load(api::Database& db, const LoadParams& p) {
    p.validate();
    std::mt19937_64 rng(p.seed);
    std::uniform_int_distribution<int64_t> price_cents(kPriceCentsMin, kPriceCentsMax);
    std::uniform_int_distribution<int64_t> hist_qty(kHistoryQtyMin, kHistoryQtyMax);

    storage::Table& sections = db.table(store_name(), "sections");
    for (int64_t s = 0; s < p.sections; ++s) {
        SectionRow row{};
        std::snprintf(row.reactor_name, sizeof(row.reactor_name), "%s",
                      section_name(s).c_str());
        sections.load_insert(Key(s), Value::of(row));
    }

    for (int64_t s = 0; s < p.sections; ++s) {
        storage::Table& inventory = db.table(section_name(s), "inventory");
        storage::Table& history = db.table(section_name(s), "purchase_history");
        storage::Table& stats = db.table(section_name(s), "section_stats");
        for (int64_t item = 1; item <= p.items_per_section; ++item) {
            InventoryRow inv{};
            std::snprintf(inv.name, sizeof(inv.name), "item_%lld",
                          static_cast<long long>(item));
            inv.price = static_cast<double>(price_cents(rng)) / 100.0;
            inv.stock = p.initial_stock;
            inventory.load_insert(Key(item), Value::of(inv));

            int64_t qty_sum = 0;
            for (int64_t seq = 1; seq <= p.history_per_item; ++seq) {
                int64_t q = hist_qty(rng);
                qty_sum += q;
                history.load_insert(Key(item, seq), Value::of(HistoryRow{q}));
            }
            SectionStatsRow st;
            st.ref_demand = static_cast<double>(qty_sum) /
                            static_cast<double>(p.history_per_item);
            st.loaded_entries = p.history_per_item;
            stats.load_insert(Key(item), Value::of(st));
        }
    }

    for (int64_t g = 0; g < p.group_managers; ++g) {
        storage::Table& disc = db.table(group_manager_name(g), "group_discounts");
        for (int64_t item = 1; item <= p.items_per_section; ++item)
            disc.load_insert(Key(item),
                             Value::of(DiscountRow{
                                 static_cast<double>((g + item) % 10) / 100.0}));
    }

    for (int64_t u = 0; u < p.customers(); ++u) {
        storage::Table& profile = db.table(customer_name(u), "profile");
        profile.load_insert(Key(u), Value::of(ProfileRow{u % p.group_managers}));
    }

    for (int64_t c = 0; c < p.carts; ++c) {
        storage::Table& cart = db.table(cart_name(c), "cart_items");
        cart.load_insert(kCartSessionKey, Value::of(CartSessionRow{-1, 0}));
    }
}

}  // namespace reactordb::smartmart
