#pragma once

#include <span>

#include "reactordb/reactor.hpp"

namespace reactordb::smartmart {

// Population sizes and the deterministic seed for the loader.
struct LoadParams {
    int64_t sections = 4;
    int64_t items_per_section = 1000;
    int64_t history_per_item = 60;
    int64_t carts = 4;
    int64_t group_managers = 4;
    int64_t customers_per_cart = 8;
    int64_t initial_stock = 10'000;
    uint64_t seed = 1;

    static LoadParams desk();
    static LoadParams paper();
    void validate() const;
    int64_t customers() const { return carts * customers_per_cart; }
};

// Knobs of the application logic itself (fixed per engine instance).
struct AppConfig {
    int64_t scan_window = 150;      // purchase-history window for trend prediction
    double delay_ms = 0.0;          // replaces the window scan by busy compute
    bool history_inserts = true;    // scan-only variant when false
};

// Trend predictor over a reverse purchase-history window: mean plus
// population standard deviation of the quantities; 0 on an empty window.
double predict_trend(std::span<const int64_t> quantities);

constexpr double kMaxVariableDiscount = 0.30;
constexpr Key kCartSessionKey{0, 0};

// Row layouts. Values are fixed flat records.
struct SectionRow {
    char reactor_name[32];
};
// Cart lines are keyed (session epoch, line index), so a checkout scans
// exactly its own session; terminated sessions fall out of every future
// range without physical deletes.
struct CartItemRow {
    int64_t item = 0;
    int64_t section = 0;
    int64_t qty = 0;
    double unit_price = 0;
    double fixed_discount = 0;
};
// Key (0,0) of cart_items holds the session binding; sessions use epoch >= 1.
struct CartSessionRow {
    int64_t customer = -1;  // < 0: no active session
    int64_t epoch = 0;      // bumps when a session starts
};
struct ProfileRow {
    int64_t group = 0;
};
struct VisitRow {
    double total = 0;
};
struct DiscountRow {
    double rate = 0;
};
struct InventoryRow {
    char name[16];
    double price = 0;
    int64_t stock = 0;
};
struct HistoryRow {
    int64_t qty = 0;
};
struct SectionStatsRow {
    double ref_demand = 0;  // loaded history mean, reference for the variable discount
    int64_t loaded_entries = 0;
};

// Reactor names.
std::string cart_name(int64_t i);
std::string customer_name(int64_t i);
std::string group_manager_name(int64_t g);
std::string section_name(int64_t s);
inline std::string store_name() { return "Store"; }

// Declares the five reactor types (Store, Cart, Customer, Group_Manager,
// Store_Section) with their eight relations and the transaction functions.
void register_types(api::Database& db, const AppConfig& cfg);

// Instantiates the reactors named by `p` (requires them in the deployment).
void create_reactors(api::Database& db, const LoadParams& p);

// Deterministic population from the seed; direct (non-transactional) loads.
void load(api::Database& db, const LoadParams& p);

// All reactor names implied by `p`, for building deployments.
std::vector<std::string> reactor_names(const LoadParams& p);

// Calibrated busy-loop of pseudo-random number generation.
void busy_delay_ms(double ms);

}  // namespace reactordb::smartmart
