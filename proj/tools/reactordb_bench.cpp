#include <CLI11.hpp>

#include "reactordb/harness.hpp"

using namespace reactordb;

int main(int argc, char** argv) {
    CLI::App app{"reactordb-bench: SmartMart experiment driver"};

    std::string scenario;
    std::string deployment = "both";
    std::string scale = "desk";
    std::string out_path = "results.csv";
    harness::WorkloadConfig wl;
    bool verify = false;

    app.add_option("--scenario", scenario, "one of: scan_size, parallel_degree, speedup, load, scaleup, skew, single")
        ->required();
    app.add_option("--deployment", deployment,
                   "sync | async | both | path to a deployment file");
    app.add_option("--workers", wl.workers, "client worker threads");
    app.add_option("--order-size", wl.order_size, "items per interaction (N)");
    app.add_option("--sections", wl.sections_spanned,
                   "store sections spanned per order (k); 0 = all");
    app.add_option("--scan-window", wl.scan_window, "purchase-history window size");
    app.add_option("--zipf", wl.zipf_theta, "zipfian constant for section skew");
    app.add_option("--delay-ms", wl.delay_ms,
                   "per-section artificial compute replacing the window scan");
    app.add_option("--epochs", wl.epochs, "measured epochs");
    app.add_option("--epoch-secs", wl.epoch_seconds, "seconds per epoch");
    app.add_option("--warmup", wl.warmup_epochs, "warmup epochs to discard");
    app.add_option("--seed", wl.seed, "workload seed");
    app.add_option("--scale", scale, "desk | paper");
    app.add_option("--out", out_path, "CSV output path");
    app.add_flag("--verify", verify,
                 "record a trace and check serializability by serial replay");
    bool pin = false;
    app.add_flag("--pin", pin, "pin executor threads to logical cores");

    CLI11_PARSE(app, argc, argv);

    try {
        harness::ScenarioOptions opt;
        if (scale == "desk")
            opt.load = smartmart::LoadParams::desk();
        else if (scale == "paper")
            opt.load = smartmart::LoadParams::paper();
        else
            throw ConfigError("unknown scale '" + scale + "'");
        opt.load.seed = wl.seed;
        wl.verify = verify;
        opt.base = wl;
        opt.deployment = deployment == "both" ? "" : deployment;

        if (std::thread::hardware_concurrency() < 8) {
            std::fprintf(stderr,
                         "note: %u logical cores available; async gains are "
                         "bounded by physical parallelism\n",
                         std::thread::hardware_concurrency());
            if (opt.load.sections > 4) {
                std::fprintf(stderr,
                             "warning: shrinking to 4 Store_Section reactors to fit "
                             "this machine\n");
                opt.load.sections = 4;
            }
        }
        opt.pin_cores = pin;
        harness::ScenarioResult result = harness::run_scenario(scenario, opt);
        harness::emit_csv(result.rows, out_path);
        std::fprintf(stderr, "wrote %zu rows to %s\n", result.rows.size(),
                     out_path.c_str());
        if (verify && !result.verify_ok) {
            std::fprintf(stderr, "serializability verification FAILED\n");
            return 3;
        }
        return 0;
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "configuration error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}
