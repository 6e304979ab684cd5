#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "reactordb/harness.hpp"

namespace py = pybind11;
using namespace reactordb;

namespace {

py::object arg_to_py(const ArgValue& v) {
    return std::visit([](const auto& x) -> py::object { return py::cast(x); }, v);
}

ArgValue py_to_arg(const py::handle& h) {
    if (py::isinstance<py::bool_>(h))
        return static_cast<int64_t>(py::cast<bool>(h));
    if (py::isinstance<py::int_>(h))
        return py::cast<int64_t>(h);
    if (py::isinstance<py::float_>(h))
        return py::cast<double>(h);
    if (py::isinstance<py::str>(h))
        return py::cast<std::string>(h);
    if (py::isinstance<py::sequence>(h)) {
        auto seq = py::cast<py::sequence>(h);
        bool all_int = true;
        for (const auto& e : seq)
            if (!py::isinstance<py::int_>(e))
                all_int = false;
        if (all_int)
            return py::cast<std::vector<int64_t>>(h);
        return py::cast<std::vector<double>>(h);
    }
    throw py::type_error("unsupported argument type for a reactor call");
}

py::dict outcome_to_py(const runtime::FutureState::Outcome& out) {
    py::dict d;
    d["ok"] = out.ok;
    d["error"] = out.error;
    py::list vals;
    for (const auto& v : out.value)
        vals.append(arg_to_py(v));
    d["value"] = vals;
    if (out.commit) {
        d["committed"] = out.commit->committed;
        d["commit_tid"] = out.commit->commit_tid ? py::cast(*out.commit->commit_tid)
                                                 : py::none();
        d["containers_spanned"] = out.commit->containers_spanned;
        d["commit_micros"] = out.commit->commit_micros;
    }
    return d;
}

py::dict stats_to_py(const harness::EpochStats& e) {
    py::dict d;
    d["epoch"] = e.epoch;
    d["committed"] = e.committed;
    d["aborted"] = e.aborted;
    d["abort_rate"] = e.abort_rate();
    d["throughput_ips"] = e.throughput_ips;
    d["mean_latency_us"] = e.mean_latency_us;
    d["stddev_latency_us"] = e.stddev_latency_us;
    d["add_items_us"] = e.add_items_us;
    d["checkout_us"] = e.checkout_us;
    d["commit_us"] = e.commit_us;
    return d;
}

smartmart::LoadParams params_from_kwargs(const std::string& scale, uint64_t seed,
                                         int64_t sections, int64_t items,
                                         int64_t history, int64_t carts) {
    smartmart::LoadParams p = scale == "paper" ? smartmart::LoadParams::paper()
                                               : smartmart::LoadParams::desk();
    p.seed = seed;
    if (sections > 0)
        p.sections = sections;
    if (items > 0)
        p.items_per_section = items;
    if (history > 0)
        p.history_per_item = history;
    if (carts > 0)
        p.carts = carts;
    return p;
}

// A bootstrapped SmartMart engine: deployment, schema, reactors and load.
class Engine {
public:
    Engine(const std::string& deployment, const std::string& scale, uint64_t seed,
           int64_t sections, int64_t items, int64_t history, int64_t carts,
           int64_t scan_window, double delay_ms, bool history_inserts, bool trace)
        : params_(params_from_kwargs(scale, seed, sections, items, history, carts)),
          deployment_(deployment) {
        app_.scan_window = scan_window;
        app_.delay_ms = delay_ms;
        app_.history_inserts = history_inserts;
        db_ = std::make_unique<api::Database>(
            harness::deployment_by_name(deployment, params_));
        smartmart::register_types(*db_, app_);
        smartmart::create_reactors(*db_, params_);
        smartmart::load(*db_, params_);
        if (trace)
            db_->coordinator().enable_trace();
    }

    py::dict call(const std::string& reactor, const std::string& fn,
                  const py::sequence& args) {
        ArgPack pack;
        for (const auto& a : args)
            pack.push_back(py_to_arg(a));
        runtime::FutureState::Outcome out;
        {
            py::gil_scoped_release release;
            out = db_->submit_root(reactor, fn, std::move(pack))->wait();
        }
        return outcome_to_py(out);
    }

    py::dict add_items(int64_t cart, int64_t customer, std::vector<int64_t> sections,
                       std::vector<int64_t> items, std::vector<int64_t> qtys) {
        runtime::FutureState::Outcome out;
        {
            py::gil_scoped_release release;
            out = db_->submit_root(smartmart::cart_name(cart), "add_items",
                                   {customer, std::move(sections), std::move(items),
                                    std::move(qtys)})
                      ->wait();
        }
        return outcome_to_py(out);
    }

    py::dict checkout(int64_t cart) {
        runtime::FutureState::Outcome out;
        {
            py::gil_scoped_release release;
            out = db_->submit_root(smartmart::cart_name(cart), "checkout", {})->wait();
        }
        return outcome_to_py(out);
    }

    int64_t stock(int64_t section, int64_t item) {
        auto r = db_->table(smartmart::section_name(section), "inventory").get(Key(item));
        if (!r.value)
            throw py::value_error("unknown item");
        return r.value->as<smartmart::InventoryRow>().stock;
    }

    py::tuple verify() {
        py::gil_scoped_release release;
        harness::VerifyReport rep = harness::verify_serializability(
            db_->snapshot(), db_->coordinator().trace(), params_, app_);
        py::gil_scoped_acquire acquire;
        return py::make_tuple(rep.pass, rep.detail, rep.replayed);
    }

    py::dict counters() {
        py::dict d;
        d["commits"] = db_->coordinator().commits();
        d["validation_aborts"] = db_->coordinator().validation_aborts();
        d["node_version_aborts"] = db_->coordinator().node_version_aborts();
        d["exec_aborts"] = db_->coordinator().exec_aborts();
        return d;
    }

    const std::string& deployment() const { return deployment_; }

private:
    smartmart::LoadParams params_;
    smartmart::AppConfig app_;
    std::string deployment_;
    std::unique_ptr<api::Database> db_;
};

py::list run_workload(const std::string& deployment, const std::string& scale,
                      uint32_t workers, int64_t order_size, int64_t sections,
                      int64_t scan_window, double zipf, double delay_ms,
                      uint32_t epochs, double epoch_secs, uint32_t warmup,
                      uint64_t seed, bool verify) {
    harness::WorkloadConfig wl;
    wl.workers = workers;
    wl.order_size = order_size;
    wl.sections_spanned = sections;
    wl.scan_window = scan_window;
    wl.zipf_theta = zipf;
    wl.delay_ms = delay_ms;
    wl.epochs = epochs;
    wl.epoch_seconds = epoch_secs;
    wl.warmup_epochs = warmup;
    wl.seed = seed;
    wl.verify = verify;

    smartmart::LoadParams p = scale == "paper" ? smartmart::LoadParams::paper()
                                               : smartmart::LoadParams::desk();
    p.seed = seed;
    if (static_cast<int64_t>(workers) > p.carts)
        p.carts = workers;
    if (p.history_per_item < 2 * wl.scan_window && delay_ms <= 0)
        p.history_per_item = 2 * wl.scan_window;

    harness::RunResult rr;
    {
        py::gil_scoped_release release;
        harness::RunOptions opt;
        opt.load = p;
        rr = harness::run_point(harness::deployment_by_name(deployment, p), wl, opt);
    }
    py::list rows;
    for (const auto& e : rr.epochs)
        rows.append(stats_to_py(e));
    if (rr.verify) {
        py::dict d;
        d["verify_pass"] = rr.verify->pass;
        d["verify_detail"] = rr.verify->detail;
        d["replayed"] = rr.verify->replayed;
        rows.append(d);
    }
    return rows;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "reactordb: in-memory actor-relational database engine with the "
              "SmartMart benchmark";

    m.def("predict_trend",
          [](const std::vector<int64_t>& window) {
              return smartmart::predict_trend(window);
          },
          py::arg("window"),
          "Trend prediction over a reverse purchase-history window: mean plus "
          "population standard deviation.");

    struct ZipfSampler {
        harness::ZipfGenerator gen;
        std::mt19937_64 rng;
    };
    py::class_<ZipfSampler>(m, "ZipfSampler")
        .def(py::init([](double theta, size_t n, uint64_t seed) {
                 return ZipfSampler{harness::ZipfGenerator(theta, n),
                                    std::mt19937_64(seed)};
             }),
             py::arg("theta"), py::arg("n"), py::arg("seed") = 1)
        .def("sample", [](ZipfSampler& z) { return z.gen(z.rng); })
        .def("sample_many",
             [](ZipfSampler& z, size_t count) {
                 std::vector<size_t> out(count);
                 for (auto& x : out)
                     x = z.gen(z.rng);
                 return out;
             },
             py::arg("count"))
        .def("probability",
             [](const ZipfSampler& z, size_t rank) { return z.gen.probability(rank); },
             py::arg("rank"));

    py::class_<Engine>(m, "Engine")
        .def(py::init<const std::string&, const std::string&, uint64_t, int64_t,
                      int64_t, int64_t, int64_t, int64_t, double, bool, bool>(),
             py::arg("deployment") = "sync", py::arg("scale") = "desk",
             py::arg("seed") = 1, py::arg("sections") = 0, py::arg("items") = 0,
             py::arg("history") = 0, py::arg("carts") = 0,
             py::arg("scan_window") = 150, py::arg("delay_ms") = 0.0,
             py::arg("history_inserts") = true, py::arg("trace") = false)
        .def("call", &Engine::call, py::arg("reactor"), py::arg("fn"),
             py::arg("args"))
        .def("add_items", &Engine::add_items, py::arg("cart"), py::arg("customer"),
             py::arg("sections"), py::arg("items"), py::arg("qtys"))
        .def("checkout", &Engine::checkout, py::arg("cart"))
        .def("stock", &Engine::stock, py::arg("section"), py::arg("item"))
        .def("verify", &Engine::verify)
        .def("counters", &Engine::counters)
        .def_property_readonly("deployment", &Engine::deployment);

    m.def("run_workload", &run_workload, py::arg("deployment") = "sync",
          py::arg("scale") = "desk", py::arg("workers") = 1,
          py::arg("order_size") = 32, py::arg("sections") = 0,
          py::arg("scan_window") = 150, py::arg("zipf") = 0.0,
          py::arg("delay_ms") = 0.0, py::arg("epochs") = 3,
          py::arg("epoch_secs") = 1.0, py::arg("warmup") = 1, py::arg("seed") = 42,
          py::arg("verify") = false,
          "Drive the SmartMart workload and return per-epoch statistics.");
}
