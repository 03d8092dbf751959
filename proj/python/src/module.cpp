#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <algorithm>
#include <sstream>

#include "kinex/analysis.hpp"
#include "kinex/cli.hpp"
#include "kinex/config.hpp"
#include "kinex/error.hpp"
#include "kinex/ingest.hpp"
#include "kinex/open_system.hpp"

namespace py = pybind11;
using namespace kinex;

namespace {

using Vec = std::vector<double>;

py::array_t<double> to_array(const Vec& v) {
    py::array_t<double> out(py::ssize_t(v.size()));
    std::copy(v.begin(), v.end(), out.mutable_data());
    return out;
}

Sample make_sample(Vec values, std::optional<Vec> weights) {
    return weights ? Sample::with_weights(std::move(values), std::move(*weights))
                   : Sample::unweighted(std::move(values));
}

ModelSpec make_model(const std::string& type, double lam, double lambda_lo, double lambda_hi) {
    if (type == "DY") return NoSaving{};
    if (type == "CC") return UniformSaving{lam};
    if (type == "CCM") return DistributedSaving{lambda_lo, lambda_hi};
    throw Error(ErrorKind::InvalidConfig, "model must be DY, CC or CCM, got '" + type + "'");
}

XminMethod make_xmin(const std::string& rule, double q, std::size_t min_tail) {
    if (rule == "top-fraction") return TopFraction{q};
    if (rule == "ks-min") return KsMinimum{min_tail};
    throw Error(ErrorKind::InvalidParameter, "xmin rule must be top-fraction or ks-min");
}

py::dict fit_dict(const TailFit& f) {
    py::dict d;
    d["alpha"] = f.alpha;
    d["amplitude"] = f.amplitude;
    d["x_min"] = f.x_min;
    d["n_tail"] = f.n_tail;
    d["stderr"] = f.stderr_alpha;
    d["method"] = to_string(f.method);
    return d;
}

py::dict snapshot_dict(const Snapshot& s) {
    py::dict d;
    d["sweep"] = s.sweep_index;
    d["incomes"] = to_array(s.incomes);
    d["total_money"] = s.total_money;
    d["model"] = s.model_tag;
    d["seed"] = s.seed;
    d["after_event"] = s.after_event;
    return d;
}

py::list snapshot_list(const std::vector<Snapshot>& snaps) {
    py::list out;
    for (const auto& s : snaps) out.append(snapshot_dict(s));
    return out;
}

}  // namespace

PYBIND11_MODULE(_kinex, m) {
    m.doc() = "Kinetic wealth-exchange simulation and income-distribution analysis";
    m.attr("__version__") = KINEX_VERSION;

    // Messages start with the error kind, e.g. "insufficient-tail: ...".
    py::register_exception<Error>(m, "KinexError", PyExc_ValueError);

    m.def(
        "simulate",
        [](std::size_t agents, double total_money, std::uint64_t seed, std::uint64_t sweeps,
           const std::string& model, double lam, double lambda_lo, double lambda_hi,
           std::optional<std::uint64_t> snapshot_every, const std::string& init) {
            RunConfig c;
            c.agent_count = agents;
            c.total_money = total_money;
            c.seed = seed;
            c.sweeps = sweeps;
            c.model = make_model(model, lam, lambda_lo, lambda_hi);
            c.snapshot_every = snapshot_every.value_or(std::max<std::uint64_t>(sweeps, 1));
            if (init == "equal") c.init = InitEqual{};
            else if (init == "delta") c.init = InitDelta{};
            else throw Error(ErrorKind::InvalidConfig, "init must be equal or delta");
            std::vector<Snapshot> snaps;
            {
                py::gil_scoped_release release;
                snaps = run(c);
            }
            return snapshot_list(snaps);
        },
        py::arg("agents"), py::arg("total_money"), py::arg("seed"), py::arg("sweeps"),
        py::arg("model") = "DY", py::arg("lam") = 0.0, py::arg("lambda_lo") = 0.0,
        py::arg("lambda_hi") = 0.9999, py::arg("snapshot_every") = py::none(), py::arg("init") = "equal",
        "Closed run; returns snapshot dicts (sweep, incomes, total_money, model, seed, after_event).");

    m.def(
        "run_scenario_json",
        [](const std::string& text) {
            const auto cfg = parse_scenario_config(nlohmann::json::parse(text));
            ScenarioResult res;
            {
                py::gil_scoped_release release;
                res = run_scenario(cfg.run, cfg.schedule);
            }
            py::list events;
            for (const auto& e : res.events) {
                py::dict d;
                d["sweep"] = e.at_sweep;
                d["op"] = e.op;
                d["total_before"] = e.total_before;
                d["total_after"] = e.total_after;
                d["agents_before"] = e.agents_before;
                d["agents_after"] = e.agents_after;
                events.append(d);
            }
            return py::make_tuple(snapshot_list(res.snapshots), events);
        },
        py::arg("config"), "Run a scenario from its JSON config text; returns (snapshots, events).");

    m.def(
        "exchange_pair",
        [](double xi, double xj, double li, double lj, double eps) {
            const auto [a, b] = exchange_pair(xi, xj, li, lj, eps);
            return py::make_tuple(a, b);
        },
        py::arg("x_i"), py::arg("x_j"), py::arg("lambda_i"), py::arg("lambda_j"), py::arg("eps"));

    m.def(
        "ccdf",
        [](Vec values, std::optional<Vec> weights, bool normalized) {
            const auto c = ccdf(make_sample(std::move(values), std::move(weights)), normalized);
            Vec x, q;
            for (const auto& p : c.points) {
                x.push_back(p.x);
                q.push_back(p.q);
            }
            return py::make_tuple(to_array(x), to_array(q));
        },
        py::arg("values"), py::arg("weights") = py::none(), py::arg("normalized") = true,
        "Returns (x, Q) with Q(x) = P(X >= x) at each distinct positive value.");

    m.def(
        "pdf_histogram",
        [](Vec values, std::optional<Vec> weights, std::size_t bins, const std::string& scheme,
           std::optional<double> lo, std::optional<double> hi) {
            HistogramOptions o;
            o.bin_count = bins;
            o.scheme = scheme == "log" ? BinScheme::Logarithmic : BinScheme::Linear;
            o.lo = lo;
            o.hi = hi;
            const auto h = pdf_histogram(make_sample(std::move(values), std::move(weights)), o);
            return py::make_tuple(to_array(h.edges), to_array(h.densities), h.zero_mass_fraction);
        },
        py::arg("values"), py::arg("weights") = py::none(), py::arg("bins") = 50,
        py::arg("scheme") = "linear", py::arg("lo") = py::none(), py::arg("hi") = py::none(),
        "Returns (edges, densities, zero_mass_fraction).");

    m.def(
        "count_modes",
        [](Vec densities, double min_prominence, std::size_t window) {
            return count_modes(densities, ModeOptions{min_prominence, window});
        },
        py::arg("densities"), py::arg("min_prominence") = 0.05, py::arg("smoothing_window") = 3);

    m.def(
        "fit_hill",
        [](Vec values, double x_min, std::optional<Vec> weights) {
            return fit_dict(fit_pareto_hill(make_sample(std::move(values), std::move(weights)), x_min));
        },
        py::arg("values"), py::arg("x_min"), py::arg("weights") = py::none());

    m.def(
        "fit_tail",
        [](Vec values, std::optional<Vec> weights, const std::string& method, const std::string& xmin,
           double q, std::size_t min_tail) {
            FitConfig f;
            f.method = method == "ls" ? FitMethod::LogLogLeastSquares : FitMethod::Hill;
            f.xmin = make_xmin(xmin, q, min_tail);
            return fit_dict(fit_tail(make_sample(std::move(values), std::move(weights)), f));
        },
        py::arg("values"), py::arg("weights") = py::none(), py::arg("method") = "hill",
        py::arg("xmin") = "top-fraction", py::arg("q") = 0.01, py::arg("min_tail") = 10);

    m.def(
        "relative_ccdf",
        [](Vec current, Vec reference, std::optional<Vec> grid) {
            const auto r = relative_ccdf(Sample::unweighted(std::move(current)),
                                         Sample::unweighted(std::move(reference)), std::move(grid));
            return py::make_tuple(to_array(r.grid), to_array(r.ratios));
        },
        py::arg("current"), py::arg("reference"), py::arg("grid") = py::none(),
        "Returns (grid, R) with R = Q_current / Q_reference.");

    m.def(
        "gini",
        [](Vec values, std::optional<Vec> weights) { return gini(make_sample(std::move(values), std::move(weights))); },
        py::arg("values"), py::arg("weights") = py::none());

    m.def(
        "ks_distance",
        [](Vec a, Vec b) {
            return ks_distance(ccdf(Sample::unweighted(std::move(a))), ccdf(Sample::unweighted(std::move(b))));
        },
        py::arg("a"), py::arg("b"));

    m.def(
        "read_income_table",
        [](const std::string& path, bool strict) {
            const auto t = read_income_table(path, IngestOptions{strict});
            py::list groups;
            for (const auto& g : t.groups) {
                py::dict d;
                d["label"] = g.label;
                d["t"] = g.t ? py::cast(*g.t) : py::none();
                d["values"] = to_array(g.sample.values);
                d["weights"] = to_array(g.sample.weights);
                groups.append(d);
            }
            py::dict report;
            report["rows_in"] = t.report.rows_in;
            report["rows_kept"] = t.report.rows_kept;
            report["rows_dropped"] = t.report.rows_dropped;
            report["issues"] = t.report.issues;
            return py::make_tuple(groups, report);
        },
        py::arg("path"), py::arg("strict") = true);

    m.def(
        "cli",
        [](std::vector<std::string> args) {
            std::ostringstream out;
            std::ostringstream err;
            const int code = dispatch(args, out, err);
            return py::make_tuple(code, out.str(), err.str());
        },
        py::arg("args"), "Run the command-line interface in-process; returns (exit_code, stdout, stderr).");
}
