#include "kinex/cli.hpp"

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>

#include "CLI11.hpp"
#include "kinex/analysis.hpp"
#include "kinex/config.hpp"
#include "kinex/error.hpp"
#include "kinex/ingest.hpp"
#include "kinex/open_system.hpp"
#include "kinex/persist.hpp"

namespace kinex {

namespace {

namespace fs = std::filesystem;

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

std::string iso_time(std::chrono::system_clock::time_point tp) {
    const std::time_t t = std::chrono::system_clock::to_time_t(tp);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

// Writes either to `path` (atomically) or to `out` when no path is given.
void emit(const std::string& path, std::ostream& out,
          const std::function<void(std::ostream&)>& body) {
    if (path.empty()) {
        body(out);
        return;
    }
    OutputTransaction tx;
    const auto staged = tx.stage(path);
    {
        std::ofstream file(staged, std::ios::binary | std::ios::trunc);
        if (!file) throw Error(ErrorKind::Io, "cannot write " + path);
        body(file);
        file.flush();
        if (!file) throw Error(ErrorKind::Io, "write failed for " + path);
    }
    tx.commit();
}

struct RunOptions {
    std::string config;
    std::string output_dir;
    bool verbose = false;
};

int run_command(const std::string& command, const RunOptions& opts, std::ostream& err) {
    auto cfg = load_scenario_config(opts.config);
    if (!opts.output_dir.empty()) cfg.output_dir = opts.output_dir;
    const bool closed = command == "simulate";
    if (closed && !cfg.schedule.empty()) {
        throw Error(ErrorKind::InvalidConfig,
                    "simulate runs a closed system; use 'scenario' for scheduled events");
    }

    const auto started = std::chrono::system_clock::now();
    const auto clock_start = std::chrono::steady_clock::now();
    ScenarioResult result;
    if (closed) {
        result.snapshots = run(cfg.run);
    } else {
        result = run_scenario(cfg.run, cfg.schedule);
    }

    const fs::path dir(cfg.output_dir);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw Error(ErrorKind::Io, "cannot create " + dir.string() + ": " + ec.message());

    OutputTransaction tx;
    write_snapshot_table(result.snapshots, tx.stage(dir / "snapshots.csv"));
    if (!closed) write_event_table(result.events, tx.stage(dir / "events.csv"));

    const auto& a = cfg.analysis;
    auto wants = [&](const char* name) {
        return std::find(a.tables.begin(), a.tables.end(), name) != a.tables.end();
    };
    const auto& final_snap = result.snapshots.back();
    if (wants("ccdf")) {
        write_ccdf_table(ccdf(Sample::from_snapshot(final_snap), true), tx.stage(dir / "ccdf.csv"));
    }
    if (wants("alpha")) {
        const auto series = alpha_timeseries(std::span<const Snapshot>(result.snapshots), a.fit);
        write_alpha_table(series, tx.stage(dir / "alpha.csv"));
    }
    if (wants("relative")) {
        Sample reference;
        std::string tag;
        if (a.reference_sample) {
            const auto table = read_income_table(*a.reference_sample);
            if (table.groups.empty()) throw Error(ErrorKind::EmptyInput, "reference sample is empty");
            reference = table.groups.front().sample;
            tag = *a.reference_sample;
        } else {
            const auto index = a.reference_snapshot.value_or(0);
            if (index >= result.snapshots.size()) {
                throw Error(ErrorKind::InvalidConfig, "reference snapshot " + std::to_string(index) +
                                                          " does not exist");
            }
            reference = Sample::from_snapshot(result.snapshots[index]);
            tag = "snapshot " + std::to_string(index);
        }
        const auto curve = relative_ccdf(Sample::from_snapshot(final_snap), reference, std::nullopt, tag);
        write_relative_table(curve, tx.stage(dir / "relative.csv"));
    }
    if (wants("gini")) {
        std::vector<GiniPoint> series;
        for (const auto& snap : result.snapshots) {
            series.push_back({static_cast<double>(snap.sweep_index), {}, gini(Sample::from_snapshot(snap))});
        }
        write_gini_table(series, tx.stage(dir / "gini.csv"));
    }

    // Where the files went is not part of the run's identity; leaving it out keeps
    // a manifest replayed into another directory byte-identical.
    auto echo = to_json(cfg);
    echo.erase("output");
    const auto manifest = build_manifest(command, echo, tx.entries());
    write_json(manifest, tx.stage(dir / "manifest.json"));
    tx.commit();

    // Wall-clock data lives beside the manifest so the manifest stays replayable byte for byte.
    const double elapsed =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - clock_start).count();
    write_json({{"manifest", "manifest.json"},
                {"started_utc", iso_time(started)},
                {"finished_utc", iso_time(std::chrono::system_clock::now())},
                {"elapsed_seconds", elapsed}},
               dir / "timing.json");

    if (opts.verbose) {
        err << command << ": " << result.snapshots.size() << " snapshots, "
            << result.events.size() << " events, final total "
            << format_number(final_snap.total_money) << " -> " << dir.string() << '\n';
    }
    return kExitOk;
}

struct AnalyzeInput {
    std::string file;
    std::string group;
    bool lenient = false;
};

IncomeTable load_table(const AnalyzeInput& in) {
    return read_income_table(in.file, IngestOptions{!in.lenient});
}

const IncomeGroup& pick_group(const IncomeTable& table, const std::string& label,
                              const std::string& file) {
    if (table.groups.empty()) throw Error(ErrorKind::EmptyInput, file + " has no data rows");
    if (label.empty()) return table.groups.back();
    for (const auto& g : table.groups) {
        if (g.label == label) return g;
    }
    throw Error(ErrorKind::InvalidInput, file + " has no group '" + label + "'");
}

std::vector<TimedSample> as_series(const IncomeTable& table) {
    std::vector<TimedSample> series;
    for (std::size_t i = 0; i < table.groups.size(); ++i) {
        const auto& g = table.groups[i];
        if (g.t) series.push_back({*g.t, {}, g.sample});
        else series.push_back({static_cast<double>(i), g.label, g.sample});
    }
    return series;
}

struct FitOptions {
    std::string method = "hill";
    std::string xmin = "top-fraction";
    double q = 0.01;
    std::optional<double> fixed_xmin;
};

FitConfig to_fit_config(const FitOptions& f) {
    FitConfig c;
    c.method = f.method == "hill" ? FitMethod::Hill : FitMethod::LogLogLeastSquares;
    if (f.xmin == "ks-min") c.xmin = KsMinimum{};
    else c.xmin = TopFraction{f.q};
    return c;
}

void add_fit_options(CLI::App* cmd, FitOptions& f) {
    cmd->add_option("--method", f.method, "Tail estimator")
        ->check(CLI::IsMember({"hill", "ls"}))
        ->capture_default_str();
    cmd->add_option("--xmin", f.xmin, "Tail threshold rule")
        ->check(CLI::IsMember({"top-fraction", "ks-min"}))
        ->capture_default_str();
    cmd->add_option("--q", f.q, "Top fraction for the top-fraction rule")
        ->check(CLI::Range(0.0, 1.0))
        ->capture_default_str();
    cmd->add_option("--x-min", f.fixed_xmin, "Use this threshold instead of selecting one");
}

void add_input_options(CLI::App* cmd, AnalyzeInput& in, std::string& output) {
    cmd->add_option("file", in.file, "Income table or snapshot table")->required();
    cmd->add_option("--group", in.group, "Period or snapshot label (default: last group)");
    cmd->add_flag("--lenient", in.lenient, "Drop invalid rows instead of aborting");
    cmd->add_option("-o,--output", output, "Write the table here instead of standard output");
}

}  // namespace

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Kinetic wealth-exchange simulator and income-distribution analysis", "kinex"};
    app.require_subcommand(1);
    app.failure_message(CLI::FailureMessage::help);

    RunOptions simulate_opts;
    auto* simulate = app.add_subcommand("simulate", "Closed-system run from a config file");
    RunOptions scenario_opts;
    auto* scenario = app.add_subcommand("scenario", "Open-system run with scheduled events");
    for (auto [cmd, opts] : {std::pair{simulate, &simulate_opts}, std::pair{scenario, &scenario_opts}}) {
        cmd->add_option("config", opts->config, "Config file or run manifest")->required();
        cmd->add_option("-o,--output-dir", opts->output_dir, "Override the configured output directory");
        cmd->add_flag("-v,--verbose", opts->verbose, "Print a run summary");
    }

    auto* ingest = app.add_subcommand("ingest", "Income table ingestion");
    ingest->require_subcommand(1);
    std::string validate_file;
    bool validate_lenient = false;
    auto* validate = ingest->add_subcommand("validate", "Check an income table and report counts");
    validate->add_option("file", validate_file, "Income table")->required();
    validate->add_flag("--lenient", validate_lenient, "Drop invalid rows instead of aborting");

    auto* analyze = app.add_subcommand("analyze", "Distribution analysis of an income table");
    analyze->require_subcommand(1);

    AnalyzeInput ccdf_in;
    std::string ccdf_out;
    bool ccdf_raw = false;
    auto* a_ccdf = analyze->add_subcommand("ccdf", "Complementary CDF Q(x) = P(X >= x)");
    add_input_options(a_ccdf, ccdf_in, ccdf_out);
    a_ccdf->add_flag("--raw", ccdf_raw, "Raw weight sums instead of fractions");

    AnalyzeInput pdf_in;
    std::string pdf_out;
    std::string pdf_scheme = "linear";
    std::size_t pdf_bins = 50;
    std::optional<double> pdf_lo;
    std::optional<double> pdf_hi;
    double pdf_prominence = 0.05;
    auto* a_pdf = analyze->add_subcommand("pdf", "Binned density and mode count");
    add_input_options(a_pdf, pdf_in, pdf_out);
    a_pdf->add_option("--scheme", pdf_scheme)->check(CLI::IsMember({"linear", "log"}))->capture_default_str();
    a_pdf->add_option("--bins", pdf_bins)->check(CLI::Range(2, 1000000))->capture_default_str();
    a_pdf->add_option("--lo", pdf_lo, "Lower edge of the binned range");
    a_pdf->add_option("--hi", pdf_hi, "Upper edge of the binned range");
    a_pdf->add_option("--min-prominence", pdf_prominence)->capture_default_str();

    AnalyzeInput fit_in;
    std::string fit_out;
    FitOptions fit_opts;
    auto* a_fit = analyze->add_subcommand("fit", "Pareto tail fit Q = A x^-alpha");
    add_input_options(a_fit, fit_in, fit_out);
    add_fit_options(a_fit, fit_opts);

    AnalyzeInput rel_in;
    std::string rel_out;
    std::string rel_ref;
    std::string rel_ref_group;
    auto* a_rel = analyze->add_subcommand("relative", "Relative CCDF against a reference sample");
    add_input_options(a_rel, rel_in, rel_out);
    a_rel->add_option("reference", rel_ref, "Reference income table")->required();
    a_rel->add_option("--ref-group", rel_ref_group, "Reference period label (default: last group)");

    AnalyzeInput gini_in;
    std::string gini_out;
    auto* a_gini = analyze->add_subcommand("gini", "Gini coefficient per group");
    add_input_options(a_gini, gini_in, gini_out);

    AnalyzeInput alpha_in;
    std::string alpha_out;
    FitOptions alpha_opts;
    auto* a_alpha = analyze->add_subcommand("alpha", "Pareto exponent per group");
    add_input_options(a_alpha, alpha_in, alpha_out);
    add_fit_options(a_alpha, alpha_opts);

    std::vector<std::string> argv_store{"kinex"};
    argv_store.insert(argv_store.end(), args.begin(), args.end());
    std::vector<const char*> argv;
    for (const auto& s : argv_store) argv.push_back(s.c_str());

    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
        app.exit(e, out, err);
        return kExitUsage;
    }

    try {
        if (*simulate) return run_command("simulate", simulate_opts, err);
        if (*scenario) return run_command("scenario", scenario_opts, err);

        if (*validate) {
            const auto s = validate_income_table(validate_file, IngestOptions{!validate_lenient});
            out << "rows_in=" << s.report.rows_in << '\n'
                << "rows_kept=" << s.report.rows_kept << '\n'
                << "rows_dropped=" << s.report.rows_dropped << '\n'
                << "groups=" << s.groups << '\n'
                << "min=" << format_number(s.min) << '\n'
                << "max=" << format_number(s.max) << '\n'
                << "zero_mass_fraction=" << format_number(s.zero_mass_fraction) << '\n'
                << "total_weight=" << format_number(s.total_weight) << '\n';
            for (const auto& issue : s.report.issues) err << "dropped: " << issue << '\n';
            return kExitOk;
        }

        if (*a_ccdf) {
            const auto table = load_table(ccdf_in);
            const auto curve = ccdf(pick_group(table, ccdf_in.group, ccdf_in.file).sample, !ccdf_raw);
            emit(ccdf_out, out, [&](std::ostream& os) { write_ccdf_table(curve, os); });
            return kExitOk;
        }
        if (*a_pdf) {
            const auto table = load_table(pdf_in);
            HistogramOptions h;
            h.scheme = pdf_scheme == "log" ? BinScheme::Logarithmic : BinScheme::Linear;
            h.bin_count = pdf_bins;
            h.lo = pdf_lo;
            h.hi = pdf_hi;
            const auto hist = pdf_histogram(pick_group(table, pdf_in.group, pdf_in.file).sample, h);
            emit(pdf_out, out, [&](std::ostream& os) { write_histogram_table(hist, os); });
            err << "modes=" << count_modes(hist, ModeOptions{pdf_prominence, 3})
                << " zero_mass_fraction=" << format_number(hist.zero_mass_fraction)
                << " out_of_range_fraction=" << format_number(hist.out_of_range_fraction) << '\n';
            return kExitOk;
        }
        if (*a_fit) {
            const auto table = load_table(fit_in);
            const auto& sample = pick_group(table, fit_in.group, fit_in.file).sample;
            TailFit fit;
            if (fit_opts.fixed_xmin) {
                fit = fit_opts.method == "hill"
                          ? fit_pareto_hill(sample, *fit_opts.fixed_xmin)
                          : fit_pareto_ls(ccdf(sample, true), *fit_opts.fixed_xmin);
            } else {
                fit = fit_tail(sample, to_fit_config(fit_opts));
            }
            emit(fit_out, out, [&](std::ostream& os) { write_tail_fit(fit, os); });
            return kExitOk;
        }
        if (*a_rel) {
            const auto table = load_table(rel_in);
            const auto ref_table = read_income_table(rel_ref, IngestOptions{!rel_in.lenient});
            const auto curve = relative_ccdf(pick_group(table, rel_in.group, rel_in.file).sample,
                                             pick_group(ref_table, rel_ref_group, rel_ref).sample,
                                             std::nullopt, rel_ref);
            emit(rel_out, out, [&](std::ostream& os) { write_relative_table(curve, os); });
            if (curve.dropped > 0) err << "dropped " << curve.dropped << " grid points\n";
            return kExitOk;
        }
        if (*a_gini) {
            const auto table = load_table(gini_in);
            std::vector<GiniPoint> series;
            for (const auto& element : as_series(table)) {
                series.push_back({element.t, element.label, gini(element.sample)});
            }
            emit(gini_out, out, [&](std::ostream& os) { write_gini_table(series, os); });
            return kExitOk;
        }
        if (*a_alpha) {
            const auto table = load_table(alpha_in);
            const auto series = as_series(table);
            const auto alpha = alpha_timeseries(std::span<const TimedSample>(series),
                                                to_fit_config(alpha_opts));
            emit(alpha_out, out, [&](std::ostream& os) { write_alpha_table(alpha, os); });
            for (const auto& p : alpha) {
                if (!p.fit) err << "gap at " << (p.label.empty() ? format_number(p.t) : p.label)
                                << ": " << p.gap_reason << '\n';
            }
            return kExitOk;
        }
    } catch (const Error& e) {
        err << "kinex: " << e.what() << '\n';
        return e.kind() == ErrorKind::InvalidConfig ? kExitUsage : kExitRuntime;
    } catch (const std::exception& e) {
        err << "kinex: " << e.what() << '\n';
        return kExitRuntime;
    }
    err << app.help();
    return kExitUsage;
}

}  // namespace kinex
