#include "kinex/persist.hpp"

#include <openssl/evp.h>

#include <array>
#include <cstdio>
#include <fstream>
#include <memory>

#include "kinex/error.hpp"

namespace kinex {

namespace fs = std::filesystem;

namespace {

std::ofstream open_for_write(const fs::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw Error(ErrorKind::Io, "cannot write " + path.string());
    }
    return out;
}

template <class Body>
void write_file(const fs::path& path, Body&& body) {
    auto out = open_for_write(path);
    body(out);
    out.flush();
    if (!out) {
        throw Error(ErrorKind::Io, "write failed for " + path.string());
    }
}

std::string time_column(double t, const std::string& label) {
    return label.empty() ? format_number(t) : label;
}

}  // namespace

std::string format_number(double value) {
    std::array<char, 32> buf{};
    std::snprintf(buf.data(), buf.size(), "%.17g", value);
    return buf.data();
}

OutputTransaction::~OutputTransaction() {
    if (committed_) return;
    for (const auto& e : entries_) {
        std::error_code ec;
        fs::remove(e.staged, ec);
    }
}

fs::path OutputTransaction::stage(const fs::path& final_path) {
    fs::path staged = final_path;
    staged += ".partial";
    entries_.push_back({staged, final_path});
    return staged;
}

void OutputTransaction::commit() {
    for (const auto& e : entries_) {
        std::error_code ec;
        fs::rename(e.staged, e.final_path, ec);
        if (ec) {
            throw Error(ErrorKind::Io, "cannot move " + e.staged.string() + " into place: " +
                                           ec.message());
        }
    }
    committed_ = true;
}

void write_snapshot_table(std::span<const Snapshot> snapshots, const fs::path& path) {
    if (snapshots.empty()) {
        throw Error(ErrorKind::EmptyInput, "no snapshots to write");
    }
    write_file(path, [&](std::ostream& out) {
        out << "snapshot,sweep,agent,income\n";
        for (std::size_t s = 0; s < snapshots.size(); ++s) {
            const auto& snap = snapshots[s];
            const std::string prefix =
                std::to_string(s) + ',' + std::to_string(snap.sweep_index) + ',';
            for (std::size_t a = 0; a < snap.incomes.size(); ++a) {
                out << prefix << a << ',' << format_number(snap.incomes[a]) << '\n';
            }
        }
    });
}

void write_sample_table(const Sample& sample, const fs::path& path) {
    write_file(path, [&](std::ostream& out) {
        out << "income,weight\n";
        for (std::size_t i = 0; i < sample.size(); ++i) {
            out << format_number(sample.values[i]) << ',' << format_number(sample.weights[i])
                << '\n';
        }
    });
}

void write_event_table(std::span<const EventRecord> events, const fs::path& path) {
    write_file(path, [&](std::ostream& out) {
        out << "at_sweep,op,total_before,total_after,agents_before,agents_after\n";
        for (const auto& e : events) {
            out << e.at_sweep << ',' << e.op << ',' << format_number(e.total_before) << ','
                << format_number(e.total_after) << ',' << e.agents_before << ','
                << e.agents_after << '\n';
        }
    });
}

void write_ccdf_table(const Ccdf& curve, std::ostream& out) {
    out << "x,Q\n";
    for (const auto& p : curve.points) {
        out << format_number(p.x) << ',' << format_number(p.q) << '\n';
    }
}

void write_alpha_table(std::span<const AlphaPoint> series, std::ostream& out) {
    out << "t,alpha,stderr,x_min,n_tail,gap\n";
    for (const auto& p : series) {
        out << time_column(p.t, p.label) << ',';
        if (p.fit) {
            out << format_number(p.fit->alpha) << ',' << format_number(p.fit->stderr_alpha) << ','
                << format_number(p.fit->x_min) << ',' << p.fit->n_tail << ",0\n";
        } else {
            out << ",,,,1\n";
        }
    }
}

void write_relative_table(const RelativeCurve& curve, std::ostream& out) {
    out << "x,R\n";
    for (std::size_t i = 0; i < curve.grid.size(); ++i) {
        out << format_number(curve.grid[i]) << ',' << format_number(curve.ratios[i]) << '\n';
    }
}

void write_gini_table(std::span<const GiniPoint> series, std::ostream& out) {
    out << "t,G\n";
    for (const auto& p : series) {
        out << time_column(p.t, p.label) << ',' << format_number(p.gini) << '\n';
    }
}

void write_histogram_table(const Histogram& hist, std::ostream& out) {
    out << "bin_lo,bin_hi,density\n";
    for (std::size_t b = 0; b < hist.densities.size(); ++b) {
        out << format_number(hist.edges[b]) << ',' << format_number(hist.edges[b + 1]) << ','
            << format_number(hist.densities[b]) << '\n';
    }
}

void write_tail_fit(const TailFit& fit, std::ostream& out) {
    out << "method,alpha,amplitude,x_min,n_tail,stderr\n"
        << to_string(fit.method) << ',' << format_number(fit.alpha) << ','
        << format_number(fit.amplitude) << ',' << format_number(fit.x_min) << ',' << fit.n_tail
        << ',' << format_number(fit.stderr_alpha) << '\n';
}

void write_ccdf_table(const Ccdf& curve, const fs::path& path) {
    write_file(path, [&](std::ostream& out) { write_ccdf_table(curve, out); });
}

void write_alpha_table(std::span<const AlphaPoint> series, const fs::path& path) {
    write_file(path, [&](std::ostream& out) { write_alpha_table(series, out); });
}

void write_relative_table(const RelativeCurve& curve, const fs::path& path) {
    write_file(path, [&](std::ostream& out) { write_relative_table(curve, out); });
}

void write_gini_table(std::span<const GiniPoint> series, const fs::path& path) {
    write_file(path, [&](std::ostream& out) { write_gini_table(series, out); });
}

void write_histogram_table(const Histogram& hist, const fs::path& path) {
    write_file(path, [&](std::ostream& out) { write_histogram_table(hist, out); });
}

void write_tail_fit(const TailFit& fit, const fs::path& path) {
    write_file(path, [&](std::ostream& out) { write_tail_fit(fit, out); });
}

std::vector<fs::path> write_analysis_tables(const AnalysisResults& results,
                                            const std::string& path_prefix) {
    if (results.empty()) {
        throw Error(ErrorKind::EmptyInput, "no analysis results to write");
    }
    OutputTransaction tx;
    auto target = [&](const char* name) { return fs::path(path_prefix + name); };
    if (results.ccdf) write_ccdf_table(*results.ccdf, tx.stage(target("ccdf.csv")));
    if (!results.alpha.empty()) write_alpha_table(results.alpha, tx.stage(target("alpha.csv")));
    if (results.relative) write_relative_table(*results.relative, tx.stage(target("relative.csv")));
    if (!results.gini.empty()) write_gini_table(results.gini, tx.stage(target("gini.csv")));
    if (results.pdf) write_histogram_table(*results.pdf, tx.stage(target("pdf.csv")));

    const auto manifest = build_manifest("analysis", nullptr, tx.entries());
    write_json(manifest, tx.stage(target("manifest.json")));
    tx.commit();

    std::vector<fs::path> written;
    for (const auto& e : tx.entries()) written.push_back(e.final_path);
    return written;
}

std::string sha256_hex(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error(ErrorKind::Io, "cannot read " + path.string());
    }
    std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
    if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1) {
        throw Error(ErrorKind::Io, "sha256 unavailable");
    }
    std::array<char, 1 << 16> buf{};
    while (in) {
        in.read(buf.data(), buf.size());
        if (in.gcount() > 0) EVP_DigestUpdate(ctx.get(), buf.data(), static_cast<std::size_t>(in.gcount()));
    }
    std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
    unsigned int len = 0;
    EVP_DigestFinal_ex(ctx.get(), digest.data(), &len);
    static constexpr char hex[] = "0123456789abcdef";
    std::string out;
    for (unsigned int i = 0; i < len; ++i) {
        out.push_back(hex[digest[i] >> 4]);
        out.push_back(hex[digest[i] & 0xF]);
    }
    return out;
}

nlohmann::json build_manifest(const std::string& command, const nlohmann::json& config,
                              std::span<const OutputTransaction::Entry> files) {
    nlohmann::json doc;
    doc["artifact"] = "kinex";
    doc["version"] = KINEX_VERSION;
    doc["command"] = command;
    doc["config"] = config;
    auto listed = nlohmann::json::array();
    for (const auto& f : files) {
        listed.push_back({{"name", f.final_path.filename().string()}, {"sha256", sha256_hex(f.staged)}});
    }
    doc["files"] = std::move(listed);
    return doc;
}

void write_json(const nlohmann::json& doc, const fs::path& path) {
    write_file(path, [&](std::ostream& out) { out << doc.dump(2) << '\n'; });
}

ManifestCheck verify_manifest(const fs::path& manifest_path) {
    std::ifstream in(manifest_path, std::ios::binary);
    if (!in) {
        throw Error(ErrorKind::Io, "cannot read " + manifest_path.string());
    }
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::InvalidInput, manifest_path.string() + ": " + e.what());
    }
    ManifestCheck check;
    const auto dir = manifest_path.parent_path();
    for (const auto& f : doc.at("files")) {
        const auto name = f.at("name").get<std::string>();
        const auto expected = f.at("sha256").get<std::string>();
        std::string actual;
        try {
            actual = sha256_hex(dir / name);
        } catch (const Error&) {
            actual = "<missing>";
        }
        if (actual != expected) {
            check.ok = false;
            check.mismatches.push_back(name);
        }
    }
    return check;
}

}  // namespace kinex
