#pragma once

#include <filesystem>
#include <ostream>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "kinex/analysis.hpp"
#include "kinex/exchange.hpp"
#include "kinex/open_system.hpp"

namespace kinex {

// 17 significant digits, enough for an exact double round trip.
std::string format_number(double value);

// Stages files under a ".partial" suffix and renames them into place on
// commit(). Anything still staged when the transaction dies is deleted.
class OutputTransaction {
public:
    OutputTransaction() = default;
    OutputTransaction(const OutputTransaction&) = delete;
    OutputTransaction& operator=(const OutputTransaction&) = delete;
    ~OutputTransaction();

    // Returns the temporary path to write instead of `final_path`.
    std::filesystem::path stage(const std::filesystem::path& final_path);
    void commit();

    struct Entry {
        std::filesystem::path staged;
        std::filesystem::path final_path;
    };
    const std::vector<Entry>& entries() const noexcept { return entries_; }

private:
    std::vector<Entry> entries_;
    bool committed_ = false;
};

// Header `snapshot,sweep,agent,income`; `snapshot` is the ordinal within the
// sequence (sweep indices repeat when events fire).
void write_snapshot_table(std::span<const Snapshot> snapshots, const std::filesystem::path& path);

// Header `income,weight`, readable by read_income_table.
void write_sample_table(const Sample& sample, const std::filesystem::path& path);

void write_event_table(std::span<const EventRecord> events, const std::filesystem::path& path);

struct GiniPoint {
    double t = 0.0;
    std::string label;
    double gini = 0.0;
};

struct AnalysisResults {
    std::optional<Ccdf> ccdf;
    std::vector<AlphaPoint> alpha;
    std::optional<RelativeCurve> relative;
    std::vector<GiniPoint> gini;
    std::optional<Histogram> pdf;

    bool empty() const noexcept {
        return !ccdf && alpha.empty() && !relative && gini.empty() && !pdf;
    }
};

// Table writers; each has a stream form and a file form.
void write_ccdf_table(const Ccdf& curve, std::ostream& out);
void write_alpha_table(std::span<const AlphaPoint> series, std::ostream& out);
void write_relative_table(const RelativeCurve& curve, std::ostream& out);
void write_gini_table(std::span<const GiniPoint> series, std::ostream& out);
void write_histogram_table(const Histogram& hist, std::ostream& out);
void write_tail_fit(const TailFit& fit, std::ostream& out);

void write_ccdf_table(const Ccdf& curve, const std::filesystem::path& path);
void write_alpha_table(std::span<const AlphaPoint> series, const std::filesystem::path& path);
void write_relative_table(const RelativeCurve& curve, const std::filesystem::path& path);
void write_gini_table(std::span<const GiniPoint> series, const std::filesystem::path& path);
void write_histogram_table(const Histogram& hist, const std::filesystem::path& path);
void write_tail_fit(const TailFit& fit, const std::filesystem::path& path);

// Writes <prefix>ccdf.csv, alpha.csv, relative.csv, gini.csv, pdf.csv for the
// parts present, plus <prefix>manifest.json listing their checksums.
// Returns the written paths, manifest last.
std::vector<std::filesystem::path> write_analysis_tables(const AnalysisResults& results,
                                                         const std::string& path_prefix);

std::string sha256_hex(const std::filesystem::path& path);

// Manifest: {"artifact", "version", "command", "config", "files": [{name, sha256}]}.
// File names are relative to the manifest's directory.
nlohmann::json build_manifest(const std::string& command, const nlohmann::json& config,
                              std::span<const OutputTransaction::Entry> files);
void write_json(const nlohmann::json& doc, const std::filesystem::path& path);

struct ManifestCheck {
    bool ok = true;
    std::vector<std::string> mismatches;
};

ManifestCheck verify_manifest(const std::filesystem::path& manifest_path);

}  // namespace kinex
