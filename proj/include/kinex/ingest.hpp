#pragma once

#include <cstddef>
#include <filesystem>
#include <istream>
#include <optional>
#include <string>
#include <vector>

#include "kinex/analysis.hpp"

namespace kinex {

struct IngestOptions {
    // Strict aborts on the first bad row; lenient drops and counts it.
    bool strict = true;
};

struct IngestReport {
    std::size_t rows_in = 0;
    std::size_t rows_kept = 0;
    std::size_t rows_dropped = 0;
    // First few row diagnostics ("line 7: ...").
    std::vector<std::string> issues;
};

struct IncomeGroup {
    std::string label;
    // Numeric time stamp when the table carries one (snapshot tables: the sweep).
    std::optional<double> t;
    Sample sample;
};

// Groups appear in order of first occurrence. Without a grouping column there is
// exactly one group with an empty label.
struct IncomeTable {
    std::vector<IncomeGroup> groups;
    IngestReport report;
};

// Comma-separated, one header row. Columns: `income` (required), `weight`
// (optional), `period` (optional grouping). Snapshot tables written by
// write_snapshot_table (`snapshot,sweep,agent,income`) are also accepted and
// grouped per snapshot.
IncomeTable parse_income_table(std::istream& in, const IngestOptions& options = {},
                               const std::string& source = "<stream>");
IncomeTable read_income_table(const std::filesystem::path& path, const IngestOptions& options = {});

struct TableSummary {
    IngestReport report;
    std::size_t groups = 0;
    double min = 0.0;
    double max = 0.0;
    double zero_mass_fraction = 0.0;
    double total_weight = 0.0;
};

TableSummary summarize(const IncomeTable& table);
TableSummary validate_income_table(const std::filesystem::path& path,
                                   const IngestOptions& options = {});

}  // namespace kinex
