#include "kinex/ingest.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

#include "kinex/error.hpp"

namespace kinex {

namespace {

constexpr std::size_t kMaxIssues = 20;

std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

std::vector<std::string_view> split(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto comma = line.find(',', start);
        out.push_back(trim(line.substr(start, comma == std::string_view::npos ? line.npos : comma - start)));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return out;
}

std::optional<double> parse_number(std::string_view field) {
    if (field.empty()) return std::nullopt;
    if (field.front() == '+') field.remove_prefix(1);
    double value = 0.0;
    const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
    if (ec != std::errc() || ptr != field.data() + field.size() || !std::isfinite(value)) {
        return std::nullopt;
    }
    return value;
}

struct Columns {
    std::optional<std::size_t> income;
    std::optional<std::size_t> weight;
    std::optional<std::size_t> group;
    std::optional<std::size_t> time;
    std::size_t count = 0;
};

Columns parse_header(std::string_view line, const std::string& source) {
    Columns cols;
    const auto names = split(line);
    cols.count = names.size();
    for (std::size_t i = 0; i < names.size(); ++i) {
        const auto name = names[i];
        if (name == "income") cols.income = i;
        else if (name == "weight") cols.weight = i;
        else if (name == "period" || name == "snapshot") cols.group = i;
        else if (name == "sweep") cols.time = i;
    }
    if (!cols.income) {
        throw Error(ErrorKind::Validation, source + ": header has no 'income' column");
    }
    return cols;
}

}  // namespace

IncomeTable parse_income_table(std::istream& in, const IngestOptions& options,
                               const std::string& source) {
    IncomeTable table;
    auto& report = table.report;

    std::string line;
    std::size_t line_no = 0;
    std::optional<Columns> cols;
    std::map<std::string, std::size_t> group_index;

    auto reject = [&](const std::string& why) {
        const std::string msg = source + " line " + std::to_string(line_no) + ": " + why;
        if (options.strict) throw Error(ErrorKind::Validation, msg);
        ++report.rows_dropped;
        if (report.issues.size() < kMaxIssues) report.issues.push_back(msg);
    };

    while (std::getline(in, line)) {
        ++line_no;
        std::string_view view(line);
        if (line_no == 1 && view.substr(0, 3) == "\xEF\xBB\xBF") view.remove_prefix(3);
        if (trim(view).empty()) continue;
        if (!cols) {
            cols = parse_header(view, source);
            continue;
        }
        ++report.rows_in;
        const auto fields = split(view);
        if (fields.size() != cols->count) {
            reject("expected " + std::to_string(cols->count) + " fields, found " +
                   std::to_string(fields.size()));
            continue;
        }
        const auto income = parse_number(fields[*cols->income]);
        if (!income) {
            reject("malformed income '" + std::string(fields[*cols->income]) + "'");
            continue;
        }
        if (*income < 0.0) {
            reject("negative income " + std::string(fields[*cols->income]));
            continue;
        }
        double weight = 1.0;
        if (cols->weight) {
            const auto w = parse_number(fields[*cols->weight]);
            if (!w) {
                reject("malformed weight '" + std::string(fields[*cols->weight]) + "'");
                continue;
            }
            if (!(*w > 0.0)) {
                reject("non-positive weight " + std::string(fields[*cols->weight]));
                continue;
            }
            weight = *w;
        }
        std::optional<double> t;
        if (cols->time) {
            t = parse_number(fields[*cols->time]);
            if (!t) {
                reject("malformed sweep '" + std::string(fields[*cols->time]) + "'");
                continue;
            }
        }
        const std::string label = cols->group ? std::string(fields[*cols->group]) : std::string();

        auto [it, inserted] = group_index.try_emplace(label, table.groups.size());
        if (inserted) {
            IncomeGroup group;
            group.label = label;
            group.t = t;
            group.sample.weighted = cols->weight.has_value();
            table.groups.push_back(std::move(group));
        }
        auto& sample = table.groups[it->second].sample;
        sample.values.push_back(*income);
        sample.weights.push_back(weight);
        ++report.rows_kept;
    }
    if (!cols) {
        throw Error(ErrorKind::Validation, source + ": missing header row");
    }
    return table;
}

IncomeTable read_income_table(const std::filesystem::path& path, const IngestOptions& options) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error(ErrorKind::Io, "cannot open " + path.string());
    }
    return parse_income_table(in, options, path.string());
}

TableSummary summarize(const IncomeTable& table) {
    TableSummary s;
    s.report = table.report;
    s.groups = table.groups.size();
    s.min = std::numeric_limits<double>::infinity();
    s.max = -std::numeric_limits<double>::infinity();
    double zero_weight = 0.0;
    for (const auto& g : table.groups) {
        for (std::size_t i = 0; i < g.sample.size(); ++i) {
            const double v = g.sample.values[i];
            s.min = std::min(s.min, v);
            s.max = std::max(s.max, v);
            s.total_weight += g.sample.weights[i];
            if (v == 0.0) zero_weight += g.sample.weights[i];
        }
    }
    if (table.report.rows_kept == 0) {
        throw Error(ErrorKind::EmptyInput, "table has no valid rows");
    }
    s.zero_mass_fraction = zero_weight / s.total_weight;
    return s;
}

TableSummary validate_income_table(const std::filesystem::path& path, const IngestOptions& options) {
    return summarize(read_income_table(path, options));
}

}  // namespace kinex
