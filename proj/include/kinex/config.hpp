#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "kinex/analysis.hpp"
#include "kinex/exchange.hpp"
#include "kinex/open_system.hpp"

namespace kinex {

struct AnalysisDirectives {
    // Any of "ccdf", "alpha", "relative", "gini".
    std::vector<std::string> tables;
    FitConfig fit;
    // Reference for the relative curve: a snapshot ordinal, or an income table.
    std::optional<std::size_t> reference_snapshot;
    std::optional<std::string> reference_sample;
};

struct ScenarioConfig {
    RunConfig run;
    Schedule schedule;
    std::string output_dir = "out";
    AnalysisDirectives analysis;
};

// Throws InvalidConfig naming the offending key.
ScenarioConfig parse_scenario_config(const nlohmann::json& doc);

// Reads a config file, or the config echo inside a run manifest. Relative
// reference_sample paths resolve against the file's directory.
ScenarioConfig load_scenario_config(const std::filesystem::path& path);

// Canonical form with every default spelled out; parse(to_json(c)) == c.
nlohmann::json to_json(const ScenarioConfig& config);

}  // namespace kinex
