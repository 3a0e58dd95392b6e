#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "fedback/engine.hpp"
#include "fedback/metrics.hpp"

namespace fedback {

/// Everything one experiment needs: the run itself, the efficiency target
/// used by the report, and output options.
struct ExperimentConfig {
  RunConfig run;
  ReportOptions report;
  bool per_client_columns = true;
};

/// JSON config. Every key is optional and defaults to the RunConfig default;
/// unknown keys are rejected. See README.md for the schema.
ExperimentConfig parse_config(std::string_view json_text);
ExperimentConfig load_config(const std::filesystem::path& path);
std::string dump_config(const ExperimentConfig& cfg, int indent = 2);

Algorithm parse_algorithm(std::string_view name);
std::string_view to_string(Algorithm algorithm);

}  // namespace fedback
