#pragma once

// Config-driven experiment runner.
//
// Config (JSON):
//   {"experiment": "unravel" | "relnet" | "massshell" | "nogo-sweep" | "vacuum-energy",
//    "seed": 0, "threads": 1, "output_dir": "runs/<experiment>",
//    "description": "...", "parameters": {...}}
//
// A run writes manifest.json (resolved config, timestamp, column docs), the
// result files, and summary.txt into output_dir. A relative output_dir is
// resolved against $COLLAPSE_LAB_OUTPUT_ROOT when it is set.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "json.hpp"

namespace collapse::cli {

using nlohmann::json;

inline constexpr const char* kOutputRootEnv = "COLLAPSE_LAB_OUTPUT_ROOT";

enum ExitCode : int { kSuccess = 0, kValidationFailure = 1, kInconsistency = 2 };

struct ExperimentConfig {
  std::string experiment;
  std::uint64_t seed = 0;
  unsigned threads = 1;
  std::string output_dir;
  std::string description;
  json parameters = json::object();
};

/// Documented column of a result file.
struct Column {
  std::string name;
  std::string doc;
};

struct ResultFile {
  std::string name;
  std::string format;  // "csv" or "jsonl"
  std::vector<Column> columns;
  std::string content;
};

struct RunOutput {
  std::vector<ResultFile> files;
  std::string summary;
};

/// Parses and validates the top-level config; parameters are resolved later.
ExperimentConfig parse_config(const json& j);
ExperimentConfig load_config(const std::filesystem::path& path);

/// Validates parameters, fills defaults and returns the fully resolved config.
json resolve(const ExperimentConfig& cfg);

/// Executes a validated config without touching the filesystem.
RunOutput execute(const ExperimentConfig& cfg);

std::filesystem::path output_directory(const ExperimentConfig& cfg);

/// Subcommands; diagnostics go to `err`, progress to `out`.
int run(const std::filesystem::path& config_path, std::ostream& out, std::ostream& err);
int verify(const std::filesystem::path& config_path, std::ostream& out, std::ostream& err);

}  // namespace collapse::cli
