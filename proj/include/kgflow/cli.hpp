#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

namespace kgflow::cli {

struct RunConfig {
  std::string command;  // "gfl check", "run", "schedule", ...

  std::filesystem::path flowline;
  std::filesystem::path corpus;
  std::filesystem::path ontology;
  std::filesystem::path endpoints;
  std::filesystem::path catalog;
  std::filesystem::path profile;
  std::filesystem::path plan;
  std::filesystem::path observations;
  std::filesystem::path fit;
  std::filesystem::path overlay;
  std::filesystem::path predicted;
  std::filesystem::path gold;
  std::filesystem::path output;
  std::filesystem::path report;
  std::filesystem::path trace;

  double slice_rows = 200;
  double corpus_rows = 0;  // 0: one slice
  double eta = 0.5;
  std::uint64_t seed = 0;
  double latency_s = 0.001;
  double bandwidth_bps = 1.25e8;
  double jitter = 0.0;
  int random_plans = 50;
  std::vector<double> etas{0.2, 0.5, 0.8};
  std::string ns = "http://example.org/kg/";
  std::string weighting = "relative";
  bool pipelined = false;
  bool refine = true;
  int sentences = 50;
};

// Layers, lowest first: defaults, KGFLOW_CATALOG, the config file, flags.
// Both documents use the flag names as keys ("slice", "eta", "catalog", ...).
// Relative paths in the file resolve against the file's directory.
RunConfig load_config(const nlohmann::json& flags,
                      const std::optional<std::filesystem::path>& config_file = std::nullopt);

// argv without the program name. Machine output goes to `out`, diagnostics
// to `err`. Returns the process exit code.
int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

} // namespace kgflow::cli
