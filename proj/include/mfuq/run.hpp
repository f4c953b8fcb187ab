#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "mfuq/misc_engine.hpp"
#include "mfuq/srbf_engine.hpp"

namespace mfuq {

// Bad configuration or usage; the command line maps these to exit code 2.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Command-line overrides on top of the config file. Empty strings and
// negative numbers mean "keep the config value".
struct RunOverrides {
  std::string method;
  double budget = -1.0;
  std::string out_dir;
  long seed = -1;
  bool svg = false;
};

struct RunConfig {
  std::string method = "both";  // misc | srbf | both
  std::string out_dir = "out";
  double budget = 2000.0;
  std::uint64_t seed = 0;  // distribution sampling
  bool svg = false;
  ModelSpec spec;
  nlohmann::json model_echo;  // raw model section, replayed into summary.json
  MiscConfig misc;
  SrbfConfig srbf;
  int dist_samples = 10000;
  int dist_bins = 25;
  int surface_per_dim = 100;
};

RunConfig parse_run_config(const nlohmann::json& j);
ModelSpec build_model_spec(const nlohmann::json& model_section);

// Executes the configured methods, writes per-method logs, CSV diagnostics
// and a joint summary.json under the output directory. Returns an exit code.
int run_command(const std::string& config_path, const RunOverrides& overrides);

// Tabulates one or more summary.json files side by side at an intermediate
// iteration (default: the middle of each history) and at the final one.
int compare_command(const std::vector<std::string>& summary_paths, long iteration = -1);

}  // namespace mfuq
