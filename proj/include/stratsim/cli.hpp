// Config-file driven front end: single-run execution, sweeps over
// (p, q, m, seed) grids, scenario listing and config linting. Kept out of
// main() so the pipeline is testable end to end.
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "stratsim/data.hpp"
#include "stratsim/dynamics.hpp"

namespace stratsim::cli {

inline constexpr int kSchemaVersion = 1;

// Fully resolved run configuration (config file + flag overrides).
struct RunConfig {
  // scenario: either a builtin name or a CSV source
  std::string builtin;   // empty when csv_path is set
  int builtin_size = 0;  // n for threshold_line, m for threshold_services
  std::string csv_path;
  CsvSchema schema;
  PreprocessSpec prep;

  // csv-mode service setup
  int m = 1;
  std::uint64_t reveal_seed = 100;
  FamilySpec family = FamilySpec::kernel(KernelSpec::rbf(1.0));

  DynamicsConfig dynamics;
  TrainerConfig trainer;
  LossSpec loss_spec;

  std::string out_dir = "out";
};

struct SweepAxes {
  std::vector<double> p;
  std::vector<double> q;
  std::vector<int> m;
  std::vector<std::uint64_t> seed;
  int jobs = 0;  // 0 = hardware concurrency
};

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Parse the JSON config file; flag overrides are applied by the caller
// on the returned struct. `data_dir` resolves relative CSV paths and
// falls back to the STRATSIM_DATA_DIR environment variable.
RunConfig parse_config(const nlohmann::json& doc, const std::string& data_dir = "");
SweepAxes parse_sweep(const nlohmann::json& doc);

// Execute one run: writes trajectory.jsonl (flushed per step),
// summary.json and two TSV plot tables into cfg.out_dir.
// Returns the verdict. Throws on config/data/solver errors.
Verdict execute_run(const RunConfig& cfg);

// Cross product of the sweep axes; one subdirectory per cell plus a
// consolidated sweep_summary.tsv. Cells that fail are recorded in the
// table and do not stop the sweep. Returns the number of failed cells.
int execute_sweep(const RunConfig& base, const SweepAxes& axes);

// Lint a config document: collect problems instead of throwing.
std::vector<std::string> validate_config(const nlohmann::json& doc,
                                         const std::string& data_dir = "");

}  // namespace stratsim::cli
