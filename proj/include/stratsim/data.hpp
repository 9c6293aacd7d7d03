// Dataset ingestion (CSV with schema-driven column roles), preprocessing
// (one-hot, normalization, realizability filtering, subsampling), the
// built-in analytic scenarios, and seeded service initialization.
#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "stratsim/domain.hpp"
#include "stratsim/dynamics.hpp"
#include "stratsim/models.hpp"

namespace stratsim {

struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct FilterFailedError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Role of one CSV column.
struct ColumnSpec {
  enum class Role : std::uint8_t { Feature, Categorical, Label, Ignore };
  std::string name;  // header name; for headerless files, "col<k>" by position
  Role role = Role::Feature;
};

struct CsvSchema {
  bool has_header = true;
  std::vector<ColumnSpec> columns;          // must cover every column in the file
  std::map<std::string, int> label_map;     // raw label token -> {-1, +1}
};

// Preprocessing applied after parsing, in this order:
// realizability filter, subsample, normalization. Normalization runs last
// so per-feature statistics match the data the run actually uses.
struct PreprocessSpec {
  bool normalize = false;  // zero mean / unit variance; constant columns to 0
  std::optional<double> filter_C;              // soft-margin C, unset = no filter
  std::optional<int> subsample_per_class;      // keep k per class
  std::optional<std::uint64_t> subsample_seed; // unset = first k in file order
};

struct LoadResult {
  Dataset dataset;
  std::vector<std::string> feature_names;  // post one-hot expansion
  std::vector<int> removed_by_filter;      // row indices in the parsed order
};

LoadResult load_csv(const std::string& path, const CsvSchema& schema,
                    const PreprocessSpec& prep = {});

// Drop points a soft-margin fit misclassifies, then verify the remainder
// is hard-margin separable; up to three passes before FilterFailedError.
// Returns the kept dataset and the dropped indices.
struct FilterResult {
  Dataset dataset;
  std::vector<int> removed;
};
FilterResult realizability_filter(const Dataset& data, double C, const FamilySpec& family,
                                  const TrainerConfig& cfg = {});

// In-place zero-mean / unit-variance scaling; constant columns become 0.
void normalize_features(Dataset& data);

// ---- built-in scenarios -------------------------------------------------

struct Scenario {
  Dataset dataset;
  std::vector<Model> models;
  DynamicsConfig config;
  LossSpec loss_spec;
  std::string name;
};

// Names: "five_point" (2-service linear oscillation witness),
// "threshold_line" (n positive users, one threshold service),
// "threshold_services" (one negative user, m threshold services).
Scenario builtin_scenario(const std::string& name, int size = 0);
std::vector<std::string> builtin_scenario_names();

// Seeded initial exposure: each service's memory column gets one random
// positive and one random negative user set to 1. Throws if either class
// is missing.
MemoryMatrix reveal_seed_users(const Dataset& data, int m, std::uint64_t seed);

// Full experiment-protocol starting point: every service fits its revealed
// pair, the reveal matrix persists as starting memory, and users
// best-respond once to the fitted models.
SimState seeded_initial_state(const Dataset& data, int m, std::uint64_t seed,
                              const FamilySpec& family, const LossSpec& spec,
                              const DynamicsConfig& cfg, const TrainerConfig& tcfg);

}  // namespace stratsim
