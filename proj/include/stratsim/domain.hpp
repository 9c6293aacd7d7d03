// Core value types shared by every layer: the labeled user population,
// usage/memory matrices, the joint simulation state, and the knobs that
// govern the user/service update loop.
#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

namespace stratsim {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

// One strategic user: a feature vector and a binary label in {-1, +1}.
struct UserRecord {
  Vector features;
  int label = 1;
};

// Fixed population of users. Feature dimension is uniform across records.
struct Dataset {
  std::vector<UserRecord> users;

  int n() const { return static_cast<int>(users.size()); }
  int dim() const { return users.empty() ? 0 : static_cast<int>(users[0].features.size()); }

  const Vector& x(int i) const { return users[static_cast<std::size_t>(i)].features; }
  int y(int i) const { return users[static_cast<std::size_t>(i)].label; }
};

// Non-negative n-by-m allocation of usage from users (rows) to services
// (columns). Kept distinct from MemoryMatrix so the two cannot be swapped
// by accident inside the update loop.
struct UsageMatrix {
  Matrix entries;

  static UsageMatrix zero(int n, int m) { return {Matrix::Zero(n, m)}; }
  double operator()(int i, int j) const { return entries(i, j); }
  int n() const { return static_cast<int>(entries.rows()); }
  int m() const { return static_cast<int>(entries.cols()); }
};

// Discounted accumulation of past usage, same shape as UsageMatrix.
// An entry is exactly 0 only if the pair has never carried usage
// (the update rule is non-negative, so positivity is preserved).
struct MemoryMatrix {
  Matrix entries;

  static MemoryMatrix zero(int n, int m) { return {Matrix::Zero(n, m)}; }
  double operator()(int i, int j) const { return entries(i, j); }
  int n() const { return static_cast<int>(entries.rows()); }
  int m() const { return static_cast<int>(entries.cols()); }
};

// How a user splits usage across services whose utilities tie for the max.
struct TiePolicy {
  enum class Kind { EvenSplit, Concentrate, LowestIndex };
  Kind kind = Kind::EvenSplit;
  std::uint64_t seed = 0;  // only consulted by Concentrate

  static TiePolicy even_split() { return {Kind::EvenSplit, 0}; }
  static TiePolicy lowest_index() { return {Kind::LowestIndex, 0}; }
  static TiePolicy concentrate(std::uint64_t seed) { return {Kind::Concentrate, seed}; }
};

// Parameters of the joint dynamics.
//   p         memory discount (p = 0 means memoryless services)
//   q         usage-cost curvature in the user objective, must be > 1
//   zero_tol  threshold for "equals zero" tests on losses and utilities
//   tie_tol   slack when collecting the argmax utility set
//   max_steps 0 means "derive 4*n*m when the run starts"
struct DynamicsConfig {
  double p = 0.5;
  double q = 2.0;
  double zero_tol = 1e-9;
  double tie_tol = 1e-9;
  TiePolicy user_tie_policy = TiePolicy::even_split();
  int max_steps = 0;
};

// A structural problem found by validate_state.
struct Violation {
  enum class Kind {
    BadLabel,
    NonFiniteFeature,
    DimensionMismatch,
    NonNegativityViolation,
    NonFiniteEntry,
    EmptyDataset,
  };
  Kind kind;
  int i = -1;  // user index when applicable
  int j = -1;  // service index when applicable
  std::string message;
};

const char* to_string(Violation::Kind kind);

}  // namespace stratsim
