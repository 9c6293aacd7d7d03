// Service-side retraining: hard-margin minimum-norm separators with the
// sticky update rule, plus the soft-margin fit used by the realizability
// filter.
#pragma once

#include <optional>
#include <stdexcept>
#include <vector>

#include "stratsim/domain.hpp"
#include "stratsim/models.hpp"

namespace stratsim {

// Thrown when the requested support admits no zero-loss model.
struct InfeasibleSupportError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Thrown when the dual solver exhausts its iteration budget while the
// problem still looks feasible.
struct SolverStalledError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct TrainerConfig {
  enum class Solver : std::uint8_t { DualAscent, ProjectedGradient };
  Solver solver = Solver::DualAscent;
  int max_iter = 20000;      // full sweeps over the dual variables
  double kkt_tol = 1e-10;    // max allowed KKT violation at convergence
  double margin_target = 1.0;
  double zero_tol = 1e-9;    // "is the previous model already at zero loss"
};

// What min_norm_separator should fit.
struct FamilySpec {
  enum class Kind : std::uint8_t { Linear, Kernel, Threshold };
  Kind kind = Kind::Linear;
  FeatureMap feature_map = FeatureMap::AppendOne;  // Linear only
  KernelSpec kernel_spec = KernelSpec::rbf();      // Kernel only

  static FamilySpec linear(FeatureMap map = FeatureMap::AppendOne) {
    FamilySpec s;
    s.kind = Kind::Linear;
    s.feature_map = map;
    return s;
  }
  static FamilySpec kernel(KernelSpec k) {
    FamilySpec s;
    s.kind = Kind::Kernel;
    s.kernel_spec = k;
    return s;
  }
  static FamilySpec threshold() {
    FamilySpec s;
    s.kind = Kind::Threshold;
    return s;
  }
};

// Minimum-norm model satisfying y_i f(x_i) >= margin_target on every
// given point.
//   Linear    -> LinearModel over phi(x) (bias included in the norm)
//   Kernel    -> KernelModel on K + 1 (bias folded into the kernel)
//   Threshold -> ThresholdModel, solved in closed form
// Throws InfeasibleSupportError / SolverStalledError.
Model min_norm_separator(const std::vector<Vector>& xs, const std::vector<int>& ys,
                         const FamilySpec& family, const TrainerConfig& cfg);

// Sticky retraining for one service column.
//   1. Support = users whose memory entry is strictly positive. The
//      entries themselves never influence the fit, only membership does.
//   2. Empty support, or previous model already at (weighted) zero loss
//      on the memory column -> return `prev` unchanged, bit for bit.
//   3. Otherwise fit the min-norm separator of the support in the same
//      family as `prev` and verify it reaches zero loss.
Model sticky_retrain(const Model& prev, const Vector& memory_col, const Dataset& data,
                     const LossSpec& spec, const TrainerConfig& cfg);

// Soft-margin variant (dual box [0, C]); never throws for finite C.
// Used by the realizability filter, where misclassified points are the
// interesting output rather than an error.
struct SoftMarginFit {
  Model model;
  std::vector<int> misclassified;  // indices into xs/ys
};
SoftMarginFit soft_margin_fit(const std::vector<Vector>& xs, const std::vector<int>& ys,
                              const FamilySpec& family, double C, const TrainerConfig& cfg);

}  // namespace stratsim
