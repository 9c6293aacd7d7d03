// Model families deployed by services, plus the utility/loss definitions
// users and services evaluate against them.
//
// All families expose a real decision value f(x); the predicted label is
// +1 iff f(x) > 0 (ties at zero resolve to -1, giving zero utility there).
#pragma once

#include <cstdint>
#include <stdexcept>
#include <variant>

#include "stratsim/domain.hpp"

namespace stratsim {

// ---- feature maps ----------------------------------------------------

enum class FeatureMap : std::uint8_t {
  Identity,   // phi(x) = x
  AppendOne,  // phi(x) = [x, 1]; folds the bias into the weight vector
};

Vector apply_feature_map(FeatureMap map, const Vector& x);
int mapped_dim(FeatureMap map, int raw_dim);

// ---- families --------------------------------------------------------

// f(x) = w . phi(x). The norm includes the bias coordinate when the map
// is AppendOne, which is what makes min-norm retraining well posed
// without an equality constraint in the dual.
struct LinearModel {
  Vector weights;
  FeatureMap feature_map = FeatureMap::Identity;

  double decision_value(const Vector& x) const;
  double norm() const { return weights.norm(); }
};

// One-dimensional thresholding: f(x) = x + offset. Its utility is capped
// at `utility_cap` so arbitrarily deep positives do not earn unbounded
// usage.
struct ThresholdModel {
  double offset = 0.0;
  double utility_cap = 1.0;

  double decision_value(const Vector& x) const;
  double norm() const { return offset < 0 ? -offset : offset; }
};

struct KernelSpec {
  enum class Kind : std::uint8_t { Linear, Rbf };
  Kind kind = Kind::Rbf;
  double gamma = 1.0;  // RBF width, ignored for Linear

  static KernelSpec linear() { return {Kind::Linear, 0.0}; }
  static KernelSpec rbf(double gamma = 1.0) { return {Kind::Rbf, gamma}; }
};

double kernel_eval(const KernelSpec& spec, const Vector& a, const Vector& b);

// f(x) = sum_i alpha_i y_i K(x_i, x) + bias. The bias equals
// sum_i alpha_i y_i because training folds a constant feature into the
// kernel (K + 1), so the bias is regularized like every other direction.
struct KernelModel {
  Matrix support_x;       // one support vector per row
  Eigen::VectorXi support_y;
  Vector alphas;          // all > 0
  double bias = 0.0;
  KernelSpec kernel = KernelSpec::rbf();
  double norm_value = 0.0;  // sqrt(alpha' Q alpha), cached by the trainer

  double decision_value(const Vector& x) const;
  double norm() const { return norm_value; }
  int support_count() const { return static_cast<int>(alphas.size()); }
};

// Value-semantic handle over the three families.
class Model {
 public:
  Model() : impl_(LinearModel{}) {}
  Model(LinearModel m) : impl_(std::move(m)) {}
  Model(ThresholdModel m) : impl_(std::move(m)) {}
  Model(KernelModel m) : impl_(std::move(m)) {}

  double decision_value(const Vector& x) const;
  int predict(const Vector& x) const { return decision_value(x) > 0.0 ? 1 : -1; }
  double norm() const;
  const char* family() const;

  template <typename T>
  const T* get_if() const {
    return std::get_if<T>(&impl_);
  }

  // Parameter equality within an absolute tolerance; used by cycle
  // detection and by the stickiness tests (tol = 0 means bitwise).
  bool approx_equal(const Model& other, double tol) const;

 private:
  std::variant<LinearModel, ThresholdModel, KernelModel> impl_;
};

// ---- losses and utilities ---------------------------------------------

// Paired choice of service-side loss and user-side utility.
// Hinge goes with the raw decision-value utility; the 0/1 loss goes with
// the 0/1 utility. `v` is the loss incurred exactly at zero utility.
//
// `zero_one_as_written` switches the 0/1 loss to the literal indicator
// 1{f(x) * y > 0}, which charges for *correct* classifications; it exists
// for comparison only. The default charges misclassifications.
struct LossSpec {
  enum class LossKind : std::uint8_t { Hinge, ZeroOne };
  enum class UtilityKind : std::uint8_t { Linear, ZeroOne };

  LossKind loss_kind = LossKind::Hinge;
  UtilityKind utility_kind = UtilityKind::Linear;
  double v = 1.0;
  bool zero_one_as_written = false;

  static LossSpec hinge_linear() { return {}; }
  static LossSpec zero_one(bool as_written = false) {
    return {LossKind::ZeroOne, UtilityKind::ZeroOne, 1.0, as_written};
  }
};

double utility(const Model& model, const Vector& x, const LossSpec& spec);
double loss(const Model& model, const Vector& x, int y, const LossSpec& spec);

// Weighted expected loss over the population with non-negative weights.
// When the weights sum to zero every normalized weight is taken to be
// zero, so the result is 0 for any model.
double weighted_expected_loss(const Model& model, const Dataset& data,
                              const Vector& weights, const LossSpec& spec);

// n-by-m matrix of utility(model_j, x_i).
Matrix utility_matrix(const std::vector<Model>& models, const Dataset& data,
                      const LossSpec& spec);

}  // namespace stratsim
