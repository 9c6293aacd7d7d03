#include "stratsim/models.hpp"

#include <cmath>

namespace stratsim {

Vector apply_feature_map(FeatureMap map, const Vector& x) {
  if (map == FeatureMap::Identity) return x;
  Vector out(x.size() + 1);
  out.head(x.size()) = x;
  out(x.size()) = 1.0;
  return out;
}

int mapped_dim(FeatureMap map, int raw_dim) {
  return map == FeatureMap::Identity ? raw_dim : raw_dim + 1;
}

double LinearModel::decision_value(const Vector& x) const {
  if (mapped_dim(feature_map, static_cast<int>(x.size())) != weights.size())
    throw std::invalid_argument("LinearModel: input dimension does not match weights");
  if (feature_map == FeatureMap::Identity) return weights.dot(x);
  // AppendOne without materializing the mapped vector
  return weights.head(x.size()).dot(x) + weights(x.size());
}

double ThresholdModel::decision_value(const Vector& x) const {
  if (x.size() != 1)
    throw std::invalid_argument("ThresholdModel: expects one-dimensional inputs");
  return x(0) + offset;
}

double kernel_eval(const KernelSpec& spec, const Vector& a, const Vector& b) {
  if (a.size() != b.size())
    throw std::invalid_argument("kernel_eval: dimension mismatch");
  if (spec.kind == KernelSpec::Kind::Linear) return a.dot(b);
  return std::exp(-spec.gamma * (a - b).squaredNorm());
}

double KernelModel::decision_value(const Vector& x) const {
  double f = bias;
  for (int i = 0; i < support_count(); ++i)
    f += alphas(i) * support_y(i) * kernel_eval(kernel, support_x.row(i), x);
  return f;
}

double Model::decision_value(const Vector& x) const {
  return std::visit([&](const auto& m) { return m.decision_value(x); }, impl_);
}

double Model::norm() const {
  return std::visit([](const auto& m) { return m.norm(); }, impl_);
}

const char* Model::family() const {
  switch (impl_.index()) {
    case 0: return "linear";
    case 1: return "threshold";
    default: return "kernel";
  }
}

namespace {

bool close(double a, double b, double tol) { return std::abs(a - b) <= tol; }

bool vectors_close(const Vector& a, const Vector& b, double tol) {
  if (a.size() != b.size()) return false;
  for (Eigen::Index i = 0; i < a.size(); ++i)
    if (!close(a(i), b(i), tol)) return false;
  return true;
}

}  // namespace

bool Model::approx_equal(const Model& other, double tol) const {
  if (impl_.index() != other.impl_.index()) return false;
  if (const auto* a = get_if<LinearModel>()) {
    const auto* b = other.get_if<LinearModel>();
    return a->feature_map == b->feature_map && vectors_close(a->weights, b->weights, tol);
  }
  if (const auto* a = get_if<ThresholdModel>()) {
    const auto* b = other.get_if<ThresholdModel>();
    return close(a->offset, b->offset, tol) && close(a->utility_cap, b->utility_cap, tol);
  }
  const auto* a = get_if<KernelModel>();
  const auto* b = other.get_if<KernelModel>();
  if (a->kernel.kind != b->kernel.kind || !close(a->kernel.gamma, b->kernel.gamma, tol))
    return false;
  if (a->support_count() != b->support_count() || !close(a->bias, b->bias, tol))
    return false;
  if (a->support_y != b->support_y) return false;
  if (!vectors_close(a->alphas, b->alphas, tol)) return false;
  for (int i = 0; i < a->support_count(); ++i)
    if (!vectors_close(a->support_x.row(i), b->support_x.row(i), tol)) return false;
  return true;
}

double utility(const Model& model, const Vector& x, const LossSpec& spec) {
  const double f = model.decision_value(x);
  if (spec.utility_kind == LossSpec::UtilityKind::ZeroOne) return f > 0.0 ? 1.0 : 0.0;
  // Raw decision value; thresholds cap how much utility depth can earn.
  if (const auto* t = model.get_if<ThresholdModel>())
    return f < t->utility_cap ? f : t->utility_cap;
  return f;
}

double loss(const Model& model, const Vector& x, int y, const LossSpec& spec) {
  if (y != 1 && y != -1) throw std::invalid_argument("loss: label must be +1 or -1");
  const double f = model.decision_value(x);
  if (spec.loss_kind == LossSpec::LossKind::Hinge) {
    const double h = spec.v - y * f;
    return h > 0.0 ? h : 0.0;
  }
  if (spec.zero_one_as_written) return f * y > 0.0 ? spec.v : 0.0;
  return model.predict(x) != y ? spec.v : 0.0;
}

double weighted_expected_loss(const Model& model, const Dataset& data,
                              const Vector& weights, const LossSpec& spec) {
  if (weights.size() != data.n())
    throw std::invalid_argument("weighted_expected_loss: weight/population size mismatch");
  const double total = weights.sum();
  if (total <= 0.0) return 0.0;  // all normalized weights are zero by convention
  double acc = 0.0;
  for (int i = 0; i < data.n(); ++i) {
    if (weights(i) == 0.0) continue;
    acc += weights(i) * loss(model, data.x(i), data.y(i), spec);
  }
  return acc / total;
}

Matrix utility_matrix(const std::vector<Model>& models, const Dataset& data,
                      const LossSpec& spec) {
  Matrix out(data.n(), static_cast<Eigen::Index>(models.size()));
  for (std::size_t j = 0; j < models.size(); ++j)
    for (int i = 0; i < data.n(); ++i)
      out(i, static_cast<Eigen::Index>(j)) = utility(models[j], data.x(i), spec);
  return out;
}

}  // namespace stratsim
