#include "stratsim/training.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace stratsim {

namespace {

constexpr double kAlphaBlowup = 1e10;  // any single dual weight this large => no separator

double clamp(double v, double lo, double hi) { return std::min(std::max(v, lo), hi); }

// Max KKT violation for  max margin*sum(a) - 0.5 a'Qa  s.t. 0 <= a <= C,
// where g = margin - Qa is the gradient.
double kkt_violation(const Vector& alpha, const Vector& g, double C) {
  double v = 0.0;
  for (Eigen::Index i = 0; i < alpha.size(); ++i) {
    if (alpha(i) <= 0.0)
      v = std::max(v, g(i));
    else if (alpha(i) >= C)
      v = std::max(v, -g(i));
    else
      v = std::max(v, std::abs(g(i)));
  }
  return v;
}

// Divergence test for the unbounded (inseparable) hard-margin dual: the
// iterates then grow roughly linearly forever, while feasible problems
// plateau. Compared against a snapshot from half as many sweeps ago, so
// genuine divergence shows up as ~2x growth and convergence as ~1x.
bool looks_divergent(double sum_now, double sum_snapshot, double margin) {
  return sum_now > 100.0 * std::max(margin, 1.0) && sum_snapshot > 0.0 &&
         sum_now >= 1.5 * sum_snapshot;
}

struct DualProblem {
  // Exactly one of these is set. Linear mode keeps the primal vector
  // theta = sum_i alpha_i z_i so gradients cost O(d); dense mode keeps
  // Qa = Q * alpha.
  const Matrix* Z = nullptr;  // rows z_i = y_i * phi(x_i)
  const Matrix* Q = nullptr;  // Q_ij = y_i y_j Ktilde(x_i, x_j)
};

struct DualSolution {
  Vector alpha;
  Vector qalpha;  // Q*alpha at exit (gradient = margin - qalpha)
  Vector theta;   // linear mode only
};

// First-order iterates identify the support but only match the stationary
// point to ~kkt_tol. Re-solving the KKT system on that support recovers it
// to machine precision; downstream state-equality checks depend on this.
// On any inconsistency the iterate is kept as-is.
void polish_active_set(const DualProblem& prob, double margin, DualSolution& sol) {
  const bool linear = prob.Z != nullptr;
  const Eigen::Index n = sol.alpha.size();
  std::vector<Eigen::Index> act;
  for (Eigen::Index i = 0; i < n; ++i)
    if (sol.alpha(i) > 0.0) act.push_back(i);

  Vector refined;
  for (int round = 0; round < 10 && !act.empty(); ++round) {
    const Eigen::Index s = static_cast<Eigen::Index>(act.size());
    Matrix Qs(s, s);
    for (Eigen::Index a = 0; a < s; ++a)
      for (Eigen::Index b = 0; b < s; ++b)
        Qs(a, b) = linear ? prob.Z->row(act[a]).dot(prob.Z->row(act[b]))
                          : (*prob.Q)(act[a], act[b]);
    const Vector rhs = Vector::Constant(s, margin);
    // min-norm solve; duplicate support points make Qs rank-deficient
    Vector as = Eigen::CompleteOrthogonalDecomposition<Matrix>(Qs).solve(rhs);
    if ((Qs * as - rhs).cwiseAbs().maxCoeff() > 1e-8) return;
    if (as.minCoeff() >= -1e-12) {
      refined = Vector::Zero(n);
      for (Eigen::Index a = 0; a < s; ++a) refined(act[a]) = std::max(as(a), 0.0);
      break;
    }
    // wrong guess: drop the constraints the KKT solve rejected
    std::vector<Eigen::Index> keep;
    for (Eigen::Index a = 0; a < s; ++a)
      if (as(a) > 0.0) keep.push_back(act[a]);
    if (keep.size() == act.size()) return;
    act = std::move(keep);
  }
  if (refined.size() == 0) return;

  DualSolution cand;
  cand.alpha = std::move(refined);
  if (linear) {
    cand.theta = prob.Z->transpose() * cand.alpha;
    cand.qalpha = (*prob.Z) * cand.theta;
  } else {
    cand.qalpha = (*prob.Q) * cand.alpha;
  }
  if ((Vector::Constant(n, margin) - cand.qalpha).maxCoeff() > 1e-9) return;
  sol = std::move(cand);
}

DualSolution solve_box_qp(const DualProblem& prob, double margin, double C,
                          const TrainerConfig& cfg) {
  const bool linear = prob.Z != nullptr;
  const Eigen::Index n = linear ? prob.Z->rows() : prob.Q->rows();
  const Eigen::Index d = linear ? prob.Z->cols() : 0;

  Vector diag(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    diag(i) = linear ? prob.Z->row(i).squaredNorm() : (*prob.Q)(i, i);
    if (diag(i) <= 0.0)
      throw InfeasibleSupportError("support point with zero self-inner-product");
  }

  DualSolution sol;
  sol.alpha = Vector::Zero(n);
  sol.qalpha = Vector::Zero(n);
  if (linear) sol.theta = Vector::Zero(d);

  const bool projected = cfg.solver == TrainerConfig::Solver::ProjectedGradient;
  double eta = 0.0;
  if (projected) {
    // 1/lambda_max bounds via Frobenius (linear) or Gershgorin (dense).
    if (linear) {
      eta = 1.0 / std::max(prob.Z->squaredNorm(), 1e-12);
    } else {
      double row_sum = 0.0;
      for (Eigen::Index i = 0; i < n; ++i)
        row_sum = std::max(row_sum, prob.Q->row(i).cwiseAbs().sum());
      eta = 1.0 / std::max(row_sum, 1e-12);
    }
  }

  auto refresh_qalpha = [&]() {
    if (linear)
      sol.qalpha = (*prob.Z) * sol.theta;
    else
      sol.qalpha = (*prob.Q) * sol.alpha;
  };

  double snap_sum = -1.0;
  int snap_sweep = 0;
  for (int sweep = 0; sweep < cfg.max_iter; ++sweep) {
    if (projected) {
      refresh_qalpha();
      Vector g = Vector::Constant(n, margin) - sol.qalpha;
      Vector next = (sol.alpha + eta * g).cwiseMax(0.0).cwiseMin(C);
      if (linear) sol.theta += prob.Z->transpose() * (next - sol.alpha);
      sol.alpha = std::move(next);
    } else {
      for (Eigen::Index i = 0; i < n; ++i) {
        const double fi = linear ? prob.Z->row(i).dot(sol.theta) : sol.qalpha(i);
        const double g = margin - fi;
        const double next = clamp(sol.alpha(i) + g / diag(i), 0.0, C);
        const double delta = next - sol.alpha(i);
        if (delta == 0.0) continue;
        sol.alpha(i) = next;
        if (linear)
          sol.theta += delta * prob.Z->row(i).transpose();
        else
          sol.qalpha += delta * prob.Q->col(i);
      }
    }

    refresh_qalpha();
    const Vector g = Vector::Constant(n, margin) - sol.qalpha;
    if (kkt_violation(sol.alpha, g, C) <= cfg.kkt_tol) {
      if (C > kAlphaBlowup) polish_active_set(prob, margin, sol);
      return sol;
    }

    if (sol.alpha.maxCoeff() > kAlphaBlowup)
      throw InfeasibleSupportError("dual weights diverged; support admits no separator");
    if (C > kAlphaBlowup && sweep + 1 >= 2000) {
      const double sum_now = sol.alpha.sum();
      if (snap_sum < 0.0) {
        snap_sum = sum_now;
        snap_sweep = sweep + 1;
      } else if (sweep + 1 >= 2 * snap_sweep) {
        if (looks_divergent(sum_now, snap_sum, margin))
          throw InfeasibleSupportError(
              "dual iterates grow without bound; support admits no separator");
        snap_sum = sum_now;
        snap_sweep = sweep + 1;
      }
    }
  }
  throw SolverStalledError("dual solver hit max_iter at KKT violation " +
                           std::to_string(kkt_violation(
                               sol.alpha, Vector::Constant(n, margin) - sol.qalpha, C)));
}

void check_inputs(const std::vector<Vector>& xs, const std::vector<int>& ys) {
  if (xs.empty()) throw std::invalid_argument("separator fit: no points");
  if (xs.size() != ys.size())
    throw std::invalid_argument("separator fit: point/label count mismatch");
  for (int y : ys)
    if (y != 1 && y != -1) throw std::invalid_argument("separator fit: labels must be +-1");
  for (const Vector& x : xs)
    if (x.size() != xs[0].size())
      throw std::invalid_argument("separator fit: inconsistent dimensions");
}

// Exact contradictions (same mapped point, both labels) make the QP
// unbounded; cheaper to reject them up front than to wait for divergence.
void reject_contradictions(const Matrix& phi, const std::vector<int>& ys) {
  const Eigen::Index n = phi.rows();
  if (n > 512) return;  // quadratic scan only at analysis scale
  for (Eigen::Index a = 0; a < n; ++a)
    for (Eigen::Index b = a + 1; b < n; ++b)
      if (ys[static_cast<std::size_t>(a)] != ys[static_cast<std::size_t>(b)] &&
          phi.row(a) == phi.row(b))
        throw InfeasibleSupportError("identical points with opposite labels in support");
}

Matrix mapped_rows(const std::vector<Vector>& xs, FeatureMap map) {
  const int d = mapped_dim(map, static_cast<int>(xs[0].size()));
  Matrix phi(static_cast<Eigen::Index>(xs.size()), d);
  for (std::size_t i = 0; i < xs.size(); ++i)
    phi.row(static_cast<Eigen::Index>(i)) = apply_feature_map(map, xs[i]).transpose();
  return phi;
}

Model fit_linear(const std::vector<Vector>& xs, const std::vector<int>& ys,
                 const FamilySpec& family, double C, const TrainerConfig& cfg,
                 bool hard) {
  const Matrix phi = mapped_rows(xs, family.feature_map);
  if (hard) reject_contradictions(phi, ys);
  Matrix Z = phi;
  for (Eigen::Index i = 0; i < Z.rows(); ++i)
    Z.row(i) *= static_cast<double>(ys[static_cast<std::size_t>(i)]);

  DualProblem prob;
  prob.Z = &Z;
  DualSolution sol = solve_box_qp(prob, cfg.margin_target, C, cfg);
  return Model(LinearModel{sol.theta, family.feature_map});
}

Model fit_kernel(const std::vector<Vector>& xs, const std::vector<int>& ys,
                 const KernelSpec& kernel, double C, const TrainerConfig& cfg,
                 bool hard) {
  const Eigen::Index n = static_cast<Eigen::Index>(xs.size());
  // Folding a constant feature into the kernel (K + 1) regularizes the
  // bias and removes the usual equality constraint from the dual.
  Matrix Q(n, n);
  for (Eigen::Index a = 0; a < n; ++a) {
    for (Eigen::Index b = a; b < n; ++b) {
      const double k = kernel_eval(kernel, xs[static_cast<std::size_t>(a)],
                                   xs[static_cast<std::size_t>(b)]) +
                       1.0;
      const double q = ys[static_cast<std::size_t>(a)] * ys[static_cast<std::size_t>(b)] * k;
      Q(a, b) = q;
      Q(b, a) = q;
    }
  }
  if (hard) {
    Matrix raw = mapped_rows(xs, FeatureMap::Identity);
    reject_contradictions(raw, ys);
  }

  DualProblem prob;
  prob.Q = &Q;
  DualSolution sol = solve_box_qp(prob, cfg.margin_target, C, cfg);

  const double norm_sq = std::max(sol.alpha.dot(sol.qalpha), 0.0);
  std::vector<int> kept;
  for (Eigen::Index i = 0; i < n; ++i)
    if (sol.alpha(i) > 0.0) kept.push_back(static_cast<int>(i));

  KernelModel model;
  model.kernel = kernel;
  model.norm_value = std::sqrt(norm_sq);
  model.support_x.resize(static_cast<Eigen::Index>(kept.size()), xs[0].size());
  model.support_y.resize(static_cast<Eigen::Index>(kept.size()));
  model.alphas.resize(static_cast<Eigen::Index>(kept.size()));
  double bias = 0.0;
  for (std::size_t r = 0; r < kept.size(); ++r) {
    const int i = kept[r];
    model.support_x.row(static_cast<Eigen::Index>(r)) = xs[static_cast<std::size_t>(i)];
    model.support_y(static_cast<Eigen::Index>(r)) = ys[static_cast<std::size_t>(i)];
    model.alphas(static_cast<Eigen::Index>(r)) = sol.alpha(i);
    bias += sol.alpha(i) * ys[static_cast<std::size_t>(i)];
  }
  model.bias = bias;
  return Model(std::move(model));
}

Model fit_threshold(const std::vector<Vector>& xs, const std::vector<int>& ys,
                    double margin) {
  // One free offset: y_i (x_i + offset) >= margin pins offset to an
  // interval; take the value of smallest magnitude.
  double lo = -std::numeric_limits<double>::infinity();
  double hi = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (xs[i].size() != 1)
      throw std::invalid_argument("threshold fit: expects one-dimensional inputs");
    if (ys[i] == 1)
      lo = std::max(lo, margin - xs[i](0));
    else
      hi = std::min(hi, -margin - xs[i](0));
  }
  if (lo > hi) throw InfeasibleSupportError("threshold support admits no separator");
  ThresholdModel model;
  model.offset = clamp(0.0, lo, hi);
  return Model(model);
}

}  // namespace

Model min_norm_separator(const std::vector<Vector>& xs, const std::vector<int>& ys,
                         const FamilySpec& family, const TrainerConfig& cfg) {
  check_inputs(xs, ys);
  const double inf = std::numeric_limits<double>::infinity();
  switch (family.kind) {
    case FamilySpec::Kind::Linear:
      return fit_linear(xs, ys, family, inf, cfg, /*hard=*/true);
    case FamilySpec::Kind::Kernel:
      return fit_kernel(xs, ys, family.kernel_spec, inf, cfg, /*hard=*/true);
    case FamilySpec::Kind::Threshold:
      return fit_threshold(xs, ys, cfg.margin_target);
  }
  throw std::logic_error("min_norm_separator: unknown family");
}

SoftMarginFit soft_margin_fit(const std::vector<Vector>& xs, const std::vector<int>& ys,
                              const FamilySpec& family, double C, const TrainerConfig& cfg) {
  check_inputs(xs, ys);
  if (C <= 0.0) throw std::invalid_argument("soft_margin_fit: C must be positive");
  SoftMarginFit fit;
  switch (family.kind) {
    case FamilySpec::Kind::Linear:
      fit.model = fit_linear(xs, ys, family, C, cfg, /*hard=*/false);
      break;
    case FamilySpec::Kind::Kernel:
      fit.model = fit_kernel(xs, ys, family.kernel_spec, C, cfg, /*hard=*/false);
      break;
    case FamilySpec::Kind::Threshold:
      throw std::invalid_argument("soft_margin_fit: threshold family not supported");
  }
  for (std::size_t i = 0; i < xs.size(); ++i)
    if (fit.model.predict(xs[i]) != ys[i]) fit.misclassified.push_back(static_cast<int>(i));
  return fit;
}

Model sticky_retrain(const Model& prev, const Vector& memory_col, const Dataset& data,
                     const LossSpec& spec, const TrainerConfig& cfg) {
  if (memory_col.size() != data.n())
    throw std::invalid_argument("sticky_retrain: memory column / population mismatch");

  // Strict positivity, not a tolerance: discounting makes old entries tiny
  // but never exactly zero, and dropping them would let a service forget a
  // user it has already served.
  std::vector<int> support;
  for (int i = 0; i < data.n(); ++i)
    if (memory_col(i) > 0.0) support.push_back(i);
  if (support.empty()) return prev;

  if (weighted_expected_loss(prev, data, memory_col, spec) <= cfg.zero_tol) return prev;

  std::vector<Vector> xs;
  std::vector<int> ys;
  xs.reserve(support.size());
  ys.reserve(support.size());
  for (int i : support) {
    xs.push_back(data.x(i));
    ys.push_back(data.y(i));
  }

  FamilySpec family;
  if (const auto* lin = prev.get_if<LinearModel>())
    family = FamilySpec::linear(lin->feature_map);
  else if (prev.get_if<ThresholdModel>())
    family = FamilySpec::threshold();
  else
    family = FamilySpec::kernel(prev.get_if<KernelModel>()->kernel);

  Model next = min_norm_separator(xs, ys, family, cfg);
  if (const auto* t = prev.get_if<ThresholdModel>()) {
    ThresholdModel refit = *next.get_if<ThresholdModel>();
    refit.utility_cap = t->utility_cap;
    next = Model(refit);
  }
  if (weighted_expected_loss(next, data, memory_col, spec) > cfg.zero_tol)
    throw InfeasibleSupportError("retrained model fails to reach zero loss on its support");
  return next;
}

}  // namespace stratsim
