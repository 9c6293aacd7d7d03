#include "stratsim/strategic.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

namespace stratsim {

namespace {

// Counter-based mixing so Concentrate draws replay bit-exactly without
// carrying generator state between calls.
std::uint64_t splitmix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::vector<int> argmax_set(const Vector& u, double u_star, double tie_tol) {
  std::vector<int> out;
  for (Eigen::Index j = 0; j < u.size(); ++j)
    if (u(j) >= u_star - tie_tol) out.push_back(static_cast<int>(j));
  return out;
}

}  // namespace

Vector best_response(const Vector& utilities, double q, const TiePolicy& policy,
                     double tie_tol, std::uint64_t stream) {
  if (q <= 1.0) throw std::invalid_argument("best_response: requires q > 1");
  if (utilities.size() == 0) throw std::invalid_argument("best_response: no services");

  Vector row = Vector::Zero(utilities.size());
  const double u_star = utilities.maxCoeff();
  if (u_star <= 0.0) return row;  // opting out beats any positive allocation

  const double total = std::pow(u_star, 1.0 / (q - 1.0));
  const std::vector<int> ties = argmax_set(utilities, u_star, tie_tol);

  switch (policy.kind) {
    case TiePolicy::Kind::EvenSplit: {
      const double share = total / static_cast<double>(ties.size());
      for (int j : ties) row(j) = share;
      break;
    }
    case TiePolicy::Kind::LowestIndex:
      row(ties.front()) = total;
      break;
    case TiePolicy::Kind::Concentrate: {
      const std::uint64_t draw = splitmix64(policy.seed ^ splitmix64(stream));
      row(ties[draw % ties.size()]) = total;
      break;
    }
  }
  return row;
}

UsageMatrix joint_user_update(const std::vector<Model>& models, const Dataset& data,
                              const LossSpec& spec, const DynamicsConfig& cfg, int step) {
  const Matrix util = utility_matrix(models, data, spec);
  UsageMatrix usage = UsageMatrix::zero(data.n(), static_cast<int>(models.size()));
  for (int i = 0; i < data.n(); ++i) {
    // One stream per (user, step) pair.
    const std::uint64_t stream =
        splitmix64(static_cast<std::uint64_t>(i) * 0x632be59bd9b4e019ULL +
                   static_cast<std::uint64_t>(step));
    usage.entries.row(i) =
        best_response(util.row(i), cfg.q, cfg.user_tie_policy, cfg.tie_tol, stream)
            .transpose();
  }
  return usage;
}

double usage_objective(const Vector& usage, const Vector& utilities, double q) {
  return usage.dot(utilities) - std::pow(usage.sum(), q) / q;
}

GridSearchResult oracle_best_response(const Vector& utilities, double q,
                                      double resolution, double bound) {
  if (q <= 1.0) throw std::invalid_argument("oracle_best_response: requires q > 1");
  if (resolution <= 0.0) throw std::invalid_argument("oracle_best_response: bad resolution");
  const int m = static_cast<int>(utilities.size());
  if (m < 1 || m > 3)
    throw std::invalid_argument("oracle_best_response: supports 1 <= m <= 3");

  const double u_star = utilities.maxCoeff();
  if (bound <= 0.0)
    bound = u_star > 0.0 ? std::pow(u_star, 1.0 / (q - 1.0)) + 1.0 : 1.0;

  const int k = static_cast<int>(std::floor(bound / resolution)) + 1;

  // The cost term only depends on the total, so precompute it for every
  // grid total; the inner loops are then pure multiply-adds.
  std::vector<double> cost(static_cast<std::size_t>(k) * m - (m - 1));
  for (std::size_t s = 0; s < cost.size(); ++s)
    cost[s] = std::pow(static_cast<double>(s) * resolution, q) / q;

  GridSearchResult best;
  best.usage = Vector::Zero(m);
  best.objective = 0.0;  // the all-zero row is always a candidate
  best.resolution = resolution;
  int i0 = 0, i1 = 0, i2 = 0;

  for (int a = 0; a < k; ++a) {
    const double ga = a * resolution * utilities(0);
    if (m == 1) {
      const double obj = ga - cost[static_cast<std::size_t>(a)];
      if (obj > best.objective) { best.objective = obj; i0 = a; }
      continue;
    }
    for (int b = 0; b < k; ++b) {
      const double gb = ga + b * resolution * utilities(1);
      if (m == 2) {
        const double obj = gb - cost[static_cast<std::size_t>(a + b)];
        if (obj > best.objective) { best.objective = obj; i0 = a; i1 = b; }
        continue;
      }
      for (int c = 0; c < k; ++c) {
        const double obj =
            gb + c * resolution * utilities(2) - cost[static_cast<std::size_t>(a + b + c)];
        if (obj > best.objective) { best.objective = obj; i0 = a; i1 = b; i2 = c; }
      }
    }
  }

  best.usage(0) = i0 * resolution;
  if (m > 1) best.usage(1) = i1 * resolution;
  if (m > 2) best.usage(2) = i2 * resolution;
  return best;
}

}  // namespace stratsim
