// User-side behavior: the closed-form best response to a row of service
// utilities, the joint update over the whole population, and a brute-force
// grid oracle for checking the closed form independently.
#pragma once

#include <cstdint>
#include <vector>

#include "stratsim/domain.hpp"
#include "stratsim/models.hpp"

namespace stratsim {

// Closed-form maximizer of   sum_j A_j u_j - (1/q) (sum_j A_j)^q
// over non-negative usage rows, for q > 1:
//   * if max utility u* <= 0 the row is all zeros;
//   * otherwise total usage u*^(1/(q-1)) is spread over the argmax set
//     (within tie_tol) according to the tie policy.
// `stream` decorrelates Concentrate draws across (user, step) pairs.
Vector best_response(const Vector& utilities, double q, const TiePolicy& policy,
                     double tie_tol, std::uint64_t stream = 0);

// Best response for every user against the deployed models. `step` feeds
// the Concentrate policy's per-step stream; deterministic policies
// ignore it.
UsageMatrix joint_user_update(const std::vector<Model>& models, const Dataset& data,
                              const LossSpec& spec, const DynamicsConfig& cfg,
                              int step = 0);

// Independent check on best_response: exhaustively maximize the user
// objective over a uniform grid on [0, bound]^m. Intended for m <= 3.
struct GridSearchResult {
  Vector usage;
  double objective = 0.0;
  double resolution = 0.0;
};
GridSearchResult oracle_best_response(const Vector& utilities, double q,
                                      double resolution, double bound = -1.0);

// The objective both routes maximize.
double usage_objective(const Vector& usage, const Vector& utilities, double q);

}  // namespace stratsim
