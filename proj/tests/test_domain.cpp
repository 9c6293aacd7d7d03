#include <doctest.h>

#include <cmath>

#include "stratsim/data.hpp"
#include "stratsim/dynamics.hpp"

using namespace stratsim;

namespace {

SimState five_point_state() {
  Scenario sc = builtin_scenario("five_point");
  return make_initial_state(sc.models, sc.dataset, sc.loss_spec, sc.config);
}

bool has_kind(const std::vector<Violation>& vs, Violation::Kind kind) {
  for (const auto& v : vs)
    if (v.kind == kind) return true;
  return false;
}

}  // namespace

TEST_CASE("well-formed state has no violations") {
  Scenario sc = builtin_scenario("five_point");
  const SimState state = five_point_state();
  CHECK(validate_state(state, sc.dataset).empty());
}

TEST_CASE("negative usage entry is flagged with its position") {
  Scenario sc = builtin_scenario("five_point");
  SimState state = five_point_state();
  state.usage.entries(2, 1) = -0.1;
  const auto violations = validate_state(state, sc.dataset);
  REQUIRE(violations.size() == 1);
  CHECK(violations[0].kind == Violation::Kind::NonNegativityViolation);
  CHECK(violations[0].i == 2);
  CHECK(violations[0].j == 1);
}

TEST_CASE("model count must match matrix columns") {
  Scenario sc = builtin_scenario("five_point");
  SimState state = five_point_state();
  state.models.push_back(state.models[0]);  // 3 models over 2 columns
  const auto violations = validate_state(state, sc.dataset);
  CHECK(has_kind(violations, Violation::Kind::DimensionMismatch));
}

TEST_CASE("bad labels and non-finite features are caught") {
  Scenario sc = builtin_scenario("five_point");
  SimState state = five_point_state();
  sc.dataset.users[1].label = 0;
  sc.dataset.users[3].features(0) = std::nan("");
  const auto violations = validate_state(state, sc.dataset);
  CHECK(has_kind(violations, Violation::Kind::BadLabel));
  CHECK(has_kind(violations, Violation::Kind::NonFiniteFeature));
}

TEST_CASE("empty dataset is a violation") {
  Dataset empty;
  SimState state;
  state.usage = UsageMatrix::zero(0, 0);
  state.memory = MemoryMatrix::zero(0, 0);
  CHECK(has_kind(validate_state(state, empty), Violation::Kind::EmptyDataset));
}

TEST_CASE("non-finite matrix entries are caught") {
  Scenario sc = builtin_scenario("five_point");
  SimState state = five_point_state();
  state.memory.entries(0, 0) = std::numeric_limits<double>::infinity();
  CHECK(has_kind(validate_state(state, sc.dataset), Violation::Kind::NonFiniteEntry));
}

TEST_CASE("reachable states keep matrices non-negative and memory support grows") {
  Scenario sc = builtin_scenario("five_point");
  sc.config.p = 0.5;
  const RunResult result =
      run(five_point_state(), sc.dataset, sc.loss_spec, sc.config, TrainerConfig{});
  REQUIRE(result.trajectory.size() >= 2);
  for (std::size_t t = 0; t < result.trajectory.size(); ++t) {
    const SimState& state = result.trajectory[t].state;
    CHECK(validate_state(state, sc.dataset).empty());
    CHECK(state.usage.entries.minCoeff() >= 0.0);
    CHECK(state.memory.entries.minCoeff() >= 0.0);
    if (t == 0) continue;
    const SimState& prev = result.trajectory[t - 1].state;
    for (int i = 0; i < state.n(); ++i)
      for (int j = 0; j < state.m(); ++j)
        if (prev.memory(i, j) > 0.0) CHECK(state.memory(i, j) > 0.0);
  }
}

TEST_CASE("p = 0 collapses memory to the last usage") {
  Scenario sc = builtin_scenario("five_point");
  sc.config.p = 0.0;
  const RunResult result =
      run(five_point_state(), sc.dataset, sc.loss_spec, sc.config, TrainerConfig{});
  for (std::size_t t = 1; t < result.trajectory.size(); ++t) {
    // memory the step-t models trained on = usage of step t-1
    const Matrix& trained_on = result.trajectory[t].state.memory.entries;
    const Matrix& prev_usage = result.trajectory[t - 1].state.usage.entries;
    CHECK((trained_on - prev_usage).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("violation kinds render as text") {
  CHECK(std::string(to_string(Violation::Kind::BadLabel)) == "BadLabel");
  CHECK(std::string(to_string(Violation::Kind::NonNegativityViolation)) ==
        "NonNegativityViolation");
}
