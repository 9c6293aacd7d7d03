#include "stratsim/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace stratsim {

namespace {

constexpr double kStateEqTol = 1e-12;  // cycle detection tolerance

Model default_retrain(const Model& prev, const Vector& memory_col, const Dataset& data,
                      const LossSpec& spec, const TrainerConfig& tcfg) {
  return sticky_retrain(prev, memory_col, data, spec, tcfg);
}

Vector per_service_loss(const SimState& state, const Dataset& data, const LossSpec& spec) {
  Vector losses(state.m());
  for (int j = 0; j < state.m(); ++j)
    losses(j) =
        weighted_expected_loss(state.models[static_cast<std::size_t>(j)], data,
                               state.usage.entries.col(j), spec);
  return losses;
}

std::vector<std::pair<int, int>> reveals_against(const MemoryMatrix& memory,
                                                 const UsageMatrix& usage) {
  std::vector<std::pair<int, int>> out;
  for (int i = 0; i < usage.n(); ++i)
    for (int j = 0; j < usage.m(); ++j)
      if (usage(i, j) > 0.0 && memory(i, j) == 0.0) out.emplace_back(i, j);
  return out;
}

// `trained_on` is the memory the state's models saw at fit time; null
// means the state's own memory field (the joint-step case).
StepReport make_report(SimState state, const MemoryMatrix* trained_on, const Dataset& data,
                       const LossSpec& spec, const DynamicsConfig& cfg) {
  StepReport report;
  report.state = std::move(state);
  const MemoryMatrix& base = trained_on ? *trained_on : report.state.memory;
  report.per_service_loss = per_service_loss(report.state, data, spec);
  report.newly_revealed = reveals_against(base, report.state.usage);
  report.is_zero_loss = is_zero_loss(report.state, data, spec, cfg);
  return report;
}

int resolved_max_steps(const DynamicsConfig& cfg, const SimState& state) {
  return cfg.max_steps > 0 ? cfg.max_steps : 4 * state.n() * std::max(state.m(), 1);
}

TrainerConfig aligned_trainer(const TrainerConfig& tcfg, const DynamicsConfig& cfg) {
  TrainerConfig out = tcfg;
  out.zero_tol = cfg.zero_tol;  // one notion of "zero loss" across the step
  return out;
}

}  // namespace

MemoryMatrix memory_update(const MemoryMatrix& prev, const UsageMatrix& usage, double p) {
  if (p < 0.0) throw std::invalid_argument("memory_update: p must be non-negative");
  if (prev.entries.rows() != usage.entries.rows() ||
      prev.entries.cols() != usage.entries.cols())
    throw std::invalid_argument("memory_update: shape mismatch");
  MemoryMatrix next;
  next.entries = (usage.entries + p * prev.entries) / (1.0 + p);
  return next;
}

bool is_zero_loss(const SimState& state, const Dataset& data, const LossSpec& spec,
                  const DynamicsConfig& cfg) {
  for (int i = 0; i < data.n(); ++i) {
    for (int j = 0; j < state.m(); ++j) {
      const Model& model = state.models[static_cast<std::size_t>(j)];
      if (state.usage(i, j) * loss(model, data.x(i), data.y(i), spec) > cfg.zero_tol)
        return false;
      // Negative users must see non-positive utility everywhere, carried
      // usage or not; a positive entry is demand waiting to happen.
      if (data.y(i) == -1 && utility(model, data.x(i), spec) > cfg.zero_tol) return false;
    }
  }
  return true;
}

StepReport joint_step(const SimState& state, const Dataset& data, const LossSpec& spec,
                      const DynamicsConfig& cfg, const TrainerConfig& tcfg,
                      const RetrainFn& retrain) {
  const RetrainFn& fit = retrain ? retrain : RetrainFn(default_retrain);
  const TrainerConfig trainer = aligned_trainer(tcfg, cfg);

  SimState next;
  next.memory = memory_update(state.memory, state.usage, cfg.p);
  next.models.reserve(state.models.size());
  for (int j = 0; j < state.m(); ++j)
    next.models.push_back(fit(state.models[static_cast<std::size_t>(j)],
                              next.memory.entries.col(j), data, spec, trainer));
  next.step_index = state.step_index + 1;
  next.usage = joint_user_update(next.models, data, spec, cfg, next.step_index);
  return make_report(std::move(next), nullptr, data, spec, cfg);
}

bool states_equal(const SimState& a, const SimState& b) {
  if (a.m() != b.m() || a.n() != b.n()) return false;
  for (int j = 0; j < a.m(); ++j)
    if (!a.models[static_cast<std::size_t>(j)].approx_equal(
            b.models[static_cast<std::size_t>(j)], kStateEqTol))
      return false;
  return ((a.usage.entries - b.usage.entries).array().abs() <= kStateEqTol).all();
}

std::optional<CycleInfo> detect_cycle(const Trajectory& trajectory) {
  const int t = static_cast<int>(trajectory.size());
  for (int k = 1; k < t; ++k) {
    // Earliest start from which the trajectory is k-periodic to the end.
    int s = t - k - 1;
    if (s < 0) continue;
    while (s >= 0 && states_equal(trajectory[static_cast<std::size_t>(s)].state,
                                  trajectory[static_cast<std::size_t>(s + k)].state))
      --s;
    ++s;
    if (s + k <= t - 1 &&
        states_equal(trajectory[static_cast<std::size_t>(s)].state,
                     trajectory[static_cast<std::size_t>(s + k)].state))
      return CycleInfo{k, s};
  }
  return std::nullopt;
}

namespace {

// Shared run loop: `advance` produces the next report from the current
// state; verdicts are identical for joint and round-robin execution.
template <typename Advance>
RunResult run_loop(const SimState& initial, const Dataset& data, const LossSpec& spec,
                   const DynamicsConfig& cfg, const StepSink& sink, int max_steps,
                   Advance&& advance) {
  RunResult result;
  result.trajectory.push_back(make_report(initial, nullptr, data, spec, cfg));
  if (sink) sink(result.trajectory.back());

  for (int step = 1; step <= max_steps; ++step) {
    StepReport report = advance(result.trajectory.back().state);
    const bool prev_zero = result.trajectory.back().is_zero_loss;
    result.trajectory.push_back(std::move(report));
    if (sink) sink(result.trajectory.back());

    if (prev_zero && result.trajectory.back().is_zero_loss) {
      // Converged: date it from the start of the zero-loss run.
      int at = static_cast<int>(result.trajectory.size()) - 2;
      while (at > 0 && result.trajectory[static_cast<std::size_t>(at - 1)].is_zero_loss)
        --at;
      result.verdict.kind = Verdict::Kind::ConvergedZeroLoss;
      result.verdict.at_step =
          result.trajectory[static_cast<std::size_t>(at)].state.step_index;
      return result;
    }
    if (auto cycle = detect_cycle(result.trajectory)) {
      result.verdict.kind = Verdict::Kind::Oscillating;
      result.verdict.period = cycle->period;
      result.verdict.first_seen = cycle->first_seen;
      return result;
    }
  }
  result.verdict.kind = Verdict::Kind::Exhausted;
  result.verdict.max_steps = max_steps;
  return result;
}

}  // namespace

RunResult run(const SimState& initial, const Dataset& data, const LossSpec& spec,
              const DynamicsConfig& cfg, const TrainerConfig& tcfg, const StepSink& sink,
              const RetrainFn& retrain) {
  return run_loop(initial, data, spec, cfg, sink, resolved_max_steps(cfg, initial),
                  [&](const SimState& state) {
                    return joint_step(state, data, spec, cfg, tcfg, retrain);
                  });
}

Schedule joint_equivalent_schedule(int n, int m) {
  Period services{Period::Kind::Services, {{}}};
  Period users{Period::Kind::Users, {{}}};
  for (int j = 0; j < m; ++j) services.waves[0].push_back(j);
  for (int i = 0; i < n; ++i) users.waves[0].push_back(i);
  return {services, users};
}

namespace {

void check_schedule(const Schedule& schedule, int n, int m) {
  if (schedule.empty()) throw InvalidScheduleError("schedule has no periods");
  bool has_users = false, has_services = false;
  for (std::size_t k = 0; k < schedule.size(); ++k) {
    const Period& period = schedule[k];
    if (k > 0 && schedule[k - 1].kind == period.kind)
      throw InvalidScheduleError("periods of the same kind must alternate");
    const int count = period.kind == Period::Kind::Users ? n : m;
    std::vector<bool> seen(static_cast<std::size_t>(count), false);
    for (const auto& wave : period.waves)
      for (int agent : wave) {
        if (agent < 0 || agent >= count)
          throw InvalidScheduleError("agent index out of range in schedule");
        seen[static_cast<std::size_t>(agent)] = true;
      }
    if (std::find(seen.begin(), seen.end(), false) != seen.end())
      throw InvalidScheduleError("every agent must update at least once per period");
    (period.kind == Period::Kind::Users ? has_users : has_services) = true;
  }
  if (!has_users || !has_services)
    throw InvalidScheduleError("a round needs at least one period of each kind");
  if (schedule.front().kind == schedule.back().kind && schedule.size() > 1)
    throw InvalidScheduleError("periods of the same kind must alternate across rounds");
}

}  // namespace

RunResult round_robin_run(const SimState& initial, const Schedule& schedule,
                          const Dataset& data, const LossSpec& spec,
                          const DynamicsConfig& cfg, const TrainerConfig& tcfg,
                          const StepSink& sink, const RetrainFn& retrain) {
  check_schedule(schedule, initial.n(), initial.m());
  const RetrainFn& fit = retrain ? retrain : RetrainFn(default_retrain);
  const TrainerConfig trainer = aligned_trainer(tcfg, cfg);

  auto advance = [&](const SimState& state) {
    SimState next = state;
    next.step_index = state.step_index + 1;  // one round
    const MemoryMatrix trained_on_start = next.memory;
    for (const Period& period : schedule) {
      for (const auto& wave : period.waves) {
        if (period.kind == Period::Kind::Services) {
          // Every service wave folds current usage into memory once, then
          // the listed services retrain on their columns.
          next.memory = memory_update(next.memory, next.usage, cfg.p);
          for (int j : wave)
            next.models[static_cast<std::size_t>(j)] =
                fit(next.models[static_cast<std::size_t>(j)],
                    next.memory.entries.col(j), data, spec, trainer);
        } else {
          const UsageMatrix fresh =
              joint_user_update(next.models, data, spec, cfg, next.step_index);
          for (int i : wave) next.usage.entries.row(i) = fresh.entries.row(i);
        }
      }
    }
    return make_report(std::move(next), &trained_on_start, data, spec, cfg);
  };

  return run_loop(initial, data, spec, cfg, sink, resolved_max_steps(cfg, initial), advance);
}

SimState make_initial_state(std::vector<Model> models, const Dataset& data,
                            const LossSpec& spec, const DynamicsConfig& cfg,
                            const MemoryMatrix* seed_memory) {
  SimState state;
  state.models = std::move(models);
  state.memory = seed_memory ? *seed_memory
                             : MemoryMatrix::zero(data.n(), static_cast<int>(state.models.size()));
  state.usage = joint_user_update(state.models, data, spec, cfg, 0);
  state.step_index = 0;
  return state;
}

std::vector<Violation> validate_state(const SimState& state, const Dataset& data) {
  std::vector<Violation> out;
  if (data.n() == 0) {
    out.push_back({Violation::Kind::EmptyDataset, -1, -1, "dataset has no users"});
    return out;
  }
  const int d = data.dim();
  for (int i = 0; i < data.n(); ++i) {
    if (data.y(i) != 1 && data.y(i) != -1)
      out.push_back({Violation::Kind::BadLabel, i, -1,
                     "label must be +1 or -1, got " + std::to_string(data.y(i))});
    if (data.x(i).size() != d)
      out.push_back({Violation::Kind::DimensionMismatch, i, -1,
                     "feature vector length differs from the first record"});
    if (!data.x(i).allFinite())
      out.push_back({Violation::Kind::NonFiniteFeature, i, -1, "non-finite feature value"});
  }

  auto check_matrix = [&](const Matrix& mat, const char* what) {
    if (mat.rows() != data.n() || mat.cols() != static_cast<Eigen::Index>(state.models.size())) {
      out.push_back({Violation::Kind::DimensionMismatch, -1, -1,
                     std::string(what) + " is not n-by-m"});
      return;
    }
    for (int i = 0; i < mat.rows(); ++i)
      for (int j = 0; j < mat.cols(); ++j) {
        if (!std::isfinite(mat(i, j)))
          out.push_back({Violation::Kind::NonFiniteEntry, i, j,
                         std::string(what) + " entry is not finite"});
        else if (mat(i, j) < 0.0)
          out.push_back({Violation::Kind::NonNegativityViolation, i, j,
                         std::string(what) + " entry is negative"});
      }
  };
  check_matrix(state.usage.entries, "usage");
  check_matrix(state.memory.entries, "memory");
  return out;
}

}  // namespace stratsim
