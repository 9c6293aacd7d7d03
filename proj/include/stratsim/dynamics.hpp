// The joint update loop: services retrain on discounted memory, then
// users best-respond to the fresh models. Provides zero-loss detection,
// cycle detection, and an asynchronous (round-robin) variant.
#pragma once

#include <functional>
#include <optional>
#include <utility>
#include <vector>

#include "stratsim/domain.hpp"
#include "stratsim/models.hpp"
#include "stratsim/strategic.hpp"
#include "stratsim/training.hpp"

namespace stratsim {

// Full simulation state after `step_index` joint steps. `memory` is the
// matrix the current models were trained on (all zeros before any
// training has happened).
struct SimState {
  std::vector<Model> models;
  UsageMatrix usage;
  MemoryMatrix memory;
  int step_index = 0;

  int n() const { return usage.n(); }
  int m() const { return static_cast<int>(models.size()); }
};

std::vector<Violation> validate_state(const SimState& state, const Dataset& data);

// One record per joint step.
//   per_service_loss  usage-weighted loss of each deployed model against
//                     the usage chosen in response to it (i.e. measured
//                     after the user update, before the next retrain)
//   newly_revealed    (user, service) pairs carrying usage that the
//                     trained-on memory had never seen
struct StepReport {
  SimState state;
  Vector per_service_loss;
  std::vector<std::pair<int, int>> newly_revealed;
  bool is_zero_loss = false;
};

struct Verdict {
  enum class Kind { ConvergedZeroLoss, Oscillating, Exhausted };
  Kind kind = Kind::Exhausted;
  int at_step = -1;     // ConvergedZeroLoss: first step of the stable zero-loss run
  int period = 0;       // Oscillating
  int first_seen = -1;  // Oscillating
  int max_steps = 0;    // Exhausted
};

using Trajectory = std::vector<StepReport>;

struct RunResult {
  Trajectory trajectory;
  Verdict verdict;
};

// Discounted memory update; p = 0 collapses to "memory is the last usage".
MemoryMatrix memory_update(const MemoryMatrix& prev, const UsageMatrix& usage, double p);

// Zero-loss test for a state: every usage-weighted loss is (numerically)
// zero AND every negative-labeled user sees non-positive utility at every
// service, whether or not they carry usage.
bool is_zero_loss(const SimState& state, const Dataset& data, const LossSpec& spec,
                  const DynamicsConfig& cfg);

// Swappable retraining hook; defaults to sticky_retrain. Exists so tests
// can demonstrate what breaks under a non-sticky trainer.
using RetrainFn = std::function<Model(const Model& prev, const Vector& memory_col,
                                      const Dataset&, const LossSpec&, const TrainerConfig&)>;

// One joint step from state t to t+1: fold usage into memory, retrain
// every service on its memory column, then let all users best-respond to
// the new models.
StepReport joint_step(const SimState& state, const Dataset& data, const LossSpec& spec,
                      const DynamicsConfig& cfg, const TrainerConfig& tcfg,
                      const RetrainFn& retrain = {});

// Called with each StepReport as soon as it exists (trajectory streaming).
using StepSink = std::function<void(const StepReport&)>;

// Iterate joint_step until one of:
//   * two consecutive zero-loss states  -> ConvergedZeroLoss (at_step =
//     first step of that zero-loss run),
//   * a full-state repeat               -> Oscillating,
//   * cfg.max_steps steps (0 = 4*n*m)   -> Exhausted.
// The trajectory always includes a report for the initial state.
RunResult run(const SimState& initial, const Dataset& data, const LossSpec& spec,
              const DynamicsConfig& cfg, const TrainerConfig& tcfg,
              const StepSink& sink = {}, const RetrainFn& retrain = {});

// ---- asynchronous schedules -------------------------------------------

// A period is a sequence of waves; every agent in a wave updates
// simultaneously, waves run in order. A schedule is the per-round period
// list, replayed each round.
struct Period {
  enum class Kind { Services, Users };
  Kind kind = Kind::Services;
  std::vector<std::vector<int>> waves;
};
using Schedule = std::vector<Period>;

struct InvalidScheduleError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Every service then every user exactly once: equivalent to joint_step.
Schedule joint_equivalent_schedule(int n, int m);

// Run the schedule until the verdicts of `run`, counted in rounds.
// Requirements checked up front: period kinds alternate, at least one
// period of each kind per round, and each period updates every agent of
// its kind at least once.
RunResult round_robin_run(const SimState& initial, const Schedule& schedule,
                          const Dataset& data, const LossSpec& spec,
                          const DynamicsConfig& cfg, const TrainerConfig& tcfg,
                          const StepSink& sink = {}, const RetrainFn& retrain = {});

// Smallest period k and earliest start s such that states s and s+k are
// equal and the tail of the trajectory from s on repeats with period k.
// Equality compares models and usage entrywise at tolerance 1e-12.
struct CycleInfo {
  int period = 0;
  int first_seen = 0;
};
std::optional<CycleInfo> detect_cycle(const Trajectory& trajectory);

bool states_equal(const SimState& a, const SimState& b);

// Convenience: initial state for deployed models (users best-respond
// once, memory starts at `seed_memory` or zeros).
SimState make_initial_state(std::vector<Model> models, const Dataset& data,
                            const LossSpec& spec, const DynamicsConfig& cfg,
                            const MemoryMatrix* seed_memory = nullptr);

}  // namespace stratsim
