#ifndef FLOWPLAN_PLANNER_HPP
#define FLOWPLAN_PLANNER_HPP

// Planning by reverse-process sampling: all three token streams start at
// noise and are denoised jointly, conditioned on the current observation.
// Rollouts execute planned actions in the environment and replan on a step
// budget or when a move is blocked; the causal baseline plans by greedy
// autoregressive decoding. The evaluation harness runs seeded episodes on
// freshly generated instances and emits byte-stable reports.

#include <cstdint>
#include <string>
#include <vector>

#include "flowplan/denoiser.hpp"
#include "flowplan/gridworld.hpp"
#include "flowplan/train.hpp"

namespace flowplan {

struct PlanConfig {
  int horizon = 8;
  int i_max = 0;  // reverse-process iterations; 0 picks ceil(horizon / 2)
  enum class Replan { MultiStep, SingleStep } replan = Replan::MultiStep;
  int replan_every = 0;    // MultiStep budget; 0 picks ceil(horizon / 4)
  int ctx = 0;             // executed (state, action) pairs fed back as memory
  double stochastic_p = 0.0;  // action noise applied by the environment
  bool oracle_goals = false;  // expose the active subgoal cell to the model
  double t_probe = 0.5;       // energy-trace estimator settings
  int n_probe = 8;
  std::uint64_t seed = 0;  // evaluate() master seed

  int effective_i_max() const { return i_max > 0 ? i_max : (horizon + 1) / 2; }
  int effective_replan_every() const {
    return replan == Replan::SingleStep ? 1
                                        : (replan_every > 0 ? replan_every : (horizon + 3) / 4);
  }
};

struct PlanResult {
  std::vector<int> states, actions, goals;  // clean tokens at the end of denoising
};

// Denoise a full trajectory from noise, conditioned on the observation (and
// optional executed-step memory, truncated to the architecture's capacity).
PlanResult plan(const ParamStore& ps, const ArchConfig& arch, const ObservationEncoding& obs,
                const PlanConfig& cfg, Rng& rng, const std::vector<int>& ctx_states = {},
                const std::vector<int>& ctx_actions = {});

// Greedy causal decode: hallucinates each next state open-loop and commits
// the argmax action at every step. Deterministic.
PlanResult bc_plan(const ParamStore& ps, const ArchConfig& arch, const ObservationEncoding& obs);

struct Rollout {
  std::vector<int> commanded_actions;  // what the planner asked for
  std::vector<int> executed_actions;   // environment-executed (post-noise) ids
  std::vector<int> executed_states;    // ground-truth pose tokens, start included
  std::vector<PlanResult> plans;      // one entry per (re)planning event
  std::vector<int> plan_steps;        // executed-step index of each plan event
  std::vector<double> plan_energies;  // energy of each plan under the model
  bool success = false;
  int steps = 0;
};

// Executes up to `horizon` environment steps, replanning on the configured
// budget, when a move is blocked, or when the current plan runs out.
Rollout rollout(const ParamStore& ps, const ArchConfig& arch, const Task& task,
                const PlanConfig& cfg, Rng& rng);
Rollout bc_rollout(const ParamStore& ps, const ArchConfig& arch, const Task& task,
                   const PlanConfig& cfg, Rng& rng);

struct EpisodeRecord {
  int index = 0;
  std::uint64_t seed = 0;
  bool success = false;
  int steps = 0;
  double first_plan_energy = 0.0;
};

struct EvalReport {
  std::string family;
  int n_episodes = 0;
  double success_rate = 0.0;
  double mean_steps = 0.0;  // over all episodes; failures run the full horizon
  std::vector<EpisodeRecord> episodes;
};

// Fresh instance per episode (seeded from the master seed by index), parallel
// across episodes, merged in index order. `use_bc` swaps in the causal
// baseline's planner on the same instances.
EvalReport evaluate(const ParamStore& ps, const ArchConfig& arch, const TaskFamilyConfig& family,
                    int n_episodes, const PlanConfig& cfg, bool use_bc = false);

// Byte-stable structured text: one header line plus one line per episode.
std::string format_report(const EvalReport& report);

// Uniform-random-action reference success rate on the same seeded instances.
double random_walk_success(const TaskFamilyConfig& family, int n_episodes, int horizon,
                           std::uint64_t seed);

struct SweepRow {
  double beta = 0.0;
  double success_rate = 0.0;
};

// Trains one model per entropy floor and evaluates each on the family.
std::vector<SweepRow> entropy_sweep(const Dataset& ds, const ArchConfig& arch,
                                    const TrainConfig& base, const TaskFamilyConfig& family,
                                    const std::vector<double>& betas, int n_episodes,
                                    const PlanConfig& pcfg);

}  // namespace flowplan

#endif  // FLOWPLAN_PLANNER_HPP
