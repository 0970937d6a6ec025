#ifndef FLOWPLAN_TRAIN_HPP
#define FLOWPLAN_TRAIN_HPP

// Constrained denoising training. Demonstrations expand into per-offset
// windows (so replanning-time observations are in-distribution); each step
// corrupts a batch at a shared random time per example, minimises the summed
// masked NLL of the three streams minus lambda times the mean action entropy,
// and then moves the dual variable lambda toward enforcing the entropy floor
// beta. Also houses trajectory energy scoring and the supervised fit of the
// causal baseline.

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "flowplan/denoiser.hpp"
#include "flowplan/gridworld.hpp"

namespace flowplan {

struct TrainConfig {
  double beta = 0.5;     // action-entropy lower bound
  double lambda0 = 0.0;  // initial dual variable
  double lr = 1e-3;
  int max_iters = 5000;
  int batch_size = 16;
  Interpolant interpolant = Interpolant::Mask;  // must agree with the arch
  double dual_lr = 0.01;
  std::uint64_t seed = 0;
  int probe_size = 8;    // fixed examples scored for the recovery log column
  double t_probe = 0.5;  // corruption time used by probes and energy scoring
  int n_probe = 8;       // corruption draws per energy estimate
  bool operator==(const TrainConfig&) const = default;
};

struct LossBreakdown {
  double l_action = 0.0;
  double l_state = 0.0;
  double l_goal = 0.0;
  double l_entropy = 0.0;
  double lambda_value = 0.0;
  double total = 0.0;  // l_action + l_state + l_goal - lambda_value * l_entropy
};

// One training example: the observation at some executed step of a
// demonstration plus the horizon-length token window starting there.
struct TrajectoryExample {
  ObservationEncoding obs;
  std::vector<int> states, actions, goals;
  int next_state_after = 0;  // pose token after the window's final action
};

// Window starting `offset` executed steps into the demo. The observation
// reflects the replayed world at that step; windows running past the recorded
// horizon extend the terminal spin-in-place padding. Throws when the demo
// does not replay onto its own recorded states.
TrajectoryExample example_at_offset(const Demonstration& demo, int offset);

struct CorruptedStreams {
  std::vector<int> states, actions, goals;
  double t = 0.0;
};

// Independent per-position draw from the interpolant at time t, per stream.
CorruptedStreams corrupt_example(const TrajectoryExample& ex, const ArchConfig& arch, double t,
                                 Rng& rng);

// 1 where a position counts as corrupted: the placeholder symbol under the
// masking interpolant, any changed symbol under the uniform one.
std::vector<unsigned char> corruption_indicator(Interpolant kind, int data_vocab,
                                                const std::vector<int>& clean,
                                                const std::vector<int>& noisy);

// Differentiable loss nodes for one example; each is a 1x1 graph node.
// Cross-entropies average over corrupted positions only (0 when a stream has
// none), so logits at clean positions receive exactly zero gradient.
struct LossNodes {
  Tensor l_state, l_action, l_goal, l_entropy;
};
LossNodes build_losses(Graph& g, const DenoiserOutput& out, const TrajectoryExample& clean,
                       const CorruptedStreams& noisy, const ArchConfig& arch);

// Dual ascent on the entropy floor: max(0, lambda - dual_lr * (l_ent - beta)).
double dual_update(double lambda, double l_entropy, double beta, double dual_lr);

// One optimizer step over the batch; updates lambda in place and returns the
// batch-mean breakdown. Throws std::runtime_error when the loss is not
// finite.
LossBreakdown train_step(ParamStore& ps, const ArchConfig& arch,
                         const std::vector<TrajectoryExample>& batch, const TrainConfig& cfg,
                         double& lambda, Rng& rng);

// Mean over n_probe corruption draws at t_probe of the summed negative
// log-likelihood the denoiser assigns to the example's action tokens.
double energy(const ParamStore& ps, const ArchConfig& arch, const TrajectoryExample& ex,
              double t_probe, int n_probe, Rng& rng);

// Copy with ceil(frac * horizon) distinct action positions replaced by a
// uniformly drawn different action (probe trajectories for the energy
// landscape).
TrajectoryExample corrupt_action_fraction(const TrajectoryExample& ex, int n_actions, double frac,
                                          Rng& rng);

// Fraction of corrupted positions (all three streams) whose clean token the
// denoiser ranks first, under a fixed-seed corruption of the probe examples.
double probe_recovery(const ParamStore& ps, const ArchConfig& arch,
                      const std::vector<TrajectoryExample>& probes, const TrainConfig& cfg);

struct TrainLogEntry {
  int step = 0;
  LossBreakdown loss;
  double recovery = 0.0;
  double wall_ms = 0.0;
};
std::string format_log_entry(const TrainLogEntry& e);

struct FitResult {
  ParamStore params;
  double lambda = 0.0;
  std::vector<TrainLogEntry> log;
  std::vector<TrajectoryExample> probes;  // the fixed recovery probe set
};

// Runs max_iters steps over shuffled minibatches of the window expansion.
// When log_stream is set, one formatted record per step is written to it.
// A warm start (loaded checkpoint) is consumed in place of a fresh
// initialization; its optimizer step counter keeps counting and the log's
// step column continues from it.
FitResult fit(const Dataset& ds, const ArchConfig& arch, const TrainConfig& cfg,
              std::ostream* log_stream = nullptr, ParamStore* warm_start = nullptr);

// Supervised fit of the interleaved causal baseline on the same windows:
// cross-entropy on every action and next-state position (no corruption, no
// entropy term; the breakdown reports lambda = 0 and l_goal = 0).
FitResult fit_bc(const Dataset& ds, const ArchConfig& arch, const TrainConfig& cfg,
                 std::ostream* log_stream = nullptr, ParamStore* warm_start = nullptr);

}  // namespace flowplan

#endif  // FLOWPLAN_TRAIN_HPP
