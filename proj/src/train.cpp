#include "flowplan/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <ostream>
#include <stdexcept>
#include <utility>

#include "flowplan/ops.hpp"

namespace flowplan {

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw std::invalid_argument(what);
}

// Stable log softmax(row)[target] straight from raw logit values.
double row_log_prob(const double* z, int n, int target) {
  double mx = z[0];
  for (int i = 1; i < n; ++i) mx = std::max(mx, z[i]);
  double lse = 0.0;
  for (int i = 0; i < n; ++i) lse += std::exp(z[i] - mx);
  return z[target] - mx - std::log(lse);
}

Task task_of(const Demonstration& demo) {
  return Task{demo.grid, demo.start, demo.instruction_id, demo.subgoals, demo.ordered, {}};
}

void check_arch_matches(const Dataset& ds, const ArchConfig& arch) {
  require(!ds.demos.empty(), "training needs at least one demonstration");
  require(arch.horizon == ds.horizon, "architecture horizon differs from the dataset");
  require(arch.grid_w == ds.grid_w && arch.grid_h == ds.grid_h && arch.grid_c == kObsChannels,
          "architecture grid extent differs from the dataset");
  require(arch.n_states == ds.grid_w * ds.grid_h * 4, "state vocabulary does not cover the grid");
  require(arch.n_goals == ds.grid_w * ds.grid_h + 1, "goal vocabulary does not cover the grid");
  require(arch.n_actions == kNumActions && arch.n_instructions == kNumInstructions,
          "action or instruction vocabulary mismatch");
}

std::vector<std::pair<int, int>> window_expansion(const Dataset& ds) {
  std::vector<std::pair<int, int>> items;
  for (int d = 0; d < static_cast<int>(ds.demos.size()); ++d) {
    const int span = std::max(1, ds.demos[d].length);
    for (int o = 0; o < span; ++o) items.emplace_back(d, o);
  }
  return items;
}

std::vector<TrajectoryExample> probe_set(const Dataset& ds, int probe_size) {
  std::vector<TrajectoryExample> probes;
  const int n = std::min<int>(probe_size, static_cast<int>(ds.demos.size()));
  probes.reserve(n);
  for (int d = 0; d < n; ++d) probes.push_back(example_at_offset(ds.demos[d], 0));
  return probes;
}

struct StepTimer {
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
  double ms() const {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start)
        .count();
  }
};

}  // namespace

TrajectoryExample example_at_offset(const Demonstration& demo, int offset) {
  const int h = static_cast<int>(demo.actions.size());
  require(offset >= 0 && offset < std::max(1, demo.length), "window offset outside the episode");
  World world(task_of(demo));
  for (int k = 0; k < offset; ++k) world.step(demo.actions[k]);
  TrajectoryExample ex;
  ex.obs = encode_observation(world.grid(), world.agent(), demo.instruction_id);
  if (offset < static_cast<int>(demo.goals.size()) && demo.goals[offset] >= 0) {
    ex.obs.oracle_goal_token = demo.goals[offset];
  }
  const int null_goal = demo.grid.null_goal_token();
  ex.states.reserve(h);
  ex.actions.reserve(h);
  ex.goals.reserve(h);
  for (int i = 0; i < h; ++i) {
    const int idx = offset + i;
    int action;
    if (idx < h) {
      if (demo.states[idx] != world.agent().token(world.grid())) {
        throw std::logic_error("demonstration does not replay onto its recorded states");
      }
      ex.states.push_back(demo.states[idx]);
      ex.actions.push_back(demo.actions[idx]);
      ex.goals.push_back(demo.goals[idx]);
      action = demo.actions[idx];
    } else {
      ex.states.push_back(world.agent().token(world.grid()));
      ex.actions.push_back(kLeft);
      ex.goals.push_back(null_goal);
      action = kLeft;
    }
    world.step(action);
  }
  ex.next_state_after = world.agent().token(world.grid());
  return ex;
}

CorruptedStreams corrupt_example(const TrajectoryExample& ex, const ArchConfig& arch, double t,
                                 Rng& rng) {
  CorruptedStreams out;
  out.t = t;
  out.states = corrupt(arch.kind, arch.state_space(), ex.states, t, rng);
  out.actions = corrupt(arch.kind, arch.action_space(), ex.actions, t, rng);
  out.goals = corrupt(arch.kind, arch.goal_space(), ex.goals, t, rng);
  return out;
}

std::vector<unsigned char> corruption_indicator(Interpolant kind, int data_vocab,
                                                const std::vector<int>& clean,
                                                const std::vector<int>& noisy) {
  require(clean.size() == noisy.size(), "indicator sequences differ in length");
  std::vector<unsigned char> ind(clean.size());
  for (std::size_t i = 0; i < clean.size(); ++i) {
    ind[i] = kind == Interpolant::Mask ? (noisy[i] == data_vocab) : (noisy[i] != clean[i]);
  }
  return ind;
}

LossNodes build_losses(Graph& g, const DenoiserOutput& out, const TrajectoryExample& clean,
                       const CorruptedStreams& noisy, const ArchConfig& arch) {
  LossNodes nodes;
  nodes.l_state = masked_cross_entropy(
      g, out.state_logits, clean.states,
      corruption_indicator(arch.kind, arch.n_states, clean.states, noisy.states));
  nodes.l_action = masked_cross_entropy(
      g, out.action_logits, clean.actions,
      corruption_indicator(arch.kind, arch.n_actions, clean.actions, noisy.actions));
  nodes.l_goal = masked_cross_entropy(
      g, out.goal_logits, clean.goals,
      corruption_indicator(arch.kind, arch.n_goals, clean.goals, noisy.goals));
  nodes.l_entropy = mean_row_entropy(g, out.action_logits);
  return nodes;
}

double dual_update(double lambda, double l_entropy, double beta, double dual_lr) {
  return std::max(0.0, lambda - dual_lr * (l_entropy - beta));
}

LossBreakdown train_step(ParamStore& ps, const ArchConfig& arch,
                         const std::vector<TrajectoryExample>& batch, const TrainConfig& cfg,
                         double& lambda, Rng& rng) {
  require(!batch.empty(), "empty training batch");
  require(arch.layout == TrunkLayout::Joint, "denoising training needs the joint layout");
  require(cfg.interpolant == arch.kind, "config and architecture disagree on the noise kind");
  const double inv_b = 1.0 / static_cast<double>(batch.size());
  ps.zero_grad();
  LossBreakdown lb;
  lb.lambda_value = lambda;
  for (const TrajectoryExample& ex : batch) {
    const double t = uniform_real(rng);
    CorruptedStreams noisy = corrupt_example(ex, arch, t, rng);
    Graph g(true);
    DenoiserInput in;
    in.obs = ex.obs;
    in.t = t;
    in.states = noisy.states;
    in.actions = noisy.actions;
    in.goals = noisy.goals;
    DenoiserOutput out = denoiser_forward(g, ps, arch, in);
    LossNodes nodes = build_losses(g, out, ex, noisy, arch);
    Tensor nll = add(g, add(g, nodes.l_state, nodes.l_action), nodes.l_goal);
    Tensor objective = scale(g, add_scaled(g, nll, nodes.l_entropy, -lambda), inv_b);
    const double value = objective.data()[0];
    if (!std::isfinite(value)) {
      char msg[160];
      std::snprintf(msg, sizeof(msg),
                    "non-finite training loss (l_state=%g l_action=%g l_goal=%g l_entropy=%g "
                    "t=%g)",
                    nodes.l_state.data()[0], nodes.l_action.data()[0], nodes.l_goal.data()[0],
                    nodes.l_entropy.data()[0], t);
      throw std::runtime_error(msg);
    }
    lb.l_state += nodes.l_state.data()[0] * inv_b;
    lb.l_action += nodes.l_action.data()[0] * inv_b;
    lb.l_goal += nodes.l_goal.data()[0] * inv_b;
    lb.l_entropy += nodes.l_entropy.data()[0] * inv_b;
    g.backward(objective);
  }
  lb.total = lb.l_action + lb.l_state + lb.l_goal - lb.lambda_value * lb.l_entropy;
  AdamConfig opt;
  opt.lr = cfg.lr;
  if (!ps.adam_step(opt)) {
    throw std::runtime_error("optimizer rejected the step: non-finite gradients");
  }
  lambda = dual_update(lambda, lb.l_entropy, cfg.beta, cfg.dual_lr);
  return lb;
}

double energy(const ParamStore& ps, const ArchConfig& arch, const TrajectoryExample& ex,
              double t_probe, int n_probe, Rng& rng) {
  require(n_probe >= 1, "energy needs at least one corruption draw");
  double sum = 0.0;
  for (int d = 0; d < n_probe; ++d) {
    CorruptedStreams noisy = corrupt_example(ex, arch, t_probe, rng);
    Graph g(false);
    DenoiserInput in;
    in.obs = ex.obs;
    in.t = t_probe;
    in.states = noisy.states;
    in.actions = noisy.actions;
    in.goals = noisy.goals;
    DenoiserOutput out = denoiser_forward(g, ps, arch, in);
    for (int h = 0; h < arch.horizon; ++h) {
      sum -= row_log_prob(out.action_logits.data() + static_cast<std::size_t>(h) * arch.n_actions,
                          arch.n_actions, ex.actions[h]);
    }
  }
  return sum / n_probe;
}

TrajectoryExample corrupt_action_fraction(const TrajectoryExample& ex, int n_actions, double frac,
                                          Rng& rng) {
  require(frac >= 0.0 && frac <= 1.0, "corruption fraction outside [0, 1]");
  TrajectoryExample out = ex;
  const int h = static_cast<int>(ex.actions.size());
  const int n_swap = static_cast<int>(std::ceil(frac * h));
  std::vector<int> order(h);
  std::iota(order.begin(), order.end(), 0);
  for (int i = 0; i < n_swap; ++i) {  // partial shuffle: first n_swap are the swap sites
    const int j = i + uniform_int(rng, h - i);
    std::swap(order[i], order[j]);
    int repl = uniform_int(rng, n_actions - 1);
    if (repl >= out.actions[order[i]]) ++repl;
    out.actions[order[i]] = repl;
  }
  return out;
}

double probe_recovery(const ParamStore& ps, const ArchConfig& arch,
                      const std::vector<TrajectoryExample>& probes, const TrainConfig& cfg) {
  Rng rng = make_rng(cfg.seed ^ 0x517cc1b727220a95ULL);  // fixed masks across calls
  long hits = 0, total = 0;
  for (const TrajectoryExample& ex : probes) {
    CorruptedStreams noisy = corrupt_example(ex, arch, cfg.t_probe, rng);
    Graph g(false);
    DenoiserInput in;
    in.obs = ex.obs;
    in.t = cfg.t_probe;
    in.states = noisy.states;
    in.actions = noisy.actions;
    in.goals = noisy.goals;
    DenoiserOutput out = denoiser_forward(g, ps, arch, in);
    auto tally = [&](const Tensor& logits, const std::vector<int>& clean,
                     const std::vector<int>& corrupted, int vocab) {
      const std::vector<unsigned char> ind =
          corruption_indicator(arch.kind, vocab, clean, corrupted);
      for (std::size_t k = 0; k < ind.size(); ++k) {
        if (!ind[k]) continue;
        ++total;
        if (argmax_row(logits.data() + k * vocab, vocab) == clean[k]) ++hits;
      }
    };
    tally(out.state_logits, ex.states, noisy.states, arch.n_states);
    tally(out.action_logits, ex.actions, noisy.actions, arch.n_actions);
    tally(out.goal_logits, ex.goals, noisy.goals, arch.n_goals);
  }
  return total == 0 ? 1.0 : static_cast<double>(hits) / static_cast<double>(total);
}

std::string format_log_entry(const TrainLogEntry& e) {
  char line[256];
  std::snprintf(line, sizeof(line),
                "step=%d l_action=%.6f l_state=%.6f l_goal=%.6f l_entropy=%.6f lambda=%.6f "
                "total=%.6f recovery=%.4f wall_ms=%.3f",
                e.step, e.loss.l_action, e.loss.l_state, e.loss.l_goal, e.loss.l_entropy,
                e.loss.lambda_value, e.loss.total, e.recovery, e.wall_ms);
  return line;
}

FitResult fit(const Dataset& ds, const ArchConfig& arch, const TrainConfig& cfg,
              std::ostream* log_stream, ParamStore* warm_start) {
  check_arch_matches(ds, arch);
  require(arch.layout == TrunkLayout::Joint, "denoising training needs the joint layout");
  require(cfg.interpolant == arch.kind, "config and architecture disagree on the noise kind");
  require(cfg.batch_size >= 1 && cfg.max_iters >= 0, "bad training budget");
  Rng rng = make_rng(cfg.seed);
  FitResult res;
  if (warm_start) {
    require(!warm_start->names().empty(), "warm start has no parameters");
    res.params = std::move(*warm_start);
  } else {
    init_denoiser_params(res.params, arch, rng);
  }
  const int step0 = static_cast<int>(res.params.step());
  res.lambda = cfg.lambda0;
  res.probes = probe_set(ds, cfg.probe_size);
  const std::vector<std::pair<int, int>> items = window_expansion(ds);
  std::vector<std::size_t> order(items.size());
  std::iota(order.begin(), order.end(), 0);
  std::size_t cursor = order.size();  // forces a shuffle before the first batch
  std::vector<TrajectoryExample> batch;
  res.log.reserve(cfg.max_iters);
  for (int step = 0; step < cfg.max_iters; ++step) {
    StepTimer timer;
    batch.clear();
    for (int b = 0; b < cfg.batch_size; ++b) {
      if (cursor == order.size()) {
        shuffle_vec(order, rng);
        cursor = 0;
      }
      const auto [d, o] = items[order[cursor++]];
      batch.push_back(example_at_offset(ds.demos[d], o));
    }
    TrainLogEntry entry;
    entry.step = step0 + step;
    entry.loss = train_step(res.params, arch, batch, cfg, res.lambda, rng);
    entry.recovery = probe_recovery(res.params, arch, res.probes, cfg);
    entry.wall_ms = timer.ms();
    if (log_stream) *log_stream << format_log_entry(entry) << '\n';
    res.log.push_back(entry);
  }
  return res;
}

FitResult fit_bc(const Dataset& ds, const ArchConfig& arch, const TrainConfig& cfg,
                 std::ostream* log_stream, ParamStore* warm_start) {
  check_arch_matches(ds, arch);
  require(arch.layout == TrunkLayout::Interleaved, "the baseline needs the interleaved layout");
  require(cfg.batch_size >= 1 && cfg.max_iters >= 0, "bad training budget");
  Rng rng = make_rng(cfg.seed);
  FitResult res;
  if (warm_start) {
    require(!warm_start->names().empty(), "warm start has no parameters");
    res.params = std::move(*warm_start);
  } else {
    init_denoiser_params(res.params, arch, rng);
  }
  const int step0 = static_cast<int>(res.params.step());
  res.probes = probe_set(ds, cfg.probe_size);
  const std::vector<std::pair<int, int>> items = window_expansion(ds);
  std::vector<std::size_t> order(items.size());
  std::iota(order.begin(), order.end(), 0);
  std::size_t cursor = order.size();
  const std::vector<unsigned char> all(static_cast<std::size_t>(arch.horizon), 1);
  const double inv_b = 1.0 / cfg.batch_size;

  auto next_states_of = [&](const TrajectoryExample& ex) {
    std::vector<int> ns(ex.states.begin() + 1, ex.states.end());
    ns.push_back(ex.next_state_after);
    return ns;
  };
  auto bc_recovery = [&]() {  // clean-input action accuracy on the probe set
    long hits = 0, total = 0;
    for (const TrajectoryExample& ex : res.probes) {
      Graph g(false);
      BcOutput out = bc_forward(g, res.params, arch, ex.obs, ex.states, ex.actions);
      for (int h = 0; h < arch.horizon; ++h) {
        ++total;
        if (argmax_row(out.action_logits.data() + static_cast<std::size_t>(h) * arch.n_actions,
                       arch.n_actions) == ex.actions[h]) {
          ++hits;
        }
      }
    }
    return total == 0 ? 1.0 : static_cast<double>(hits) / static_cast<double>(total);
  };

  res.log.reserve(cfg.max_iters);
  for (int step = 0; step < cfg.max_iters; ++step) {
    StepTimer timer;
    res.params.zero_grad();
    LossBreakdown lb;
    for (int b = 0; b < cfg.batch_size; ++b) {
      if (cursor == order.size()) {
        shuffle_vec(order, rng);
        cursor = 0;
      }
      const auto [d, o] = items[order[cursor++]];
      const TrajectoryExample ex = example_at_offset(ds.demos[d], o);
      Graph g(true);
      BcOutput out = bc_forward(g, res.params, arch, ex.obs, ex.states, ex.actions);
      Tensor l_action = masked_cross_entropy(g, out.action_logits, ex.actions, all);
      Tensor l_state = masked_cross_entropy(g, out.next_state_logits, next_states_of(ex), all);
      Tensor objective = scale(g, add(g, l_action, l_state), inv_b);
      if (!std::isfinite(objective.data()[0])) {
        throw std::runtime_error("non-finite baseline loss");
      }
      lb.l_action += l_action.data()[0] * inv_b;
      lb.l_state += l_state.data()[0] * inv_b;
      // Entropy is reported for comparability but takes no part in the loss.
      Tensor probs = out.action_logits;
      for (int h = 0; h < arch.horizon; ++h) {
        std::vector<double> row(probs.data() + static_cast<std::size_t>(h) * arch.n_actions,
                                probs.data() + static_cast<std::size_t>(h + 1) * arch.n_actions);
        softmax_row_inplace(row.data(), arch.n_actions);
        double ent = 0.0;
        for (double p : row) {
          if (p > 0.0) ent -= p * std::log(p);
        }
        lb.l_entropy += ent * inv_b / arch.horizon;
      }
      g.backward(objective);
    }
    lb.total = lb.l_action + lb.l_state + lb.l_goal - lb.lambda_value * lb.l_entropy;
    AdamConfig opt;
    opt.lr = cfg.lr;
    if (!res.params.adam_step(opt)) {
      throw std::runtime_error("optimizer rejected the step: non-finite gradients");
    }
    TrainLogEntry entry;
    entry.step = step0 + step;
    entry.loss = lb;
    entry.recovery = bc_recovery();
    entry.wall_ms = timer.ms();
    if (log_stream) *log_stream << format_log_entry(entry) << '\n';
    res.log.push_back(entry);
  }
  return res;
}

}  // namespace flowplan
