#include "flowplan/planner.hpp"

#include <algorithm>
#include <cstdio>
#include <stdexcept>
#include <string>
#include <vector>

#include "flowplan/ops.hpp"

namespace flowplan {

namespace {

void require(bool ok, const char* what) {
  if (!ok) throw std::invalid_argument(what);
}

// Row-wise softmax of the logits over the data vocabulary; the placeholder
// column (when the space has one) keeps zero mass.
StreamProbs logits_to_probs(const Tensor& logits, const DiscreteSpace& sp) {
  StreamProbs out;
  out.len = logits.rows();
  out.vocab = sp.vocab();
  out.p.assign(static_cast<std::size_t>(out.len) * out.vocab, 0.0);
  for (int r = 0; r < out.len; ++r) {
    double* dst = out.row(r);
    std::copy_n(&logits.at(r, 0), sp.n_data, dst);
    softmax_row_inplace(dst, sp.n_data);
  }
  return out;
}

}  // namespace

PlanResult plan(const ParamStore& ps, const ArchConfig& arch, const ObservationEncoding& obs,
                const PlanConfig& cfg, Rng& rng, const std::vector<int>& ctx_states,
                const std::vector<int>& ctx_actions) {
  require(arch.layout == TrunkLayout::Joint, "plan: the joint denoiser layout is required");
  require(cfg.horizon == arch.horizon, "plan: horizon must match the model");
  require(ctx_states.size() == ctx_actions.size(), "plan: context streams must pair up");

  int keep = std::min({static_cast<int>(ctx_states.size()), cfg.ctx, arch.n_ctx});
  keep = std::max(keep, 0);
  std::vector<int> cs(ctx_states.end() - keep, ctx_states.end());
  std::vector<int> ca(ctx_actions.end() - keep, ctx_actions.end());

  std::vector<DiscreteSpace> spaces = {arch.state_space(), arch.action_space(),
                                       arch.goal_space()};
  std::vector<std::vector<int>> init;
  init.reserve(spaces.size());
  for (const DiscreteSpace& sp : spaces) init.push_back(noise_init(arch.kind, sp, arch.horizon, rng));

  JointDenoiserFn fn = [&](const std::vector<std::vector<int>>& streams, double t) {
    DenoiserInput in;
    in.obs = obs;
    in.t = t;
    in.states = streams[0];
    in.actions = streams[1];
    in.goals = streams[2];
    in.ctx_states = cs;
    in.ctx_actions = ca;
    Graph g(false);
    DenoiserOutput out = denoiser_forward(g, ps, arch, in);
    std::vector<StreamProbs> probs;
    probs.reserve(3);
    probs.push_back(logits_to_probs(out.state_logits, spaces[0]));
    probs.push_back(logits_to_probs(out.action_logits, spaces[1]));
    probs.push_back(logits_to_probs(out.goal_logits, spaces[2]));
    return probs;
  };

  std::vector<std::vector<int>> fin =
      simulate_reverse_ctmc_joint(init, spaces, arch.kind, cfg.effective_i_max(), fn, rng);
  PlanResult res;
  res.states = std::move(fin[0]);
  res.actions = std::move(fin[1]);
  res.goals = std::move(fin[2]);
  return res;
}

PlanResult bc_plan(const ParamStore& ps, const ArchConfig& arch, const ObservationEncoding& obs) {
  require(arch.layout == TrunkLayout::Interleaved,
          "bc_plan: the interleaved causal layout is required");
  const int H = arch.horizon;
  PlanResult res;
  res.states.assign(H, 0);
  res.actions.assign(H, 0);
  res.goals.assign(H, arch.n_goals - 1);  // the baseline predicts no subgoals
  res.states[0] = obs.agent_token;
  for (int i = 0; i < H; ++i) {
    // The trunk is causal, so logits at step i ignore the zero-filled future.
    // Two passes per step: commit the action first, then read the next-state
    // prediction conditioned on it.
    {
      Graph g(false);
      BcOutput out = bc_forward(g, ps, arch, obs, res.states, res.actions);
      res.actions[i] = argmax_row(&out.action_logits.at(i, 0), arch.n_actions);
    }
    if (i + 1 < H) {
      Graph g(false);
      BcOutput out = bc_forward(g, ps, arch, obs, res.states, res.actions);
      res.states[i + 1] = argmax_row(&out.next_state_logits.at(i, 0), arch.n_states);
    }
  }
  return res;
}

namespace {

Rollout run_episode(const ParamStore& ps, const ArchConfig& arch, const Task& task,
                    const PlanConfig& cfg, Rng& rng, bool use_bc) {
  World world(task);
  Rollout out;
  out.executed_states.push_back(world.agent().token(world.grid()));
  if (world.done()) {
    out.success = true;
    return out;
  }

  const int budget = cfg.effective_replan_every();
  std::vector<int> queue;
  int qpos = 0;
  int since_plan = 0;
  bool need_plan = true;

  for (int step = 0; step < cfg.horizon; ++step) {
    if (need_plan || qpos >= static_cast<int>(queue.size()) || since_plan >= budget) {
      ObservationEncoding obs =
          encode_observation(world.grid(), world.agent(), task.instruction_id);
      if (cfg.oracle_goals) {
        int cell = world.active_goal_cell();
        obs.oracle_goal_token = cell >= 0 ? cell : world.grid().null_goal_token();
      }
      std::vector<int> cs, ca;
      if (cfg.ctx > 0 && !out.executed_actions.empty()) {
        int have = static_cast<int>(out.executed_actions.size());
        int keep = std::min(cfg.ctx, have);
        // Pair i of the history is (pose before action i, action i).
        cs.assign(out.executed_states.end() - 1 - keep, out.executed_states.end() - 1);
        ca.assign(out.executed_actions.end() - keep, out.executed_actions.end());
      }
      PlanResult p = use_bc ? bc_plan(ps, arch, obs) : plan(ps, arch, obs, cfg, rng, cs, ca);
      double e = 0.0;
      if (!use_bc) {
        TrajectoryExample ex;
        ex.obs = obs;
        ex.states = p.states;
        ex.actions = p.actions;
        ex.goals = p.goals;
        ex.next_state_after = p.states.back();
        e = energy(ps, arch, ex, cfg.t_probe, cfg.n_probe, rng);
      }
      out.plans.push_back(std::move(p));
      out.plan_steps.push_back(out.steps);
      out.plan_energies.push_back(e);
      queue = out.plans.back().actions;
      qpos = 0;
      since_plan = 0;
      need_plan = false;
    }

    int commanded = queue[qpos++];
    EnvStep st = world.step(commanded, cfg.stochastic_p, rng);
    out.commanded_actions.push_back(commanded);
    out.executed_actions.push_back(st.executed_action);
    out.executed_states.push_back(world.agent().token(world.grid()));
    ++since_plan;
    ++out.steps;
    if (st.blocked) need_plan = true;
    if (st.done) {
      out.success = true;
      break;
    }
  }
  return out;
}

}  // namespace

Rollout rollout(const ParamStore& ps, const ArchConfig& arch, const Task& task,
                const PlanConfig& cfg, Rng& rng) {
  return run_episode(ps, arch, task, cfg, rng, /*use_bc=*/false);
}

Rollout bc_rollout(const ParamStore& ps, const ArchConfig& arch, const Task& task,
                   const PlanConfig& cfg, Rng& rng) {
  return run_episode(ps, arch, task, cfg, rng, /*use_bc=*/true);
}

EvalReport evaluate(const ParamStore& ps, const ArchConfig& arch, const TaskFamilyConfig& family,
                    int n_episodes, const PlanConfig& cfg, bool use_bc) {
  require(n_episodes >= 0, "evaluate: episode count must be non-negative");
  EvalReport rep;
  rep.family = family.family;
  rep.n_episodes = n_episodes;
  rep.episodes.assign(static_cast<std::size_t>(n_episodes), EpisodeRecord{});

#pragma omp parallel for schedule(dynamic)
  for (int i = 0; i < n_episodes; ++i) {
    std::uint64_t ep_seed = splitmix64(splitmix64(cfg.seed) + static_cast<std::uint64_t>(i));
    Rng rng(ep_seed);  // same engine make_rng(cfg.seed, i) would produce
    Task task = generate_task(family, rng);
    Rollout r = run_episode(ps, arch, task, cfg, rng, use_bc);
    EpisodeRecord rec;
    rec.index = i;
    rec.seed = ep_seed;
    rec.success = r.success;
    rec.steps = r.steps;
    rec.first_plan_energy = r.plan_energies.empty() ? 0.0 : r.plan_energies.front();
    rep.episodes[static_cast<std::size_t>(i)] = rec;
  }

  double succ = 0.0, steps = 0.0;
  for (const EpisodeRecord& e : rep.episodes) {
    succ += e.success ? 1.0 : 0.0;
    steps += e.steps;
  }
  rep.success_rate = n_episodes > 0 ? succ / n_episodes : 0.0;
  rep.mean_steps = n_episodes > 0 ? steps / n_episodes : 0.0;
  return rep;
}

std::string format_report(const EvalReport& rep) {
  std::string out;
  char buf[192];
  std::snprintf(buf, sizeof(buf), "family=%s episodes=%d success_rate=%.6f mean_steps=%.6f\n",
                rep.family.c_str(), rep.n_episodes, rep.success_rate, rep.mean_steps);
  out += buf;
  for (const EpisodeRecord& e : rep.episodes) {
    std::snprintf(buf, sizeof(buf),
                  "episode=%d seed=%llu success=%d steps=%d first_energy=%.6f\n", e.index,
                  static_cast<unsigned long long>(e.seed), e.success ? 1 : 0, e.steps,
                  e.first_plan_energy);
    out += buf;
  }
  return out;
}

double random_walk_success(const TaskFamilyConfig& family, int n_episodes, int horizon,
                           std::uint64_t seed) {
  if (n_episodes <= 0) return 0.0;
  int succ = 0;
#pragma omp parallel for schedule(dynamic) reduction(+ : succ)
  for (int i = 0; i < n_episodes; ++i) {
    Rng rng = make_rng(seed, static_cast<std::uint64_t>(i));
    Task task = generate_task(family, rng);
    World world(task);
    bool done = world.done();
    for (int s = 0; s < horizon && !done; ++s) {
      EnvStep st = world.step(uniform_int(rng, kNumActions));
      done = st.done;
    }
    if (done) ++succ;
  }
  return static_cast<double>(succ) / n_episodes;
}

std::vector<SweepRow> entropy_sweep(const Dataset& ds, const ArchConfig& arch,
                                    const TrainConfig& base, const TaskFamilyConfig& family,
                                    const std::vector<double>& betas, int n_episodes,
                                    const PlanConfig& pcfg) {
  std::vector<SweepRow> rows;
  rows.reserve(betas.size());
  for (double beta : betas) {
    TrainConfig cfg = base;
    cfg.beta = beta;
    FitResult fr = fit(ds, arch, cfg);
    EvalReport rep = evaluate(fr.params, arch, family, n_episodes, pcfg);
    rows.push_back(SweepRow{beta, rep.success_rate});
  }
  return rows;
}

}  // namespace flowplan
