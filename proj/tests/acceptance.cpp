// Acceptance suite for the planner stack. Each check prints exactly one line
//
//   [C7] PASS joint=0.86 (need >= 0.80) bc=0.71 ... [312.4s]
//
// and the process exits non-zero iff any selected check fails. Run with no
// arguments for the full suite, or pass ids to run a subset:
//
//   acceptance C3 C7 EXTRA-GOALS
//
// Checks that train planning-scale models share artifacts: the first check
// that needs a model builds it, later checks reuse it. Setting
// FLOWPLAN_ACCEPT_CACHE=<dir> additionally caches trained parameters across
// process runs (a development convenience; leave it unset for an
// authoritative run). Lines beginning with '#' are progress notes.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "flowplan/cli.hpp"
#include "flowplan/denoiser.hpp"
#include "flowplan/dfm.hpp"
#include "flowplan/gridworld.hpp"
#include "flowplan/observation.hpp"
#include "flowplan/ops.hpp"
#include "flowplan/params.hpp"
#include "flowplan/planner.hpp"
#include "flowplan/rng.hpp"
#include "flowplan/tensor.hpp"
#include "flowplan/train.hpp"

namespace {

using namespace flowplan;
namespace fs = std::filesystem;

double now_s() {
  using clock = std::chrono::steady_clock;
  return std::chrono::duration<double>(clock::now().time_since_epoch()).count();
}

std::string fmt(const char* f, ...) {
  char buf[2048];
  va_list ap;
  va_start(ap, f);
  std::vsnprintf(buf, sizeof buf, f, ap);
  va_end(ap);
  return buf;
}

void info(const std::string& s) {
  std::printf("# %s\n", s.c_str());
  std::fflush(stdout);
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

// ---------------------------------------------------------------------------
// Shared builders
// ---------------------------------------------------------------------------

Dataset gen_demos(const TaskFamilyConfig& fam, int n, double corruption, std::uint64_t seed) {
  Dataset ds;
  ds.family = fam.family;
  ds.horizon = fam.horizon;
  ds.grid_w = fam.width;
  ds.grid_h = fam.height;
  ds.demos.reserve(n);
  for (int i = 0; i < n; ++i) {
    Rng rng = make_rng(seed, static_cast<std::uint64_t>(i));
    Task task = generate_task(fam, rng);
    ds.demos.push_back(expert_demo(task, fam.horizon, corruption, rng));
  }
  return ds;
}

ArchConfig plan_arch(const Dataset& ds, TrunkLayout layout, int embed_dim, int n_blocks,
                     int n_heads, int t_freqs) {
  ArchConfig a;
  a.horizon = ds.horizon;
  a.n_states = ds.grid_w * ds.grid_h * 4;
  a.n_actions = kNumActions;
  a.n_goals = ds.grid_w * ds.grid_h + 1;
  a.kind = Interpolant::Mask;
  a.layout = layout;
  a.embed_dim = embed_dim;
  a.n_blocks = n_blocks;
  a.n_heads = n_heads;
  a.t_freqs = t_freqs;
  a.grid_w = ds.grid_w;
  a.grid_h = ds.grid_h;
  a.grid_c = kObsChannels;
  a.n_instructions = kNumInstructions;
  return a;
}

// Trains (or loads from FLOWPLAN_ACCEPT_CACHE) one model. Only checks that
// need just the parameters may use the cache: a loaded result carries no
// training log or probe set. Cache files use the CLI checkpoint header, so
// `flowplan plan-trace` can inspect them directly.
FitResult fit_cached(const std::string& name, const Dataset& ds, const ArchConfig& arch,
                     const TrainConfig& tc, bool bc) {
  std::string path;
  if (const char* dir = std::getenv("FLOWPLAN_ACCEPT_CACHE"); dir && *dir) {
    fs::create_directories(dir);
    path = std::string(dir) + "/" + name + ".ckpt";
    if (fs::exists(path)) {
      FitResult r;
      const std::string header = load_checkpoint(path, r.params);
      const std::size_t pos = header.rfind("\"lambda\":");
      r.lambda = pos == std::string::npos ? 0.0 : std::strtod(header.c_str() + pos + 9, nullptr);
      info(fmt("%s: loaded cached parameters from %s", name.c_str(), path.c_str()));
      return r;
    }
  }
  info(fmt("%s: training %d iters (batch %d) on %zu demos ...", name.c_str(), tc.max_iters,
           tc.batch_size, ds.demos.size()));
  const double t0 = now_s();
  FitResult r = bc ? fit_bc(ds, arch, tc) : fit(ds, arch, tc);
  info(fmt("%s: done in %.0fs  total=%.3f recovery=%.3f lambda=%.4f", name.c_str(), now_s() - t0,
           r.log.back().loss.total, r.log.back().recovery, r.lambda));
  if (!path.empty()) {
    save_checkpoint(path, r.params,
                    fmt("{\"arch\":%s,\"lambda\":%.17g}", arch_to_json(arch).c_str(), r.lambda));
  }
  return r;
}

// ---------------------------------------------------------------------------
// Lazily built planning-scale artifacts
// ---------------------------------------------------------------------------

constexpr std::uint64_t kTpDataSeed = 8101, kTpTrainSeed = 8102, kTpEvalSeed = 8103;
constexpr std::uint64_t kTpCorruptDataSeed = 8201, kTpCorruptTrainSeed = 8202;
constexpr std::uint64_t kApDataSeed = 8401, kApTrainSeed = 8402, kApEvalSeed = 8403;
constexpr std::uint64_t kKcDataSeed = 8601, kKcTrainSeed = 8602, kKcRolloutSeed = 8603;
constexpr std::uint64_t kKcEnergySeed = 8604;
constexpr int kEvalEpisodes = 100;

TaskFamilyConfig tp_family() { return TaskFamilyConfig{"tp", 7, 7, 1, 4, 16}; }
TaskFamilyConfig ap_train_family() { return TaskFamilyConfig{"ap-train", 7, 7, 1, 0, 24}; }
TaskFamilyConfig ap_test_family() { return TaskFamilyConfig{"ap-test", 7, 7, 1, 0, 24}; }
TaskFamilyConfig kc_family() { return TaskFamilyConfig{"ic-keycorridor", 7, 7, 1, 0, 24}; }

TrainConfig plan_tc(double beta, std::uint64_t seed, int iters = 2500) {
  TrainConfig tc;
  tc.beta = beta;
  tc.lr = 1e-3;
  tc.max_iters = iters;
  tc.batch_size = 16;
  tc.interpolant = Interpolant::Mask;
  tc.seed = seed;
  tc.probe_size = 8;
  return tc;
}

PlanConfig plan_pc(std::uint64_t seed, int horizon = 24) {
  PlanConfig pc;
  pc.horizon = horizon;
  pc.seed = seed;
  return pc;
}

struct Lab {
  std::optional<Dataset> tp_data_, tp_corrupt_data_;
  std::optional<FitResult> tp_gen_, tp_bc_, tp_gen_c_, tp_bc_c_;
  std::optional<ArchConfig> tp_joint_arch_, tp_bc_arch_;
  std::optional<EvalReport> tp_gen_rep_, tp_bc_rep_;

  // Planning-scale bundle: random 7x7 rooms need the model to generalize the
  // obs -> route mapping across layouts, so the demo corpus and trunk are
  // sized up relative to the toy checks.
  static constexpr int kTpDemos = 3000;
  static constexpr int kTpIters = 5000;

  const Dataset& tp_data() {
    if (!tp_data_) {
      info(fmt("tp: generating %d demos (7x7, 4 walls, horizon %d)", kTpDemos, tp_family().horizon));
      tp_data_ = gen_demos(tp_family(), kTpDemos, 0.0, kTpDataSeed);
    }
    return *tp_data_;
  }
  const Dataset& tp_corrupt_data() {
    if (!tp_corrupt_data_) {
      info(fmt("tp-corrupt: generating %d demos with 25%% injected random actions", kTpDemos));
      tp_corrupt_data_ = gen_demos(tp_family(), kTpDemos, 0.25, kTpCorruptDataSeed);
    }
    return *tp_corrupt_data_;
  }
  const ArchConfig& tp_joint_arch() {
    if (!tp_joint_arch_) tp_joint_arch_ = plan_arch(tp_data(), TrunkLayout::Joint, 48, 3, 4, 8);
    return *tp_joint_arch_;
  }
  const ArchConfig& tp_bc_arch() {
    if (!tp_bc_arch_) tp_bc_arch_ = plan_arch(tp_data(), TrunkLayout::Interleaved, 48, 3, 4, 8);
    return *tp_bc_arch_;
  }
  const FitResult& tp_gen() {
    if (!tp_gen_) {
      tp_gen_ = fit_cached("tp-joint", tp_data(), tp_joint_arch(),
                           plan_tc(0.5, kTpTrainSeed, kTpIters), false);
    }
    return *tp_gen_;
  }
  const FitResult& tp_bc() {
    if (!tp_bc_) {
      tp_bc_ = fit_cached("tp-bc", tp_data(), tp_bc_arch(),
                          plan_tc(0.5, kTpTrainSeed, kTpIters), true);
    }
    return *tp_bc_;
  }
  const FitResult& tp_gen_corrupt() {
    if (!tp_gen_c_) {
      tp_gen_c_ = fit_cached("tp-joint-corrupt", tp_corrupt_data(), tp_joint_arch(),
                             plan_tc(0.5, kTpCorruptTrainSeed, kTpIters), false);
    }
    return *tp_gen_c_;
  }
  const FitResult& tp_bc_corrupt() {
    if (!tp_bc_c_) {
      tp_bc_c_ = fit_cached("tp-bc-corrupt", tp_corrupt_data(), tp_bc_arch(),
                            plan_tc(0.5, kTpCorruptTrainSeed, kTpIters), true);
    }
    return *tp_bc_c_;
  }
  const EvalReport& tp_gen_report() {
    if (!tp_gen_rep_) {
      info("tp: evaluating joint planner, 100 episodes");
      tp_gen_rep_ = evaluate(tp_gen().params, tp_joint_arch(), tp_family(), kEvalEpisodes,
                             plan_pc(kTpEvalSeed, tp_family().horizon));
    }
    return *tp_gen_rep_;
  }
  const EvalReport& tp_bc_report() {
    if (!tp_bc_rep_) {
      info("tp: evaluating bc baseline, 100 episodes");
      tp_bc_rep_ = evaluate(tp_bc().params, tp_bc_arch(), tp_family(), kEvalEpisodes,
                            plan_pc(kTpEvalSeed, tp_family().horizon), /*use_bc=*/true);
    }
    return *tp_bc_rep_;
  }

  // Key-corridor rollouts shared by the two extra invariant checks.
  struct KcStats {
    int episodes = 0;
    int successes = 0;
    int key_before_door = 0;
    int energy_pairs = 0;
    int plan_lower = 0;
  };
  std::optional<KcStats> kc_;
  const KcStats& kc_stats() {
    if (kc_) return *kc_;
    const TaskFamilyConfig fam = kc_family();
    info("kc: generating 300 demos (key corridor, 7x7, horizon 24)");
    const Dataset ds = gen_demos(fam, 300, 0.0, kKcDataSeed);
    const ArchConfig arch = plan_arch(ds, TrunkLayout::Joint, 32, 2, 4, 8);
    TrainConfig tc = plan_tc(0.5, kKcTrainSeed);
    const FitResult model = fit_cached("kc-joint", ds, arch, tc, false);
    KcStats st;
    st.episodes = 60;
    info("kc: rolling out 60 episodes");
    for (int i = 0; i < st.episodes; ++i) {
      Rng rng = make_rng(kKcRolloutSeed, static_cast<std::uint64_t>(i));
      const Task task = generate_task(fam, rng);
      const Rollout r = rollout(model.params, arch, task, plan_pc(kKcRolloutSeed), rng);
      if (!r.success || r.plans.empty()) continue;
      ++st.successes;

      int key_cell = -1, door_cell = -1;
      for (const Subgoal& sg : task.subgoals) {
        if (sg.kind == Subgoal::Kind::Pickup) key_cell = sg.cell;
        if (sg.kind == Subgoal::Kind::OpenDoor) door_cell = sg.cell;
      }
      const std::vector<int>& goals = r.plans[0].goals;
      int first_key = -1, first_door = -1;
      for (int k = 0; k < static_cast<int>(goals.size()); ++k) {
        if (goals[k] == key_cell && first_key < 0) first_key = k;
        if (goals[k] == door_cell && first_door < 0) first_door = k;
      }
      if (first_key >= 0 && (first_door < 0 || first_key < first_door)) ++st.key_before_door;

      // Energy of the plan that was actually executed first vs. random action
      // sequences of the same length, scored from the same start observation.
      const ObservationEncoding obs =
          encode_observation(task.grid, task.start, task.instruction_id);
      TrajectoryExample ex;
      ex.obs = obs;
      ex.states = r.plans[0].states;
      ex.actions = r.plans[0].actions;
      ex.goals = r.plans[0].goals;
      ex.next_state_after = r.plans[0].states.back();
      Rng erng = make_rng(kKcEnergySeed, static_cast<std::uint64_t>(i));
      const double e_plan = energy(model.params, arch, ex, 0.5, 8, erng);
      for (int k = 0; k < 4; ++k) {
        TrajectoryExample rnd = ex;
        for (int& a : rnd.actions) a = uniform_int(erng, kNumActions);
        const double e_rand = energy(model.params, arch, rnd, 0.5, 8, erng);
        ++st.energy_pairs;
        if (e_plan < e_rand) ++st.plan_lower;
      }
    }
    info(fmt("kc: %d/%d rollouts succeeded", st.successes, st.episodes));
    kc_ = st;
    return *kc_;
  }
};

Lab lab;

// ---------------------------------------------------------------------------
// C1  Oracle sampler fidelity
// ---------------------------------------------------------------------------

Outcome c1() {
  // Support is the product set {0,1}^3 so every state reachable by the
  // factorized Euler steps stays inside the reference posterior's support;
  // the weights are far from product form, so matching the target still
  // requires reproducing cross-position correlations.
  WeightedDataset data;
  data.seqs = {{0, 0, 0}, {0, 0, 1}, {0, 1, 0}, {0, 1, 1},
               {1, 0, 0}, {1, 0, 1}, {1, 1, 0}, {1, 1, 1}};
  data.weights = {10.0, 2.0, 3.0, 9.0, 1.0, 8.0, 7.0, 4.0};
  const int len = 3, n_data = 3;
  const int n_samples = 5000, i_max = 1000;

  auto tv_for = [&](Interpolant kind, std::uint64_t seed) {
    const DiscreteSpace sp =
        kind == Interpolant::Mask ? DiscreteSpace::with_mask(n_data) : DiscreteSpace::data_only(n_data);
    const DenoiserFn fn = [&](const std::vector<int>& seq, double t) {
      return exact_posterior(data, sp, kind, seq, t);
    };
    Rng rng = make_rng(seed, 0);
    std::map<std::vector<int>, int> counts;
    for (int s = 0; s < n_samples; ++s) {
      const std::vector<int> init = noise_init(kind, sp, len, rng);
      counts[simulate_reverse_ctmc(init, sp, kind, i_max, fn, rng)]++;
    }
    double wsum = 0.0;
    for (double w : data.weights) wsum += w;
    std::map<std::vector<int>, double> target;
    for (std::size_t k = 0; k < data.seqs.size(); ++k) target[data.seqs[k]] = data.weights[k] / wsum;
    double tv = 0.0;
    for (const auto& [seq, cnt] : counts) {
      const double p = target.count(seq) ? target[seq] : 0.0;
      tv += std::abs(static_cast<double>(cnt) / n_samples - p);
      target.erase(seq);
    }
    for (const auto& [seq, p] : target) tv += p;
    return 0.5 * tv;
  };

  const double tv_mask = tv_for(Interpolant::Mask, 9101);
  const double tv_unif = tv_for(Interpolant::Uniform, 9102);
  Outcome o;
  o.pass = tv_mask <= 0.05 && tv_unif <= 0.05;
  o.detail = fmt("reverse-process samples vs data law, total variation mask=%.4f uniform=%.4f "
                 "(need <= 0.05; %d samples, %d steps)",
                 tv_mask, tv_unif, n_samples, i_max);
  return o;
}

// ---------------------------------------------------------------------------
// C2  Kolmogorov forward-equation residual
// ---------------------------------------------------------------------------

Outcome c2() {
  double max_resid = 0.0;
  const double eps = 1e-4;
  for (Interpolant kind : {Interpolant::Mask, Interpolant::Uniform}) {
    for (int n_data : {3, 4}) {
      const DiscreteSpace sp = kind == Interpolant::Mask ? DiscreteSpace::with_mask(n_data)
                                                         : DiscreteSpace::data_only(n_data);
      for (int x1 = 0; x1 < n_data; ++x1) {
        for (double t : {0.1, 0.5, 0.9}) {
          for (int j = 0; j < sp.vocab(); ++j) {
            const double fd = (interpolant_prob(kind, sp, x1, j, t + eps) -
                               interpolant_prob(kind, sp, x1, j, t - eps)) /
                              (2.0 * eps);
            double gen = 0.0;
            for (int x = 0; x < sp.vocab(); ++x) {
              const double px = interpolant_prob(kind, sp, x1, x, t);
              if (px <= 0.0) continue;
              gen += px * rate_row(kind, sp, x, x1, t).rate[j];
            }
            max_resid = std::max(max_resid, std::abs(fd - gen));
          }
        }
      }
    }
  }
  Outcome o;
  o.pass = max_resid <= 1e-3;
  o.detail = fmt("d/dt p = R^T p on single positions, max residual %.2e "
                 "(need <= 1e-3; t in {0.1,0.5,0.9}, both interpolants, |X| in {3,4})",
                 max_resid);
  return o;
}

// ---------------------------------------------------------------------------
// C3  Gradient correctness (every primitive + the full training loss)
// ---------------------------------------------------------------------------

Tensor leaf(int rows, int cols, Rng& rng, double lo, double hi) {
  Tensor t(rows, cols, true);
  for (std::size_t i = 0; i < t.size(); ++i) t.data()[i] = lo + (hi - lo) * uniform_real(rng);
  return t;
}

struct OpCase {
  std::string name;
  std::vector<Tensor> inputs;                  // leaves the FD loop perturbs
  std::function<Tensor(Graph&)> build;         // closes over copies of inputs
};

double op_loss(const OpCase& oc, bool with_grad, std::vector<std::vector<double>>* grads) {
  Graph g(with_grad);
  Tensor out = oc.build(g);
  Tensor u(1, out.rows(), with_grad), v(out.cols(), 1, with_grad);
  for (int i = 0; i < out.rows(); ++i) u.at(0, i) = 0.5 + 0.31 * i;
  for (int j = 0; j < out.cols(); ++j) v.at(j, 0) = (j % 2 ? -1.0 : 1.0) * (0.5 + 0.13 * j);
  Tensor loss = matmul(g, matmul(g, u, out), v);
  if (with_grad) {
    for (const Tensor& in : oc.inputs) const_cast<Tensor&>(in).zero_grad();
    g.backward(loss);
    grads->clear();
    for (const Tensor& in : oc.inputs) {
      grads->emplace_back(in.grad(), in.grad() + in.size());
    }
  }
  return loss.data()[0];
}

double check_op_case(const OpCase& oc) {
  std::vector<std::vector<double>> grads;
  op_loss(oc, true, &grads);
  const double h = 1e-5;
  double max_rel = 0.0;
  for (std::size_t k = 0; k < oc.inputs.size(); ++k) {
    const Tensor& in = oc.inputs[k];
    for (std::size_t i = 0; i < in.size(); ++i) {
      const double saved = in.data()[i];
      in.data()[i] = saved + h;
      const double up = op_loss(oc, false, nullptr);
      in.data()[i] = saved - h;
      const double dn = op_loss(oc, false, nullptr);
      in.data()[i] = saved;
      const double fd = (up - dn) / (2.0 * h);
      const double an = grads[k][i];
      max_rel = std::max(max_rel, std::abs(fd - an) / std::max({std::abs(fd), std::abs(an), 1.0}));
    }
  }
  return max_rel;
}

Outcome c3() {
  Rng rng = make_rng(3301, 0);
  std::vector<OpCase> cases;
  auto add_case = [&](std::string name, std::vector<Tensor> ins,
                      std::function<Tensor(Graph&)> build) {
    cases.push_back(OpCase{std::move(name), std::move(ins), std::move(build)});
  };

  {
    Tensor a = leaf(3, 4, rng, -1.2, 1.2), b = leaf(4, 2, rng, -1.2, 1.2);
    add_case("matmul", {a, b}, [a, b](Graph& g) { return matmul(g, a, b); });
  }
  {
    Tensor a = leaf(3, 4, rng, -1.2, 1.2), b = leaf(2, 4, rng, -1.2, 1.2);
    add_case("matmul_nt", {a, b}, [a, b](Graph& g) { return matmul_nt(g, a, b); });
  }
  {
    Tensor a = leaf(3, 4, rng, -1.2, 1.2), b = leaf(3, 4, rng, -1.2, 1.2);
    add_case("add", {a, b}, [a, b](Graph& g) { return add(g, a, b); });
  }
  {
    Tensor a = leaf(3, 4, rng, -1.2, 1.2), b = leaf(3, 4, rng, -1.2, 1.2);
    add_case("add_scaled", {a, b}, [a, b](Graph& g) { return add_scaled(g, a, b, 0.7); });
  }
  {
    Tensor a = leaf(3, 4, rng, -1.2, 1.2), b = leaf(1, 4, rng, -1.2, 1.2);
    add_case("add_bias", {a, b}, [a, b](Graph& g) { return add_bias(g, a, b); });
  }
  {
    Tensor a = leaf(3, 4, rng, -1.2, 1.2);
    add_case("scale", {a}, [a](Graph& g) { return scale(g, a, -1.3); });
  }
  {
    Tensor a = leaf(3, 4, rng, -2.0, 2.0);
    add_case("gelu", {a}, [a](Graph& g) { return gelu(g, a); });
  }
  {
    Tensor a = leaf(3, 4, rng, -1.5, 1.5);
    add_case("softmax_rows", {a}, [a](Graph& g) { return softmax_rows(g, a); });
  }
  {
    Tensor a = leaf(4, 4, rng, -1.5, 1.5);
    add_case("causal_mask+softmax", {a},
             [a](Graph& g) { return softmax_rows(g, causal_mask(g, a)); });
  }
  {
    Tensor x = leaf(3, 4, rng, -1.5, 1.5);
    Tensor gain = leaf(1, 4, rng, 0.7, 1.3), bias = leaf(1, 4, rng, -0.4, 0.4);
    add_case("layer_norm", {x, gain, bias},
             [x, gain, bias](Graph& g) { return layer_norm(g, x, gain, bias); });
  }
  {
    Tensor table = leaf(5, 3, rng, -1.0, 1.0);
    const std::vector<int> ids = {0, 2, 4, 2, 1};
    add_case("embedding", {table}, [table, ids](Graph& g) { return embedding(g, table, ids); });
  }
  {
    Tensor table = leaf(5, 3, rng, -1.0, 1.0);
    const std::vector<int> ids = {0, 5, 2, 5, 4};
    add_case("embedding_or_zero", {table},
             [table, ids](Graph& g) { return embedding_or_zero(g, table, ids); });
  }
  {
    Tensor x = leaf(3, 4, rng, -1.2, 1.2);
    Tensor sc = leaf(1, 4, rng, -0.5, 0.5), sh = leaf(1, 4, rng, -0.5, 0.5);
    add_case("film", {x, sc, sh}, [x, sc, sh](Graph& g) { return film(g, x, sc, sh); });
  }
  {
    Tensor x = leaf(5, 4, rng, -1.2, 1.2);
    add_case("slice_rows", {x}, [x](Graph& g) { return slice_rows(g, x, 1, 3); });
  }
  {
    Tensor a = leaf(2, 4, rng, -1.2, 1.2), b = leaf(3, 4, rng, -1.2, 1.2);
    add_case("concat_rows", {a, b}, [a, b](Graph& g) {
      return concat_rows(g, std::vector<Tensor>{a, b});
    });
  }
  {
    Tensor x = leaf(3, 6, rng, -1.2, 1.2);
    add_case("slice_cols", {x}, [x](Graph& g) { return slice_cols(g, x, 2, 3); });
  }
  {
    Tensor a = leaf(3, 2, rng, -1.2, 1.2), b = leaf(3, 4, rng, -1.2, 1.2);
    add_case("concat_cols", {a, b}, [a, b](Graph& g) {
      return concat_cols(g, std::vector<Tensor>{a, b});
    });
  }
  {
    Tensor logits = leaf(4, 5, rng, -1.5, 1.5);
    const std::vector<int> targets = {1, 0, 3, 2};
    const std::vector<unsigned char> mask = {1, 0, 1, 1};
    add_case("masked_cross_entropy", {logits}, [logits, targets, mask](Graph& g) {
      return masked_cross_entropy(g, logits, targets, mask);
    });
  }
  {
    Tensor logits = leaf(4, 5, rng, -1.5, 1.5);
    add_case("mean_row_entropy", {logits},
             [logits](Graph& g) { return mean_row_entropy(g, logits); });
  }

  double max_rel_ops = 0.0;
  std::string worst = "-";
  for (const OpCase& oc : cases) {
    const double r = check_op_case(oc);
    if (r > max_rel_ops) {
      max_rel_ops = r;
      worst = oc.name;
    }
  }

  // Full training objective: logits from the conditioned trunk, the three
  // stream cross-entropies and the entropy bonus combined exactly as the
  // optimizer sees them.
  TaskFamilyConfig fam{"tp", 5, 5, 1, 2, 6};
  Rng trng = make_rng(3302, 0);
  const Task task = generate_task(fam, trng);
  const Demonstration demo = expert_demo(task, fam.horizon, 0.0, trng);
  const TrajectoryExample ex = example_at_offset(demo, 1);

  ArchConfig arch;
  arch.horizon = fam.horizon;
  arch.n_states = fam.width * fam.height * 4;
  arch.n_actions = kNumActions;
  arch.n_goals = fam.width * fam.height + 1;
  arch.kind = Interpolant::Mask;
  arch.layout = TrunkLayout::Joint;
  arch.embed_dim = 16;
  arch.n_blocks = 1;
  arch.n_heads = 2;
  arch.t_freqs = 2;
  arch.grid_w = fam.width;
  arch.grid_h = fam.height;
  arch.grid_c = kObsChannels;
  arch.n_instructions = kNumInstructions;

  ParamStore ps;
  Rng prng = make_rng(3303, 0);
  init_denoiser_params(ps, arch, prng);
  Rng crng = make_rng(3304, 0);
  const CorruptedStreams noisy = corrupt_example(ex, arch, 0.4, crng);
  const double lambda = 0.3;

  auto loss_value = [&](Graph& g) {
    DenoiserInput in;
    in.obs = ex.obs;
    in.t = noisy.t;
    in.states = noisy.states;
    in.actions = noisy.actions;
    in.goals = noisy.goals;
    const DenoiserOutput out = denoiser_forward(g, ps, arch, in);
    const LossNodes ln = build_losses(g, out, ex, noisy, arch);
    Tensor s = add(g, ln.l_action, ln.l_state);
    s = add(g, s, ln.l_goal);
    return add_scaled(g, s, ln.l_entropy, -lambda);
  };

  ps.zero_grad();
  Graph g(true);
  Tensor loss = loss_value(g);
  g.backward(loss);

  Rng srng = make_rng(3305, 0);
  const int n_coords = 60;
  std::vector<std::pair<std::string, int>> coords;
  std::vector<double> analytic;
  for (int k = 0; k < n_coords; ++k) {
    const std::string& nm = ps.names()[uniform_int(srng, static_cast<int>(ps.names().size()))];
    const Tensor& t = ps.at(nm);
    const int idx = uniform_int(srng, static_cast<int>(t.size()));
    coords.emplace_back(nm, idx);
    analytic.push_back(t.grad()[idx]);
  }

  const double h = 1e-5;
  double max_rel_loss = 0.0;
  for (int k = 0; k < n_coords; ++k) {
    Tensor& t = ps.at(coords[k].first);
    const int idx = coords[k].second;
    const double saved = t.data()[idx];
    t.data()[idx] = saved + h;
    Graph gu(false);
    const double up = loss_value(gu).data()[0];
    t.data()[idx] = saved - h;
    Graph gd(false);
    const double dn = loss_value(gd).data()[0];
    t.data()[idx] = saved;
    const double fd = (up - dn) / (2.0 * h);
    const double an = analytic[k];
    max_rel_loss =
        std::max(max_rel_loss, std::abs(fd - an) / std::max({std::abs(fd), std::abs(an), 1.0}));
  }

  Outcome o;
  o.pass = max_rel_ops <= 1e-4 && max_rel_loss <= 1e-4;
  o.detail = fmt("finite differences vs reverse mode: %zu primitives max_rel=%.2e (worst %s), "
                 "full objective over %d parameter coords max_rel=%.2e (need <= 1e-4)",
                 cases.size(), max_rel_ops, worst.c_str(), n_coords, max_rel_loss);
  return o;
}

// ---------------------------------------------------------------------------
// C4  Entropy floor with slack: entropy stays high while lambda returns to 0
// ---------------------------------------------------------------------------

Outcome c4() {
  // Unordered multi-goal instances on a tiny room, six independently drawn
  // optimal demos per instance: with three goals packed into a 3x3 interior,
  // visit orders genuinely tie and shortest paths tie-break many ways, so the
  // demonstrated action distribution is strongly multi-modal and the entropy
  // floor beta=0.5 should end up slack.
  TaskFamilyConfig fam{"tp", 5, 5, 3, 0, 12};
  Dataset ds;
  ds.family = fam.family;
  ds.horizon = fam.horizon;
  ds.grid_w = fam.width;
  ds.grid_h = fam.height;
  for (int i = 0; i < 40; ++i) {
    Rng trng = make_rng(3501, static_cast<std::uint64_t>(i));
    const Task task = generate_task(fam, trng);
    for (int k = 0; k < 6; ++k) {
      Rng drng = make_rng(3502, static_cast<std::uint64_t>(i * 8 + k));
      ds.demos.push_back(expert_demo(task, fam.horizon, 0.0, drng));
    }
  }

  const ArchConfig arch = plan_arch(ds, TrunkLayout::Joint, 16, 1, 2, 4);
  TrainConfig tc;
  tc.beta = 0.5;
  tc.lr = 2e-3;
  tc.max_iters = 2000;
  tc.batch_size = 8;
  tc.interpolant = Interpolant::Mask;
  tc.seed = 3503;
  tc.probe_size = 8;
  const FitResult r = fit(ds, arch, tc);
  for (int k = 249; k < tc.max_iters; k += 250) {
    double e = 0.0, l = 0.0;
    for (int j = k - 49; j <= k; ++j) {
      e += r.log[j].loss.l_entropy;
      l += r.log[j].loss.lambda_value;
    }
    info(fmt("entropy-floor trajectory: step %4d  entropy=%.3f lambda=%.4f", k + 1, e / 50, l / 50));
  }

  const int tail = 100;
  double ent = 0.0, lam = 0.0;
  for (int k = tc.max_iters - tail; k < tc.max_iters; ++k) {
    ent += r.log[k].loss.l_entropy;
    lam += r.log[k].loss.lambda_value;
  }
  ent /= tail;
  lam /= tail;

  Outcome o;
  o.pass = ent >= 0.45 && lam <= 0.05;
  o.detail = fmt("beta=0.5 on multi-modal demos: trailing-100 action entropy %.3f "
                 "(need >= 0.45), trailing-100 lambda %.4f (need <= 0.05)",
                 ent, lam);
  return o;
}

// ---------------------------------------------------------------------------
// C5  Energy landscape: more corrupted actions => strictly higher energy
// ---------------------------------------------------------------------------

Outcome c5() {
  TaskFamilyConfig fam{"tp", 5, 5, 1, 2, 10};
  const Dataset ds = gen_demos(fam, 100, 0.0, 3551);
  const ArchConfig arch = plan_arch(ds, TrunkLayout::Joint, 16, 1, 2, 4);
  TrainConfig tc;
  tc.beta = 0.5;
  tc.lr = 2e-3;
  tc.max_iters = 800;
  tc.batch_size = 8;
  tc.interpolant = Interpolant::Mask;
  tc.seed = 3552;
  tc.probe_size = 8;
  const FitResult r = fit(ds, arch, tc);

  const double levels[3] = {0.2, 0.5, 0.8};
  double mean_e[3] = {0.0, 0.0, 0.0};
  const int n_held_out = 16;
  Rng erng = make_rng(3553, 0);
  for (int i = 0; i < n_held_out; ++i) {
    Rng trng = make_rng(3554, static_cast<std::uint64_t>(i));
    const Task task = generate_task(fam, trng);
    const Demonstration demo = expert_demo(task, fam.horizon, 0.0, trng);
    const TrajectoryExample ex = example_at_offset(demo, 0);
    for (int l = 0; l < 3; ++l) {
      const TrajectoryExample noisy = corrupt_action_fraction(ex, kNumActions, levels[l], erng);
      mean_e[l] += energy(r.params, arch, noisy, tc.t_probe, tc.n_probe, erng);
    }
  }
  for (double& e : mean_e) e /= n_held_out;

  Outcome o;
  o.pass = mean_e[0] * 1.05 <= mean_e[1] && mean_e[1] * 1.05 <= mean_e[2];
  o.detail = fmt("mean energy at action-corruption {0.2,0.5,0.8} = {%.2f, %.2f, %.2f} "
                 "(need strictly increasing with >= 5%% adjacent margins)",
                 mean_e[0], mean_e[1], mean_e[2]);
  return o;
}

// ---------------------------------------------------------------------------
// C6  Masked corruption recovers faster than uniform at a matched budget
// ---------------------------------------------------------------------------

Outcome c6() {
  TaskFamilyConfig fam{"tp", 5, 5, 1, 2, 8};
  const Dataset ds = gen_demos(fam, 80, 0.0, 3601);

  auto recovery_at_1000 = [&](Interpolant kind) {
    ArchConfig arch = plan_arch(ds, TrunkLayout::Joint, 16, 1, 2, 4);
    arch.kind = kind;
    TrainConfig tc;
    tc.beta = 0.5;
    tc.lr = 2e-3;
    tc.max_iters = 1000;
    tc.batch_size = 8;
    tc.interpolant = kind;
    tc.seed = 3602;
    tc.probe_size = 16;
    const FitResult r = fit(ds, arch, tc);
    return r.log.back().recovery;
  };

  const double rec_mask = recovery_at_1000(Interpolant::Mask);
  const double rec_unif = recovery_at_1000(Interpolant::Uniform);
  Outcome o;
  o.pass = rec_mask >= rec_unif + 0.05;
  o.detail = fmt("probe recovery after 1000 matched iterations: mask=%.3f uniform=%.3f "
                 "(need mask >= uniform + 0.05)",
                 rec_mask, rec_unif);
  return o;
}

// ---------------------------------------------------------------------------
// C7  Planning beats the causal baseline on unseen 7x7 single-goal layouts
// ---------------------------------------------------------------------------

Outcome c7() {
  const EvalReport& gr = lab.tp_gen_report();
  const EvalReport& br = lab.tp_bc_report();
  Outcome o;
  o.pass = gr.success_rate >= 0.80 && gr.success_rate > br.success_rate;
  o.detail = fmt("100 unseen episodes: joint=%.2f (need >= 0.80) bc=%.2f (need joint > bc), "
                 "mean steps joint=%.1f bc=%.1f",
                 gr.success_rate, br.success_rate, gr.mean_steps, br.mean_steps);
  return o;
}

// ---------------------------------------------------------------------------
// C8  Entropy-regularized planner transfers to blocked layouts
// ---------------------------------------------------------------------------

Outcome c8() {
  const Dataset ds = gen_demos(ap_train_family(), 400, 0.0, kApDataSeed);
  const ArchConfig aj = plan_arch(ds, TrunkLayout::Joint, 32, 2, 4, 8);
  const ArchConfig ab = plan_arch(ds, TrunkLayout::Interleaved, 32, 2, 4, 8);

  const FitResult m7 = fit_cached("ap-joint-b07", ds, aj, plan_tc(0.7, kApTrainSeed), false);
  const FitResult m0 = fit_cached("ap-joint-b00", ds, aj, plan_tc(0.0, kApTrainSeed + 10), false);
  const FitResult mb = fit_cached("ap-bc", ds, ab, plan_tc(0.0, kApTrainSeed + 20), true);

  const PlanConfig pc = plan_pc(kApEvalSeed);
  info("ap: evaluating beta=0.7 on blocked layouts");
  const EvalReport r7 = evaluate(m7.params, aj, ap_test_family(), kEvalEpisodes, pc);
  info("ap: evaluating beta=0 on blocked layouts");
  const EvalReport r0 = evaluate(m0.params, aj, ap_test_family(), kEvalEpisodes, pc);
  info("ap: evaluating bc baseline on blocked layouts");
  const EvalReport rb = evaluate(mb.params, ab, ap_test_family(), kEvalEpisodes, pc, true);

  Outcome o;
  o.pass = r7.success_rate > r0.success_rate && r7.success_rate > rb.success_rate;
  o.detail = fmt("train on open rooms, test on divider+obstacle: beta0.7=%.2f beta0=%.2f "
                 "bc=%.2f (need beta0.7 strictly highest), 100 paired episodes",
                 r7.success_rate, r0.success_rate, rb.success_rate);
  return o;
}

// ---------------------------------------------------------------------------
// C9  Denoising iteration count: H/2 matches 2H and beats 2
// ---------------------------------------------------------------------------

Outcome c9() {
  const int h = tp_family().horizon;
  const int half = (h + 1) / 2;  // the default iteration count used by tp_gen_report
  const double s_half = lab.tp_gen_report().success_rate;

  PlanConfig pc = plan_pc(kTpEvalSeed, h);
  pc.i_max = 2 * h;
  info(fmt("tp: evaluating i_max=%d", 2 * h));
  const double s_2h =
      evaluate(lab.tp_gen().params, lab.tp_joint_arch(), tp_family(), kEvalEpisodes, pc)
          .success_rate;
  pc.i_max = 2;
  info("tp: evaluating i_max=2");
  const double s_2 =
      evaluate(lab.tp_gen().params, lab.tp_joint_arch(), tp_family(), kEvalEpisodes, pc)
          .success_rate;

  Outcome o;
  o.pass = std::abs(s_half - s_2h) <= 0.02 + 1e-9 && s_half - s_2 >= 0.10 - 1e-9;
  o.detail = fmt("success at i_max %d/%d/2 = %.2f/%.2f/%.2f (need |%d vs %d| <= 0.02 and "
                 "%d vs 2 >= 0.10), 100 paired episodes",
                 half, 2 * h, s_half, s_2h, s_2, half, 2 * h, half);
  return o;
}

// ---------------------------------------------------------------------------
// C10 Stochastic actions favor single-step replanning
// ---------------------------------------------------------------------------

Outcome c10() {
  PlanConfig multi = plan_pc(kTpEvalSeed, tp_family().horizon);
  multi.stochastic_p = 0.2;
  PlanConfig single = multi;
  single.replan = PlanConfig::Replan::SingleStep;

  info("tp: evaluating multi-step replanning at action noise 0.2");
  const double s_multi =
      evaluate(lab.tp_gen().params, lab.tp_joint_arch(), tp_family(), kEvalEpisodes, multi)
          .success_rate;
  info("tp: evaluating single-step replanning at action noise 0.2");
  const double s_single =
      evaluate(lab.tp_gen().params, lab.tp_joint_arch(), tp_family(), kEvalEpisodes, single)
          .success_rate;

  Outcome o;
  o.pass = s_single >= s_multi - 1e-9;
  o.detail = fmt("action noise 0.2: single-step=%.2f multi-step=%.2f "
                 "(need single >= multi), 100 paired episodes",
                 s_single, s_multi);
  return o;
}

// ---------------------------------------------------------------------------
// C11 Robustness to 25% corrupted demonstrations
// ---------------------------------------------------------------------------

Outcome c11() {
  const double gen_clean = lab.tp_gen_report().success_rate;
  const double bc_clean = lab.tp_bc_report().success_rate;

  const PlanConfig pc = plan_pc(kTpEvalSeed, tp_family().horizon);
  info("tp-corrupt: evaluating joint planner");
  const double gen_corrupt =
      evaluate(lab.tp_gen_corrupt().params, lab.tp_joint_arch(), tp_family(), kEvalEpisodes, pc)
          .success_rate;
  info("tp-corrupt: evaluating bc baseline");
  const double bc_corrupt = evaluate(lab.tp_bc_corrupt().params, lab.tp_bc_arch(), tp_family(),
                                     kEvalEpisodes, pc, true)
                                .success_rate;

  const double d_gen = gen_clean - gen_corrupt;
  const double d_bc = bc_clean - bc_corrupt;
  Outcome o;
  o.pass = d_gen <= 0.15 + 1e-9 && d_bc > d_gen;
  o.detail = fmt("25%% corrupted demos: joint %.2f->%.2f (drop %.2f, need <= 0.15), "
                 "bc %.2f->%.2f (drop %.2f, need > joint drop), same paired episodes",
                 gen_clean, gen_corrupt, d_gen, bc_clean, bc_corrupt, d_bc);
  return o;
}

// ---------------------------------------------------------------------------
// C12 One master seed => byte-identical dataset, checkpoint and report
// ---------------------------------------------------------------------------

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome c12() {
  const fs::path root =
      fs::temp_directory_path() / fmt("flowplan-accept-%llu",
                                      static_cast<unsigned long long>(
                                          std::chrono::steady_clock::now().time_since_epoch().count()));
  RunConfig rc;
  rc.seed = 777;
  rc.family = TaskFamilyConfig{"tp", 5, 5, 1, 2, 8};
  rc.n_demos = 20;
  rc.embed_dim = 16;
  rc.n_blocks = 1;
  rc.n_heads = 2;
  rc.t_freqs = 4;
  rc.train.max_iters = 60;
  rc.train.batch_size = 4;
  rc.train.probe_size = 4;
  rc.n_episodes = 10;

  auto run_pipeline = [&](const fs::path& dir) {
    fs::create_directories(dir);
    RunConfig cfg = rc;
    cfg.dataset_path = (dir / "demos.bin").string();
    cfg.checkpoint_path = (dir / "model.ckpt").string();
    cfg.report_path = (dir / "report.txt").string();
    std::ostringstream sink;
    if (cmd_gen_data(cfg, sink) != 0) throw std::runtime_error("gen-data failed");
    if (cmd_train(cfg, sink) != 0) throw std::runtime_error("train failed");
    if (cmd_eval(cfg, sink) != 0) throw std::runtime_error("eval failed");
  };

  run_pipeline(root / "a");
  run_pipeline(root / "b");

  const bool data_eq = slurp(root / "a" / "demos.bin") == slurp(root / "b" / "demos.bin");
  const bool ckpt_eq = slurp(root / "a" / "model.ckpt") == slurp(root / "b" / "model.ckpt");
  const bool rep_eq = slurp(root / "a" / "report.txt") == slurp(root / "b" / "report.txt");
  const bool nonempty = !slurp(root / "a" / "demos.bin").empty() &&
                        !slurp(root / "a" / "model.ckpt").empty() &&
                        !slurp(root / "a" / "report.txt").empty();
  fs::remove_all(root);

  Outcome o;
  o.pass = data_eq && ckpt_eq && rep_eq && nonempty;
  o.detail = fmt("gen-data/train/eval twice under one master seed: dataset %s, checkpoint %s, "
                 "report %s (need byte-identical)",
                 data_eq ? "identical" : "DIFFERS", ckpt_eq ? "identical" : "DIFFERS",
                 rep_eq ? "identical" : "DIFFERS");
  return o;
}

// ---------------------------------------------------------------------------
// Extra planner invariants on key-corridor instances
// ---------------------------------------------------------------------------

Outcome extra_goals() {
  const Lab::KcStats& st = lab.kc_stats();
  Outcome o;
  if (st.successes < 10) {
    o.pass = false;
    o.detail = fmt("only %d/%d key-corridor rollouts succeeded; too few to judge goal ordering",
                   st.successes, st.episodes);
    return o;
  }
  const double frac = static_cast<double>(st.key_before_door) / st.successes;
  o.pass = frac >= 0.90;
  o.detail = fmt("successful rollouts proposing the key cell before the door cell in the goal "
                 "stream: %d/%d = %.2f (need >= 0.90)",
                 st.key_before_door, st.successes, frac);
  return o;
}

Outcome extra_energy() {
  const Lab::KcStats& st = lab.kc_stats();
  Outcome o;
  if (st.energy_pairs < 40) {
    o.pass = false;
    o.detail = fmt("only %d plan/random energy pairs collected; too few to judge selectivity",
                   st.energy_pairs);
    return o;
  }
  const double frac = static_cast<double>(st.plan_lower) / st.energy_pairs;
  o.pass = frac >= 0.95;
  o.detail = fmt("successful plans scoring lower energy than equal-length random action "
                 "sequences: %d/%d = %.2f (need >= 0.95)",
                 st.plan_lower, st.energy_pairs, frac);
  return o;
}

// ---------------------------------------------------------------------------
// Hidden diagnostics (run only when selected by id): prints what the tp
// planner actually proposes and executes, episode by episode.
// ---------------------------------------------------------------------------

std::string action_letters(const std::vector<int>& actions) {
  std::string s;
  for (int a : actions) s += (a >= 0 && a < 6) ? "LRFODP"[a] : '?';
  return s;
}

Outcome diag_tp() {
  const FitResult& m = lab.tp_gen();
  const ArchConfig& arch = lab.tp_joint_arch();
  const TaskFamilyConfig fam = tp_family();
  const PlanConfig pc = plan_pc(kTpEvalSeed, fam.horizon);

  // How confident is the fully-masked denoiser about the first action, and
  // does its argmax match the expert? Measures observation conditioning in
  // isolation from the sampler.
  int agree = 0, n_probe = 30;
  double conf = 0.0;
  for (int i = 0; i < n_probe; ++i) {
    Rng rng = make_rng(kTpEvalSeed, static_cast<std::uint64_t>(i));
    const Task task = generate_task(fam, rng);
    DenoiserInput in;
    in.obs = encode_observation(task.grid, task.start, task.instruction_id);
    in.t = 0.0;
    in.states.assign(arch.horizon, arch.n_states);
    in.actions.assign(arch.horizon, arch.n_actions);
    in.goals.assign(arch.horizon, arch.n_goals);
    Graph g(false);
    const DenoiserOutput out = denoiser_forward(g, m.params, arch, in);
    std::vector<double> row(out.action_logits.data(), out.action_logits.data() + arch.n_actions);
    softmax_row_inplace(row.data(), arch.n_actions);
    const int top = argmax_row(row.data(), arch.n_actions);
    conf += row[top];
    Rng srng = make_rng(kTpEvalSeed ^ 0xabcd, static_cast<std::uint64_t>(i));
    const auto expert = solve_task(task, srng, fam.horizon);
    if (expert && !expert->empty() && top == (*expert)[0]) ++agree;
  }
  info(fmt("all-mask t=0 first-action probe: argmax matches expert %d/%d, mean top prob %.2f",
           agree, n_probe, conf / n_probe));

  for (int i = 0; i < 8; ++i) {
    Rng rng = make_rng(kTpEvalSeed, static_cast<std::uint64_t>(i));
    const Task task = generate_task(fam, rng);
    Rng srng = make_rng(kTpEvalSeed ^ 0xabcd, static_cast<std::uint64_t>(i));
    const auto expert = solve_task(task, srng, fam.horizon);
    const Rollout r = rollout(m.params, arch, task, pc, rng);
    info(fmt("ep %d: success=%d steps=%d plans=%zu expert=%s", i, r.success ? 1 : 0, r.steps,
             r.plans.size(), expert ? action_letters(*expert).c_str() : "none"));
    info(fmt("   plan0:    %s", action_letters(r.plans.empty() ? std::vector<int>{} : r.plans[0].actions).c_str()));
    info(fmt("   executed: %s", action_letters(r.executed_actions).c_str()));
    std::string goals = "   goals0:   ";
    if (!r.plans.empty()) {
      for (int c : r.plans[0].goals) goals += (c == arch.n_goals - 1 ? std::string("-") : std::to_string(c)) + " ";
    }
    const int goal_cell = task.subgoals.empty() ? -1 : task.subgoals.back().cell;
    info(goals + fmt("(task goal cell %d)", goal_cell));
  }
  return Outcome{true, "diagnostics printed above"};
}

// ---------------------------------------------------------------------------
// Driver
// ---------------------------------------------------------------------------

struct Check {
  std::string id;
  double budget_s;  // 0 = report elapsed time only
  std::function<Outcome()> fn;
  bool hidden = false;  // only runs when selected by id
};

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Check> checks = {
      {"C1", 60, c1},
      {"C2", 30, c2},
      {"C3", 60, c3},
      {"C4", 300, c4},
      {"C5", 300, c5},
      {"C6", 600, c6},
      {"C7", 1800, c7},
      {"C8", 2700, c8},
      {"C9", 0, c9},
      {"C10", 0, c10},
      {"C11", 0, c11},
      {"C12", 0, c12},
      {"EXTRA-GOALS", 0, extra_goals},
      {"EXTRA-ENERGY", 0, extra_energy},
      {"DIAG-TP", 0, diag_tp, /*hidden=*/true},
  };

  std::vector<std::string> want(argv + 1, argv + argc);
  for (const std::string& w : want) {
    bool known = false;
    for (const Check& c : checks) known = known || c.id == w;
    if (!known) {
      std::fprintf(stderr, "unknown check id '%s'; valid ids:", w.c_str());
      for (const Check& c : checks) std::fprintf(stderr, " %s", c.id.c_str());
      std::fprintf(stderr, "\n");
      return 2;
    }
  }
  const auto selected = [&](const Check& c) {
    if (want.empty()) return !c.hidden;
    return std::find(want.begin(), want.end(), c.id) != want.end();
  };

  int n_pass = 0, n_fail = 0;
  for (const Check& c : checks) {
    if (!selected(c)) continue;
    const double t0 = now_s();
    Outcome o;
    try {
      o = c.fn();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("exception: ") + e.what();
    }
    const double elapsed = now_s() - t0;
    if (c.budget_s > 0 && elapsed > c.budget_s) {
      o.pass = false;
      o.detail += fmt(" [exceeded %.0fs time budget]", c.budget_s);
    }
    std::printf("[%s] %s %s [%.1fs]\n", c.id.c_str(), o.pass ? "PASS" : "FAIL", o.detail.c_str(),
                elapsed);
    std::fflush(stdout);
    (o.pass ? n_pass : n_fail)++;
  }
  std::printf("RESULT %d/%d checks passed\n", n_pass, n_pass + n_fail);
  return n_fail == 0 ? 0 : 1;
}
