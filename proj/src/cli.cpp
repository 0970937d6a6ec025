#include "flowplan/cli.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <ostream>
#include <sstream>

#include <json.hpp>
#ifdef _OPENMP
#include <omp.h>
#endif

#include "flowplan/planner.hpp"

namespace flowplan {

namespace {

using nlohmann::json;

[[noreturn]] void bad_config(const std::string& what) { throw ConfigError(what); }

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

// ---------------------------------------------------------------------------
// Field registry: one row per config key, in canonical emission order.

struct FieldBinding {
  const char* key;
  std::function<void(RunConfig&, const std::string&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

int to_int(const std::string& v, const std::string& key) {
  std::size_t pos = 0;
  int out = 0;
  try {
    out = std::stoi(v, &pos);
  } catch (const std::exception&) {
    bad_config("field '" + key + "': expected an integer, got '" + v + "'");
  }
  if (pos != v.size()) bad_config("field '" + key + "': expected an integer, got '" + v + "'");
  return out;
}

std::uint64_t to_u64(const std::string& v, const std::string& key) {
  std::size_t pos = 0;
  std::uint64_t out = 0;
  try {
    out = std::stoull(v, &pos);
  } catch (const std::exception&) {
    bad_config("field '" + key + "': expected an unsigned integer, got '" + v + "'");
  }
  if (pos != v.size()) {
    bad_config("field '" + key + "': expected an unsigned integer, got '" + v + "'");
  }
  return out;
}

double to_double(const std::string& v, const std::string& key) {
  std::size_t pos = 0;
  double out = 0.0;
  try {
    out = std::stod(v, &pos);
  } catch (const std::exception&) {
    bad_config("field '" + key + "': expected a number, got '" + v + "'");
  }
  if (pos != v.size()) bad_config("field '" + key + "': expected a number, got '" + v + "'");
  return out;
}

bool to_bool(const std::string& v, const std::string& key) {
  if (v == "true") return true;
  if (v == "false") return false;
  bad_config("field '" + key + "': expected true or false, got '" + v + "'");
}

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void check_choice(const std::string& v, const std::vector<std::string>& allowed,
                  const std::string& key) {
  for (const std::string& a : allowed) {
    if (v == a) return;
  }
  std::string msg = "field '" + key + "': expected one of {";
  bool first = true;
  for (const std::string& a : allowed) {
    msg += (first ? "" : ", ");
    msg += a;
    first = false;
  }
  bad_config(msg + "}, got '" + v + "'");
}

#define INT_FIELD(KEY, REF)                                                    \
  FieldBinding {                                                               \
    KEY, [](RunConfig& c, const std::string& v, const std::string& k) { c.REF = to_int(v, k); }, \
        [](const RunConfig& c) { return std::to_string(c.REF); }               \
  }
#define DBL_FIELD(KEY, REF)                                                     \
  FieldBinding {                                                                \
    KEY,                                                                        \
        [](RunConfig& c, const std::string& v, const std::string& k) {          \
          c.REF = to_double(v, k);                                              \
        },                                                                      \
        [](const RunConfig& c) { return fmt_double(c.REF); }                    \
  }
#define BOOL_FIELD(KEY, REF)                                                    \
  FieldBinding {                                                                \
    KEY,                                                                        \
        [](RunConfig& c, const std::string& v, const std::string& k) {          \
          c.REF = to_bool(v, k);                                                \
        },                                                                      \
        [](const RunConfig& c) { return c.REF ? "true" : "false"; }             \
  }
#define STR_FIELD(KEY, REF)                                                       \
  FieldBinding {                                                                  \
    KEY, [](RunConfig& c, const std::string& v, const std::string&) { c.REF = v; }, \
        [](const RunConfig& c) { return c.REF; }                                  \
  }

FieldBinding choice_field(const char* key, std::string RunConfig::* ref,
                          std::vector<std::string> allowed) {
  return FieldBinding{
      key,
      [ref, allowed = std::move(allowed)](RunConfig& c, const std::string& v,
                                          const std::string& k) {
        check_choice(v, allowed, k);
        c.*ref = v;
      },
      [ref](const RunConfig& c) { return c.*ref; }};
}

const std::vector<FieldBinding>& field_table() {
  static const std::vector<FieldBinding> table = {
      FieldBinding{"seed",
                   [](RunConfig& c, const std::string& v, const std::string& k) {
                     c.seed = to_u64(v, k);
                   },
                   [](const RunConfig& c) { return std::to_string(c.seed); }},
      STR_FIELD("family.name", family.family),
      INT_FIELD("family.width", family.width),
      INT_FIELD("family.height", family.height),
      INT_FIELD("family.n_goals", family.n_goals),
      INT_FIELD("family.n_walls", family.n_walls),
      INT_FIELD("family.horizon", family.horizon),
      INT_FIELD("data.n_demos", n_demos),
      DBL_FIELD("data.corruption", corruption),
      choice_field("arch.kind", &RunConfig::arch_kind, {"mask", "uniform"}),
      choice_field("arch.layout", &RunConfig::arch_layout, {"joint", "interleaved"}),
      INT_FIELD("arch.embed_dim", embed_dim),
      INT_FIELD("arch.n_blocks", n_blocks),
      INT_FIELD("arch.n_heads", n_heads),
      INT_FIELD("arch.t_freqs", t_freqs),
      INT_FIELD("arch.n_ctx", n_ctx),
      BOOL_FIELD("arch.oracle_goal", oracle_goal),
      DBL_FIELD("train.beta", train.beta),
      DBL_FIELD("train.lambda0", train.lambda0),
      DBL_FIELD("train.lr", train.lr),
      INT_FIELD("train.max_iters", train.max_iters),
      INT_FIELD("train.batch_size", train.batch_size),
      DBL_FIELD("train.dual_lr", train.dual_lr),
      INT_FIELD("train.probe_size", train.probe_size),
      DBL_FIELD("train.t_probe", train.t_probe),
      INT_FIELD("train.n_probe", train.n_probe),
      INT_FIELD("plan.i_max", i_max),
      choice_field("plan.replan", &RunConfig::replan, {"multi", "single"}),
      INT_FIELD("plan.replan_every", replan_every),
      INT_FIELD("plan.ctx", plan_ctx),
      DBL_FIELD("plan.stochastic_p", stochastic_p),
      BOOL_FIELD("plan.oracle_goals", oracle_goals),
      DBL_FIELD("plan.t_probe", plan_t_probe),
      INT_FIELD("plan.n_probe", plan_n_probe),
      INT_FIELD("eval.n_episodes", n_episodes),
      BOOL_FIELD("eval.baseline", baseline),
      STR_FIELD("paths.dataset", dataset_path),
      STR_FIELD("paths.checkpoint", checkpoint_path),
      STR_FIELD("paths.report", report_path),
      STR_FIELD("paths.log", log_path),
      STR_FIELD("paths.resume", resume_path),
  };
  return table;
}

#undef INT_FIELD
#undef DBL_FIELD
#undef BOOL_FIELD
#undef STR_FIELD

const FieldBinding* find_field(const std::string& key) {
  for (const FieldBinding& f : field_table()) {
    if (key == f.key) return &f;
  }
  return nullptr;
}

Interpolant kind_of(const RunConfig& cfg) {
  return cfg.arch_kind == "mask" ? Interpolant::Mask : Interpolant::Uniform;
}

TrunkLayout layout_of(const RunConfig& cfg) {
  return cfg.arch_layout == "joint" ? TrunkLayout::Joint : TrunkLayout::Interleaved;
}

PlanConfig plan_config(const RunConfig& cfg, int horizon) {
  PlanConfig pc;
  pc.horizon = horizon;
  pc.i_max = cfg.i_max;
  pc.replan = cfg.replan == "single" ? PlanConfig::Replan::SingleStep
                                     : PlanConfig::Replan::MultiStep;
  pc.replan_every = cfg.replan_every;
  pc.ctx = cfg.plan_ctx;
  pc.stochastic_p = cfg.stochastic_p;
  pc.oracle_goals = cfg.oracle_goals;
  pc.t_probe = cfg.plan_t_probe;
  pc.n_probe = cfg.plan_n_probe;
  pc.seed = cfg.seed;
  return pc;
}

void require_path(const std::string& value, const char* key) {
  if (value.empty()) bad_config(std::string("field '") + key + "' is required by this command");
}

std::string checkpoint_header(const ArchConfig& arch, double lambda) {
  json h;
  h["arch"] = json::parse(arch_to_json(arch));
  h["lambda"] = lambda;
  return h.dump();
}

ArchConfig arch_of_header(const std::string& text, double* lambda) {
  json h = json::parse(text);
  if (lambda) *lambda = h.value("lambda", 0.0);
  return arch_from_json(h.at("arch").dump());
}

void check_family_matches(const ArchConfig& arch, const TaskFamilyConfig& fam) {
  if (fam.horizon != arch.horizon || fam.width != arch.grid_w || fam.height != arch.grid_h) {
    throw std::runtime_error(
        "checkpoint/architecture mismatch: the checkpoint was trained for a " +
        std::to_string(arch.grid_w) + "x" + std::to_string(arch.grid_h) + " grid with horizon " +
        std::to_string(arch.horizon));
  }
}

std::string stream_text(const std::vector<int>& v, int null_token = -1) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ' ';
    out += (null_token >= 0 && v[i] == null_token) ? std::string("-") : std::to_string(v[i]);
  }
  return out;
}

}  // namespace

std::map<std::string, std::string> parse_config_text(const std::string& text) {
  std::map<std::string, std::string> entries;
  std::istringstream in(text);
  std::string raw;
  std::vector<std::string> stack;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string line = trim(raw);
    if (line.empty() || line[0] == '#') continue;
    if (line == "}") {
      if (stack.empty()) {
        bad_config("line " + std::to_string(line_no) + ": '}' without an open section");
      }
      stack.pop_back();
      continue;
    }
    if (line.back() == '{') {
      std::string name = trim(line.substr(0, line.size() - 1));
      if (name.empty() || name.find_first_of(" \t={}") != std::string::npos) {
        bad_config("line " + std::to_string(line_no) + ": malformed section header '" + line +
                   "'");
      }
      stack.push_back(name);
      continue;
    }
    std::size_t eq = line.find('=');
    if (eq == std::string::npos) {
      bad_config("line " + std::to_string(line_no) +
                 ": expected 'key = value', a section, or '}', got '" + line + "'");
    }
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (key.empty() || key.find_first_of(" \t{}") != std::string::npos) {
      bad_config("line " + std::to_string(line_no) + ": malformed key '" + key + "'");
    }
    std::string dotted;
    for (const std::string& s : stack) dotted += s + ".";
    dotted += key;
    entries[dotted] = value;
  }
  if (!stack.empty()) {
    bad_config("unterminated section '" + stack.back() + "' at end of file");
  }
  return entries;
}

RunConfig apply_entries(const RunConfig& base,
                        const std::map<std::string, std::string>& entries) {
  RunConfig cfg = base;
  for (const auto& [key, value] : entries) {
    const FieldBinding* f = find_field(key);
    if (!f) bad_config("unknown config key '" + key + "'");
    f->set(cfg, value, key);
  }
  return cfg;
}

RunConfig apply_entry(const RunConfig& base, const std::string& key, const std::string& value) {
  const FieldBinding* f = find_field(key);
  if (!f) bad_config("unknown config key '" + key + "'");
  RunConfig cfg = base;
  f->set(cfg, value, key);
  return cfg;
}

std::string emit_config(const RunConfig& cfg) {
  std::string out;
  std::string open_section;
  for (const FieldBinding& f : field_table()) {
    std::string key = f.key;
    std::size_t dot = key.find('.');
    std::string section = dot == std::string::npos ? "" : key.substr(0, dot);
    std::string leaf = dot == std::string::npos ? key : key.substr(dot + 1);
    if (section != open_section) {
      if (!open_section.empty()) out += "}\n";
      if (!section.empty()) out += section + " {\n";
      open_section = section;
    }
    out += (section.empty() ? "" : "  ") + leaf + " = " + f.get(cfg) + "\n";
  }
  if (!open_section.empty()) out += "}\n";
  return out;
}

RunConfig load_run_config(const std::string& path, const RunConfig& base) {
  std::ifstream in(path, std::ios::binary);
  if (!in) bad_config("cannot open config file '" + path + "'");
  std::ostringstream text;
  text << in.rdbuf();
  return apply_entries(base, parse_config_text(text.str()));
}

ArchConfig make_arch(const RunConfig& cfg, const Dataset& ds) {
  ArchConfig a;
  a.horizon = ds.horizon;
  a.n_states = ds.grid_w * ds.grid_h * 4;
  a.n_actions = kNumActions;
  a.n_goals = ds.grid_w * ds.grid_h + 1;
  a.kind = kind_of(cfg);
  a.layout = layout_of(cfg);
  a.embed_dim = cfg.embed_dim;
  a.n_blocks = cfg.n_blocks;
  a.n_heads = cfg.n_heads;
  a.t_freqs = cfg.t_freqs;
  a.n_ctx = cfg.n_ctx;
  a.grid_w = ds.grid_w;
  a.grid_h = ds.grid_h;
  a.grid_c = kObsChannels;
  a.n_instructions = kNumInstructions;
  a.oracle_goal = cfg.oracle_goal;
  return a;
}

int cmd_gen_data(const RunConfig& cfg, std::ostream& out) {
  require_path(cfg.dataset_path, "paths.dataset");
  if (cfg.n_demos < 0) bad_config("field 'data.n_demos' must be non-negative");
  Rng rng = make_rng(cfg.seed);
  Dataset ds;
  ds.family = cfg.family.family;
  ds.horizon = cfg.family.horizon;
  ds.grid_w = cfg.family.width;
  ds.grid_h = cfg.family.height;
  long total_length = 0;
  int solvable = 0;
  for (int i = 0; i < cfg.n_demos; ++i) {
    Task task = generate_task(cfg.family, rng);
    Demonstration demo = expert_demo(task, cfg.family.horizon, cfg.corruption, rng);
    total_length += demo.length;
    solvable += replay_matches(demo) ? 1 : 0;
    ds.demos.push_back(std::move(demo));
  }
  save_dataset(cfg.dataset_path, ds);
  char line[256];
  std::snprintf(line, sizeof(line),
                "gen-data family=%s demos=%d mean_length=%.2f solvable=%d/%d out=%s\n",
                ds.family.c_str(), cfg.n_demos,
                cfg.n_demos > 0 ? static_cast<double>(total_length) / cfg.n_demos : 0.0, solvable,
                cfg.n_demos, cfg.dataset_path.c_str());
  out << line;
  return 0;
}

int cmd_train(const RunConfig& cfg, std::ostream& out) {
  require_path(cfg.dataset_path, "paths.dataset");
  require_path(cfg.checkpoint_path, "paths.checkpoint");
  Dataset ds = load_dataset(cfg.dataset_path);

  TrainConfig tc = cfg.train;
  tc.seed = cfg.seed;
  tc.interpolant = kind_of(cfg);

  ArchConfig arch;
  ParamStore warm;
  bool resumed = false;
  if (!cfg.resume_path.empty()) {
    double lambda = 0.0;
    arch = arch_of_header(load_checkpoint(cfg.resume_path, warm), &lambda);
    tc.lambda0 = lambda;
    tc.interpolant = arch.kind;
    resumed = true;
  } else {
    arch = make_arch(cfg, ds);
  }

  std::ofstream log;
  if (!cfg.log_path.empty()) {
    log.open(cfg.log_path, std::ios::binary);
    if (!log) throw std::runtime_error("cannot open log file '" + cfg.log_path + "'");
  }
  std::ostream* log_stream = cfg.log_path.empty() ? nullptr : &log;

  FitResult fr = arch.layout == TrunkLayout::Joint
                     ? fit(ds, arch, tc, log_stream, resumed ? &warm : nullptr)
                     : fit_bc(ds, arch, tc, log_stream, resumed ? &warm : nullptr);
  save_checkpoint(cfg.checkpoint_path, fr.params, checkpoint_header(arch, fr.lambda));

  char line[320];
  const TrainLogEntry* last = fr.log.empty() ? nullptr : &fr.log.back();
  std::snprintf(line, sizeof(line),
                "train iters=%d step=%lld total=%.6f recovery=%.4f lambda=%.6f checkpoint=%s\n",
                tc.max_iters, static_cast<long long>(fr.params.step()),
                last ? last->loss.total : 0.0, last ? last->recovery : 0.0, fr.lambda,
                cfg.checkpoint_path.c_str());
  out << line;
  return 0;
}

int cmd_eval(const RunConfig& cfg, std::ostream& out) {
  require_path(cfg.checkpoint_path, "paths.checkpoint");
  require_path(cfg.report_path, "paths.report");
  ParamStore ps;
  ArchConfig arch = arch_of_header(load_checkpoint(cfg.checkpoint_path, ps), nullptr);
  check_family_matches(arch, cfg.family);
  if (cfg.baseline != (arch.layout == TrunkLayout::Interleaved)) {
    throw std::runtime_error(cfg.baseline
                                 ? "the baseline flag needs an interleaved-layout checkpoint"
                                 : "this checkpoint holds the baseline; pass the baseline flag");
  }

  EvalReport rep =
      evaluate(ps, arch, cfg.family, cfg.n_episodes, plan_config(cfg, arch.horizon), cfg.baseline);

  std::ofstream rf(cfg.report_path, std::ios::binary);
  if (!rf) throw std::runtime_error("cannot open report file '" + cfg.report_path + "'");
  rf << format_report(rep);
  rf.close();

  char line[256];
  std::snprintf(line, sizeof(line),
                "eval family=%s episodes=%d success_rate=%.3f mean_steps=%.2f report=%s\n",
                rep.family.c_str(), rep.n_episodes, rep.success_rate, rep.mean_steps,
                cfg.report_path.c_str());
  out << line;
  return 0;
}

int cmd_plan_trace(const RunConfig& cfg, std::ostream& out) {
  require_path(cfg.checkpoint_path, "paths.checkpoint");
  ParamStore ps;
  ArchConfig arch = arch_of_header(load_checkpoint(cfg.checkpoint_path, ps), nullptr);
  check_family_matches(arch, cfg.family);
  const bool use_bc = arch.layout == TrunkLayout::Interleaved;

  Rng rng = make_rng(cfg.seed);
  Task task = generate_task(cfg.family, rng);
  out << "plan-trace family=" << cfg.family.family << " seed=" << cfg.seed
      << (use_bc ? " planner=baseline" : " planner=denoiser") << "\n";
  out << dump_grid(task.grid, task.start);
  out << "instruction: " << instruction_text(task.instruction_id) << "\n";

  PlanConfig pc = plan_config(cfg, arch.horizon);
  Rollout r = use_bc ? bc_rollout(ps, arch, task, pc, rng) : rollout(ps, arch, task, pc, rng);

  const int null_goal = task.grid.null_goal_token();
  std::size_t next_plan = 0;
  char line[256];
  for (int step = 0; step < r.steps; ++step) {
    while (next_plan < r.plans.size() && r.plan_steps[next_plan] == step) {
      const PlanResult& p = r.plans[next_plan];
      std::snprintf(line, sizeof(line), "plan step=%d energy=%.6f\n", step,
                    r.plan_energies[next_plan]);
      out << line;
      std::string names;
      for (std::size_t i = 0; i < p.actions.size(); ++i) {
        names += (i ? " " : "");
        names += action_name(p.actions[i]);
      }
      out << "  actions: " << names << "\n";
      out << "  states: " << stream_text(p.states) << "\n";
      out << "  goals: " << stream_text(p.goals, null_goal) << "\n";
      ++next_plan;
    }
    std::snprintf(line, sizeof(line), "step=%d commanded=%s executed=%s state=%d\n", step,
                  action_name(r.commanded_actions[static_cast<std::size_t>(step)]),
                  action_name(r.executed_actions[static_cast<std::size_t>(step)]),
                  r.executed_states[static_cast<std::size_t>(step) + 1]);
    out << line;
  }
  std::snprintf(line, sizeof(line), "result success=%d steps=%d plans=%zu\n", r.success ? 1 : 0,
                r.steps, r.plans.size());
  out << line;
  return 0;
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  if (const char* w = std::getenv("FLOWPLAN_WORKERS")) {
#ifdef _OPENMP
    int n = std::atoi(w);
    if (n > 0) omp_set_num_threads(n);
#else
    (void)w;
#endif
  }

  // Hand-rolled argv walk: subcommand first, then `--flag value` pairs (or
  // `--flag` alone for booleans), applied over the config file in the order
  // given. Keeps precedence explicit: defaults, then --config, then flags.
  std::vector<std::string> args(argv + 1, argv + argc);
  static const char* usage =
      "usage: flowplan <gen-data | train | eval | plan-trace> [--config FILE]\n"
      "                [--set key=value]... [--<key-alias> value]...\n"
      "\n"
      "Every configuration field can be set with --set section.key=value;\n"
      "aliases: --seed, --family, --width, --height, --goals, --walls,\n"
      "--horizon, --demos, --corruption, --kind, --layout, --beta, --lr,\n"
      "--iters, --batch, --ctx, --oracle-goal[s], --i-max, --replan,\n"
      "--replan-every, --stochastic-p, --episodes, --baseline, --dataset,\n"
      "--checkpoint, --report, --log, --resume.\n"
      "Environment: FLOWPLAN_WORKERS overrides the evaluation thread count.\n";

  try {
    if (args.empty() || args[0] == "--help" || args[0] == "-h") {
      out << usage;
      return args.empty() ? 2 : 0;
    }
    const std::string sub = args[0];
    if (sub != "gen-data" && sub != "train" && sub != "eval" && sub != "plan-trace") {
      bad_config("unknown subcommand '" + sub + "'");
    }

    static const std::map<std::string, std::string> aliases = {
        {"--seed", "seed"},
        {"--family", "family.name"},
        {"--width", "family.width"},
        {"--height", "family.height"},
        {"--goals", "family.n_goals"},
        {"--walls", "family.n_walls"},
        {"--horizon", "family.horizon"},
        {"--demos", "data.n_demos"},
        {"--corruption", "data.corruption"},
        {"--kind", "arch.kind"},
        {"--layout", "arch.layout"},
        {"--embed-dim", "arch.embed_dim"},
        {"--blocks", "arch.n_blocks"},
        {"--heads", "arch.n_heads"},
        {"--arch-ctx", "arch.n_ctx"},
        {"--oracle-goal", "arch.oracle_goal"},
        {"--beta", "train.beta"},
        {"--lambda0", "train.lambda0"},
        {"--lr", "train.lr"},
        {"--iters", "train.max_iters"},
        {"--batch", "train.batch_size"},
        {"--dual-lr", "train.dual_lr"},
        {"--i-max", "plan.i_max"},
        {"--replan", "plan.replan"},
        {"--replan-every", "plan.replan_every"},
        {"--ctx", "plan.ctx"},
        {"--stochastic-p", "plan.stochastic_p"},
        {"--oracle-goals", "plan.oracle_goals"},
        {"--episodes", "eval.n_episodes"},
        {"--baseline", "eval.baseline"},
        {"--dataset", "paths.dataset"},
        {"--checkpoint", "paths.checkpoint"},
        {"--report", "paths.report"},
        {"--log", "paths.log"},
        {"--resume", "paths.resume"},
    };
    static const std::map<std::string, std::string> bare_flags = {
        {"--oracle-goal", "true"},
        {"--oracle-goals", "true"},
        {"--baseline", "true"},
    };

    // First pass: locate --config so the file applies before any flag.
    std::string config_path;
    for (std::size_t i = 1; i < args.size(); ++i) {
      if (args[i] == "--config") {
        if (i + 1 >= args.size()) bad_config("--config needs a file argument");
        config_path = args[i + 1];
      }
    }
    RunConfig cfg;
    if (!config_path.empty()) cfg = load_run_config(config_path, cfg);

    for (std::size_t i = 1; i < args.size(); ++i) {
      const std::string& a = args[i];
      if (a == "--config") {
        ++i;  // consumed above
        continue;
      }
      if (a == "--help" || a == "-h") {
        out << usage;
        return 0;
      }
      if (a == "--set") {
        if (i + 1 >= args.size()) bad_config("--set needs a key=value argument");
        const std::string& kv = args[++i];
        std::size_t eq = kv.find('=');
        if (eq == std::string::npos) bad_config("--set expects key=value, got '" + kv + "'");
        cfg = apply_entry(cfg, kv.substr(0, eq), kv.substr(eq + 1));
        continue;
      }
      auto alias = aliases.find(a);
      if (alias == aliases.end()) bad_config("unknown flag '" + a + "'");
      auto bare = bare_flags.find(a);
      bool next_is_value = i + 1 < args.size() && args[i + 1].rfind("--", 0) != 0;
      if (bare != bare_flags.end() && !next_is_value) {
        cfg = apply_entry(cfg, alias->second, bare->second);
      } else {
        if (i + 1 >= args.size()) bad_config("flag '" + a + "' needs a value");
        cfg = apply_entry(cfg, alias->second, args[++i]);
      }
    }

    if (sub == "gen-data") return cmd_gen_data(cfg, out);
    if (sub == "train") return cmd_train(cfg, out);
    if (sub == "eval") return cmd_eval(cfg, out);
    return cmd_plan_trace(cfg, out);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 3;
  }
}

}  // namespace flowplan
