#ifndef FLOWPLAN_CLI_HPP
#define FLOWPLAN_CLI_HPP

// Command-line plumbing: one RunConfig carries every knob of the pipeline,
// settable (in rising precedence) by defaults, a plain-text config file, and
// command-line flags. Subcommands generate datasets, train models, evaluate
// planners, and print single-episode plan traces. Exit codes: 0 success,
// 2 configuration error, 3 runtime abort.

#include <cstdint>
#include <iosfwd>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "flowplan/gridworld.hpp"
#include "flowplan/train.hpp"

namespace flowplan {

// Configuration mistakes (unparseable file, unknown key, bad value); mapped
// to exit code 2. Everything else that throws maps to exit code 3.
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

struct RunConfig {
  std::uint64_t seed = 0;

  TaskFamilyConfig family;  // family.name, grid extent, goal/wall counts, horizon

  int n_demos = 500;         // data.*
  double corruption = 0.0;

  std::string arch_kind = "mask";     // arch.*: mask | uniform
  std::string arch_layout = "joint";  // joint | interleaved
  int embed_dim = 32;
  int n_blocks = 2;
  int n_heads = 4;
  int t_freqs = 8;
  int n_ctx = 0;
  bool oracle_goal = false;

  TrainConfig train;  // train.* (interpolant/seed follow arch.kind and seed)

  int i_max = 0;                // plan.*
  std::string replan = "multi";  // multi | single
  int replan_every = 0;
  int plan_ctx = 0;
  double stochastic_p = 0.0;
  bool oracle_goals = false;
  double plan_t_probe = 0.5;
  int plan_n_probe = 8;

  int n_episodes = 100;  // eval.*
  bool baseline = false;

  std::string dataset_path;     // paths.*
  std::string checkpoint_path;
  std::string report_path;
  std::string log_path;
  std::string resume_path;

  bool operator==(const RunConfig&) const = default;
};

// Flat dotted-key view of a config file: sections nest with `name {` ... `}`,
// leaves are `key = value`, `#` starts a full-line comment. Throws
// ConfigError with a line diagnostic.
std::map<std::string, std::string> parse_config_text(const std::string& text);

// Applies dotted-key assignments onto a base config. Unknown keys and
// malformed values throw ConfigError naming the field.
RunConfig apply_entries(const RunConfig& base, const std::map<std::string, std::string>& entries);

// Single assignment, same validation (used for command-line overrides).
RunConfig apply_entry(const RunConfig& base, const std::string& key, const std::string& value);

// Canonical text listing every field; parsing it back yields an equal config.
std::string emit_config(const RunConfig& cfg);

RunConfig load_run_config(const std::string& path, const RunConfig& base = RunConfig{});

// Architecture for a dataset under the config's knobs (vocabulary sizes and
// horizon come from the data).
ArchConfig make_arch(const RunConfig& cfg, const Dataset& ds);

// Subcommand bodies; summaries print to `out`. Each returns an exit code.
int cmd_gen_data(const RunConfig& cfg, std::ostream& out);
int cmd_train(const RunConfig& cfg, std::ostream& out);
int cmd_eval(const RunConfig& cfg, std::ostream& out);
int cmd_plan_trace(const RunConfig& cfg, std::ostream& out);

// Full argv entry point: parses `gen-data | train | eval | plan-trace`,
// applies --config then flags, honours the FLOWPLAN_WORKERS thread override,
// and maps exceptions to exit codes.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace flowplan

#endif  // FLOWPLAN_CLI_HPP
