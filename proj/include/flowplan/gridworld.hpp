#ifndef FLOWPLAN_GRIDWORLD_HPP
#define FLOWPLAN_GRIDWORLD_HPP

// Discrete maze environment: grids of walls, colored doors/keys/goals and
// movable obstacles; an agent with heading and a one-slot inventory; task
// generators for the three task families; a breadth-first-search expert that
// emits (optionally corrupted) demonstrations; observation encoding and
// newline-delimited dataset serialization.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "flowplan/observation.hpp"
#include "flowplan/rng.hpp"

namespace flowplan {

inline constexpr int kNumColors = 4;  // red, green, blue, yellow
inline constexpr int kNumActions = 6;
inline constexpr int kNumInstructions = 24;
inline constexpr int kObsChannels = 17;  // 8 kind + 4 color + 1 agent + 4 heading

enum class CellKind : std::uint8_t { Floor = 0, Wall, Door, Key, Obstacle, Goal };
enum class DoorState : std::uint8_t { Open = 0, Closed, Locked };

// Headings: 0 = east (+x), 1 = south (+y), 2 = west (-x), 3 = north (-y).
enum Action : int { kLeft = 0, kRight, kForward, kOpen, kDrop, kPickup };

const char* action_name(int a);
int action_from_name(const std::string& name);  // -1 when unknown
const char* color_name(int c);

struct Cell {
  CellKind kind = CellKind::Floor;
  std::int8_t color = -1;          // doors, keys, goals
  DoorState door = DoorState::Open;  // meaningful only for doors
  bool operator==(const Cell&) const = default;
};

struct Grid {
  int w = 0, h = 0;
  std::vector<Cell> cells;  // index y * w + x

  static Grid bordered(int w, int h);  // floor interior, wall border
  bool in_bounds(int x, int y) const { return x >= 0 && x < w && y >= 0 && y < h; }
  Cell& at(int x, int y) { return cells[static_cast<std::size_t>(y) * w + x]; }
  const Cell& at(int x, int y) const { return cells[static_cast<std::size_t>(y) * w + x]; }
  int cell_index(int x, int y) const { return y * w + x; }
  int n_state_tokens() const { return w * h * 4; }
  int null_goal_token() const { return w * h; }
  bool operator==(const Grid&) const = default;
};

struct Inventory {
  CellKind kind = CellKind::Floor;  // Floor means empty; otherwise Key/Obstacle
  std::int8_t color = -1;
  bool empty() const { return kind == CellKind::Floor; }
  bool operator==(const Inventory&) const = default;
};

struct AgentState {
  int x = 1, y = 1, heading = 0;
  Inventory carry;
  int token(const Grid& g) const { return (y * g.w + x) * 4 + heading; }
  bool operator==(const AgentState&) const = default;
};

// One required accomplishment. Reach fires when the agent ends a step on the
// cell; OpenDoor when the door on the cell swings open; Pickup when the item
// on the cell is lifted.
struct Subgoal {
  enum class Kind : std::uint8_t { Reach = 0, OpenDoor, Pickup };
  Kind kind = Kind::Reach;
  int cell = 0;
  bool operator==(const Subgoal&) const = default;
};

struct Task {
  Grid grid;
  AgentState start;
  int instruction_id = 0;
  std::vector<Subgoal> subgoals;
  bool ordered = true;  // false: accomplish in any order (multi-goal visits)
  std::string family;
  bool operator==(const Task&) const = default;
};

struct ActionResult {
  bool blocked = false;   // forward into a blocking cell
  bool invalid = false;   // open/pickup/drop with no effect
  int opened_cell = -1;   // door cell that swung open this step
  int picked_cell = -1;   // cell an item was lifted from this step
};

// Pure dynamics shared by the environment and the expert search. Rotations
// always succeed; forward moves unless the facing cell blocks (wall, shut
// door, key, obstacle); open toggles a facing door (locked needs a matching
// key, which is kept); pickup/drop transfer a facing key/obstacle to/from the
// one-slot inventory (drop requires bare floor).
ActionResult apply_action(Grid& g, AgentState& a, int action);

// Marks the subgoal the post-action state accomplishes, if any; returns its
// index or -1. Ordered tasks only consider the first unaccomplished subgoal.
int advance_progress(const Task& task, const AgentState& agent, const ActionResult& result,
                     std::vector<std::uint8_t>& achieved);

struct EnvStep {
  AgentState next;
  double reward = 0.0;  // 1 when the active subgoal cell is reached this step
  bool done = false;
  bool blocked = false;
  bool invalid = false;
  int executed_action = -1;  // after any stochastic replacement
};

class World {
 public:
  explicit World(const Task& task);

  EnvStep step(int action);  // deterministic
  // With probability stochastic_p the commanded action is replaced by a
  // uniform draw over all six actions (the commanded one included).
  EnvStep step(int action, double stochastic_p, Rng& rng);

  const Grid& grid() const { return grid_; }
  const AgentState& agent() const { return agent_; }
  const Task& task() const { return task_; }
  bool done() const { return n_achieved_ == static_cast<int>(task_.subgoals.size()); }
  int steps_taken() const { return steps_; }
  const std::vector<std::uint8_t>& achieved() const { return achieved_; }
  // Cell of the next required subgoal (ordered) or the first unaccomplished
  // one (unordered); -1 when the task is complete.
  int active_goal_cell() const;

 private:
  Task task_;
  Grid grid_;
  AgentState agent_;
  std::vector<std::uint8_t> achieved_;
  int n_achieved_ = 0;
  int steps_ = 0;
};

ObservationEncoding encode_observation(const Grid& g, const AgentState& a, int instruction_id);

// Debug / golden-test text rendering: one character per cell plus agent and
// color legends. Deterministic for fixed inputs.
std::string dump_grid(const Grid& g, const AgentState& a);

// Instruction vocabulary (closed set of templated ids).
int instr_goto(int color);                    // 0..3
int instr_open_order(int first, int second);  // 4..15, ordered distinct colors
int instr_unblock_goto(int color);            // 16..19
int instr_keycorridor(int color);             // 20..23
std::string instruction_text(int id);

struct TaskFamilyConfig {
  // One of: tp | ic-keycorridor | ic-blocked | ic-doororder | ap-train | ap-test
  std::string family = "tp";
  int width = 7, height = 7;
  int n_goals = 1;   // tp goal count
  int n_walls = 4;   // tp / ic-doororder interior wall cells
  int horizon = 24;  // instances must be solvable within this many steps
  bool operator==(const TaskFamilyConfig&) const = default;
};

// Samples an instance and guarantees the expert can solve it within the
// horizon; throws std::runtime_error for unsatisfiable parameters.
Task generate_task(const TaskFamilyConfig& cfg, Rng& rng);

// Shortest action sequence accomplishing every subgoal, or nullopt if none
// exists within max_len steps. Ties between equally short solutions are
// broken by the rng, so repeated calls cover distinct optimal solutions.
std::optional<std::vector<int>> solve_task(const Task& task, Rng& rng, int max_len);

struct Demonstration {
  Grid grid;
  AgentState start;
  int instruction_id = 0;
  std::vector<Subgoal> subgoals;
  bool ordered = true;
  int length = 0;                   // executed steps before padding
  std::vector<int> states;          // horizon pose tokens, states[0] = start
  std::vector<int> actions;         // horizon action tokens (left-spin padded)
  std::vector<int> goals;           // active subgoal cell; null token when done
  std::vector<int> corrupted_steps;  // indices where a random action was taken
  bool operator==(const Demonstration&) const = default;
};

// Expert demonstration padded to the horizon. With corruption > 0, a random
// non-expert action is injected at step k exactly when ceil(c*(k+1)) exceeds
// ceil(c*k) — so a length-L result carries ceil(c*L) injections — and the
// remaining plan is recomputed after each injection. Throws when the task
// cannot be demonstrated within the horizon.
Demonstration expert_demo(const Task& task, int horizon, double corruption, Rng& rng);

// Replays the demonstration through the environment; true when every recorded
// state matches and the task finishes exactly at the recorded length.
bool replay_matches(const Demonstration& demo);

struct Dataset {
  int schema_version = 1;
  std::string family;
  int horizon = 0;
  int grid_w = 0, grid_h = 0;
  std::vector<Demonstration> demos;
  bool operator==(const Dataset&) const = default;
};

void save_dataset(const std::string& path, const Dataset& ds);
Dataset load_dataset(const std::string& path);  // throws with record index

}  // namespace flowplan

#endif  // FLOWPLAN_GRIDWORLD_HPP
