#include "flowplan/gridworld.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <queue>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

#include <json.hpp>

namespace flowplan {

namespace {

constexpr int kDx[4] = {1, 0, -1, 0};
constexpr int kDy[4] = {0, 1, 0, -1};
constexpr const char* kHeadingNames[4] = {"east", "south", "west", "north"};
constexpr const char* kActionNames[kNumActions] = {"left",  "right", "forward",
                                                   "open",  "drop",  "pickup"};
constexpr const char* kColorNames[kNumColors] = {"red", "green", "blue", "yellow"};

void require(bool ok, const std::string& what) {
  if (!ok) throw std::invalid_argument(what);
}

bool walkable(const Cell& c) {
  return c.kind == CellKind::Floor || c.kind == CellKind::Goal ||
         (c.kind == CellKind::Door && c.door == DoorState::Open);
}

}  // namespace

const char* action_name(int a) {
  require(a >= 0 && a < kNumActions, "action id out of range");
  return kActionNames[a];
}

int action_from_name(const std::string& name) {
  for (int a = 0; a < kNumActions; ++a) {
    if (name == kActionNames[a]) return a;
  }
  return -1;
}

const char* color_name(int c) {
  require(c >= 0 && c < kNumColors, "color id out of range");
  return kColorNames[c];
}

Grid Grid::bordered(int w, int h) {
  if (w < 3 || h < 3) throw std::invalid_argument("grid too small for a wall border");
  Grid g;
  g.w = w;
  g.h = h;
  g.cells.assign(static_cast<std::size_t>(w) * h, Cell{});
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (x == 0 || y == 0 || x == w - 1 || y == h - 1) g.at(x, y).kind = CellKind::Wall;
    }
  }
  return g;
}

ActionResult apply_action(Grid& g, AgentState& a, int action) {
  require(action >= 0 && action < kNumActions, "action id out of range");
  ActionResult r;
  if (action == kLeft || action == kRight) {
    a.heading = (a.heading + (action == kLeft ? 3 : 1)) % 4;
    return r;
  }
  const int fx = a.x + kDx[a.heading];
  const int fy = a.y + kDy[a.heading];
  if (!g.in_bounds(fx, fy)) {
    if (action == kForward) r.blocked = true;
    else r.invalid = true;
    return r;
  }
  Cell& front = g.at(fx, fy);
  switch (action) {
    case kForward:
      if (walkable(front)) {
        a.x = fx;
        a.y = fy;
      } else {
        r.blocked = true;
      }
      break;
    case kOpen:
      if (front.kind != CellKind::Door) {
        r.invalid = true;
      } else if (front.door == DoorState::Open) {
        front.door = DoorState::Closed;
      } else if (front.door == DoorState::Closed) {
        front.door = DoorState::Open;
        r.opened_cell = g.cell_index(fx, fy);
      } else if (a.carry.kind == CellKind::Key && a.carry.color == front.color) {
        front.door = DoorState::Open;  // unlocked; the key is kept
        r.opened_cell = g.cell_index(fx, fy);
      } else {
        r.invalid = true;
      }
      break;
    case kPickup:
      if ((front.kind == CellKind::Key || front.kind == CellKind::Obstacle) && a.carry.empty()) {
        a.carry = Inventory{front.kind, front.color};
        front = Cell{};
        r.picked_cell = g.cell_index(fx, fy);
      } else {
        r.invalid = true;
      }
      break;
    case kDrop:
      if (!a.carry.empty() && front.kind == CellKind::Floor) {
        front.kind = a.carry.kind;
        front.color = a.carry.color;
        a.carry = Inventory{};
      } else {
        r.invalid = true;
      }
      break;
    default:
      break;
  }
  return r;
}

int advance_progress(const Task& task, const AgentState& agent, const ActionResult& result,
                     std::vector<std::uint8_t>& achieved) {
  const int n = static_cast<int>(task.subgoals.size());
  const int agent_cell = agent.y * task.grid.w + agent.x;
  auto hits = [&](const Subgoal& sg) {
    switch (sg.kind) {
      case Subgoal::Kind::Reach:
        return agent_cell == sg.cell;
      case Subgoal::Kind::OpenDoor:
        return result.opened_cell == sg.cell;
      case Subgoal::Kind::Pickup:
        return result.picked_cell == sg.cell;
    }
    return false;
  };
  if (task.ordered) {
    int i = 0;
    while (i < n && achieved[i]) ++i;
    if (i < n && hits(task.subgoals[i])) {
      achieved[i] = 1;
      return i;
    }
    return -1;
  }
  for (int i = 0; i < n; ++i) {
    if (!achieved[i] && hits(task.subgoals[i])) {
      achieved[i] = 1;
      return i;
    }
  }
  return -1;
}

namespace {

// Applies every achievement the current state satisfies (a step can complete
// a pickup/open subgoal and immediately satisfy a follow-up reach).
int advance_all(const Task& task, const AgentState& agent, const ActionResult& result,
                std::vector<std::uint8_t>& achieved) {
  int count = 0;
  while (advance_progress(task, agent, result, achieved) >= 0) ++count;
  return count;
}

}  // namespace

World::World(const Task& task) : task_(task), grid_(task.grid), agent_(task.start) {
  require(task_.grid.in_bounds(agent_.x, agent_.y), "agent start out of bounds");
  require(walkable(grid_.at(agent_.x, agent_.y)), "agent start on a blocking cell");
  achieved_.assign(task_.subgoals.size(), 0);
  n_achieved_ += advance_all(task_, agent_, ActionResult{}, achieved_);
}

EnvStep World::step(int action) {
  EnvStep out;
  out.executed_action = action;
  ActionResult r = apply_action(grid_, agent_, action);
  const int newly = advance_all(task_, agent_, r, achieved_);
  n_achieved_ += newly;
  out.next = agent_;
  out.reward = newly > 0 ? 1.0 : 0.0;
  out.done = done();
  out.blocked = r.blocked;
  out.invalid = r.invalid;
  ++steps_;
  return out;
}

EnvStep World::step(int action, double stochastic_p, Rng& rng) {
  int executed = action;
  if (stochastic_p > 0.0 && uniform_real(rng) < stochastic_p) {
    executed = uniform_int(rng, kNumActions);
  }
  return step(executed);
}

int World::active_goal_cell() const {
  for (std::size_t i = 0; i < achieved_.size(); ++i) {
    if (!achieved_[i]) return task_.subgoals[i].cell;
  }
  return -1;
}

ObservationEncoding encode_observation(const Grid& g, const AgentState& a, int instruction_id) {
  ObservationEncoding o;
  o.w = g.w;
  o.h = g.h;
  o.c = kObsChannels;
  o.grid.assign(static_cast<std::size_t>(g.w) * g.h * kObsChannels, 0.0);
  for (int y = 0; y < g.h; ++y) {
    for (int x = 0; x < g.w; ++x) {
      const Cell& c = g.at(x, y);
      int kind_ch = 0;
      switch (c.kind) {
        case CellKind::Floor: kind_ch = 0; break;
        case CellKind::Wall: kind_ch = 1; break;
        case CellKind::Door:
          kind_ch = c.door == DoorState::Open ? 2 : (c.door == DoorState::Closed ? 3 : 4);
          break;
        case CellKind::Key: kind_ch = 5; break;
        case CellKind::Obstacle: kind_ch = 6; break;
        case CellKind::Goal: kind_ch = 7; break;
      }
      o.cell(x, y, kind_ch) = 1.0;
      if (c.color >= 0) o.cell(x, y, 8 + c.color) = 1.0;
    }
  }
  o.cell(a.x, a.y, 12) = 1.0;
  o.cell(a.x, a.y, 13 + a.heading) = 1.0;
  o.agent_token = a.token(g);
  o.instruction_id = instruction_id;
  return o;
}

std::string dump_grid(const Grid& g, const AgentState& a) {
  std::ostringstream out;
  for (int y = 0; y < g.h; ++y) {
    for (int x = 0; x < g.w; ++x) {
      if (x == a.x && y == a.y) {
        out << ">v<^"[a.heading];
        continue;
      }
      const Cell& c = g.at(x, y);
      switch (c.kind) {
        case CellKind::Floor: out << '.'; break;
        case CellKind::Wall: out << '#'; break;
        case CellKind::Door:
          out << (c.door == DoorState::Open ? '/' : (c.door == DoorState::Closed ? '+' : 'x'));
          break;
        case CellKind::Key: out << 'k'; break;
        case CellKind::Obstacle: out << 'O'; break;
        case CellKind::Goal: out << 'g'; break;
      }
    }
    out << '\n';
  }
  out << "agent " << a.x << ' ' << a.y << ' ' << kHeadingNames[a.heading] << " carry ";
  if (a.carry.empty()) {
    out << '-';
  } else if (a.carry.kind == CellKind::Key) {
    out << "key:" << color_name(a.carry.color);
  } else {
    out << "obstacle";
  }
  out << '\n';
  std::ostringstream colors;
  for (int y = 0; y < g.h; ++y) {
    for (int x = 0; x < g.w; ++x) {
      if (g.at(x, y).color >= 0) {
        colors << " (" << x << ',' << y << ")=" << color_name(g.at(x, y).color);
      }
    }
  }
  if (!colors.str().empty()) out << "colors:" << colors.str() << '\n';
  return out.str();
}

int instr_goto(int color) {
  require(color >= 0 && color < kNumColors, "color id out of range");
  return color;
}

int instr_open_order(int first, int second) {
  require(first >= 0 && first < kNumColors && second >= 0 && second < kNumColors &&
              first != second,
          "open-order needs two distinct colors");
  return 4 + first * (kNumColors - 1) + (second < first ? second : second - 1);
}

int instr_unblock_goto(int color) {
  require(color >= 0 && color < kNumColors, "color id out of range");
  return 16 + color;
}

int instr_keycorridor(int color) {
  require(color >= 0 && color < kNumColors, "color id out of range");
  return 20 + color;
}

std::string instruction_text(int id) {
  require(id >= 0 && id < kNumInstructions, "instruction id out of range");
  if (id < 4) return std::string("go to the ") + color_name(id) + " goal";
  if (id < 16) {
    const int k = id - 4;
    const int first = k / (kNumColors - 1);
    const int rem = k % (kNumColors - 1);
    const int second = rem < first ? rem : rem + 1;
    return std::string("open the ") + color_name(first) + " door then the " + color_name(second) +
           " door";
  }
  if (id < 20) {
    return std::string("move the obstacle and go to the ") + color_name(id - 16) + " goal";
  }
  return std::string("fetch the key and go to the ") + color_name(id - 20) + " goal";
}

// ---------------------------------------------------------------------------
// Expert search
// ---------------------------------------------------------------------------

namespace {

std::string encode_cells(const Grid& g) {
  std::string s;
  s.reserve(g.cells.size());
  for (const Cell& c : g.cells) {
    s.push_back(static_cast<char>((static_cast<int>(c.kind) << 5) |
                                  ((c.color + 1) << 2) | static_cast<int>(c.door)));
  }
  return s;
}

Grid decode_cells(const std::string& bytes, int w, int h) {
  Grid g;
  g.w = w;
  g.h = h;
  g.cells.resize(bytes.size());
  for (std::size_t i = 0; i < bytes.size(); ++i) {
    const int b = static_cast<unsigned char>(bytes[i]);
    g.cells[i].kind = static_cast<CellKind>(b >> 5);
    g.cells[i].color = static_cast<std::int8_t>(((b >> 2) & 7) - 1);
    g.cells[i].door = static_cast<DoorState>(b & 3);
  }
  return g;
}

std::string search_key(const std::string& cells, const AgentState& a,
                       const std::vector<std::uint8_t>& achieved) {
  std::string s = cells;
  s.push_back(static_cast<char>(a.x));
  s.push_back(static_cast<char>(a.y));
  s.push_back(static_cast<char>(a.heading));
  s.push_back(static_cast<char>(static_cast<int>(a.carry.kind)));
  s.push_back(static_cast<char>(a.carry.color + 1));
  for (std::uint8_t v : achieved) s.push_back(static_cast<char>(v));
  return s;
}

struct SearchNode {
  AgentState agent;
  std::vector<std::uint8_t> achieved;
  std::string cells;
  int parent = -1;
  int action = -1;
  int depth = 0;
};

constexpr std::size_t kMaxSearchNodes = 400000;

}  // namespace

std::optional<std::vector<int>> solve_task(const Task& task, Rng& rng, int max_len) {
  if (max_len < 0) return std::nullopt;
  std::vector<SearchNode> nodes;
  std::unordered_set<std::string> visited;
  visited.reserve(1 << 12);

  SearchNode root;
  root.agent = task.start;
  root.achieved.assign(task.subgoals.size(), 0);
  advance_all(task, root.agent, ActionResult{}, root.achieved);
  root.cells = encode_cells(task.grid);
  auto complete = [](const std::vector<std::uint8_t>& a) {
    return std::all_of(a.begin(), a.end(), [](std::uint8_t v) { return v != 0; });
  };
  if (complete(root.achieved)) return std::vector<int>{};
  visited.insert(search_key(root.cells, root.agent, root.achieved));
  nodes.push_back(std::move(root));

  std::vector<int> order(kNumActions);
  for (std::size_t head = 0; head < nodes.size(); ++head) {
    // Copy, not reference: nodes reallocates as children are appended.
    const SearchNode cur = nodes[head];
    if (cur.depth == max_len) continue;
    const Grid base = decode_cells(cur.cells, task.grid.w, task.grid.h);
    for (int i = 0; i < kNumActions; ++i) order[i] = i;
    shuffle_vec(order, rng);  // random tie-breaking over equally short solutions
    for (int a : order) {
      Grid g = base;
      SearchNode next;
      next.agent = cur.agent;
      ActionResult r = apply_action(g, next.agent, a);
      next.achieved = cur.achieved;
      advance_all(task, next.agent, r, next.achieved);
      next.cells = encode_cells(g);
      std::string key = search_key(next.cells, next.agent, next.achieved);
      if (!visited.insert(std::move(key)).second) continue;
      next.parent = static_cast<int>(head);
      next.action = a;
      next.depth = cur.depth + 1;
      const bool found = complete(next.achieved);
      nodes.push_back(std::move(next));
      if (found) {
        std::vector<int> actions;
        for (int n = static_cast<int>(nodes.size()) - 1; nodes[n].parent >= 0;
             n = nodes[n].parent) {
          actions.push_back(nodes[n].action);
        }
        std::reverse(actions.begin(), actions.end());
        return actions;
      }
      if (nodes.size() > kMaxSearchNodes) return std::nullopt;
    }
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Task generators
// ---------------------------------------------------------------------------

namespace {

std::vector<int> shuffled_floor_cells(const Grid& g, Rng& rng) {
  std::vector<int> v;
  for (int i = 0; i < static_cast<int>(g.cells.size()); ++i) {
    if (g.cells[i].kind == CellKind::Floor) v.push_back(i);
  }
  shuffle_vec(v, rng);
  return v;
}

// Wall column at x = xw with a single special cell at (xw, y_gap).
void build_divider(Grid& g, int xw, int y_gap) {
  for (int y = 1; y < g.h - 1; ++y) {
    if (y != y_gap) g.at(xw, y).kind = CellKind::Wall;
  }
}

std::optional<Task> propose_task(const TaskFamilyConfig& cfg, Rng& rng) {
  const int w = cfg.width, h = cfg.height;
  Task t;
  t.family = cfg.family;
  t.grid = Grid::bordered(w, h);
  Grid& g = t.grid;
  const int color = uniform_int(rng, kNumColors);

  if (cfg.family == "tp" || cfg.family == "ap-train") {
    const int n_walls = cfg.family == "ap-train" ? 0 : cfg.n_walls;
    const int n_goals = cfg.family == "ap-train" ? 1 : cfg.n_goals;
    auto cells = shuffled_floor_cells(g, rng);
    if (static_cast<int>(cells.size()) < n_walls + 1 + n_goals) return std::nullopt;
    std::size_t k = 0;
    for (int i = 0; i < n_walls; ++i) g.cells[cells[k++]].kind = CellKind::Wall;
    const int start = cells[k++];
    t.start = AgentState{start % w, start / w, uniform_int(rng, 4), Inventory{}};
    for (int i = 0; i < n_goals; ++i) {
      const int cell = cells[k++];
      g.cells[cell] = Cell{CellKind::Goal, static_cast<std::int8_t>(color), DoorState::Open};
      t.subgoals.push_back(Subgoal{Subgoal::Kind::Reach, cell});
    }
    t.ordered = false;
    t.instruction_id = instr_goto(color);
    return t;
  }

  if (cfg.family == "ap-test" || cfg.family == "ic-blocked") {
    if (w < 5) return std::nullopt;
    const int xw = 2 + uniform_int(rng, w - 4);
    const int y_gap = 1 + uniform_int(rng, h - 2);
    build_divider(g, xw, y_gap);
    g.at(xw, y_gap).kind = CellKind::Obstacle;
    const int obstacle_cell = g.cell_index(xw, y_gap);
    std::vector<int> left, right;
    for (int cell : shuffled_floor_cells(g, rng)) {
      (cell % w < xw ? left : right).push_back(cell);
    }
    if (left.size() < 1 || right.size() < 1) return std::nullopt;
    t.start = AgentState{left[0] % w, left[0] / w, uniform_int(rng, 4), Inventory{}};
    const int goal = right[0];
    g.cells[goal] = Cell{CellKind::Goal, static_cast<std::int8_t>(color), DoorState::Open};
    if (cfg.family == "ic-blocked") {
      t.subgoals.push_back(Subgoal{Subgoal::Kind::Pickup, obstacle_cell});
      t.instruction_id = instr_unblock_goto(color);
    } else {
      t.instruction_id = instr_goto(color);
    }
    t.subgoals.push_back(Subgoal{Subgoal::Kind::Reach, goal});
    t.ordered = true;
    return t;
  }

  if (cfg.family == "ic-keycorridor") {
    if (w < 5) return std::nullopt;
    const int xw = 2 + uniform_int(rng, w - 4);
    const int y_door = 1 + uniform_int(rng, h - 2);
    build_divider(g, xw, y_door);
    g.at(xw, y_door) = Cell{CellKind::Door, static_cast<std::int8_t>(color), DoorState::Locked};
    const int door_cell = g.cell_index(xw, y_door);
    std::vector<int> left, right;
    for (int cell : shuffled_floor_cells(g, rng)) {
      (cell % w < xw ? left : right).push_back(cell);
    }
    if (left.size() < 2 || right.size() < 1) return std::nullopt;
    const int key_cell = left[0];
    g.cells[key_cell] = Cell{CellKind::Key, static_cast<std::int8_t>(color), DoorState::Open};
    t.start = AgentState{left[1] % w, left[1] / w, uniform_int(rng, 4), Inventory{}};
    const int goal = right[0];
    g.cells[goal] = Cell{CellKind::Goal, static_cast<std::int8_t>(color), DoorState::Open};
    t.subgoals = {Subgoal{Subgoal::Kind::Pickup, key_cell},
                  Subgoal{Subgoal::Kind::OpenDoor, door_cell},
                  Subgoal{Subgoal::Kind::Reach, goal}};
    t.ordered = true;
    t.instruction_id = instr_keycorridor(color);
    return t;
  }

  if (cfg.family == "ic-doororder") {
    int second = uniform_int(rng, kNumColors - 1);
    if (second >= color) ++second;
    auto cells = shuffled_floor_cells(g, rng);
    if (static_cast<int>(cells.size()) < cfg.n_walls + 3) return std::nullopt;
    std::size_t k = 0;
    for (int i = 0; i < cfg.n_walls; ++i) g.cells[cells[k++]].kind = CellKind::Wall;
    const int d1 = cells[k++], d2 = cells[k++];
    g.cells[d1] = Cell{CellKind::Door, static_cast<std::int8_t>(color), DoorState::Closed};
    g.cells[d2] = Cell{CellKind::Door, static_cast<std::int8_t>(second), DoorState::Closed};
    const int start = cells[k++];
    t.start = AgentState{start % w, start / w, uniform_int(rng, 4), Inventory{}};
    t.subgoals = {Subgoal{Subgoal::Kind::OpenDoor, d1}, Subgoal{Subgoal::Kind::OpenDoor, d2}};
    t.ordered = true;
    t.instruction_id = instr_open_order(color, second);
    return t;
  }

  throw std::invalid_argument("unknown task family: " + cfg.family);
}

}  // namespace

Task generate_task(const TaskFamilyConfig& cfg, Rng& rng) {
  require(cfg.width >= 5 && cfg.height >= 5, "family grids need at least 5x5");
  require(cfg.horizon >= 1 && cfg.n_goals >= 1 && cfg.n_walls >= 0, "bad family parameters");
  for (int attempt = 0; attempt < 2000; ++attempt) {
    std::optional<Task> t = propose_task(cfg, rng);
    if (!t) continue;
    if (solve_task(*t, rng, cfg.horizon)) return *t;
  }
  throw std::runtime_error("could not sample a solvable '" + cfg.family +
                           "' instance within the horizon");
}

// ---------------------------------------------------------------------------
// Expert demonstrations
// ---------------------------------------------------------------------------

namespace {

Task remaining_task(const Task& task, const World& world, const std::vector<std::uint8_t>& done) {
  Task t;
  t.grid = world.grid();
  t.start = world.agent();
  t.instruction_id = task.instruction_id;
  t.ordered = task.ordered;
  t.family = task.family;
  for (std::size_t i = 0; i < task.subgoals.size(); ++i) {
    if (!done[i]) t.subgoals.push_back(task.subgoals[i]);
  }
  return t;
}

std::optional<Demonstration> try_demo(const Task& task, int horizon, double corruption,
                                      Rng& rng) {
  World world(task);
  Demonstration demo;
  demo.grid = task.grid;
  demo.start = task.start;
  demo.instruction_id = task.instruction_id;
  demo.subgoals = task.subgoals;
  demo.ordered = task.ordered;

  std::vector<std::uint8_t> achieved_before = world.achieved();
  std::vector<int> achieved_idx;  // original-subgoal index achieved at step k, else -1
  std::optional<std::vector<int>> plan;
  std::size_t pos = 0;
  if (!world.done()) {
    plan = solve_task(remaining_task(task, world, achieved_before), rng, horizon);
    if (!plan) return std::nullopt;
  }

  while (!world.done() && world.steps_taken() < horizon) {
    const int k = world.steps_taken();
    if (!plan || pos >= plan->size()) return std::nullopt;
    int action = (*plan)[pos];
    const bool inject =
        corruption > 0.0 && std::ceil(corruption * (k + 1)) > std::ceil(corruption * k);
    if (inject) {
      int draw = uniform_int(rng, kNumActions - 1);
      action = draw >= action ? draw + 1 : draw;  // anything but the expert's choice
      demo.corrupted_steps.push_back(k);
    }
    demo.states.push_back(world.agent().token(world.grid()));
    demo.actions.push_back(action);
    std::vector<std::uint8_t> before = world.achieved();
    world.step(action);
    const std::vector<std::uint8_t>& after = world.achieved();
    int idx = -1;
    for (std::size_t i = 0; i < after.size(); ++i) {
      if (after[i] && !before[i]) idx = static_cast<int>(i);
    }
    achieved_idx.push_back(idx);
    if (inject && !world.done()) {
      plan = solve_task(remaining_task(task, world, after), rng,
                        horizon - world.steps_taken());
      if (!plan) return std::nullopt;
      pos = 0;
    } else if (!inject) {
      ++pos;
    }
  }
  if (!world.done()) return std::nullopt;
  demo.length = world.steps_taken();

  // Goal labels: the cell of the subgoal the expert accomplishes next.
  const int null_goal = task.grid.null_goal_token();
  demo.goals.assign(demo.length, null_goal);
  int current = null_goal;
  for (int k = demo.length - 1; k >= 0; --k) {
    if (achieved_idx[k] >= 0) current = task.subgoals[achieved_idx[k]].cell;
    demo.goals[k] = current;
  }

  // Pad with in-place spins; recorded states stay faithful to a replay.
  while (static_cast<int>(demo.actions.size()) < horizon) {
    demo.states.push_back(world.agent().token(world.grid()));
    demo.actions.push_back(kLeft);
    demo.goals.push_back(null_goal);
    world.step(kLeft);
  }
  return demo;
}

}  // namespace

Demonstration expert_demo(const Task& task, int horizon, double corruption, Rng& rng) {
  require(horizon >= 1, "horizon must be positive");
  require(corruption >= 0.0 && corruption <= 1.0, "corruption fraction out of range");
  for (int attempt = 0; attempt < 64; ++attempt) {
    std::optional<Demonstration> demo = try_demo(task, horizon, corruption, rng);
    if (demo) return *demo;
  }
  throw std::runtime_error("expert failed to demonstrate the task within the horizon");
}

bool replay_matches(const Demonstration& demo) {
  Task t{demo.grid, demo.start, demo.instruction_id, demo.subgoals, demo.ordered, ""};
  World world(t);
  const int h = static_cast<int>(demo.actions.size());
  if (static_cast<int>(demo.states.size()) != h || static_cast<int>(demo.goals.size()) != h) {
    return false;
  }
  if (demo.length == 0 && !world.done()) return false;
  for (int k = 0; k < h; ++k) {
    if (demo.states[k] != world.agent().token(world.grid())) return false;
    world.step(demo.actions[k]);
    const bool should_be_done = k >= demo.length - 1;
    if (world.done() != should_be_done && k < demo.length) return false;
  }
  return world.done();
}

// ---------------------------------------------------------------------------
// Dataset serialization
// ---------------------------------------------------------------------------

namespace {

int cell_code(const Cell& c) {
  return static_cast<int>(c.kind) * 100 + (c.color + 1) * 10 + static_cast<int>(c.door);
}

Cell cell_from_code(int code) {
  const int kind = code / 100, color = (code / 10) % 10, door = code % 10;
  if (kind > 5 || color > kNumColors || door > 2) {
    throw std::runtime_error("bad cell code " + std::to_string(code));
  }
  Cell c;
  c.kind = static_cast<CellKind>(kind);
  c.color = static_cast<std::int8_t>(color - 1);
  c.door = static_cast<DoorState>(door);
  return c;
}

nlohmann::json demo_to_json(const Demonstration& d) {
  nlohmann::json j;
  std::vector<int> cells;
  cells.reserve(d.grid.cells.size());
  for (const Cell& c : d.grid.cells) cells.push_back(cell_code(c));
  j["grid"] = cells;
  j["start"] = {d.start.x, d.start.y, d.start.heading};
  j["instruction"] = d.instruction_id;
  nlohmann::json sg = nlohmann::json::array();
  for (const Subgoal& s : d.subgoals) {
    sg.push_back({static_cast<int>(s.kind), s.cell});
  }
  j["subgoals"] = sg;
  j["ordered"] = d.ordered;
  j["length"] = d.length;
  j["states"] = d.states;
  j["actions"] = d.actions;
  j["goals"] = d.goals;
  j["corrupted_steps"] = d.corrupted_steps;
  return j;
}

Demonstration demo_from_json(const nlohmann::json& j, int w, int h) {
  Demonstration d;
  d.grid.w = w;
  d.grid.h = h;
  for (int code : j.at("grid").get<std::vector<int>>()) {
    d.grid.cells.push_back(cell_from_code(code));
  }
  if (static_cast<int>(d.grid.cells.size()) != w * h) {
    throw std::runtime_error("grid cell count mismatch");
  }
  const auto start = j.at("start").get<std::vector<int>>();
  if (start.size() != 3) throw std::runtime_error("bad start triple");
  d.start = AgentState{start[0], start[1], start[2], Inventory{}};
  d.instruction_id = j.at("instruction").get<int>();
  for (const auto& s : j.at("subgoals")) {
    const int kind = s.at(0).get<int>();
    if (kind < 0 || kind > 2) throw std::runtime_error("bad subgoal kind");
    d.subgoals.push_back(Subgoal{static_cast<Subgoal::Kind>(kind), s.at(1).get<int>()});
  }
  d.ordered = j.at("ordered").get<bool>();
  d.length = j.at("length").get<int>();
  d.states = j.at("states").get<std::vector<int>>();
  d.actions = j.at("actions").get<std::vector<int>>();
  d.goals = j.at("goals").get<std::vector<int>>();
  d.corrupted_steps = j.at("corrupted_steps").get<std::vector<int>>();
  return d;
}

}  // namespace

void save_dataset(const std::string& path, const Dataset& ds) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write dataset file: " + path);
  nlohmann::json header;
  header["schema_version"] = ds.schema_version;
  header["family"] = ds.family;
  header["horizon"] = ds.horizon;
  header["grid_w"] = ds.grid_w;
  header["grid_h"] = ds.grid_h;
  header["n_demos"] = ds.demos.size();
  out << header.dump() << '\n';
  for (const Demonstration& d : ds.demos) {
    if (d.grid.w != ds.grid_w || d.grid.h != ds.grid_h ||
        static_cast<int>(d.actions.size()) != ds.horizon) {
      throw std::runtime_error("demonstration does not match the dataset header");
    }
    out << demo_to_json(d).dump() << '\n';
  }
  if (!out) throw std::runtime_error("failed while writing dataset: " + path);
}

Dataset load_dataset(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read dataset file: " + path);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("empty dataset file: " + path);
  Dataset ds;
  std::size_t expected = 0;
  try {
    nlohmann::json header = nlohmann::json::parse(line);
    ds.schema_version = header.at("schema_version").get<int>();
    if (ds.schema_version != 1) {
      throw std::runtime_error("unsupported dataset schema version " +
                               std::to_string(ds.schema_version));
    }
    ds.family = header.at("family").get<std::string>();
    ds.horizon = header.at("horizon").get<int>();
    ds.grid_w = header.at("grid_w").get<int>();
    ds.grid_h = header.at("grid_h").get<int>();
    expected = header.at("n_demos").get<std::size_t>();
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(std::string("dataset header: ") + e.what());
  }
  std::size_t index = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    try {
      ds.demos.push_back(demo_from_json(nlohmann::json::parse(line), ds.grid_w, ds.grid_h));
    } catch (const std::exception& e) {
      throw std::runtime_error("dataset record " + std::to_string(index) + ": " + e.what());
    }
    ++index;
  }
  if (ds.demos.size() != expected) {
    throw std::runtime_error("truncated dataset: header lists " + std::to_string(expected) +
                             " records, file holds " + std::to_string(ds.demos.size()));
  }
  return ds;
}

}  // namespace flowplan
