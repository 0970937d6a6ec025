#ifndef FLOWPLAN_OBSERVATION_HPP
#define FLOWPLAN_OBSERVATION_HPP

#include <vector>

namespace flowplan {

// Dense per-cell feature planes for one fully observed grid snapshot plus the
// discrete context the policy conditions on. Kept free of any environment
// dependency so the network layer can be built and tested in isolation.
struct ObservationEncoding {
  int w = 0, h = 0, c = 0;     // grid extent and channels per cell
  std::vector<double> grid;    // indexed (y * w + x) * c + channel
  int agent_token = 0;         // discrete pose token of the acting agent
  int instruction_id = 0;      // task instruction index
  int oracle_goal_token = -1;  // optional goal hint token; -1 when absent

  double cell(int x, int y, int ch) const {
    return grid[static_cast<std::size_t>(y * w + x) * c + ch];
  }
  double& cell(int x, int y, int ch) {
    return grid[static_cast<std::size_t>(y * w + x) * c + ch];
  }
};

}  // namespace flowplan

#endif  // FLOWPLAN_OBSERVATION_HPP
