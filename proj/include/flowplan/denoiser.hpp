#ifndef FLOWPLAN_DENOISER_HPP
#define FLOWPLAN_DENOISER_HPP

// Conditional transformer over trajectory token streams. One trunk serves two
// roles selected by TrunkLayout:
//
//   Joint        [cond | s_1..s_H | a_1..a_H | g_1..g_H] with full attention;
//                heads read per-position state/action/goal logits over the
//                data vocabulary (never the placeholder symbol). This is the
//                denoiser driven by the reverse-process sampler.
//   Interleaved  [cond | s_1 a_1 ... s_H a_H] with causal attention; action
//                logits are read at state positions and next-state logits at
//                action positions. This is the autoregressive baseline.
//
// The cond token sums grid, agent-pose, instruction, optional goal-hint, and
// (Joint only) sinusoidal time embeddings; the same vector also modulates
// every block through zero-initialised scale/shift projections, so at init
// each block is an unmodulated pre-norm transformer block.

#include <string>
#include <vector>

#include "flowplan/dfm.hpp"
#include "flowplan/observation.hpp"
#include "flowplan/params.hpp"
#include "flowplan/rng.hpp"
#include "flowplan/tensor.hpp"

namespace flowplan {

enum class TrunkLayout { Joint, Interleaved };

struct ArchConfig {
  int horizon = 8;
  int n_states = 16;  // data vocabulary sizes (placeholder symbol excluded)
  int n_actions = 6;
  int n_goals = 5;
  Interpolant kind = Interpolant::Mask;
  TrunkLayout layout = TrunkLayout::Joint;
  int embed_dim = 64;
  int n_blocks = 2;
  int n_heads = 4;
  int t_freqs = 8;  // sinusoidal time features: 2 * t_freqs dimensions
  int grid_w = 7, grid_h = 7, grid_c = 17;
  int n_instructions = 24;
  bool oracle_goal = false;  // condition on a known goal token when provided
  int n_ctx = 0;  // executed (state, action) pairs prepended as memory tokens

  int n_tokens() const {
    return layout == TrunkLayout::Joint ? 1 + 2 * n_ctx + 3 * horizon : 1 + 2 * horizon;
  }
  bool causal() const { return layout == TrunkLayout::Interleaved; }
  DiscreteSpace state_space() const { return make_space(n_states); }
  DiscreteSpace action_space() const { return make_space(n_actions); }
  DiscreteSpace goal_space() const { return make_space(n_goals); }

 private:
  DiscreteSpace make_space(int n) const {
    return kind == Interpolant::Mask ? DiscreteSpace::with_mask(n) : DiscreteSpace::data_only(n);
  }
};

std::string arch_to_json(const ArchConfig& cfg);
ArchConfig arch_from_json(const std::string& text);

struct DenoiserInput {
  ObservationEncoding obs;
  double t = 0.0;                        // denoising time in [0, 1)
  std::vector<int> states, actions, goals;  // horizon entries each; the
                                            // placeholder id equals the data
                                            // vocabulary size of the stream
  // Up to n_ctx most recent executed (state, action) pairs, oldest first;
  // missing slots embed as zero.
  std::vector<int> ctx_states, ctx_actions;
};

struct DenoiserOutput {
  Tensor state_logits;   // [horizon, n_states]
  Tensor action_logits;  // [horizon, n_actions]
  Tensor goal_logits;    // [horizon, n_goals]
};

struct BcOutput {
  Tensor action_logits;      // [horizon, n_actions], read at state positions
  Tensor next_state_logits;  // [horizon, n_states], read at action positions
};

// Registers and initialises every parameter the chosen layout needs: uniform
// fan-in weights, zero biases, unit norm gains, zero modulation projections.
void init_denoiser_params(ParamStore& ps, const ArchConfig& cfg, Rng& rng);

DenoiserOutput denoiser_forward(Graph& g, const ParamStore& ps, const ArchConfig& cfg,
                                const DenoiserInput& in);

BcOutput bc_forward(Graph& g, const ParamStore& ps, const ArchConfig& cfg,
                    const ObservationEncoding& obs, const std::vector<int>& states,
                    const std::vector<int>& actions);

}  // namespace flowplan

#endif  // FLOWPLAN_DENOISER_HPP
