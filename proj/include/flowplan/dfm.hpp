#ifndef FLOWPLAN_DFM_HPP
#define FLOWPLAN_DFM_HPP

// Discrete flow matching over finite token alphabets.
//
// A clean sequence x^1 is connected to a noise distribution by a per-position
// interpolant p_{t|1}(x^t | x^1), t in [0,1] (t=0 pure noise, t=1 clean).
// Generation runs a continuous-time Markov chain backwards in t: a rate
// matrix R_t prescribes jump intensities, and an Euler discretization with
// step dt moves a sample from t to t+dt via
//     P(next = j | cur = x) = 1{x=j} + R_t(x, j) * dt.
//
// Two interpolant kinds are supported:
//   Mask     p_{t|1}(x|x1) = t*1{x=x1} + (1-t)*1{x=[M]}   ([M] = extra symbol)
//   Uniform  p_{t|1}(x|x1) = t*1{x=x1} + (1-t)/|X|        (mass on data only)

#include <functional>
#include <vector>

#include "flowplan/rng.hpp"

namespace flowplan {

enum class Interpolant { Mask, Uniform };

// A finite token alphabet with n_data "data" symbols 0..n_data-1 and an
// optional absorbing mask symbol at index n_data.
struct DiscreteSpace {
  int n_data = 0;
  bool has_mask = false;

  static DiscreteSpace data_only(int n) { return DiscreteSpace{n, false}; }
  static DiscreteSpace with_mask(int n) { return DiscreteSpace{n, true}; }

  int vocab() const { return n_data + (has_mask ? 1 : 0); }
  int mask_index() const;  // throws if the space has no mask symbol
  bool is_mask(int s) const { return has_mask && s == n_data; }
  bool is_data(int s) const { return s >= 0 && s < n_data; }
};

// p_{t|1}(xt | x1). x1 must be a data symbol; t in [0,1].
double interpolant_prob(Interpolant kind, const DiscreteSpace& sp, int x1, int xt, double t);

// d/dt p_{t|1}(xt | x1); constant in t for both kinds.
double interpolant_dprob(Interpolant kind, const DiscreteSpace& sp, int x1, int xt);

// Per-position independent draw from p_{t|1}(. | clean_k).
std::vector<int> corrupt(Interpolant kind, const DiscreteSpace& sp,
                         const std::vector<int>& clean, double t, Rng& rng);

// Conditional reverse rate R*_t(xt -> j | x1) for j != xt:
//   ReLU(d/dt p_{t|1}(j|x1) - d/dt p_{t|1}(xt|x1)) / (Z_t * p_{t|1}(xt|x1))
// where Z_t is the number of symbols carrying interpolant mass for t in the
// open interval (0,1): 2 for Mask, |X| for Uniform. Returns 0 when
// p_{t|1}(j|x1) = 0. Throws when p_{t|1}(xt|x1) = 0 (dead state) or t >= 1.
double rate_star(Interpolant kind, const DiscreteSpace& sp, int xt, int j, int x1, double t);

// Same value as rate_star but returns 0 for dead states and j == xt instead
// of throwing; used inside expectations over x1.
double rate_star_or_zero(Interpolant kind, const DiscreteSpace& sp, int xt, int j, int x1, double t);

// One row of the conditional rate matrix: off-diagonal rates out of xt plus
// the diagonal entry rate[xt] = -sum of off-diagonals (rows sum to zero).
struct RateRow {
  int xt = 0;
  std::vector<double> rate;  // size sp.vocab()
  double row_sum() const;
};
RateRow rate_row(Interpolant kind, const DiscreteSpace& sp, int xt, int x1, double t);

// Transition distribution (size sp.vocab()) of one Euler step for one
// position: expected rate under the posterior p1 (length sp.vocab(); mass on
// data symbols) times dt, with the stay probability on index xt. When the
// total jump mass exceeds 1 the jump probabilities are renormalized and the
// stay probability is 0.
std::vector<double> euler_transition_probs(Interpolant kind, const DiscreteSpace& sp,
                                           const double* p1, int xt, double t, double dt);

// Samples the next symbol from euler_transition_probs. Consumes no random
// draw when the jump mass is exactly zero (the position is frozen).
int euler_step_position(Interpolant kind, const DiscreteSpace& sp, const double* p1,
                        int xt, double t, double dt, Rng& rng);

// Per-position clean-symbol distributions for one stream: row k is the
// distribution over the stream's vocabulary (mask column 0 when present).
struct StreamProbs {
  int len = 0;
  int vocab = 0;
  std::vector<double> p;  // len * vocab, row-major
  const double* row(int k) const { return p.data() + static_cast<std::size_t>(k) * vocab; }
  double* row(int k) { return p.data() + static_cast<std::size_t>(k) * vocab; }
};

// Posterior predictor for several coupled streams: called with the current
// noisy streams and time t, returns one StreamProbs per stream.
using JointDenoiserFn = std::function<std::vector<StreamProbs>(
    const std::vector<std::vector<int>>& streams, double t)>;
using DenoiserFn = std::function<StreamProbs(const std::vector<int>& seq, double t)>;

// Noise endpoint p_0: all-mask for Mask, i.i.d. uniform over data for Uniform.
std::vector<int> noise_init(Interpolant kind, const DiscreteSpace& sp, int len, Rng& rng);

// Euler simulation of the reverse CTMC on the grid t = 0, dt, ..., 1-dt with
// dt = 1/i_max, factorized across positions and streams. For the Mask kind
// the final grid point is a deterministic finalization: every position still
// masked is set to the argmax (lowest index on ties) of the denoiser
// distribution over data symbols. With i_max = 1 this reduces to a single
// argmax decode of the denoiser at t = 0.
std::vector<std::vector<int>> simulate_reverse_ctmc_joint(
    const std::vector<std::vector<int>>& init, const std::vector<DiscreteSpace>& spaces,
    Interpolant kind, int i_max, const JointDenoiserFn& fn, Rng& rng);

std::vector<int> simulate_reverse_ctmc(const std::vector<int>& init, const DiscreteSpace& sp,
                                       Interpolant kind, int i_max, const DenoiserFn& fn,
                                       Rng& rng);

// A finite weighted set of clean sequences (all the same length).
struct WeightedDataset {
  std::vector<std::vector<int>> seqs;
  std::vector<double> weights;
};

// Exact per-position posterior over clean symbols given a noisy sequence:
// p(x1 | xt) obtained by enumerating the dataset and weighting each sequence
// by its interpolant likelihood. Throws when every sequence has zero
// likelihood. Serves as the reference denoiser in sampler-fidelity tests.
StreamProbs exact_posterior(const WeightedDataset& ds, const DiscreteSpace& sp,
                            Interpolant kind, const std::vector<int>& xt, double t);

}  // namespace flowplan

#endif  // FLOWPLAN_DFM_HPP
