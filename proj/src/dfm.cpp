#include "flowplan/dfm.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace flowplan {

namespace {

void check_time_closed(double t) {
  if (!(t >= 0.0 && t <= 1.0)) throw std::invalid_argument("time must lie in [0,1]");
}

void check_clean_symbol(const DiscreteSpace& sp, int x1) {
  if (!sp.is_data(x1)) throw std::invalid_argument("clean symbol must be a data symbol");
}

void check_symbol(const DiscreteSpace& sp, int x) {
  if (x < 0 || x >= sp.vocab()) throw std::invalid_argument("symbol outside the vocabulary");
}

// Number of symbols carrying interpolant mass for t in the open interval
// (0,1); evaluated there even at the endpoints so rates stay continuous.
int support_size(Interpolant kind, const DiscreteSpace& sp) {
  return kind == Interpolant::Mask ? 2 : sp.n_data;
}

// Whether x carries interpolant mass for t in the open interval (0,1).
bool in_support(Interpolant kind, const DiscreteSpace& sp, int x1, int x) {
  if (kind == Interpolant::Mask) return x == x1 || sp.is_mask(x);
  return sp.is_data(x);
}

}  // namespace

int DiscreteSpace::mask_index() const {
  if (!has_mask) throw std::logic_error("space has no mask symbol");
  return n_data;
}

double interpolant_prob(Interpolant kind, const DiscreteSpace& sp, int x1, int xt, double t) {
  check_time_closed(t);
  check_clean_symbol(sp, x1);
  check_symbol(sp, xt);
  if (kind == Interpolant::Mask) {
    if (!sp.has_mask) throw std::invalid_argument("mask interpolant needs a mask symbol");
    double p = 0.0;
    if (xt == x1) p += t;
    if (sp.is_mask(xt)) p += 1.0 - t;
    return p;
  }
  if (sp.is_mask(xt)) return 0.0;  // uniform noise lives on data symbols only
  return (xt == x1 ? t : 0.0) + (1.0 - t) / sp.n_data;
}

double interpolant_dprob(Interpolant kind, const DiscreteSpace& sp, int x1, int xt) {
  check_clean_symbol(sp, x1);
  check_symbol(sp, xt);
  if (kind == Interpolant::Mask) {
    if (xt == x1) return 1.0;
    if (sp.is_mask(xt)) return -1.0;
    return 0.0;
  }
  if (sp.is_mask(xt)) return 0.0;
  return (xt == x1 ? 1.0 : 0.0) - 1.0 / sp.n_data;
}

std::vector<int> corrupt(Interpolant kind, const DiscreteSpace& sp, const std::vector<int>& clean,
                         double t, Rng& rng) {
  check_time_closed(t);
  std::vector<int> out(clean.size());
  for (std::size_t k = 0; k < clean.size(); ++k) {
    check_clean_symbol(sp, clean[k]);
    if (uniform_real(rng) < t) {
      out[k] = clean[k];
    } else if (kind == Interpolant::Mask) {
      out[k] = sp.mask_index();
    } else {
      out[k] = uniform_int(rng, sp.n_data);
    }
  }
  return out;
}

double rate_star_or_zero(Interpolant kind, const DiscreteSpace& sp, int xt, int j, int x1,
                         double t) {
  if (j == xt) return 0.0;
  if (!in_support(kind, sp, x1, xt) || !in_support(kind, sp, x1, j)) return 0.0;
  double num = interpolant_dprob(kind, sp, x1, j) - interpolant_dprob(kind, sp, x1, xt);
  if (num <= 0.0) return 0.0;
  // num > 0 implies xt != x1, whose conditional mass is positive for t < 1.
  double pxt = interpolant_prob(kind, sp, x1, xt, t);
  return num / (support_size(kind, sp) * pxt);
}

double rate_star(Interpolant kind, const DiscreteSpace& sp, int xt, int j, int x1, double t) {
  if (!(t >= 0.0 && t < 1.0)) throw std::invalid_argument("rates are defined for t in [0,1)");
  check_clean_symbol(sp, x1);
  check_symbol(sp, xt);
  check_symbol(sp, j);
  if (!in_support(kind, sp, x1, xt)) {
    throw std::domain_error("dead state: the current symbol has zero conditional mass");
  }
  return rate_star_or_zero(kind, sp, xt, j, x1, t);
}

double RateRow::row_sum() const {
  double s = 0.0;
  for (double r : rate) s += r;
  return s;
}

RateRow rate_row(Interpolant kind, const DiscreteSpace& sp, int xt, int x1, double t) {
  RateRow row;
  row.xt = xt;
  row.rate.assign(sp.vocab(), 0.0);
  double off = 0.0;
  for (int j = 0; j < sp.vocab(); ++j) {
    if (j == xt) continue;
    row.rate[j] = rate_star(kind, sp, xt, j, x1, t);
    off += row.rate[j];
  }
  row.rate[xt] = -off;
  return row;
}

std::vector<double> euler_transition_probs(Interpolant kind, const DiscreteSpace& sp,
                                           const double* p1, int xt, double t, double dt) {
  if (!(t >= 0.0 && t < 1.0)) throw std::invalid_argument("steps are defined for t in [0,1)");
  if (!(dt > 0.0)) throw std::invalid_argument("dt must be positive");
  check_symbol(sp, xt);
  std::vector<double> probs(sp.vocab(), 0.0);
  // Expected reverse rate under the posterior p1, in closed form: probability
  // mass flows toward each data symbol j at p1[j]/(1-t); a revealed mask-kind
  // position is frozen (no conditional path leaves it).
  double scale = dt / (1.0 - t);
  double total = 0.0;
  if (kind == Interpolant::Mask ? sp.is_mask(xt) : true) {
    for (int j = 0; j < sp.n_data; ++j) {
      if (j == xt) continue;
      probs[j] = p1[j] * scale;
      total += probs[j];
    }
  }
  if (total > 1.0) {
    for (int j = 0; j < sp.n_data; ++j) {
      if (j != xt) probs[j] /= total;
    }
    total = 1.0;
  }
  probs[xt] = 1.0 - total;
  return probs;
}

int euler_step_position(Interpolant kind, const DiscreteSpace& sp, const double* p1, int xt,
                        double t, double dt, Rng& rng) {
  auto probs = euler_transition_probs(kind, sp, p1, xt, t, dt);
  if (probs[xt] >= 1.0) return xt;  // frozen: consume no randomness
  return sample_categorical(probs.data(), sp.vocab(), rng);
}

std::vector<int> noise_init(Interpolant kind, const DiscreteSpace& sp, int len, Rng& rng) {
  std::vector<int> seq(len);
  if (kind == Interpolant::Mask) {
    std::fill(seq.begin(), seq.end(), sp.mask_index());
  } else {
    for (auto& s : seq) s = uniform_int(rng, sp.n_data);
  }
  return seq;
}

namespace {

int argmax_data(const DiscreteSpace& sp, const double* row) {
  int best = 0;
  for (int j = 1; j < sp.n_data; ++j) {
    if (row[j] > row[best]) best = j;
  }
  return best;
}

bool any_mask(const std::vector<DiscreteSpace>& spaces,
              const std::vector<std::vector<int>>& streams) {
  for (std::size_t s = 0; s < streams.size(); ++s) {
    for (int x : streams[s]) {
      if (spaces[s].is_mask(x)) return true;
    }
  }
  return false;
}

}  // namespace

std::vector<std::vector<int>> simulate_reverse_ctmc_joint(
    const std::vector<std::vector<int>>& init, const std::vector<DiscreteSpace>& spaces,
    Interpolant kind, int i_max, const JointDenoiserFn& fn, Rng& rng) {
  if (i_max < 1) throw std::invalid_argument("i_max must be at least 1");
  if (init.size() != spaces.size()) throw std::invalid_argument("one space per stream required");
  auto streams = init;
  const double dt = 1.0 / i_max;
  for (int i = 0; i < i_max; ++i) {
    // A fully revealed mask-kind state can no longer move.
    if (kind == Interpolant::Mask && !any_mask(spaces, streams)) break;
    const double t = static_cast<double>(i) / i_max;
    auto probs = fn(streams, t);
    if (probs.size() != streams.size()) throw std::runtime_error("denoiser returned wrong arity");
    const bool final_grid_point = (i == i_max - 1);
    for (std::size_t s = 0; s < streams.size(); ++s) {
      const auto& sp = spaces[s];
      for (std::size_t k = 0; k < streams[s].size(); ++k) {
        if (kind == Interpolant::Mask && final_grid_point) {
          // Deterministic finalization: resolve residual masks by argmax.
          if (sp.is_mask(streams[s][k])) {
            streams[s][k] = argmax_data(sp, probs[s].row(static_cast<int>(k)));
          }
        } else {
          streams[s][k] = euler_step_position(kind, sp, probs[s].row(static_cast<int>(k)),
                                              streams[s][k], t, dt, rng);
        }
      }
    }
  }
  return streams;
}

std::vector<int> simulate_reverse_ctmc(const std::vector<int>& init, const DiscreteSpace& sp,
                                       Interpolant kind, int i_max, const DenoiserFn& fn,
                                       Rng& rng) {
  JointDenoiserFn joint = [&fn](const std::vector<std::vector<int>>& streams, double t) {
    return std::vector<StreamProbs>{fn(streams[0], t)};
  };
  return simulate_reverse_ctmc_joint({init}, {sp}, kind, i_max, joint, rng)[0];
}

StreamProbs exact_posterior(const WeightedDataset& ds, const DiscreteSpace& sp, Interpolant kind,
                            const std::vector<int>& xt, double t) {
  if (ds.seqs.empty() || ds.seqs.size() != ds.weights.size()) {
    throw std::invalid_argument("dataset must be non-empty with one weight per sequence");
  }
  const int len = static_cast<int>(xt.size());
  StreamProbs out;
  out.len = len;
  out.vocab = sp.vocab();
  out.p.assign(static_cast<std::size_t>(len) * sp.vocab(), 0.0);

  std::vector<double> score(ds.seqs.size(), 0.0);
  double total = 0.0;
  for (std::size_t i = 0; i < ds.seqs.size(); ++i) {
    const auto& seq = ds.seqs[i];
    if (static_cast<int>(seq.size()) != len) {
      throw std::invalid_argument("dataset sequences must match the query length");
    }
    if (ds.weights[i] < 0.0) throw std::invalid_argument("weights must be non-negative");
    double like = ds.weights[i];
    for (int k = 0; k < len && like > 0.0; ++k) {
      like *= interpolant_prob(kind, sp, seq[k], xt[k], t);
    }
    score[i] = like;
    total += like;
  }
  if (!(total > 0.0)) {
    throw std::domain_error("noisy sequence has zero likelihood under every dataset sequence");
  }
  for (std::size_t i = 0; i < ds.seqs.size(); ++i) {
    if (score[i] <= 0.0) continue;
    double w = score[i] / total;
    for (int k = 0; k < len; ++k) out.row(k)[ds.seqs[i][k]] += w;
  }
  return out;
}

}  // namespace flowplan
