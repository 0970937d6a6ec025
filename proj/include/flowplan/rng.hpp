#ifndef FLOWPLAN_RNG_HPP
#define FLOWPLAN_RNG_HPP

// Deterministic random-number utilities. Every stochastic routine in the
// library takes an explicit Rng so that a single master seed reproduces the
// whole pipeline byte-for-byte, including under parallel execution (each
// parallel unit derives its own stream with make_rng).

#include <cstdint>
#include <random>
#include <stdexcept>
#include <vector>

namespace flowplan {

using Rng = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

// Independent stream `stream` derived from a master seed.
inline Rng make_rng(std::uint64_t master, std::uint64_t stream = 0) {
  return Rng(splitmix64(splitmix64(master) + stream));
}

// Uniform double in [0, 1). 53 random bits; identical on every platform.
inline double uniform_real(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// Uniform integer in [0, n). Multiply-shift; bias is O(2^-64).
inline int uniform_int(Rng& rng, int n) {
  if (n <= 0) throw std::invalid_argument("uniform_int: n must be positive");
  using u128 = unsigned __int128;
  return static_cast<int>((u128(rng()) * u128(n)) >> 64);
}

// Index sampled from unnormalized non-negative weights.
inline int sample_categorical(const double* w, int n, Rng& rng) {
  double total = 0.0;
  for (int i = 0; i < n; ++i) total += w[i];
  if (!(total > 0.0)) throw std::invalid_argument("sample_categorical: zero mass");
  double u = uniform_real(rng) * total;
  double acc = 0.0;
  int last_positive = -1;
  for (int i = 0; i < n; ++i) {
    if (w[i] > 0.0) last_positive = i;
    acc += w[i];
    if (u < acc) return i;
  }
  return last_positive;  // guards against round-off at u ~ total
}

template <class T>
void shuffle_vec(std::vector<T>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    std::size_t j = static_cast<std::size_t>(uniform_int(rng, static_cast<int>(i)));
    std::swap(v[i - 1], v[j]);
  }
}

}  // namespace flowplan

#endif  // FLOWPLAN_RNG_HPP
