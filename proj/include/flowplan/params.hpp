#ifndef FLOWPLAN_PARAMS_HPP
#define FLOWPLAN_PARAMS_HPP

// Named parameter tensors with Adam state and binary checkpoint round-trip.
//
// Checkpoint layout (all integers little-endian, all floats IEEE binary64):
//   magic "FPCK" (4 bytes) | format version u32 | optimizer step u64
//   header length u64      | header bytes (UTF-8 JSON, caller-defined)
//   parameter count u32
//   per parameter, in insertion order:
//     name length u32 | name bytes | rows u32 | cols u32
//     rows*cols f64 values | rows*cols f64 Adam first moment | second moment
// Identical stores serialize to identical bytes.

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "flowplan/rng.hpp"
#include "flowplan/tensor.hpp"

namespace flowplan {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

class ParamStore {
 public:
  Tensor& add(const std::string& name, int rows, int cols);
  Tensor& at(const std::string& name);
  const Tensor& at(const std::string& name) const;
  bool has(const std::string& name) const { return tensors_.count(name) != 0; }
  const std::vector<std::string>& names() const { return names_; }

  void zero_grad();
  std::size_t n_scalars() const;
  std::int64_t step() const { return step_; }
  void set_step(std::int64_t s) { step_ = s; }

  // Bias-corrected Adam over every parameter. Returns false and leaves all
  // state untouched (including the step counter) when any gradient entry is
  // NaN or infinite.
  bool adam_step(const AdamConfig& cfg);

  std::vector<double>& moment1(const std::string& name) { return m_.at(name); }
  std::vector<double>& moment2(const std::string& name) { return v_.at(name); }
  const std::vector<double>& moment1(const std::string& name) const { return m_.at(name); }
  const std::vector<double>& moment2(const std::string& name) const { return v_.at(name); }

  // Uniform fan-in initialization: U(-1/sqrt(fan_in), 1/sqrt(fan_in)) with
  // fan_in = rows. Biases and modulation weights are zero-initialized by the
  // model builders instead.
  void init_uniform_fan_in(const std::string& name, Rng& rng);

 private:
  std::vector<std::string> names_;
  std::unordered_map<std::string, Tensor> tensors_;
  std::unordered_map<std::string, std::vector<double>> m_, v_;
  std::int64_t step_ = 0;
};

void save_checkpoint(const std::string& path, const ParamStore& ps, const std::string& header);
// Replaces the store contents; returns the header string.
std::string load_checkpoint(const std::string& path, ParamStore& ps);

}  // namespace flowplan

#endif  // FLOWPLAN_PARAMS_HPP
