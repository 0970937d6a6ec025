#ifndef FLOWPLAN_TENSOR_HPP
#define FLOWPLAN_TENSOR_HPP

// Row-major 2-D tensors with shared storage plus a tape-based reverse-mode
// graph. Ops (ops.hpp) compute forward results eagerly and push a backward
// closure onto the Graph; Graph::backward seeds the loss gradient and replays
// the tape in reverse. One Graph instance corresponds to one forward pass.

#include <functional>
#include <memory>
#include <stdexcept>
#include <vector>

namespace flowplan {

class Tensor {
 public:
  Tensor() = default;
  Tensor(int rows, int cols, bool with_grad)
      : rows_(rows),
        cols_(cols),
        data_(std::make_shared<std::vector<double>>(static_cast<std::size_t>(rows) * cols, 0.0)) {
    if (rows < 0 || cols < 0) throw std::invalid_argument("negative tensor shape");
    if (with_grad) {
      grad_ = std::make_shared<std::vector<double>>(static_cast<std::size_t>(rows) * cols, 0.0);
    }
  }

  bool defined() const { return static_cast<bool>(data_); }
  int rows() const { return rows_; }
  int cols() const { return cols_; }
  std::size_t size() const { return static_cast<std::size_t>(rows_) * cols_; }

  // Tensor is a shared-ownership handle: copies alias the same buffers, so
  // storage access is deliberately shallow-const (like std::shared_ptr).
  double* data() const { return data_->data(); }
  bool has_grad() const { return static_cast<bool>(grad_); }
  double* grad() const { return grad_ ? grad_->data() : nullptr; }

  double& at(int r, int c) const { return (*data_)[static_cast<std::size_t>(r) * cols_ + c]; }

  void zero_grad() {
    if (grad_) std::fill(grad_->begin(), grad_->end(), 0.0);
  }

 private:
  int rows_ = 0, cols_ = 0;
  std::shared_ptr<std::vector<double>> data_;
  std::shared_ptr<std::vector<double>> grad_;
};

class Graph {
 public:
  explicit Graph(bool grad_enabled = true) : grad_enabled_(grad_enabled) {}

  bool grad_enabled() const { return grad_enabled_; }

  Tensor make(int rows, int cols) { return Tensor(rows, cols, grad_enabled_); }

  void record(std::function<void()> backward_fn) {
    if (grad_enabled_) tape_.push_back(std::move(backward_fn));
  }

  // Seeds d(loss)/d(loss) = 1 and replays the tape once, in reverse.
  void backward(Tensor& loss) {
    if (!grad_enabled_) throw std::logic_error("backward on a gradient-disabled graph");
    if (loss.size() != 1 || !loss.has_grad()) {
      throw std::invalid_argument("backward expects a scalar with gradient storage");
    }
    loss.grad()[0] += 1.0;
    for (auto it = tape_.rbegin(); it != tape_.rend(); ++it) (*it)();
    tape_.clear();
  }

  std::size_t tape_size() const { return tape_.size(); }

 private:
  bool grad_enabled_;
  std::vector<std::function<void()>> tape_;
};

}  // namespace flowplan

#endif  // FLOWPLAN_TENSOR_HPP
