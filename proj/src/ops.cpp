#include "flowplan/ops.hpp"

#include <cmath>
#include <cstring>
#include <stdexcept>

#include "flowplan/kernels.hpp"

namespace flowplan {

namespace {

void require(bool cond, const char* msg) {
  if (!cond) throw std::invalid_argument(msg);
}

constexpr double kMaskedScore = -1e30;
constexpr double kLnEps = 1e-5;  // layer-norm variance floor

}  // namespace

void softmax_row_inplace(double* z, int n) {
  double mx = z[0];
  for (int j = 1; j < n; ++j) mx = std::max(mx, z[j]);
  double sum = 0.0;
  for (int j = 0; j < n; ++j) {
    z[j] = std::exp(z[j] - mx);
    sum += z[j];
  }
  for (int j = 0; j < n; ++j) z[j] /= sum;
}

int argmax_row(const double* z, int n) {
  int best = 0;
  for (int j = 1; j < n; ++j) {
    if (z[j] > z[best]) best = j;
  }
  return best;
}

Tensor matmul(Graph& g, const Tensor& a, const Tensor& b) {
  require(a.cols() == b.rows(), "matmul: inner dimensions differ");
  Tensor c = g.make(a.rows(), b.cols());
  mm(a.data(), b.data(), c.data(), a.rows(), a.cols(), b.cols(), false);
  g.record([a, b, c]() mutable {
    if (a.grad()) mm_nt(c.grad(), b.data(), a.grad(), c.rows(), c.cols(), a.cols(), true);
    if (b.grad()) mm_tn(a.data(), c.grad(), b.grad(), a.rows(), a.cols(), c.cols(), true);
  });
  return c;
}

Tensor matmul_nt(Graph& g, const Tensor& a, const Tensor& b) {
  require(a.cols() == b.cols(), "matmul_nt: inner dimensions differ");
  Tensor c = g.make(a.rows(), b.rows());
  mm_nt(a.data(), b.data(), c.data(), a.rows(), a.cols(), b.rows(), false);
  g.record([a, b, c]() mutable {
    if (a.grad()) mm(c.grad(), b.data(), a.grad(), c.rows(), c.cols(), b.cols(), true);
    if (b.grad()) mm_tn(c.grad(), a.data(), b.grad(), c.rows(), c.cols(), a.cols(), true);
  });
  return c;
}

Tensor add(Graph& g, const Tensor& a, const Tensor& b) { return add_scaled(g, a, b, 1.0); }

Tensor add_scaled(Graph& g, const Tensor& a, const Tensor& b, double cb) {
  require(a.rows() == b.rows() && a.cols() == b.cols(), "add: shapes differ");
  Tensor c = g.make(a.rows(), a.cols());
  for (std::size_t i = 0; i < c.size(); ++i) c.data()[i] = a.data()[i] + cb * b.data()[i];
  g.record([a, b, c, cb]() mutable {
    if (a.grad()) {
      for (std::size_t i = 0; i < c.size(); ++i) a.grad()[i] += c.grad()[i];
    }
    if (b.grad()) {
      for (std::size_t i = 0; i < c.size(); ++i) b.grad()[i] += cb * c.grad()[i];
    }
  });
  return c;
}

Tensor add_bias(Graph& g, const Tensor& a, const Tensor& bias) {
  require(bias.rows() == 1 && bias.cols() == a.cols(), "add_bias: bias must be [1, cols]");
  Tensor c = g.make(a.rows(), a.cols());
  const int n = a.cols();
  for (int i = 0; i < a.rows(); ++i) {
    for (int j = 0; j < n; ++j) c.at(i, j) = a.at(i, j) + bias.at(0, j);
  }
  g.record([a, bias, c]() mutable {
    if (a.grad()) {
      for (std::size_t i = 0; i < c.size(); ++i) a.grad()[i] += c.grad()[i];
    }
    if (bias.grad()) {
      for (int i = 0; i < c.rows(); ++i) {
        for (int j = 0; j < c.cols(); ++j) bias.grad()[j] += c.grad()[i * c.cols() + j];
      }
    }
  });
  return c;
}

Tensor scale(Graph& g, const Tensor& a, double cv) {
  Tensor c = g.make(a.rows(), a.cols());
  for (std::size_t i = 0; i < c.size(); ++i) c.data()[i] = cv * a.data()[i];
  g.record([a, c, cv]() mutable {
    if (a.grad()) {
      for (std::size_t i = 0; i < c.size(); ++i) a.grad()[i] += cv * c.grad()[i];
    }
  });
  return c;
}

Tensor gelu(Graph& g, const Tensor& a) {
  Tensor c = g.make(a.rows(), a.cols());
  constexpr double s = 0.7978845608028654;  // sqrt(2/pi)
  constexpr double q = 0.044715;
  for (std::size_t i = 0; i < c.size(); ++i) {
    double x = a.data()[i];
    c.data()[i] = 0.5 * x * (1.0 + std::tanh(s * (x + q * x * x * x)));
  }
  g.record([a, c]() mutable {
    if (!a.grad()) return;
    for (std::size_t i = 0; i < c.size(); ++i) {
      double x = a.data()[i];
      double u = s * (x + q * x * x * x);
      double th = std::tanh(u);
      double dgdx = 0.5 * (1.0 + th) + 0.5 * x * (1.0 - th * th) * s * (1.0 + 3.0 * q * x * x);
      a.grad()[i] += dgdx * c.grad()[i];
    }
  });
  return c;
}

Tensor softmax_rows(Graph& g, const Tensor& a) {
  Tensor c = g.make(a.rows(), a.cols());
  const int n = a.cols();
  for (int i = 0; i < a.rows(); ++i) {
    std::memcpy(c.data() + static_cast<std::size_t>(i) * n,
                a.data() + static_cast<std::size_t>(i) * n, sizeof(double) * n);
    softmax_row_inplace(c.data() + static_cast<std::size_t>(i) * n, n);
  }
  g.record([a, c]() mutable {
    if (!a.grad()) return;
    const int nn = c.cols();
    for (int i = 0; i < c.rows(); ++i) {
      const double* p = c.data() + static_cast<std::size_t>(i) * nn;
      const double* dy = c.grad() + static_cast<std::size_t>(i) * nn;
      double dot = 0.0;
      for (int j = 0; j < nn; ++j) dot += dy[j] * p[j];
      double* dz = a.grad() + static_cast<std::size_t>(i) * nn;
      for (int j = 0; j < nn; ++j) dz[j] += p[j] * (dy[j] - dot);
    }
  });
  return c;
}

Tensor causal_mask(Graph& g, const Tensor& scores) {
  require(scores.rows() == scores.cols(), "causal_mask: square score matrix expected");
  Tensor c = g.make(scores.rows(), scores.cols());
  for (int i = 0; i < scores.rows(); ++i) {
    for (int j = 0; j < scores.cols(); ++j) {
      c.at(i, j) = j <= i ? scores.at(i, j) : kMaskedScore;
    }
  }
  g.record([scores, c]() mutable {
    if (!scores.grad()) return;
    for (int i = 0; i < c.rows(); ++i) {
      for (int j = 0; j <= i; ++j) {
        scores.grad()[i * c.cols() + j] += c.grad()[i * c.cols() + j];
      }
    }
  });
  return c;
}

Tensor layer_norm(Graph& g, const Tensor& x, const Tensor& gain, const Tensor& bias) {
  require(gain.rows() == 1 && gain.cols() == x.cols(), "layer_norm: gain must be [1, cols]");
  require(bias.rows() == 1 && bias.cols() == x.cols(), "layer_norm: bias must be [1, cols]");
  const int n = x.cols();
  Tensor c = g.make(x.rows(), n);
  Tensor xhat(x.rows(), n, false);
  Tensor inv_sigma(x.rows(), 1, false);
  for (int i = 0; i < x.rows(); ++i) {
    double mu = 0.0;
    for (int j = 0; j < n; ++j) mu += x.at(i, j);
    mu /= n;
    double var = 0.0;
    for (int j = 0; j < n; ++j) {
      double d = x.at(i, j) - mu;
      var += d * d;
    }
    var /= n;
    double is = 1.0 / std::sqrt(var + kLnEps);
    inv_sigma.at(i, 0) = is;
    for (int j = 0; j < n; ++j) {
      double xh = (x.at(i, j) - mu) * is;
      xhat.at(i, j) = xh;
      c.at(i, j) = xh * gain.at(0, j) + bias.at(0, j);
    }
  }
  g.record([x, gain, bias, c, xhat, inv_sigma]() mutable {
    const int nn = x.cols();
    for (int i = 0; i < x.rows(); ++i) {
      const double* dy = c.grad() + static_cast<std::size_t>(i) * nn;
      double sum_dxhat = 0.0, sum_dxhat_xhat = 0.0;
      for (int j = 0; j < nn; ++j) {
        double dxhat = dy[j] * gain.at(0, j);
        sum_dxhat += dxhat;
        sum_dxhat_xhat += dxhat * xhat.at(i, j);
      }
      if (x.grad()) {
        double is = inv_sigma.at(i, 0);
        for (int j = 0; j < nn; ++j) {
          double dxhat = dy[j] * gain.at(0, j);
          x.grad()[i * nn + j] +=
              is * (dxhat - sum_dxhat / nn - xhat.at(i, j) * sum_dxhat_xhat / nn);
        }
      }
      if (gain.grad()) {
        for (int j = 0; j < nn; ++j) gain.grad()[j] += dy[j] * xhat.at(i, j);
      }
      if (bias.grad()) {
        for (int j = 0; j < nn; ++j) bias.grad()[j] += dy[j];
      }
    }
  });
  return c;
}

namespace {

Tensor embedding_impl(Graph& g, const Tensor& table, const std::vector<int>& ids,
                      bool zero_for_oob) {
  const int v = table.rows();
  const int e = table.cols();
  Tensor c = g.make(static_cast<int>(ids.size()), e);
  for (std::size_t k = 0; k < ids.size(); ++k) {
    int id = ids[k];
    if (id == v && zero_for_oob) continue;  // masked token: zero contribution
    if (id < 0 || id >= v) throw std::out_of_range("embedding: id outside the table");
    std::memcpy(c.data() + k * e, table.data() + static_cast<std::size_t>(id) * e,
                sizeof(double) * e);
  }
  g.record([table, ids, c, v, e]() mutable {
    if (!table.grad()) return;
    for (std::size_t k = 0; k < ids.size(); ++k) {
      int id = ids[k];
      if (id >= v) continue;
      for (int j = 0; j < e; ++j) {
        table.grad()[static_cast<std::size_t>(id) * e + j] += c.grad()[k * e + j];
      }
    }
  });
  return c;
}

}  // namespace

Tensor embedding(Graph& g, const Tensor& table, const std::vector<int>& ids) {
  return embedding_impl(g, table, ids, false);
}

Tensor embedding_or_zero(Graph& g, const Tensor& table, const std::vector<int>& ids) {
  return embedding_impl(g, table, ids, true);
}

Tensor film(Graph& g, const Tensor& x, const Tensor& sc, const Tensor& sh) {
  require(sc.rows() == 1 && sc.cols() == x.cols(), "film: scale must be [1, cols]");
  require(sh.rows() == 1 && sh.cols() == x.cols(), "film: shift must be [1, cols]");
  Tensor c = g.make(x.rows(), x.cols());
  const int n = x.cols();
  for (int i = 0; i < x.rows(); ++i) {
    for (int j = 0; j < n; ++j) {
      c.at(i, j) = x.at(i, j) * (1.0 + sc.at(0, j)) + sh.at(0, j);
    }
  }
  g.record([x, sc, sh, c]() mutable {
    const int nn = x.cols();
    for (int i = 0; i < x.rows(); ++i) {
      const double* dy = c.grad() + static_cast<std::size_t>(i) * nn;
      for (int j = 0; j < nn; ++j) {
        if (x.grad()) x.grad()[i * nn + j] += dy[j] * (1.0 + sc.at(0, j));
        if (sc.grad()) sc.grad()[j] += dy[j] * x.at(i, j);
        if (sh.grad()) sh.grad()[j] += dy[j];
      }
    }
  });
  return c;
}

Tensor slice_rows(Graph& g, const Tensor& x, int start, int len) {
  require(start >= 0 && len >= 0 && start + len <= x.rows(), "slice_rows: range out of bounds");
  Tensor c = g.make(len, x.cols());
  std::memcpy(c.data(), x.data() + static_cast<std::size_t>(start) * x.cols(),
              sizeof(double) * c.size());
  g.record([x, c, start]() mutable {
    if (!x.grad()) return;
    for (std::size_t i = 0; i < c.size(); ++i) {
      x.grad()[static_cast<std::size_t>(start) * x.cols() + i] += c.grad()[i];
    }
  });
  return c;
}

Tensor concat_rows(Graph& g, const std::vector<Tensor>& xs) {
  require(!xs.empty(), "concat_rows: empty input");
  int rows = 0;
  const int cols = xs[0].cols();
  for (const auto& x : xs) {
    require(x.cols() == cols, "concat_rows: column counts differ");
    rows += x.rows();
  }
  Tensor c = g.make(rows, cols);
  int at = 0;
  for (const auto& x : xs) {
    std::memcpy(c.data() + static_cast<std::size_t>(at) * cols, x.data(),
                sizeof(double) * x.size());
    at += x.rows();
  }
  g.record([xs, c, cols]() mutable {
    int off = 0;
    for (auto& x : xs) {
      if (x.grad()) {
        for (std::size_t i = 0; i < x.size(); ++i) {
          x.grad()[i] += c.grad()[static_cast<std::size_t>(off) * cols + i];
        }
      }
      off += x.rows();
    }
  });
  return c;
}

Tensor slice_cols(Graph& g, const Tensor& x, int start, int len) {
  require(start >= 0 && len >= 0 && start + len <= x.cols(), "slice_cols: range out of bounds");
  Tensor c = g.make(x.rows(), len);
  for (int i = 0; i < x.rows(); ++i) {
    std::memcpy(c.data() + static_cast<std::size_t>(i) * len,
                x.data() + static_cast<std::size_t>(i) * x.cols() + start, sizeof(double) * len);
  }
  g.record([x, c, start, len]() mutable {
    if (!x.grad()) return;
    for (int i = 0; i < c.rows(); ++i) {
      for (int j = 0; j < len; ++j) {
        x.grad()[static_cast<std::size_t>(i) * x.cols() + start + j] +=
            c.grad()[static_cast<std::size_t>(i) * len + j];
      }
    }
  });
  return c;
}

Tensor concat_cols(Graph& g, const std::vector<Tensor>& xs) {
  require(!xs.empty(), "concat_cols: empty input");
  const int rows = xs[0].rows();
  int cols = 0;
  for (const auto& x : xs) {
    require(x.rows() == rows, "concat_cols: row counts differ");
    cols += x.cols();
  }
  Tensor c = g.make(rows, cols);
  int off = 0;
  for (const auto& x : xs) {
    for (int i = 0; i < rows; ++i) {
      std::memcpy(c.data() + static_cast<std::size_t>(i) * cols + off,
                  x.data() + static_cast<std::size_t>(i) * x.cols(), sizeof(double) * x.cols());
    }
    off += x.cols();
  }
  g.record([xs, c, cols]() mutable {
    int off2 = 0;
    for (auto& x : xs) {
      if (x.grad()) {
        for (int i = 0; i < x.rows(); ++i) {
          for (int j = 0; j < x.cols(); ++j) {
            x.grad()[static_cast<std::size_t>(i) * x.cols() + j] +=
                c.grad()[static_cast<std::size_t>(i) * cols + off2 + j];
          }
        }
      }
      off2 += x.cols();
    }
  });
  return c;
}

Tensor masked_cross_entropy(Graph& g, const Tensor& logits, const std::vector<int>& targets,
                            const std::vector<unsigned char>& mask) {
  require(static_cast<int>(targets.size()) == logits.rows(), "cross_entropy: one target per row");
  require(mask.size() == targets.size(), "cross_entropy: one mask flag per row");
  const int n = logits.cols();
  int cnt = 0;
  for (unsigned char m : mask) cnt += (m != 0);
  Tensor c = g.make(1, 1);
  Tensor probs(logits.rows(), n, false);  // cached softmax rows for the adjoint
  double loss = 0.0;
  for (int i = 0; i < logits.rows(); ++i) {
    if (!mask[i]) continue;
    require(targets[i] >= 0 && targets[i] < n, "cross_entropy: target outside vocabulary");
    const double* z = logits.data() + static_cast<std::size_t>(i) * n;
    double* p = probs.data() + static_cast<std::size_t>(i) * n;
    std::memcpy(p, z, sizeof(double) * n);
    softmax_row_inplace(p, n);
    double mx = z[0];
    for (int j = 1; j < n; ++j) mx = std::max(mx, z[j]);
    double sum = 0.0;
    for (int j = 0; j < n; ++j) sum += std::exp(z[j] - mx);
    loss += (std::log(sum) + mx) - z[targets[i]];
  }
  c.data()[0] = cnt > 0 ? loss / cnt : 0.0;
  g.record([logits, targets, mask, probs, c, cnt, n]() mutable {
    if (!logits.grad() || cnt == 0) return;
    const double go = c.grad()[0] / cnt;
    for (int i = 0; i < logits.rows(); ++i) {
      if (!mask[i]) continue;
      const double* p = probs.data() + static_cast<std::size_t>(i) * n;
      double* dz = logits.grad() + static_cast<std::size_t>(i) * n;
      for (int j = 0; j < n; ++j) dz[j] += go * (p[j] - (j == targets[i] ? 1.0 : 0.0));
    }
  });
  return c;
}

Tensor mean_row_entropy(Graph& g, const Tensor& logits) {
  const int n = logits.cols();
  const int rows = logits.rows();
  require(rows > 0, "mean_row_entropy: empty input");
  Tensor c = g.make(1, 1);
  Tensor probs(rows, n, false);
  Tensor row_h(rows, 1, false);
  double total = 0.0;
  for (int i = 0; i < rows; ++i) {
    double* p = probs.data() + static_cast<std::size_t>(i) * n;
    std::memcpy(p, logits.data() + static_cast<std::size_t>(i) * n, sizeof(double) * n);
    softmax_row_inplace(p, n);
    double h = 0.0;
    for (int j = 0; j < n; ++j) {
      if (p[j] > 0.0) h -= p[j] * std::log(p[j]);
    }
    row_h.at(i, 0) = h;
    total += h;
  }
  c.data()[0] = total / rows;
  g.record([logits, probs, row_h, c, n, rows]() mutable {
    if (!logits.grad()) return;
    const double go = c.grad()[0] / rows;
    for (int i = 0; i < rows; ++i) {
      const double* p = probs.data() + static_cast<std::size_t>(i) * n;
      double* dz = logits.grad() + static_cast<std::size_t>(i) * n;
      const double h = row_h.at(i, 0);
      for (int j = 0; j < n; ++j) {
        if (p[j] > 0.0) dz[j] += go * (-p[j] * (std::log(p[j]) + h));
      }
    }
  });
  return c;
}

}  // namespace flowplan
