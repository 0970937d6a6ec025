#include "flowplan/kernels.hpp"

#include <omp.h>

#include <cstring>

namespace flowplan {

int max_workers() { return omp_get_max_threads(); }
void set_workers(int n) { omp_set_num_threads(n); }
bool in_parallel_region() { return omp_in_parallel() != 0; }

namespace {

// Below this many multiply-adds the parallel fork costs more than it saves.
constexpr long kParallelThreshold = 1 << 15;

inline bool go_parallel(int m, int k, int n) {
  return static_cast<long>(m) * k * n >= kParallelThreshold && max_workers() > 1 &&
         !in_parallel_region();
}

inline void mm_row(const double* a, const double* b, double* c, int k, int n, bool acc, int i) {
  double* ci = c + static_cast<std::size_t>(i) * n;
  if (!acc) std::memset(ci, 0, sizeof(double) * n);
  const double* ai = a + static_cast<std::size_t>(i) * k;
  for (int kk = 0; kk < k; ++kk) {
    const double av = ai[kk];
    if (av == 0.0) continue;
    const double* bk = b + static_cast<std::size_t>(kk) * n;
    for (int j = 0; j < n; ++j) ci[j] += av * bk[j];
  }
}

inline void mm_nt_row(const double* a, const double* b, double* c, int k, int n, bool acc, int i) {
  const double* ai = a + static_cast<std::size_t>(i) * k;
  double* ci = c + static_cast<std::size_t>(i) * n;
  for (int j = 0; j < n; ++j) {
    const double* bj = b + static_cast<std::size_t>(j) * k;
    double s = 0.0;
    for (int kk = 0; kk < k; ++kk) s += ai[kk] * bj[kk];
    ci[j] = acc ? ci[j] + s : s;
  }
}

inline void mm_tn_row(const double* a, const double* b, double* c, int m, int k, int n, bool acc,
                      int kk) {
  double* ck = c + static_cast<std::size_t>(kk) * n;
  if (!acc) std::memset(ck, 0, sizeof(double) * n);
  for (int i = 0; i < m; ++i) {
    const double av = a[static_cast<std::size_t>(i) * k + kk];
    if (av == 0.0) continue;
    const double* bi = b + static_cast<std::size_t>(i) * n;
    for (int j = 0; j < n; ++j) ck[j] += av * bi[j];
  }
}

}  // namespace

void mm_serial(const double* a, const double* b, double* c, int m, int k, int n, bool acc) {
  for (int i = 0; i < m; ++i) mm_row(a, b, c, k, n, acc, i);
}

void mm_omp(const double* a, const double* b, double* c, int m, int k, int n, bool acc) {
#pragma omp parallel for schedule(static)
  for (int i = 0; i < m; ++i) mm_row(a, b, c, k, n, acc, i);
}

void mm(const double* a, const double* b, double* c, int m, int k, int n, bool acc) {
  if (go_parallel(m, k, n)) {
    mm_omp(a, b, c, m, k, n, acc);
  } else {
    mm_serial(a, b, c, m, k, n, acc);
  }
}

void mm_nt_serial(const double* a, const double* b, double* c, int m, int k, int n, bool acc) {
  for (int i = 0; i < m; ++i) mm_nt_row(a, b, c, k, n, acc, i);
}

void mm_nt_omp(const double* a, const double* b, double* c, int m, int k, int n, bool acc) {
#pragma omp parallel for schedule(static)
  for (int i = 0; i < m; ++i) mm_nt_row(a, b, c, k, n, acc, i);
}

void mm_nt(const double* a, const double* b, double* c, int m, int k, int n, bool acc) {
  if (go_parallel(m, k, n)) {
    mm_nt_omp(a, b, c, m, k, n, acc);
  } else {
    mm_nt_serial(a, b, c, m, k, n, acc);
  }
}

void mm_tn_serial(const double* a, const double* b, double* c, int m, int k, int n, bool acc) {
  for (int kk = 0; kk < k; ++kk) mm_tn_row(a, b, c, m, k, n, acc, kk);
}

void mm_tn_omp(const double* a, const double* b, double* c, int m, int k, int n, bool acc) {
#pragma omp parallel for schedule(static)
  for (int kk = 0; kk < k; ++kk) mm_tn_row(a, b, c, m, k, n, acc, kk);
}

void mm_tn(const double* a, const double* b, double* c, int m, int k, int n, bool acc) {
  if (go_parallel(m, k, n)) {
    mm_tn_omp(a, b, c, m, k, n, acc);
  } else {
    mm_tn_serial(a, b, c, m, k, n, acc);
  }
}

}  // namespace flowplan
