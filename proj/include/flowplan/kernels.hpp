#ifndef FLOWPLAN_KERNELS_HPP
#define FLOWPLAN_KERNELS_HPP

// Dense matrix kernels underneath the autodiff ops. Every kernel exists in a
// serial and an OpenMP variant; both compute each output element with the
// same inner-loop order, so results are bitwise identical for any worker
// count. The un-suffixed entry points dispatch on problem size and current
// nesting (inside an already-parallel region the serial path is used).

#include <cstddef>

namespace flowplan {

int max_workers();
void set_workers(int n);
bool in_parallel_region();

// c[m,n] = a[m,k] * b[k,n]       (acc: add into c instead of overwriting)
void mm_serial(const double* a, const double* b, double* c, int m, int k, int n, bool acc);
void mm_omp(const double* a, const double* b, double* c, int m, int k, int n, bool acc);
void mm(const double* a, const double* b, double* c, int m, int k, int n, bool acc);

// c[m,n] = a[m,k] * b[n,k]^T
void mm_nt_serial(const double* a, const double* b, double* c, int m, int k, int n, bool acc);
void mm_nt_omp(const double* a, const double* b, double* c, int m, int k, int n, bool acc);
void mm_nt(const double* a, const double* b, double* c, int m, int k, int n, bool acc);

// c[k,n] = a[m,k]^T * b[m,n]
void mm_tn_serial(const double* a, const double* b, double* c, int m, int k, int n, bool acc);
void mm_tn_omp(const double* a, const double* b, double* c, int m, int k, int n, bool acc);
void mm_tn(const double* a, const double* b, double* c, int m, int k, int n, bool acc);

}  // namespace flowplan

#endif  // FLOWPLAN_KERNELS_HPP
