// Timing harness for the dense kernels and the batched denoiser forward and
// backward passes, comparing the serial reference against the OpenMP variant
// and verifying that both produce bitwise-identical results.
//
// Usage: bench_kernels [reps]

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <vector>

#include "flowplan/denoiser.hpp"
#include "flowplan/kernels.hpp"
#include "flowplan/ops.hpp"
#include "flowplan/rng.hpp"

using namespace flowplan;

namespace {

double now_ms() {
  using clock = std::chrono::steady_clock;
  return std::chrono::duration<double, std::milli>(clock::now().time_since_epoch()).count();
}

std::vector<double> random_mat(int rows, int cols, Rng& rng) {
  std::vector<double> m(static_cast<std::size_t>(rows) * cols);
  for (double& v : m) v = uniform_real(rng) * 2.0 - 1.0;
  return m;
}

using Kernel = void (*)(const double*, const double*, double*, int, int, int, bool);

// Median-of-reps wall time for one kernel at one shape.
double time_kernel(Kernel k, const std::vector<double>& a, const std::vector<double>& b,
                   std::vector<double>& c, int m, int kk, int n, int reps) {
  std::vector<double> times;
  for (int r = 0; r < reps; ++r) {
    double t0 = now_ms();
    k(a.data(), b.data(), c.data(), m, kk, n, false);
    times.push_back(now_ms() - t0);
  }
  std::sort(times.begin(), times.end());
  return times[times.size() / 2];
}

void bench_matmul(int reps) {
  struct Shape {
    const char* name;
    Kernel serial, omp;
  };
  const Shape kernels[] = {
      {"mm", mm_serial, mm_omp},
      {"mm_nt", mm_nt_serial, mm_nt_omp},
      {"mm_tn", mm_tn_serial, mm_tn_omp},
  };
  const int sizes[] = {32, 128, 512};

  std::printf("%-8s %6s %12s %12s %9s %10s %8s\n", "kernel", "size", "serial_ms", "omp_ms",
              "speedup", "gflops_omp", "match");
  Rng rng = make_rng(42);
  for (const Shape& sh : kernels) {
    for (int s : sizes) {
      std::vector<double> a = random_mat(s, s, rng);
      std::vector<double> b = random_mat(s, s, rng);
      std::vector<double> c1(static_cast<std::size_t>(s) * s);
      std::vector<double> c2(static_cast<std::size_t>(s) * s);
      double ts = time_kernel(sh.serial, a, b, c1, s, s, s, reps);
      double tp = time_kernel(sh.omp, a, b, c2, s, s, s, reps);
      bool match = std::memcmp(c1.data(), c2.data(), c1.size() * sizeof(double)) == 0;
      double flops = 2.0 * s * s * s;
      std::printf("%-8s %6d %12.3f %12.3f %8.2fx %10.2f %8s\n", sh.name, s, ts, tp,
                  tp > 0.0 ? ts / tp : 0.0, flops / (tp * 1e6), match ? "yes" : "NO");
      if (!match) std::exit(1);
    }
  }
}

void bench_denoiser(int reps) {
  ArchConfig arch;
  arch.horizon = 24;
  arch.n_states = 7 * 7 * 4;
  arch.n_actions = 6;
  arch.n_goals = 7 * 7 + 1;
  arch.embed_dim = 64;
  arch.n_blocks = 2;
  arch.n_heads = 4;
  arch.grid_w = 7;
  arch.grid_h = 7;
  arch.grid_c = 17;

  Rng rng = make_rng(7);
  ParamStore ps;
  init_denoiser_params(ps, arch, rng);

  DenoiserInput in;
  in.obs.w = arch.grid_w;
  in.obs.h = arch.grid_h;
  in.obs.c = arch.grid_c;
  in.obs.grid = random_mat(arch.grid_w * arch.grid_h, arch.grid_c, rng);
  in.obs.agent_token = 37;
  in.obs.instruction_id = 1;
  in.t = 0.5;
  for (int h = 0; h < arch.horizon; ++h) {
    in.states.push_back(uniform_int(rng, arch.n_states));
    in.actions.push_back(uniform_int(rng, arch.n_actions));
    in.goals.push_back(uniform_int(rng, arch.n_goals));
  }

  auto run_once = [&](bool with_grad) {
    Graph g(with_grad);
    DenoiserOutput out = denoiser_forward(g, ps, arch, in);
    if (with_grad) {
      Tensor loss = mean_row_entropy(g, out.action_logits);
      g.backward(loss);
    }
    return out.action_logits.data()[0];
  };

  std::printf("\n%-22s %6s %12s %10s\n", "pass", "reps", "median_ms", "per_ms");
  for (int workers : {1, max_workers()}) {
    set_workers(workers);
    for (bool grad : {false, true}) {
      std::vector<double> times;
      double sink = 0.0;
      for (int r = 0; r < reps; ++r) {
        double t0 = now_ms();
        sink += run_once(grad);
        times.push_back(now_ms() - t0);
      }
      std::sort(times.begin(), times.end());
      std::printf("%s(workers=%d)%*s %6d %12.3f %10.3f\n",
                  grad ? "forward+backward" : "forward", workers,
                  grad ? 4 : 13, "", reps, times[times.size() / 2], times[times.size() / 2]);
      if (sink == 12345.6789) std::printf("#");  // keep the optimizer honest
    }
  }
  set_workers(max_workers());
}

}  // namespace

int main(int argc, char** argv) {
  int reps = argc > 1 ? std::atoi(argv[1]) : 9;
  if (reps < 1) reps = 1;
  std::printf("workers available: %d\n\n", max_workers());
  bench_matmul(reps);
  bench_denoiser(reps);
  return 0;
}
