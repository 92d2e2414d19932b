// Compares the serial reference kernels against the OpenMP versions, plus a
// full training-step timing at the default toy scale.

#include <chrono>
#include <cstdio>
#include <functional>
#include <vector>

#include "tdsa/config.hpp"
#include "tdsa/kernels.hpp"
#include "tdsa/rng.hpp"
#include "tdsa/train.hpp"

using namespace tdsa;
using Clock = std::chrono::steady_clock;

namespace {

double time_ms(const std::function<void()>& fn, int reps) {
  fn();  // warm up
  const auto t0 = Clock::now();
  for (int i = 0; i < reps; ++i) fn();
  const auto t1 = Clock::now();
  return std::chrono::duration<double, std::milli>(t1 - t0).count() / reps;
}

void report(const char* name, double serial_ms, double parallel_ms) {
  std::printf("%-28s serial %10.3f ms   parallel %10.3f ms   speedup %5.2fx\n",
              name, serial_ms, parallel_ms, serial_ms / parallel_ms);
}

}  // namespace

int main() {
  std::printf("threads available: %d\n\n", kernels::max_threads());

  {
    const std::size_t m = 256, k = 64, n = 256;
    Rng rng(7);
    std::vector<double> a(m * k), b(n * k), c(m * n);
    for (double& x : a) x = rng.normal();
    for (double& x : b) x = rng.normal();
    auto run = [&] { kernels::matmul_nt(a.data(), b.data(), c.data(), m, k, n, false); };
    kernels::set_exec_mode(kernels::Exec::serial);
    const double s = time_ms(run, 50);
    kernels::set_exec_mode(kernels::Exec::parallel);
    const double p = time_ms(run, 50);
    report("matmul_nt 256x64x256", s, p);
  }

  {
    TrainConfig cfg;
    cfg.grid_h = cfg.grid_w = 8;
    cfg.batch = 8;
    cfg.eval_scenes = 8;
    auto run_steps = [&](kernels::Exec mode) {
      kernels::set_exec_mode(mode);
      TrainState st = init_train_state(cfg);
      return time_ms([&] { train_step(st); }, 5);
    };
    const double s = run_steps(kernels::Exec::serial);
    const double p = run_steps(kernels::Exec::parallel);
    report("train step 8x8 batch 8", s, p);
  }

  {
    TrainConfig cfg;  // defaults: 16x16 grid, batch 16
    auto run_steps = [&](kernels::Exec mode) {
      kernels::set_exec_mode(mode);
      TrainState st = init_train_state(cfg);
      return time_ms([&] { train_step(st); }, 2);
    };
    const double s = run_steps(kernels::Exec::serial);
    const double p = run_steps(kernels::Exec::parallel);
    report("train step 16x16 batch 16", s, p);
  }
  return 0;
}
