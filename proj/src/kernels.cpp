#include "tdsa/kernels.hpp"

#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace tdsa::kernels {

namespace {

Exec g_mode = Exec::parallel;
int g_threads = 0;  // 0 = OpenMP default

bool use_parallel(std::size_t work) {
#ifdef _OPENMP
  if (g_mode != Exec::parallel) return false;
  if (omp_in_parallel()) return false;  // no nested regions
  return work >= 16384;
#else
  (void)work;
  return false;
#endif
}

}  // namespace

Exec exec_mode() { return g_mode; }
void set_exec_mode(Exec mode) { g_mode = mode; }

int max_threads() {
#ifdef _OPENMP
  return g_threads > 0 ? g_threads : omp_get_max_threads();
#else
  return 1;
#endif
}

void set_max_threads(int n) {
  g_threads = n;
#ifdef _OPENMP
  if (n > 0) omp_set_num_threads(n);
#endif
}

double dot(const double* x, const double* y, std::size_t n) {
  double acc[8] = {0, 0, 0, 0, 0, 0, 0, 0};
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc[0] += x[i] * y[i];
    acc[1] += x[i + 1] * y[i + 1];
    acc[2] += x[i + 2] * y[i + 2];
    acc[3] += x[i + 3] * y[i + 3];
    acc[4] += x[i + 4] * y[i + 4];
    acc[5] += x[i + 5] * y[i + 5];
    acc[6] += x[i + 6] * y[i + 6];
    acc[7] += x[i + 7] * y[i + 7];
  }
  for (std::size_t l = 0; i < n; ++i, ++l) acc[l] += x[i] * y[i];
  return ((acc[0] + acc[1]) + (acc[2] + acc[3])) +
         ((acc[4] + acc[5]) + (acc[6] + acc[7]));
}

void hadamard(const double* a, const double* b, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i] * b[i];
}

void transpose(const double* a, double* at, std::size_t rows,
               std::size_t cols) {
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) at[c * rows + r] = a[r * cols + c];
}

void matmul_nt(const double* a, const double* b, double* c, std::size_t m,
               std::size_t k, std::size_t n, bool accumulate) {
  const std::size_t work = m * n * k;
  if (use_parallel(work)) {
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
    for (long long i = 0; i < static_cast<long long>(m); ++i) {
      const double* ai = a + static_cast<std::size_t>(i) * k;
      double* ci = c + static_cast<std::size_t>(i) * n;
      for (std::size_t j = 0; j < n; ++j) {
        double v = dot(ai, b + j * k, k);
        ci[j] = accumulate ? ci[j] + v : v;
      }
    }
    return;
#endif
  }
  for (std::size_t i = 0; i < m; ++i) {
    const double* ai = a + i * k;
    double* ci = c + i * n;
    for (std::size_t j = 0; j < n; ++j) {
      double v = dot(ai, b + j * k, k);
      ci[j] = accumulate ? ci[j] + v : v;
    }
  }
}

void matmul(const double* a, const double* b, double* c, std::size_t m,
            std::size_t k, std::size_t n, bool accumulate) {
  std::vector<double> bt(n * k);
  transpose(b, bt.data(), k, n);
  matmul_nt(a, bt.data(), c, m, k, n, accumulate);
}

void matmul_tn(const double* a, const double* b, double* c, std::size_t m,
               std::size_t k, std::size_t n, bool accumulate) {
  std::vector<double> at(k * m);
  transpose(a, at.data(), m, k);
  std::vector<double> bt(n * m);
  transpose(b, bt.data(), m, n);
  matmul_nt(at.data(), bt.data(), c, k, m, n, accumulate);
}

}  // namespace tdsa::kernels
