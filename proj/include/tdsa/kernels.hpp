#pragma once

#include <cstddef>

// Low-level numeric kernels shared by every tensor operation.
//
// Each kernel has one out-of-line definition so that every call site goes
// through identical machine code: two code paths that compute the same
// quantity (e.g. the plain and the modulated slot update) produce
// bit-identical doubles because they round through the same instructions.
//
// The parallel mode distributes independent output rows over OpenMP threads;
// per-element computation order is unchanged, so serial and parallel modes
// are bit-identical as well. The serial mode is the reference the tests
// compare against.

namespace tdsa::kernels {

enum class Exec { serial, parallel };

Exec exec_mode();
void set_exec_mode(Exec mode);
int max_threads();
void set_max_threads(int n);

// 8-lane unrolled dot product; fixed summation grouping.
double dot(const double* x, const double* y, std::size_t n);

// out[i] = a[i] * b[i]
void hadamard(const double* a, const double* b, double* out, std::size_t n);

// at[c * rows + r] = a[r * cols + c]
void transpose(const double* a, double* at, std::size_t rows, std::size_t cols);

// c[m x n] (+)= a[m x k] * b[n x k]^T, i.e. c(i,j) = dot(row_i(a), row_j(b)).
void matmul_nt(const double* a, const double* b, double* c, std::size_t m,
               std::size_t k, std::size_t n, bool accumulate);

// c[m x n] (+)= a[m x k] * b[k x n]
void matmul(const double* a, const double* b, double* c, std::size_t m,
            std::size_t k, std::size_t n, bool accumulate);

// c[k x n] (+)= a[m x k]^T * b[m x n]
void matmul_tn(const double* a, const double* b, double* c, std::size_t m,
               std::size_t k, std::size_t n, bool accumulate);

}  // namespace tdsa::kernels
