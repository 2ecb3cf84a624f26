#pragma once

#include <cstdint>

// Dense kernels behind the tensor layer. Each has a serial reference
// implementation and an OpenMP variant that partitions work by output row,
// so results are bitwise identical at any thread count. The omp variants
// fall back to the serial path below a size threshold.
//
// All matrices are row-major, double precision.

namespace lsim::kern {

// Caps the OpenMP fan-out for every kernel and higher-level loop in the
// toolkit. 0 means "hardware default". Thread count never changes results.
void set_max_threads(int n);
int max_threads();

// c[m x n] = a[m x k] * b[k x n]
void matmul_nn_serial(const double* a, const double* b, double* c, int64_t m, int64_t k, int64_t n);
void matmul_nn_omp(const double* a, const double* b, double* c, int64_t m, int64_t k, int64_t n);

// c[m x n] = a[m x k] * b[n x k]^T   (b stored row-major n x k)
void matmul_nt_serial(const double* a, const double* b, double* c, int64_t m, int64_t k, int64_t n);
void matmul_nt_omp(const double* a, const double* b, double* c, int64_t m, int64_t k, int64_t n);

// c[k x n] += a[m x k]^T * b[m x n]  (accumulating; caller zeroes c)
void matmul_tn_acc_serial(const double* a, const double* b, double* c, int64_t m, int64_t k, int64_t n);
void matmul_tn_acc_omp(const double* a, const double* b, double* c, int64_t m, int64_t k, int64_t n);

// Accumulating variants of the first two (c += product), for gradient sums.
void matmul_nn_acc_serial(const double* a, const double* b, double* c, int64_t m, int64_t k, int64_t n);
void matmul_nn_acc_omp(const double* a, const double* b, double* c, int64_t m, int64_t k, int64_t n);
void matmul_nt_acc_serial(const double* a, const double* b, double* c, int64_t m, int64_t k, int64_t n);
void matmul_nt_acc_omp(const double* a, const double* b, double* c, int64_t m, int64_t k, int64_t n);

// Dispatchers used by the tensor layer: omp when big enough, else serial.
void matmul_nn(const double* a, const double* b, double* c, int64_t m, int64_t k, int64_t n);
void matmul_nt(const double* a, const double* b, double* c, int64_t m, int64_t k, int64_t n);
void matmul_tn_acc(const double* a, const double* b, double* c, int64_t m, int64_t k, int64_t n);
void matmul_nn_acc(const double* a, const double* b, double* c, int64_t m, int64_t k, int64_t n);
void matmul_nt_acc(const double* a, const double* b, double* c, int64_t m, int64_t k, int64_t n);

}  // namespace lsim::kern
