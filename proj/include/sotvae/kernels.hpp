#pragma once

#include <cstddef>

// Dense kernels. Each has a serial reference implementation and an
// OpenMP-parallel one; dispatch picks the parallel path for problem
// sizes where the fork overhead pays off. The serial versions are the
// ground truth the parallel ones are tested against.
namespace sotvae::kernels {

// C[m x n] += A[m x k] * B[k x n], row-major.
void matmul_serial(const double* a, const double* b, double* c,
                   std::size_t m, std::size_t k, std::size_t n);
void matmul_omp(const double* a, const double* b, double* c,
                std::size_t m, std::size_t k, std::size_t n);
void matmul(const double* a, const double* b, double* c,
            std::size_t m, std::size_t k, std::size_t n);

// C[m x k] += A[m x n] * B^T[n x k]  (B stored k x n row-major).
void matmul_bt_serial(const double* a, const double* b, double* c,
                      std::size_t m, std::size_t n, std::size_t k);
void matmul_bt_omp(const double* a, const double* b, double* c,
                   std::size_t m, std::size_t n, std::size_t k);
void matmul_bt(const double* a, const double* b, double* c,
               std::size_t m, std::size_t n, std::size_t k);

// C[k x n] += A^T[k x m] * B[m x n]  (A stored m x k row-major).
void matmul_at_serial(const double* a, const double* b, double* c,
                      std::size_t m, std::size_t k, std::size_t n);
void matmul_at_omp(const double* a, const double* b, double* c,
                   std::size_t m, std::size_t k, std::size_t n);
void matmul_at(const double* a, const double* b, double* c,
               std::size_t m, std::size_t k, std::size_t n);

// Minimum m*k*n before the OpenMP path is taken.
void set_parallel_threshold(std::size_t flops);
std::size_t parallel_threshold();

}  // namespace sotvae::kernels
