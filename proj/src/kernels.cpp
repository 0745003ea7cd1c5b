#include "sotvae/kernels.hpp"

#include <atomic>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace sotvae::kernels {

namespace {
std::atomic<std::size_t> g_threshold{1u << 17};
}

void set_parallel_threshold(std::size_t flops) { g_threshold.store(flops); }
std::size_t parallel_threshold() { return g_threshold.load(); }

void matmul_serial(const double* a, const double* b, double* c,
                   std::size_t m, std::size_t k, std::size_t n) {
    for (std::size_t i = 0; i < m; ++i) {
        const double* arow = a + i * k;
        double* crow = c + i * n;
        for (std::size_t p = 0; p < k; ++p) {
            const double aip = arow[p];
            const double* brow = b + p * n;
            for (std::size_t j = 0; j < n; ++j) crow[j] += aip * brow[j];
        }
    }
}

void matmul_omp(const double* a, const double* b, double* c,
                std::size_t m, std::size_t k, std::size_t n) {
#pragma omp parallel for schedule(static)
    for (long long i = 0; i < (long long)m; ++i) {
        const double* arow = a + i * k;
        double* crow = c + i * n;
        for (std::size_t p = 0; p < k; ++p) {
            const double aip = arow[p];
            const double* brow = b + p * n;
#pragma omp simd
            for (std::size_t j = 0; j < n; ++j) crow[j] += aip * brow[j];
        }
    }
}

void matmul(const double* a, const double* b, double* c,
            std::size_t m, std::size_t k, std::size_t n) {
#ifdef _OPENMP
    if (m * k * n >= g_threshold.load() && omp_get_max_threads() > 1) {
        matmul_omp(a, b, c, m, k, n);
        return;
    }
#endif
    matmul_serial(a, b, c, m, k, n);
}

// A[m x n] * B^T where B is k x n: C[i][j] = dot(A_row_i, B_row_j).
void matmul_bt_serial(const double* a, const double* b, double* c,
                      std::size_t m, std::size_t n, std::size_t k) {
    for (std::size_t i = 0; i < m; ++i) {
        const double* arow = a + i * n;
        double* crow = c + i * k;
        for (std::size_t j = 0; j < k; ++j) {
            const double* brow = b + j * n;
            double acc = 0.0;
            for (std::size_t p = 0; p < n; ++p) acc += arow[p] * brow[p];
            crow[j] += acc;
        }
    }
}

void matmul_bt_omp(const double* a, const double* b, double* c,
                   std::size_t m, std::size_t n, std::size_t k) {
#pragma omp parallel for schedule(static)
    for (long long i = 0; i < (long long)m; ++i) {
        const double* arow = a + i * n;
        double* crow = c + i * k;
        for (std::size_t j = 0; j < k; ++j) {
            const double* brow = b + j * n;
            double acc = 0.0;
#pragma omp simd reduction(+ : acc)
            for (std::size_t p = 0; p < n; ++p) acc += arow[p] * brow[p];
            crow[j] += acc;
        }
    }
}

void matmul_bt(const double* a, const double* b, double* c,
               std::size_t m, std::size_t n, std::size_t k) {
#ifdef _OPENMP
    if (m * n * k >= g_threshold.load() && omp_get_max_threads() > 1) {
        matmul_bt_omp(a, b, c, m, n, k);
        return;
    }
#endif
    matmul_bt_serial(a, b, c, m, n, k);
}

// A^T * B where A is m x k: C[p][j] = sum_i A[i][p] * B[i][j].
void matmul_at_serial(const double* a, const double* b, double* c,
                      std::size_t m, std::size_t k, std::size_t n) {
    for (std::size_t i = 0; i < m; ++i) {
        const double* arow = a + i * k;
        const double* brow = b + i * n;
        for (std::size_t p = 0; p < k; ++p) {
            const double aip = arow[p];
            double* crow = c + p * n;
            for (std::size_t j = 0; j < n; ++j) crow[j] += aip * brow[j];
        }
    }
}

void matmul_at_omp(const double* a, const double* b, double* c,
                   std::size_t m, std::size_t k, std::size_t n) {
#pragma omp parallel for schedule(static)
    for (long long p = 0; p < (long long)k; ++p) {
        double* crow = c + p * n;
        for (std::size_t i = 0; i < m; ++i) {
            const double aip = a[i * k + p];
            const double* brow = b + i * n;
#pragma omp simd
            for (std::size_t j = 0; j < n; ++j) crow[j] += aip * brow[j];
        }
    }
}

void matmul_at(const double* a, const double* b, double* c,
               std::size_t m, std::size_t k, std::size_t n) {
#ifdef _OPENMP
    if (m * k * n >= g_threshold.load() && omp_get_max_threads() > 1) {
        matmul_at_omp(a, b, c, m, k, n);
        return;
    }
#endif
    matmul_at_serial(a, b, c, m, k, n);
}

}  // namespace sotvae::kernels
