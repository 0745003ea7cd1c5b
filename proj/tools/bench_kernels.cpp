// Benchmarks the serial matrix kernels against the OpenMP variants over
// the shapes the model actually produces, and reports the crossover.
#include <chrono>
#include <cstdio>
#include <functional>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "sotvae/kernels.hpp"
#include "sotvae/rng.hpp"

namespace {

using Clock = std::chrono::steady_clock;

double time_ms(const std::function<void()>& fn, int reps) {
    fn();  // warm-up
    auto t0 = Clock::now();
    for (int r = 0; r < reps; ++r) fn();
    auto t1 = Clock::now();
    return std::chrono::duration<double, std::milli>(t1 - t0).count() / reps;
}

}  // namespace

int main() {
    sotvae::Rng rng(42);
#ifdef _OPENMP
    std::printf("openmp: enabled, max threads %d\n", omp_get_max_threads());
#else
    std::printf("openmp: disabled at build time\n");
#endif
    std::printf("%8s %8s %8s | %12s %12s %8s\n", "m", "k", "n", "serial_ms",
                "omp_ms", "speedup");

    // Shapes: attention projections, FFN blocks, and the output-vocabulary
    // projection at desk and full scale.
    struct Shape { std::size_t m, k, n; };
    const std::vector<Shape> shapes = {
        {16, 64, 64},   {32, 128, 128},  {64, 128, 512},  {20, 512, 2048},
        {128, 512, 512}, {256, 256, 256}, {512, 512, 512},
    };
    for (const auto& s : shapes) {
        std::vector<double> a(s.m * s.k), b(s.k * s.n), c(s.m * s.n);
        for (double& x : a) x = rng.normal();
        for (double& x : b) x = rng.normal();
        int reps = s.m * s.k * s.n > (1u << 24) ? 5 : 50;
        double serial = time_ms(
            [&] { sotvae::kernels::matmul_serial(a.data(), b.data(), c.data(),
                                                 s.m, s.k, s.n); },
            reps);
        double omp = time_ms(
            [&] { sotvae::kernels::matmul_omp(a.data(), b.data(), c.data(),
                                              s.m, s.k, s.n); },
            reps);
        std::printf("%8zu %8zu %8zu | %12.4f %12.4f %8.2fx\n", s.m, s.k, s.n,
                    serial, omp, serial / omp);
    }
    return 0;
}
