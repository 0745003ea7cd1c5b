#pragma once

#include <cstdint>
#include <random>

namespace sotvae {

// Every source of randomness in the project flows through one of these,
// seeded explicitly. No global RNG state anywhere.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    double uniform() { return uni_(engine_); }
    double normal() { return norm_(engine_); }
    std::uint64_t next_u64() { return engine_(); }

    // Uniform integer in [0, n).
    std::size_t index(std::size_t n) {
        return std::uniform_int_distribution<std::size_t>(0, n - 1)(engine_);
    }

    // Derive an independent stream, e.g. one per sample.
    Rng fork(std::uint64_t salt) {
        return Rng(engine_() ^ (salt * 0x9e3779b97f4a7c15ULL));
    }

    std::mt19937_64& engine() { return engine_; }

private:
    std::mt19937_64 engine_;
    std::uniform_real_distribution<double> uni_{0.0, 1.0};
    std::normal_distribution<double> norm_{0.0, 1.0};
};

}  // namespace sotvae
