#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "sotvae/config.hpp"
#include "sotvae/nn.hpp"

namespace sotvae {

// Adam moment estimates, keyed by parameter name, so training can resume
// bitwise-identically from a saved state.
struct OptimizerState {
    std::uint64_t step = 0;
    std::map<std::string, std::vector<double>> m;
    std::map<std::string, std::vector<double>> v;
};

struct Checkpoint {
    ModelConfig config;
    std::uint64_t epoch = 0;
    std::map<std::string,
             std::pair<std::vector<std::size_t>, std::vector<double>>>
        tensors;
    std::optional<OptimizerState> opt;
};

// Binary format: magic line, config hash, serialized config, epoch, then
// name -> (shape, little-endian doubles) records, then optional moments.
void save_checkpoint(const std::string& path, const ParamRegistry& reg,
                     const ModelConfig& cfg, std::uint64_t epoch,
                     const OptimizerState* opt = nullptr);

Checkpoint load_checkpoint(const std::string& path);

// Copies loaded values into a registry built from the same config;
// throws if a name or shape does not line up.
void apply_checkpoint(const Checkpoint& ckpt, ParamRegistry& reg);

}  // namespace sotvae
