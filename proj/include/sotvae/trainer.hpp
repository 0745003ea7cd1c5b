#pragma once

#include <string>
#include <vector>

#include "sotvae/checkpoint.hpp"
#include "sotvae/config.hpp"
#include "sotvae/data.hpp"
#include "sotvae/model.hpp"

namespace sotvae {

// Standard Adam with bias correction over a parameter registry.
class Adam {
public:
    explicit Adam(ParamRegistry& reg, double beta1 = 0.9, double beta2 = 0.999,
                  double eps = 1e-8);

    void step(double lr);

    OptimizerState state() const;
    void load_state(const OptimizerState& st);

private:
    ParamRegistry* reg_;
    double beta1_, beta2_, eps_;
    std::uint64_t t_ = 0;
    std::map<std::string, std::vector<double>> m_, v_;
};

double global_grad_norm(const ParamRegistry& reg);
// Scales all gradients down so the global norm is at most max_norm.
void clip_gradients(ParamRegistry& reg, double max_norm);

struct EpochLog {
    std::size_t epoch = 0;
    double lr = 0, rc = 0, rc_aux = 0, z = 0, pre = 0, total = 0;
};

struct TrainLog {
    std::vector<EpochLog> epochs;
    std::string to_csv() const;
};

// Deterministic 90/10-style split: shuffle with the seed, last fraction
// becomes the test split.
void split_corpus(const Corpus& all, double test_fraction, std::uint64_t seed,
                  Corpus& train, Corpus& test);

// Runs the batched Adam loop with the decayed learning-rate schedule;
// writes per-epoch checkpoints under out_dir when it is non-empty.
// start_epoch/resume_opt support continuing from a saved checkpoint.
// Throws on non-finite loss, naming the offending epoch and step.
TrainLog train_model(SoTvae& model, const Corpus& train_split,
                     const TrainConfig& tcfg, const std::string& out_dir = "",
                     std::size_t start_epoch = 0,
                     const OptimizerState* resume_opt = nullptr);

}  // namespace sotvae
