#pragma once

#include "sotvae/config.hpp"
#include "sotvae/nn.hpp"

namespace sotvae {

// Co-attention along the batch axis: every text/frame position attends
// over the B samples of the mini-batch, synthesizing B-1 virtual samples
// per real sample. Training-time only; the inference path bypasses this
// module entirely.
class BatchAttention {
public:
    BatchAttention(ParamRegistry& reg, const ModelConfig& cfg, Rng& rng);

    struct Result {
        std::vector<TensorPtr> v_hat_e_b;  // per sample, [1 x d]
        std::vector<TensorPtr> v_hat_i_b;  // per sample, [1 x d]
    };

    // text_feats[i]: [p_i x d], frame_feats[i]: [k_i x d].
    Result operator()(const std::vector<TensorPtr>& text_feats,
                      const std::vector<TensorPtr>& frame_feats,
                      const ForwardCtx& ctx) const;

private:
    BatchAttnMode mode_;
    std::size_t d_;
    CoAttention coattn_b_;       // Full mode
    EncoderLayer bf_text_, bf_frames_;  // BatchFormer mode

    Result full_forward(const std::vector<TensorPtr>& text_feats,
                        const std::vector<TensorPtr>& frame_feats,
                        const ForwardCtx& ctx) const;
    Result batchformer_forward(const std::vector<TensorPtr>& text_feats,
                               const std::vector<TensorPtr>& frame_feats,
                               const ForwardCtx& ctx) const;
};

}  // namespace sotvae
