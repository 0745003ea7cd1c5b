#pragma once

#include "sotvae/config.hpp"
#include "sotvae/data.hpp"
#include "sotvae/nn.hpp"

namespace sotvae {

struct EncodedContext {
    TensorPtr v_i;      // [k x d] projected frame features
    TensorPtr v_e;      // [p x d] LSTM hidden states over surrounding tokens
    TensorPtr v_hat_i;  // [1 x d] attended visual representation
    TensorPtr v_hat_e;  // [1 x d] attended textual representation
    TensorPtr alpha_i;  // pooling weights over frames
    TensorPtr alpha_e;  // pooling weights over text positions
};

// Frame projection (pre-trained CNN stand-in), LSTM text encoder, and the
// textual-visual co-attention stack.
class MultiModalEncoder {
public:
    MultiModalEncoder(ParamRegistry& reg, const ModelConfig& cfg,
                      const Embedding& word_emb, Rng& rng);

    TensorPtr encode_frames(const std::vector<std::vector<double>>& frames) const;
    TensorPtr encode_text(const std::vector<int>& tokens,
                          const ForwardCtx& ctx) const;

    EncodedContext operator()(const CommentSample& sample,
                              const ForwardCtx& ctx) const;

    const CoAttention& coattn() const { return coattn_; }

private:
    std::size_t d_in_;
    Linear frame_proj_;
    const Embedding* word_emb_;
    LSTMCell lstm_;
    CoAttention coattn_;
    CoAttnOrder order_;
};

}  // namespace sotvae
