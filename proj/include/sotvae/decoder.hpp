#pragma once

#include "sotvae/config.hpp"
#include "sotvae/data.hpp"
#include "sotvae/nn.hpp"

namespace sotvae {

// The four context vectors the decoder's cross-attention blocks consume.
// v_s / v_z stay null for variants without the corresponding block.
struct DecoderContext {
    TensorPtr v_hat_i;  // [1 x d]
    TensorPtr v_hat_e;  // [1 x d]
    TensorPtr v_s;      // [1 x d] or null
    TensorPtr v_z;      // [1 x d] or null
};

// Scores = Sigmoid(W_pre * LayerNorm(W_I V_hat_I + W_e V_hat_e)); the
// softmax head is a config alternative.
class SentimentPredictor {
public:
    SentimentPredictor(ParamRegistry& reg, const ModelConfig& cfg, Rng& rng);

    TensorPtr logits(const TensorPtr& v_hat_i, const TensorPtr& v_hat_e) const;
    TensorPtr scores(const TensorPtr& v_hat_i, const TensorPtr& v_hat_e) const;
    int predict(const TensorPtr& v_hat_i, const TensorPtr& v_hat_e) const;

    bool softmax_head() const { return softmax_head_; }

private:
    Linear w_i_, w_e_, w_pre_;
    LayerNormModule ln_;
    bool softmax_head_;
};

struct GenerationResult {
    std::vector<int> tokens;       // content tokens, EOS stripped
    int sentiment = 0;             // conditioning class
    double mean_log_likelihood = 0.0;
    bool empty() const { return tokens.empty(); }
};

enum class DecodeMode { Greedy, Sample };

// Transformer comment decoder: per layer, causal self-attention over the
// generated prefix followed by cross-attention to frames, text, sentiment
// and latent contexts, then a feed-forward block. Shared between the main
// path and the batch-attention auxiliary path.
class CommentDecoder {
public:
    CommentDecoder(ParamRegistry& reg, const ModelConfig& cfg,
                   const Embedding& word_emb, Rng& rng);

    // Teacher forcing: feeds [BOS, y_0..y_{T-1}] and returns row-wise
    // log-probabilities [T+1 x V] predicting [y_0..y_{T-1}, EOS].
    TensorPtr forward_log_probs(const std::vector<int>& target,
                                const DecoderContext& dctx,
                                const ForwardCtx& ctx) const;

    // One-step distribution over the vocabulary given a prefix.
    TensorPtr step_distribution(const std::vector<int>& prefix,
                                const DecoderContext& dctx,
                                const ForwardCtx& ctx) const;

    GenerationResult generate(const DecoderContext& dctx, int sentiment,
                              std::size_t max_len, DecodeMode mode,
                              double temperature, Rng* rng) const;

    // Mean per-token log-likelihood of a candidate (EOS included).
    double score_sequence(const std::vector<int>& candidate,
                          const DecoderContext& dctx) const;

    bool has_sent_block() const { return has_sent_; }
    bool has_z_block() const { return has_z_; }

private:
    struct Layer {
        MultiHeadAttention self_attn, cross_i, cross_e, cross_s, cross_z;
        LayerNormModule ln_self, ln_i, ln_e, ln_s, ln_z, ln_ff;
        FeedForward ff;
    };
    std::vector<Layer> layers_;
    const Embedding* word_emb_;
    Linear out_proj_;
    bool has_sent_, has_z_;

    TensorPtr hidden_states(const std::vector<int>& input_ids,
                            const DecoderContext& dctx,
                            const ForwardCtx& ctx) const;
};

}  // namespace sotvae
