#pragma once

#include <map>
#include <string>
#include <vector>

#include "sotvae/tensor.hpp"

namespace sotvae {

// All learnable tensors live here, keyed by a unique path. Iteration
// order is the key order, which keeps checkpoints and the optimizer
// deterministic.
class ParamRegistry {
public:
    TensorPtr create(const std::string& name, std::vector<std::size_t> shape,
                     Rng& rng, double stddev);
    TensorPtr create_zeros(const std::string& name, std::vector<std::size_t> shape);
    TensorPtr create_ones(const std::string& name, std::vector<std::size_t> shape);

    // Registers an externally built tensor (used for parameter sharing
    // checks and tests).
    void adopt(const std::string& name, const TensorPtr& t);

    const std::map<std::string, TensorPtr>& params() const { return params_; }
    TensorPtr at(const std::string& name) const;
    void zero_grads();

private:
    std::map<std::string, TensorPtr> params_;
};

// Passed through every forward call: training flag plus the dropout
// stream for this step.
struct ForwardCtx {
    bool training = false;
    Rng* rng = nullptr;
    double dropout = 0.0;

    TensorPtr drop(const TensorPtr& x) const {
        if (!training || dropout <= 0.0) return x;
        return sotvae::dropout(x, dropout, *rng, true);
    }
};

struct Linear {
    TensorPtr w;  // [in x out]
    TensorPtr b;  // [out], may be null
    Linear() = default;
    Linear(ParamRegistry& reg, const std::string& name, std::size_t in,
           std::size_t out, Rng& rng, bool bias = true);
    TensorPtr operator()(const TensorPtr& x) const;
};

struct Embedding {
    TensorPtr table;  // [count x d]
    Embedding() = default;
    Embedding(ParamRegistry& reg, const std::string& name, std::size_t count,
              std::size_t d, Rng& rng);
    TensorPtr operator()(const std::vector<int>& ids) const {
        return embedding_rows(table, ids);
    }
};

struct LayerNormModule {
    TensorPtr gain;
    TensorPtr bias;
    LayerNormModule() = default;
    LayerNormModule(ParamRegistry& reg, const std::string& name, std::size_t d);
    TensorPtr operator()(const TensorPtr& x) const {
        return layer_norm(x, gain, bias);
    }
};

// Scaled dot-product multi-head attention with output projection.
// attn_bias (optional, Lq*Lk additive logits, ~-1e30 for masked slots)
// is shared across heads. attn_out, when non-null, receives the
// per-head attention weight matrices.
struct MultiHeadAttention {
    std::size_t heads = 1;
    Linear wq, wk, wv, wo;
    MultiHeadAttention() = default;
    MultiHeadAttention(ParamRegistry& reg, const std::string& name, std::size_t d,
                       std::size_t heads, Rng& rng);
    TensorPtr operator()(const TensorPtr& q, const TensorPtr& k, const TensorPtr& v,
                         const std::vector<double>* attn_bias = nullptr,
                         std::vector<TensorPtr>* attn_out = nullptr) const;
};

struct FeedForward {
    Linear in, out;
    FeedForward() = default;
    FeedForward(ParamRegistry& reg, const std::string& name, std::size_t d,
                std::size_t ffn, Rng& rng);
    TensorPtr operator()(const TensorPtr& x) const {
        return out(relu_op(in(x)));
    }
};

// Post-norm Transformer encoder layer: self-attention + FFN.
struct EncoderLayer {
    MultiHeadAttention attn;
    LayerNormModule ln1, ln2;
    FeedForward ff;
    EncoderLayer() = default;
    EncoderLayer(ParamRegistry& reg, const std::string& name, std::size_t d,
                 std::size_t heads, std::size_t ffn, Rng& rng);
    TensorPtr operator()(const TensorPtr& x, const ForwardCtx& ctx,
                         const std::vector<double>* attn_bias = nullptr) const;
};

// Cross-attention layer: queries from y, keys/values from x.
struct CrossLayer {
    MultiHeadAttention attn;
    LayerNormModule ln1, ln2;
    FeedForward ff;
    CrossLayer() = default;
    CrossLayer(ParamRegistry& reg, const std::string& name, std::size_t d,
               std::size_t heads, std::size_t ffn, Rng& rng);
    TensorPtr operator()(const TensorPtr& y, const TensorPtr& x, const ForwardCtx& ctx,
                         const std::vector<double>* attn_bias = nullptr) const;
};

struct LSTMCell {
    std::size_t hidden = 0;
    TensorPtr wx;  // [in x 4H], gate order i,f,g,o
    TensorPtr wh;  // [H x 4H]
    TensorPtr b;   // [4H]
    LSTMCell() = default;
    LSTMCell(ParamRegistry& reg, const std::string& name, std::size_t in,
             std::size_t hidden, Rng& rng);
    // x [1 x in], h/c [1 x H] -> (h', c')
    std::pair<TensorPtr, TensorPtr> step(const TensorPtr& x, const TensorPtr& h,
                                         const TensorPtr& c) const;
};

// L Transformer encoding layers followed by a weighting (pooling) layer.
// Per layer: X_l = enc_x(X_{l-1}) self-attention; Y_l = cross_y(Y_{l-1}, X_l).
// Pooling: alpha = softmax(MLP(X_L)) over positions, X_hat = sum alpha_i X_L_i,
// and symmetrically for Y over Y_L.
struct CoAttention {
    std::size_t layers = 1;
    std::vector<EncoderLayer> enc_x;
    std::vector<CrossLayer> cross_y;
    Linear pool_x_h, pool_x_o, pool_y_h, pool_y_o;

    CoAttention() = default;
    CoAttention(ParamRegistry& reg, const std::string& name, std::size_t d,
                std::size_t heads, std::size_t ffn, std::size_t layers, Rng& rng);

    struct Result {
        TensorPtr x_hat;  // [1 x d]
        TensorPtr y_hat;  // [1 x d]
        TensorPtr alpha_x;  // [1 x a] pooling weights
        TensorPtr alpha_y;  // [1 x b]
        TensorPtr x_last;   // [a x d]
        TensorPtr y_last;   // [b x d]
    };
    // x_pad/y_pad: per-row padding flags (true = padded, ignored everywhere).
    Result operator()(const TensorPtr& x, const TensorPtr& y, const ForwardCtx& ctx,
                      const std::vector<char>* x_pad = nullptr,
                      const std::vector<char>* y_pad = nullptr) const;

    // Runs only the encoding layers (used by the batch-attention module,
    // which pools along a different axis).
    std::pair<std::vector<TensorPtr>, std::vector<TensorPtr>> encode_stacks(
        const std::vector<TensorPtr>& x_seqs, const std::vector<TensorPtr>& y_seqs,
        const ForwardCtx& ctx) const;

    // Pooling over the rows of a final-layer matrix with the X-side or
    // Y-side pooling MLP.
    TensorPtr pool(const TensorPtr& last, bool x_side,
                   const std::vector<char>* pad = nullptr,
                   TensorPtr* alpha_out = nullptr) const;
};

std::vector<double> causal_bias(std::size_t len);

}  // namespace sotvae
