#include "sotvae/batchattn.hpp"

#include <stdexcept>

namespace sotvae {

BatchAttention::BatchAttention(ParamRegistry& reg, const ModelConfig& cfg, Rng& rng)
    : mode_(cfg.batchattn), d_(cfg.d) {
    if (mode_ == BatchAttnMode::Full)
        coattn_b_ = CoAttention(reg, "batchattn.coattn", cfg.d, cfg.heads, cfg.ffn,
                                cfg.co_layers, rng);
    else if (mode_ == BatchAttnMode::BatchFormer) {
        bf_text_ = EncoderLayer(reg, "batchattn.bf_text", cfg.d, cfg.heads, cfg.ffn,
                                rng);
        bf_frames_ = EncoderLayer(reg, "batchattn.bf_frames", cfg.d, cfg.heads,
                                  cfg.ffn, rng);
    }
}

namespace {

// Batch matrices per position: seqs[i] is [len_i x d]; result[t] is [B x d]
// with a zero row where sample i has no position t.
std::vector<TensorPtr> per_position(const std::vector<TensorPtr>& seqs,
                                    std::size_t d) {
    std::size_t max_len = 0;
    for (const auto& s : seqs) max_len = std::max(max_len, s->rows());
    std::vector<TensorPtr> out;
    auto zero_row = make_tensor({1, d});
    for (std::size_t t = 0; t < max_len; ++t) {
        std::vector<TensorPtr> rows;
        for (const auto& s : seqs)
            rows.push_back(t < s->rows() ? row(s, t) : zero_row);
        out.push_back(concat_rows(rows));
    }
    return out;
}

// Rows of sample i across the per-position final-layer matrices.
TensorPtr gather_sample(const std::vector<TensorPtr>& stacks, std::size_t i,
                        std::size_t len) {
    std::vector<TensorPtr> rows;
    for (std::size_t t = 0; t < len; ++t) rows.push_back(row(stacks[t], i));
    return concat_rows(rows);
}

}  // namespace

BatchAttention::Result BatchAttention::full_forward(
    const std::vector<TensorPtr>& text_feats,
    const std::vector<TensorPtr>& frame_feats, const ForwardCtx& ctx) const {
    auto text_pos = per_position(text_feats, d_);
    auto frame_pos = per_position(frame_feats, d_);
    auto [text_last, frame_last] = coattn_b_.encode_stacks(text_pos, frame_pos, ctx);

    Result res;
    const std::size_t batch = text_feats.size();
    for (std::size_t i = 0; i < batch; ++i) {
        auto text_i = gather_sample(text_last, i, text_feats[i]->rows());
        auto frames_i = gather_sample(frame_last, i, frame_feats[i]->rows());
        res.v_hat_e_b.push_back(coattn_b_.pool(text_i, /*x_side=*/true));
        res.v_hat_i_b.push_back(coattn_b_.pool(frames_i, /*x_side=*/false));
    }
    return res;
}

BatchAttention::Result BatchAttention::batchformer_forward(
    const std::vector<TensorPtr>& text_feats,
    const std::vector<TensorPtr>& frame_feats, const ForwardCtx& ctx) const {
    // Plain BatchFormer: a transformer encoder over mean-pooled per-sample
    // vectors along the batch axis, no co-attention.
    auto pool_mean = [](const TensorPtr& m) {
        return scale(sum_rows(m), 1.0 / static_cast<double>(m->rows()));
    };
    std::vector<TensorPtr> text_rows, frame_rows;
    for (const auto& t : text_feats) text_rows.push_back(pool_mean(t));
    for (const auto& f : frame_feats) frame_rows.push_back(pool_mean(f));
    auto text_out = bf_text_(concat_rows(text_rows), ctx);
    auto frame_out = bf_frames_(concat_rows(frame_rows), ctx);
    Result res;
    for (std::size_t i = 0; i < text_feats.size(); ++i) {
        res.v_hat_e_b.push_back(row(text_out, i));
        res.v_hat_i_b.push_back(row(frame_out, i));
    }
    return res;
}

BatchAttention::Result BatchAttention::operator()(
    const std::vector<TensorPtr>& text_feats,
    const std::vector<TensorPtr>& frame_feats, const ForwardCtx& ctx) const {
    if (!ctx.training)
        throw std::logic_error(
            "batch attention is a training-time module; the inference path "
            "must bypass it");
    if (text_feats.empty() || text_feats.size() != frame_feats.size())
        throw std::invalid_argument("batch attention: batch size mismatch");
    if (mode_ == BatchAttnMode::Off)
        throw std::logic_error("batch attention called while disabled");
    return mode_ == BatchAttnMode::Full ? full_forward(text_feats, frame_feats, ctx)
                                        : batchformer_forward(text_feats,
                                                              frame_feats, ctx);
}

}  // namespace sotvae
