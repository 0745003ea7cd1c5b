#include "sotvae/encoder.hpp"

#include <stdexcept>

namespace sotvae {

MultiModalEncoder::MultiModalEncoder(ParamRegistry& reg, const ModelConfig& cfg,
                                     const Embedding& word_emb, Rng& rng)
    : d_in_(cfg.d_in),
      frame_proj_(reg, "encoder.frame_proj", cfg.d_in, cfg.d, rng),
      word_emb_(&word_emb),
      lstm_(reg, "encoder.lstm", cfg.d, cfg.d, rng),
      coattn_(reg, "encoder.coattn", cfg.d, cfg.heads, cfg.ffn, cfg.co_layers, rng),
      order_(cfg.coattn_order) {}

TensorPtr MultiModalEncoder::encode_frames(
    const std::vector<std::vector<double>>& frames) const {
    if (frames.empty())
        throw std::invalid_argument("encode_frames: need at least one frame");
    auto raw = make_tensor({frames.size(), d_in_});
    for (std::size_t i = 0; i < frames.size(); ++i) {
        if (frames[i].size() != d_in_)
            throw std::invalid_argument(
                "encode_frames: frame " + std::to_string(i) + " has width " +
                std::to_string(frames[i].size()) + ", expected " +
                std::to_string(d_in_));
        std::copy(frames[i].begin(), frames[i].end(), raw->data.begin() + i * d_in_);
    }
    return frame_proj_(raw);
}

TensorPtr MultiModalEncoder::encode_text(const std::vector<int>& tokens,
                                         const ForwardCtx& ctx) const {
    // Empty context degrades to a single PAD token.
    std::vector<int> ids = tokens.empty() ? std::vector<int>{Vocabulary::PAD} : tokens;
    auto emb = ctx.drop((*word_emb_)(ids));
    auto h = make_tensor({1, lstm_.hidden});
    auto c = make_tensor({1, lstm_.hidden});
    std::vector<TensorPtr> states;
    for (std::size_t t = 0; t < ids.size(); ++t) {
        auto [h2, c2] = lstm_.step(row(emb, t), h, c);
        h = h2;
        c = c2;
        states.push_back(h);
    }
    return concat_rows(states);
}

EncodedContext MultiModalEncoder::operator()(const CommentSample& sample,
                                             const ForwardCtx& ctx) const {
    EncodedContext out;
    out.v_i = encode_frames(sample.frames);
    out.v_e = encode_text(sample.surrounding_tokens, ctx);
    if (order_ == CoAttnOrder::Default) {
        // Co-Attention(V_e, V_I): text self-attends, frames attend to text.
        auto r = coattn_(out.v_e, out.v_i, ctx);
        out.v_hat_e = r.x_hat;
        out.v_hat_i = r.y_hat;
        out.alpha_e = r.alpha_x;
        out.alpha_i = r.alpha_y;
    } else {
        auto r = coattn_(out.v_i, out.v_e, ctx);
        out.v_hat_i = r.x_hat;
        out.v_hat_e = r.y_hat;
        out.alpha_i = r.alpha_x;
        out.alpha_e = r.alpha_y;
    }
    return out;
}

}  // namespace sotvae
