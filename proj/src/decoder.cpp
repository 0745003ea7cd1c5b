#include "sotvae/decoder.hpp"

#include <cmath>
#include <stdexcept>

namespace sotvae {

SentimentPredictor::SentimentPredictor(ParamRegistry& reg, const ModelConfig& cfg,
                                       Rng& rng)
    : w_i_(reg, "predictor.w_i", cfg.d, cfg.d_pre, rng, /*bias=*/false),
      w_e_(reg, "predictor.w_e", cfg.d, cfg.d_pre, rng, /*bias=*/false),
      w_pre_(reg, "predictor.w_pre", cfg.d_pre, cfg.n_sentiments, rng,
             /*bias=*/false),
      ln_(reg, "predictor.ln", cfg.d_pre),
      softmax_head_(cfg.softmax_sent_head) {}

TensorPtr SentimentPredictor::logits(const TensorPtr& v_hat_i,
                                     const TensorPtr& v_hat_e) const {
    return w_pre_(ln_(add(w_i_(v_hat_i), w_e_(v_hat_e))));
}

TensorPtr SentimentPredictor::scores(const TensorPtr& v_hat_i,
                                     const TensorPtr& v_hat_e) const {
    auto lg = logits(v_hat_i, v_hat_e);
    return softmax_head_ ? softmax_rows(lg) : sigmoid_op(lg);
}

int SentimentPredictor::predict(const TensorPtr& v_hat_i,
                                const TensorPtr& v_hat_e) const {
    auto s = scores(v_hat_i, v_hat_e);
    int best = 0;
    for (std::size_t j = 1; j < s->size(); ++j)
        if (s->data[j] > s->data[best]) best = static_cast<int>(j);
    return best;
}

CommentDecoder::CommentDecoder(ParamRegistry& reg, const ModelConfig& cfg,
                               const Embedding& word_emb, Rng& rng)
    : word_emb_(&word_emb),
      has_sent_(cfg.diversity == DiversityMode::Send ||
                cfg.diversity == DiversityMode::Full),
      has_z_(cfg.diversity == DiversityMode::Smd ||
             cfg.diversity == DiversityMode::Full) {
    for (std::size_t l = 0; l < cfg.dec_layers; ++l) {
        const std::string p = "decoder.l" + std::to_string(l);
        Layer layer{
            .self_attn = {reg, p + ".self", cfg.d, cfg.heads, rng},
            .cross_i = {reg, p + ".frames", cfg.d, cfg.heads, rng},
            .cross_e = {reg, p + ".text", cfg.d, cfg.heads, rng},
            .cross_s = {},
            .cross_z = {},
            .ln_self = {reg, p + ".ln_self", cfg.d},
            .ln_i = {reg, p + ".ln_frames", cfg.d},
            .ln_e = {reg, p + ".ln_text", cfg.d},
            .ln_s = {},
            .ln_z = {},
            .ln_ff = {reg, p + ".ln_ff", cfg.d},
            .ff = {reg, p + ".ff", cfg.d, cfg.ffn, rng},
        };
        if (has_sent_) {
            layer.cross_s = {reg, p + ".sent", cfg.d, cfg.heads, rng};
            layer.ln_s = {reg, p + ".ln_sent", cfg.d};
        }
        if (has_z_) {
            layer.cross_z = {reg, p + ".latent", cfg.d, cfg.heads, rng};
            layer.ln_z = {reg, p + ".ln_latent", cfg.d};
        }
        layers_.push_back(std::move(layer));
    }
    out_proj_ = Linear(reg, "decoder.out", cfg.d, cfg.vocab_size, rng);
}

TensorPtr CommentDecoder::hidden_states(const std::vector<int>& input_ids,
                                        const DecoderContext& dctx,
                                        const ForwardCtx& ctx) const {
    if (!dctx.v_hat_i || !dctx.v_hat_e)
        throw std::logic_error("decoder: attended context vectors missing");
    if (has_sent_ && !dctx.v_s)
        throw std::logic_error("decoder: sentiment context missing");
    if (has_z_ && !dctx.v_z)
        throw std::logic_error("decoder: latent context missing");
    auto causal = causal_bias(input_ids.size());
    auto h = ctx.drop((*word_emb_)(input_ids));
    for (const auto& l : layers_) {
        h = l.ln_self(add(h, ctx.drop(l.self_attn(h, h, h, &causal))));
        h = l.ln_i(add(h, ctx.drop(l.cross_i(h, dctx.v_hat_i, dctx.v_hat_i))));
        h = l.ln_e(add(h, ctx.drop(l.cross_e(h, dctx.v_hat_e, dctx.v_hat_e))));
        if (has_sent_)
            h = l.ln_s(add(h, ctx.drop(l.cross_s(h, dctx.v_s, dctx.v_s))));
        if (has_z_)
            h = l.ln_z(add(h, ctx.drop(l.cross_z(h, dctx.v_z, dctx.v_z))));
        h = l.ln_ff(add(h, ctx.drop(l.ff(h))));
    }
    return h;
}

TensorPtr CommentDecoder::forward_log_probs(const std::vector<int>& target,
                                            const DecoderContext& dctx,
                                            const ForwardCtx& ctx) const {
    std::vector<int> input{Vocabulary::BOS};
    input.insert(input.end(), target.begin(), target.end());
    auto h = hidden_states(input, dctx, ctx);
    return log_softmax_rows(out_proj_(h));
}

TensorPtr CommentDecoder::step_distribution(const std::vector<int>& prefix,
                                            const DecoderContext& dctx,
                                            const ForwardCtx& ctx) const {
    if (prefix.empty() || prefix.front() != Vocabulary::BOS)
        throw std::invalid_argument("step_distribution: prefix must start with BOS");
    auto h = hidden_states(prefix, dctx, ctx);
    return softmax_rows(out_proj_(row(h, h->rows() - 1)));
}

GenerationResult CommentDecoder::generate(const DecoderContext& dctx, int sentiment,
                                          std::size_t max_len, DecodeMode mode,
                                          double temperature, Rng* rng) const {
    if (max_len < 1) throw std::invalid_argument("generate: max_len must be >= 1");
    if (mode == DecodeMode::Sample && !rng)
        throw std::invalid_argument("generate: sampling needs an rng");
    ForwardCtx ctx;  // eval mode
    GenerationResult out;
    out.sentiment = sentiment;
    std::vector<int> prefix{Vocabulary::BOS};
    double total_logp = 0.0;
    const std::size_t vocab = out_proj_.w->shape[1];
    for (std::size_t t = 0; t < max_len; ++t) {
        auto h = hidden_states(prefix, dctx, ctx);
        auto logits = out_proj_(row(h, h->rows() - 1));
        // PAD/BOS/UNK are never emitted as content tokens.
        std::vector<double> bias(vocab, 0.0);
        bias[Vocabulary::PAD] = bias[Vocabulary::BOS] = bias[Vocabulary::UNK] = -1e30;
        TensorPtr dist;
        if (mode == DecodeMode::Sample && temperature != 1.0)
            dist = softmax_rows(scale(logits, 1.0 / temperature), &bias);
        else
            dist = softmax_rows(logits, &bias);
        int next = Vocabulary::EOS;
        if (mode == DecodeMode::Greedy) {
            for (std::size_t j = 1; j < vocab; ++j)
                if (dist->data[j] > dist->data[next]) next = static_cast<int>(j);
        } else {
            double u = rng->uniform(), acc = 0.0;
            for (std::size_t j = 0; j < vocab; ++j) {
                acc += dist->data[j];
                if (u < acc) {
                    next = static_cast<int>(j);
                    break;
                }
            }
        }
        total_logp += std::log(std::max(dist->data[next], 1e-300));
        if (next == Vocabulary::EOS) break;
        out.tokens.push_back(next);
        prefix.push_back(next);
    }
    const std::size_t steps = out.tokens.size() + 1;  // EOS (or cap) included
    out.mean_log_likelihood = total_logp / static_cast<double>(steps);
    return out;
}

double CommentDecoder::score_sequence(const std::vector<int>& candidate,
                                      const DecoderContext& dctx) const {
    ForwardCtx ctx;
    auto logp = forward_log_probs(candidate, dctx, ctx);
    std::vector<int> targets = candidate;
    targets.push_back(Vocabulary::EOS);
    double total = 0.0;
    const std::size_t v = logp->cols();
    for (std::size_t t = 0; t < targets.size(); ++t)
        total += logp->data[t * v + targets[t]];
    return total / static_cast<double>(targets.size());
}

}  // namespace sotvae
