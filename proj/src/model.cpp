#include "sotvae/model.hpp"

#include <stdexcept>

namespace sotvae {

SoTvae::SoTvae(const ModelConfig& cfg, std::uint64_t init_seed) : cfg_(cfg) {
    // One stream per module, so toggling a module on or off leaves the
    // others' initial weights bit-identical.
    auto stream = [&](std::uint64_t salt) {
        return Rng(init_seed ^ (salt * 0x9e3779b97f4a7c15ULL));
    };
    Rng emb_rng = stream(1);
    word_emb_ = Embedding(reg_, "word_emb", cfg_.vocab_size, cfg_.d, emb_rng);
    Rng enc_rng = stream(2);
    encoder_ = std::make_unique<MultiModalEncoder>(reg_, cfg_, word_emb_, enc_rng);
    if (cfg_.diversity != DiversityMode::Off) {
        Rng lat_rng = stream(3);
        latent_ = std::make_unique<LatentModule>(reg_, cfg_, word_emb_, lat_rng);
    }
    if (cfg_.batchattn != BatchAttnMode::Off) {
        Rng ba_rng = stream(4);
        batchattn_ = std::make_unique<BatchAttention>(reg_, cfg_, ba_rng);
    }
    Rng dec_rng = stream(5);
    decoder_ = std::make_unique<CommentDecoder>(reg_, cfg_, word_emb_, dec_rng);
    Rng pre_rng = stream(6);
    predictor_ = std::make_unique<SentimentPredictor>(reg_, cfg_, pre_rng);
}

namespace {

bool has_z(const ModelConfig& cfg) {
    return cfg.diversity == DiversityMode::Smd ||
           cfg.diversity == DiversityMode::Full;
}

bool has_sent(const ModelConfig& cfg) {
    return cfg.diversity == DiversityMode::Send ||
           cfg.diversity == DiversityMode::Full;
}

}  // namespace

SoTvae::BatchLosses SoTvae::train_batch(
    const std::vector<const CommentSample*>& batch, double beta, double gamma,
    Rng& rng) {
    if (batch.empty()) throw std::invalid_argument("train_batch: empty batch");
    ForwardCtx ctx{true, &rng, cfg_.dropout};
    const double inv_b = 1.0 / static_cast<double>(batch.size());

    std::vector<TensorPtr> rc_terms, kl_terms, pre_terms, rc_aux_terms;
    std::vector<TensorPtr> text_feats, frame_feats;
    std::vector<DecoderContext> dctxs;

    for (const CommentSample* sample : batch) {
        EncodedContext enc = (*encoder_)(*sample, ctx);
        text_feats.push_back(enc.v_e);
        frame_feats.push_back(enc.v_i);

        DecoderContext dctx;
        dctx.v_hat_i = enc.v_hat_i;
        dctx.v_hat_e = enc.v_hat_e;
        if (latent_) {
            if (has_sent(cfg_)) {
                dctx.v_s = latent_->embed_sentiment(sample->sentiment_label);
            }
            if (has_z(cfg_)) {
                PosteriorParams post = latent_->encode_posterior(
                    sample->target_tokens, sample->sentiment_label, ctx);
                TensorPtr z_post = latent_->sample_posterior(
                    post, sample->sentiment_label, latent_->draw_eps(rng));
                TensorPtr z_prior = latent_->sample_prior(
                    sample->sentiment_label, latent_->draw_eps(rng));
                LatentVector lv = latent_->blend_mask(z_post, z_prior,
                                                      cfg_.mask_ratio, rng);
                dctx.v_z = lv.v_z;

                std::vector<double> weights;
                const std::vector<double>* wp = nullptr;
                if (cfg_.kl_weighted_by_s) {
                    weights = latent_->one_hot(sample->sentiment_label);
                    wp = &weights;
                }
                kl_terms.push_back(kl_gmm(post, latent_->prior_means(),
                                          latent_->sigma(), wp));
            }
        }
        dctxs.push_back(dctx);

        TensorPtr log_probs =
            decoder_->forward_log_probs(sample->target_tokens, dctx, ctx);
        rc_terms.push_back(reconstruction_loss(log_probs, sample->target_tokens));

        TensorPtr scores = predictor_->scores(enc.v_hat_i, enc.v_hat_e);
        pre_terms.push_back(sentiment_ce(scores, sample->sentiment_label,
                                         !cfg_.softmax_sent_head));
    }

    if (batchattn_) {
        BatchAttention::Result ba = (*batchattn_)(text_feats, frame_feats, ctx);
        for (std::size_t i = 0; i < batch.size(); ++i) {
            DecoderContext aux = dctxs[i];
            aux.v_hat_e = ba.v_hat_e_b[i];
            aux.v_hat_i = ba.v_hat_i_b[i];
            TensorPtr log_probs = decoder_->forward_log_probs(
                batch[i]->target_tokens, aux, ctx);
            rc_aux_terms.push_back(
                reconstruction_loss(log_probs, batch[i]->target_tokens));
        }
    }

    auto batch_mean = [&](const std::vector<TensorPtr>& terms) -> TensorPtr {
        if (terms.empty()) return nullptr;
        TensorPtr acc = terms[0];
        for (std::size_t i = 1; i < terms.size(); ++i) acc = add(acc, terms[i]);
        return scale(acc, inv_b);
    };

    BatchLosses out;
    out.parts.rc = batch_mean(rc_terms);
    out.parts.rc_aux = batch_mean(rc_aux_terms);
    out.parts.z = batch_mean(kl_terms);
    out.parts.pre = batch_mean(pre_terms);
    out.parts.beta = beta;
    out.parts.gamma = gamma;
    out.total = total_loss(out.parts);
    out.rc = out.parts.rc->item();
    out.rc_aux = out.parts.rc_aux ? out.parts.rc_aux->item() : 0.0;
    out.z = out.parts.z ? out.parts.z->item() : 0.0;
    out.pre = out.parts.pre ? out.parts.pre->item() : 0.0;
    out.total_value = out.total->item();
    return out;
}

EncodedContext SoTvae::encode_eval(const CommentSample& sample) const {
    ForwardCtx ctx;  // inference: no dropout
    return (*encoder_)(sample, ctx);
}

int SoTvae::predict_sentiment(const EncodedContext& enc) const {
    return predictor_->predict(enc.v_hat_i, enc.v_hat_e);
}

DecoderContext SoTvae::make_context(const EncodedContext& enc, int sentiment,
                                    const TensorPtr& eps) const {
    DecoderContext dctx;
    dctx.v_hat_i = enc.v_hat_i;
    dctx.v_hat_e = enc.v_hat_e;
    if (!latent_) return dctx;
    int label = sentiment >= 0 ? sentiment : predict_sentiment(enc);
    if (has_sent(cfg_)) dctx.v_s = latent_->embed_sentiment(label);
    if (has_z(cfg_)) {
        TensorPtr z = latent_->sample_prior(label, eps);
        dctx.v_z = latent_->encode_z(z);
    }
    return dctx;
}

GenerationResult SoTvae::generate(const CommentSample& sample, int sentiment,
                                  const TensorPtr& eps, DecodeMode mode,
                                  double temperature, Rng* rng) const {
    EncodedContext enc = encode_eval(sample);
    int label = sentiment >= 0 ? sentiment : predict_sentiment(enc);
    DecoderContext dctx = make_context(enc, label, eps);
    return decoder_->generate(dctx, label, cfg_.max_len, mode, temperature, rng);
}

std::vector<GenerationResult> SoTvae::generate_diverse(
    const CommentSample& sample, Rng& rng,
    std::size_t draws_per_sentiment) const {
    EncodedContext enc = encode_eval(sample);
    std::vector<GenerationResult> out;
    if (!latent_ || cfg_.diversity == DiversityMode::Send) {
        // No latent draws to vary: the N outputs collapse to the single
        // greedy decode conditioned on the predicted sentiment.
        int label = predict_sentiment(enc);
        DecoderContext dctx = make_context(enc, label, nullptr);
        GenerationResult one = decoder_->generate(dctx, label, cfg_.max_len,
                                                  DecodeMode::Greedy, 1.0,
                                                  nullptr);
        for (std::size_t j = 0; j < cfg_.n_sentiments * draws_per_sentiment; ++j)
            out.push_back(one);
        return out;
    }
    const bool smd = cfg_.diversity == DiversityMode::Smd;
    for (std::size_t j = 0; j < cfg_.n_sentiments; ++j) {
        for (std::size_t r = 0; r < draws_per_sentiment; ++r) {
            int label = static_cast<int>(j);
            DecoderContext dctx =
                make_context(enc, label, latent_->draw_eps(rng));
            GenerationResult g = decoder_->generate(dctx, label, cfg_.max_len,
                                                    DecodeMode::Greedy, 1.0,
                                                    nullptr);
            g.sentiment = smd ? predict_sentiment(enc) : label;
            out.push_back(g);
        }
    }
    return out;
}

double SoTvae::score_candidate(const EncodedContext& enc,
                               const std::vector<int>& candidate) const {
    DecoderContext dctx = make_context(enc, -1, nullptr);
    return decoder_->score_sequence(candidate, dctx);
}

}  // namespace sotvae
