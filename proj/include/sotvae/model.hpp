#pragma once

#include <memory>
#include <optional>

#include "sotvae/batchattn.hpp"
#include "sotvae/config.hpp"
#include "sotvae/data.hpp"
#include "sotvae/decoder.hpp"
#include "sotvae/encoder.hpp"
#include "sotvae/latent.hpp"
#include "sotvae/losses.hpp"

namespace sotvae {

// The full sentiment-oriented VAE commenting model. One decoder instance
// serves both the main path and the batch-attention auxiliary path, so
// the two are the same parameters by construction.
class SoTvae {
public:
    SoTvae(const ModelConfig& cfg, std::uint64_t init_seed);

    // Submodules keep pointers into the owning model, so it is pinned.
    SoTvae(const SoTvae&) = delete;
    SoTvae& operator=(const SoTvae&) = delete;

    const ModelConfig& config() const { return cfg_; }
    ParamRegistry& params() { return reg_; }
    const ParamRegistry& params() const { return reg_; }

    struct BatchLosses {
        LossBreakdown parts;
        TensorPtr total;
        double rc = 0, rc_aux = 0, z = 0, pre = 0, total_value = 0;
    };
    // Builds the training graph for one mini-batch (teacher forcing,
    // dropout on, batch attention when enabled). Caller runs backward().
    BatchLosses train_batch(const std::vector<const CommentSample*>& batch,
                            double beta, double gamma, Rng& rng);

    EncodedContext encode_eval(const CommentSample& sample) const;
    int predict_sentiment(const EncodedContext& enc) const;

    // Inference-path context: z comes from the prior (eps=nullptr gives
    // the component mean; sentiment < 0 means "use the predicted label").
    DecoderContext make_context(const EncodedContext& enc, int sentiment,
                                const TensorPtr& eps) const;

    GenerationResult generate(const CommentSample& sample, int sentiment,
                              const TensorPtr& eps, DecodeMode mode,
                              double temperature, Rng* rng) const;

    // One comment per sentiment class (or per draw for variants without
    // sentiment conditioning); each result is tagged with its class.
    std::vector<GenerationResult> generate_diverse(const CommentSample& sample,
                                                   Rng& rng,
                                                   std::size_t draws_per_sentiment
                                                   = 1) const;

    // Deterministic teacher-forced mean per-token log-likelihood
    // (prior component mean, predicted sentiment).
    double score_candidate(const EncodedContext& enc,
                           const std::vector<int>& candidate) const;

    const MultiModalEncoder& encoder() const { return *encoder_; }
    const LatentModule* latent() const { return latent_.get(); }
    const BatchAttention* batchattn() const { return batchattn_.get(); }
    const CommentDecoder& decoder() const { return *decoder_; }
    const SentimentPredictor& predictor() const { return *predictor_; }
    const Embedding& word_embedding() const { return word_emb_; }

private:
    ModelConfig cfg_;
    ParamRegistry reg_;
    Embedding word_emb_;
    std::unique_ptr<MultiModalEncoder> encoder_;
    std::unique_ptr<LatentModule> latent_;
    std::unique_ptr<BatchAttention> batchattn_;
    std::unique_ptr<CommentDecoder> decoder_;
    std::unique_ptr<SentimentPredictor> predictor_;
};

}  // namespace sotvae
