#pragma once

#include "sotvae/config.hpp"
#include "sotvae/data.hpp"
#include "sotvae/nn.hpp"

namespace sotvae {

struct PosteriorParams {
    TensorPtr means;     // [N x d_z]
    TensorPtr log_vars;  // [N x d_z], clamped to [-10, 4]
    TensorPtr h_last;    // [1 x d]
};

enum class LatentSource { Prior, Posterior, Blended };

struct LatentVector {
    TensorPtr z;                // [1 x d_z]
    LatentSource source = LatentSource::Blended;
    std::vector<double> mask;   // entries in {0,1}, 1 = taken from the prior
    TensorPtr v_z;              // [1 x d] encoded feature
};

// Sentiment one-hot embedding, Gaussian-mixture prior, Transformer
// posterior, reparameterized sampling and the random-mask blend.
class LatentModule {
public:
    LatentModule(ParamRegistry& reg, const ModelConfig& cfg,
                 const Embedding& word_emb, Rng& rng);

    std::size_t components() const { return n_; }
    std::size_t latent_dim() const { return d_z_; }
    double sigma() const { return sigma_; }
    TensorPtr prior_means() const { return prior_means_; }

    std::vector<double> one_hot(int label) const;
    TensorPtr embed_sentiment(int label) const;  // [1 x d]

    // z = sum_j s_j (mu_j + sigma * eps_j); eps is [N x d_z] standard-normal
    // draws (pass nullptr for eps = 0, i.e. the component mean).
    TensorPtr sample_prior(int label, const TensorPtr& eps) const;

    PosteriorParams encode_posterior(const std::vector<int>& target_tokens,
                                     int label, const ForwardCtx& ctx) const;

    TensorPtr sample_posterior(const PosteriorParams& params, int label,
                               const TensorPtr& eps) const;

    // Exact-count random mask: round(lambda * d_z) coordinates come from
    // the prior sample, the rest from the posterior sample.
    LatentVector blend_mask(const TensorPtr& z_post, const TensorPtr& z_prior,
                            double lambda, Rng& rng) const;

    TensorPtr encode_z(const TensorPtr& z) const { return encoding_z_(z); }

    // Draw an eps tensor for one sampling call.
    TensorPtr draw_eps(Rng& rng) const;

private:
    std::size_t n_, d_z_, d_;
    bool smd_;  // standard-normal prior without sentimental distinction
    double sigma_;
    Embedding sent_emb_;
    TensorPtr prior_means_;
    const Embedding* word_emb_;
    EncoderLayer post_enc_;
    std::vector<Linear> heads_;
    Linear encoding_z_;

    int component_of(int label) const;
};

}  // namespace sotvae
