#include "sotvae/latent.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace sotvae {

LatentModule::LatentModule(ParamRegistry& reg, const ModelConfig& cfg,
                           const Embedding& word_emb, Rng& rng)
    : n_(cfg.diversity == DiversityMode::Smd ? 1 : cfg.n_sentiments),
      d_z_(cfg.d_z),
      d_(cfg.d),
      smd_(cfg.diversity == DiversityMode::Smd),
      sigma_(smd_ ? 1.0 : cfg.sigma_prior),
      word_emb_(&word_emb) {
    if (sigma_ <= 0.0) throw std::invalid_argument("latent: sigma must be > 0");
    const bool has_sent = cfg.diversity == DiversityMode::Send ||
                          cfg.diversity == DiversityMode::Full;
    const bool has_z = cfg.diversity == DiversityMode::Smd ||
                       cfg.diversity == DiversityMode::Full;
    if (has_sent)
        sent_emb_ = Embedding(reg, "latent.sent_emb", cfg.n_sentiments, cfg.d, rng);
    if (has_z) {
        if (cfg.learnable_prior_means && !smd_) {
            prior_means_ = reg.create("latent.prior_means", {n_, d_z_}, rng, 0.1);
        } else {
            prior_means_ = make_tensor({n_, d_z_});
            if (!smd_)
                for (auto& v : prior_means_->data) v = rng.normal() * 0.1;
        }
        post_enc_ = EncoderLayer(reg, "latent.post_enc", cfg.d, cfg.heads, cfg.ffn,
                                 rng);
        for (std::size_t j = 0; j < n_; ++j)
            heads_.emplace_back(reg, "latent.head" + std::to_string(j), cfg.d,
                                2 * d_z_, rng);
        encoding_z_ = Linear(reg, "latent.encoding_z", d_z_, cfg.d, rng);
    }
}

int LatentModule::component_of(int label) const {
    if (smd_) return 0;
    if (label < 0 || static_cast<std::size_t>(label) >= n_)
        throw std::out_of_range("sentiment label " + std::to_string(label) +
                                " outside [0, " + std::to_string(n_) + ")");
    return label;
}

std::vector<double> LatentModule::one_hot(int label) const {
    if (label < 0 || static_cast<std::size_t>(label) >= n_)
        throw std::out_of_range("one_hot: label out of range");
    std::vector<double> s(n_, 0.0);
    s[label] = 1.0;
    return s;
}

TensorPtr LatentModule::embed_sentiment(int label) const {
    if (!sent_emb_.table)
        throw std::logic_error("embed_sentiment: sentiment embedding disabled");
    if (label < 0 ||
        static_cast<std::size_t>(label) >= sent_emb_.table->rows())
        throw std::out_of_range("embed_sentiment: label " + std::to_string(label) +
                                " out of range");
    return sent_emb_({label});
}

TensorPtr LatentModule::draw_eps(Rng& rng) const {
    auto eps = make_tensor({n_, d_z_});
    for (auto& v : eps->data) v = rng.normal();
    return eps;
}

TensorPtr LatentModule::sample_prior(int label, const TensorPtr& eps) const {
    if (!prior_means_) throw std::logic_error("sample_prior: latent path disabled");
    const int j = component_of(label);
    // One-hot mixture weights reduce the sum to the selected component.
    auto mu = row(prior_means_, j);
    if (!eps) return mu;
    if (eps->shape != std::vector<std::size_t>{n_, d_z_})
        throw std::invalid_argument("sample_prior: eps must be " +
                                    shape_str({n_, d_z_}));
    std::vector<double> eps_j(eps->data.begin() + j * d_z_,
                              eps->data.begin() + (j + 1) * d_z_);
    auto noise = make_tensor({1, d_z_}, std::move(eps_j));
    return add(mu, scale(noise, sigma_));
}

PosteriorParams LatentModule::encode_posterior(
    const std::vector<int>& target_tokens, int label, const ForwardCtx& ctx) const {
    if (heads_.empty())
        throw std::logic_error("encode_posterior: latent path disabled");
    // An empty target stands in as a single PAD token, mirroring the
    // empty-context convention of the text encoder.
    static const std::vector<int> kPadOnly{Vocabulary::PAD};
    const auto& toks = target_tokens.empty() ? kPadOnly : target_tokens;
    auto emb = ctx.drop((*word_emb_)(toks));
    TensorPtr seq = emb;
    if (sent_emb_.table) {
        // The sentiment token is prepended to the embedded target sequence.
        seq = concat_rows({embed_sentiment(label), emb});
    }
    auto hidden = post_enc_(seq, ctx);
    PosteriorParams out;
    out.h_last = row(hidden, hidden->rows() - 1);
    std::vector<TensorPtr> mu_rows, lv_rows;
    for (const auto& head : heads_) {
        auto both = head(out.h_last);  // [1 x 2*d_z]
        mu_rows.push_back(slice_cols(both, 0, d_z_));
        lv_rows.push_back(clamp_op(slice_cols(both, d_z_, 2 * d_z_), -10.0, 4.0));
    }
    out.means = concat_rows(mu_rows);
    out.log_vars = concat_rows(lv_rows);
    return out;
}

TensorPtr LatentModule::sample_posterior(const PosteriorParams& params, int label,
                                         const TensorPtr& eps) const {
    const int j = component_of(label);
    auto mu = row(params.means, j);
    if (!eps) return mu;
    if (eps->shape != std::vector<std::size_t>{n_, d_z_})
        throw std::invalid_argument("sample_posterior: eps must be " +
                                    shape_str({n_, d_z_}));
    std::vector<double> eps_j(eps->data.begin() + j * d_z_,
                              eps->data.begin() + (j + 1) * d_z_);
    auto noise = make_tensor({1, d_z_}, std::move(eps_j));
    auto sigma_p = exp_op(scale(row(params.log_vars, j), 0.5));
    return add(mu, mul(sigma_p, noise));
}

LatentVector LatentModule::blend_mask(const TensorPtr& z_post,
                                      const TensorPtr& z_prior, double lambda,
                                      Rng& rng) const {
    if (lambda < 0.0 || lambda > 1.0)
        throw std::invalid_argument("blend_mask: lambda must be in [0,1], got " +
                                    std::to_string(lambda));
    const std::size_t ones = static_cast<std::size_t>(
        std::llround(lambda * static_cast<double>(d_z_)));
    LatentVector out;
    out.mask.assign(d_z_, 0.0);
    // Exactly `ones` coordinates at uniformly random positions.
    std::vector<std::size_t> idx(d_z_);
    std::iota(idx.begin(), idx.end(), 0);
    for (std::size_t i = 0; i < ones; ++i) {
        std::size_t j = i + rng.index(d_z_ - i);
        std::swap(idx[i], idx[j]);
        out.mask[idx[i]] = 1.0;
    }
    std::vector<double> inv(d_z_);
    for (std::size_t i = 0; i < d_z_; ++i) inv[i] = 1.0 - out.mask[i];
    out.z = add(mul_const(z_post, inv), mul_const(z_prior, out.mask));
    out.source = ones == 0 ? LatentSource::Posterior
                 : ones == d_z_ ? LatentSource::Prior
                                : LatentSource::Blended;
    out.v_z = encoding_z_(out.z);
    return out;
}

}  // namespace sotvae
