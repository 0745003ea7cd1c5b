#pragma once

#include "sotvae/latent.hpp"
#include "sotvae/tensor.hpp"

namespace sotvae {

struct LossBreakdown {
    TensorPtr rc;      // reconstruction (main decoder)
    TensorPtr rc_aux;  // reconstruction (auxiliary decoder), may be null
    TensorPtr z;       // KL term, may be null
    TensorPtr pre;     // sentiment prediction, may be null
    double beta = 2.0;
    double gamma = 0.3;
};

// Mean negative log-likelihood of the target tokens (plus EOS) under the
// decoder's step distributions; PAD targets are excluded.
TensorPtr reconstruction_loss(const TensorPtr& log_probs,
                              const std::vector<int>& target_tokens);

// Closed-form KL between the N-component posterior and prior, summed over
// components as the loss equation prescribes (unweighted by the sentiment
// one-hot unless weights are supplied).
TensorPtr kl_gmm(const PosteriorParams& posterior, const TensorPtr& prior_means,
                 double prior_sigma, const std::vector<double>* s_weights = nullptr);

// Cross-entropy on the sentiment head; with the sigmoid head this is
// binary CE summed over classes against the one-hot target.
TensorPtr sentiment_ce(const TensorPtr& scores, int target, bool sigmoid_head);

TensorPtr total_loss(const LossBreakdown& parts);

}  // namespace sotvae
