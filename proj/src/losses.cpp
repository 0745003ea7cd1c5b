#include "sotvae/losses.hpp"

#include <cmath>
#include <stdexcept>

#include "sotvae/data.hpp"

namespace sotvae {

TensorPtr reconstruction_loss(const TensorPtr& log_probs,
                              const std::vector<int>& target_tokens) {
    std::vector<int> targets = target_tokens;
    targets.push_back(Vocabulary::EOS);
    if (log_probs->rows() != targets.size())
        throw std::invalid_argument(
            "reconstruction_loss: " + std::to_string(log_probs->rows()) +
            " step distributions for " + std::to_string(targets.size()) +
            " target positions");
    for (int& t : targets)
        if (t == Vocabulary::PAD) t = -1;  // excluded from the mean
    return gather_nll(log_probs, targets);
}

TensorPtr kl_gmm(const PosteriorParams& posterior, const TensorPtr& prior_means,
                 double prior_sigma, const std::vector<double>* s_weights) {
    if (posterior.means->shape != prior_means->shape)
        throw std::invalid_argument("kl_gmm: component shape mismatch " +
                                    shape_str(posterior.means->shape) + " vs " +
                                    shape_str(prior_means->shape));
    const std::size_t n = posterior.means->rows();
    const std::size_t d_z = posterior.means->cols();
    if (s_weights && s_weights->size() != n)
        throw std::invalid_argument("kl_gmm: weight count mismatch");
    const double log_sigma = std::log(prior_sigma);
    const double inv_2s2 = 1.0 / (2.0 * prior_sigma * prior_sigma);

    TensorPtr total;
    for (std::size_t j = 0; j < n; ++j) {
        auto mu_d = sub(row(posterior.means, j), row(prior_means, j));
        auto lv = row(posterior.log_vars, j);
        // sum_d [ log(sigma) - lv/2 + (exp(lv) + dmu^2)/(2 sigma^2) - 1/2 ]
        auto quad = scale(sum_all(add(exp_op(lv), square(mu_d))), inv_2s2);
        auto logs = scale(sum_all(lv), -0.5);
        auto comp = add_scalar(add(quad, logs),
                               static_cast<double>(d_z) * (log_sigma - 0.5));
        if (s_weights) comp = scale(comp, (*s_weights)[j]);
        total = total ? add(total, comp) : comp;
    }
    return total;
}

TensorPtr sentiment_ce(const TensorPtr& scores, int target, bool sigmoid_head) {
    const std::size_t n = scores->size();
    if (target < 0 || static_cast<std::size_t>(target) >= n)
        throw std::out_of_range("sentiment_ce: target " + std::to_string(target) +
                                " outside [0, " + std::to_string(n) + ")");
    if (!sigmoid_head) {
        // Scores are softmax probabilities; standard CE on the target class.
        std::vector<double> pick(n, 0.0);
        pick[target] = 1.0;
        return scale(sum_all(mul_const(log_op(scores), pick)), -1.0);
    }
    // Per-class binary CE with one-hot target:
    //   -log p_t - sum_{c != t} log(1 - p_c)
    std::vector<double> onehot(n, 0.0), other(n, 1.0);
    onehot[target] = 1.0;
    other[target] = 0.0;
    auto pos = sum_all(mul_const(log_op(scores), onehot));
    auto neg = sum_all(
        mul_const(log_op(add_scalar(scale(scores, -1.0), 1.0)), other));
    return scale(add(pos, neg), -1.0);
}

TensorPtr total_loss(const LossBreakdown& parts) {
    if (!parts.rc) throw std::invalid_argument("total_loss: missing rc term");
    TensorPtr total = parts.rc;
    if (parts.rc_aux) total = add(total, parts.rc_aux);
    if (parts.z) total = add(total, scale(parts.z, parts.beta));
    if (parts.pre) total = add(total, scale(parts.pre, parts.gamma));
    return total;
}

}  // namespace sotvae
