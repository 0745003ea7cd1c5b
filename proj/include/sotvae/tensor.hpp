#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "sotvae/rng.hpp"

namespace sotvae {

struct Tensor;
using TensorPtr = std::shared_ptr<Tensor>;

// Dense row-major double tensor with reverse-mode autodiff.
// Nodes that participate in a gradient computation hold their parents
// alive and a closure that scatters the incoming gradient to them.
struct Tensor {
    std::vector<std::size_t> shape;
    std::vector<double> data;
    std::vector<double> grad;  // allocated lazily, same length as data
    bool requires_grad = false;

    std::vector<TensorPtr> parents;
    std::function<void(Tensor&)> backward_fn;

    std::size_t size() const { return data.size(); }
    std::size_t rows() const { return shape.empty() ? 1 : shape[0]; }
    std::size_t cols() const { return shape.size() < 2 ? 1 : shape[1]; }

    void ensure_grad() {
        if (grad.size() != data.size()) grad.assign(data.size(), 0.0);
    }
    void zero_grad() { grad.assign(data.size(), 0.0); }

    double item() const;  // scalar tensors only
};

TensorPtr make_tensor(std::vector<std::size_t> shape, bool requires_grad = false);
TensorPtr make_tensor(std::vector<std::size_t> shape, std::vector<double> data,
                      bool requires_grad = false);
TensorPtr scalar(double v);
TensorPtr randn(std::vector<std::size_t> shape, Rng& rng, double stddev,
                bool requires_grad = false);

std::string shape_str(const std::vector<std::size_t>& s);
void assert_finite(const Tensor& t, const std::string& context);

// --- ops -----------------------------------------------------------------

TensorPtr matmul(const TensorPtr& a, const TensorPtr& b);
TensorPtr transpose(const TensorPtr& a);

TensorPtr add(const TensorPtr& a, const TensorPtr& b);        // same shape
TensorPtr sub(const TensorPtr& a, const TensorPtr& b);
TensorPtr mul(const TensorPtr& a, const TensorPtr& b);        // elementwise
TensorPtr add_rowwise(const TensorPtr& a, const TensorPtr& bias);  // [m x n] + [n]
TensorPtr scale(const TensorPtr& a, double c);

TensorPtr tanh_op(const TensorPtr& a);
TensorPtr relu_op(const TensorPtr& a);
TensorPtr sigmoid_op(const TensorPtr& a);
TensorPtr exp_op(const TensorPtr& a);
TensorPtr log_op(const TensorPtr& a);
TensorPtr square(const TensorPtr& a);
TensorPtr add_scalar(const TensorPtr& a, double c);
// Hard clamp; gradient passes through only inside [lo, hi].
TensorPtr clamp_op(const TensorPtr& a, double lo, double hi);

// Multiply by a constant (non-differentiated) per-element mask.
TensorPtr mul_const(const TensorPtr& a, const std::vector<double>& mask);

// Row-wise softmax / log-softmax over the last axis of a [m x n] tensor.
// attn_bias, when given, is added to the logits before normalizing
// (entries of ~-1e30 implement masking).
TensorPtr softmax_rows(const TensorPtr& x,
                       const std::vector<double>* attn_bias = nullptr);
TensorPtr log_softmax_rows(const TensorPtr& x);

TensorPtr layer_norm(const TensorPtr& x, const TensorPtr& gain,
                     const TensorPtr& bias, double eps = 1e-5);

TensorPtr sum_all(const TensorPtr& x);
TensorPtr sum_rows(const TensorPtr& x);  // [m x n] -> [1 x n]
TensorPtr mean_all(const TensorPtr& x);

TensorPtr concat_rows(const std::vector<TensorPtr>& parts);  // same col count
TensorPtr concat_cols(const std::vector<TensorPtr>& parts);  // same row count
TensorPtr row(const TensorPtr& x, std::size_t i);            // -> [1 x n]
TensorPtr slice_cols(const TensorPtr& x, std::size_t c0, std::size_t c1);

// Gather rows of an embedding table: result[i] = table[ids[i]].
TensorPtr embedding_rows(const TensorPtr& table, const std::vector<int>& ids);

TensorPtr dropout(const TensorPtr& x, double p, Rng& rng, bool training);

// Mean of -logp[i, targets[i]] over rows i with targets[i] >= 0
// (negative target = skip, used for PAD positions).
TensorPtr gather_nll(const TensorPtr& log_probs, const std::vector<int>& targets);

// Seeds grad(loss)=1 and runs reverse-mode accumulation over the graph.
void backward(const TensorPtr& loss);

}  // namespace sotvae
