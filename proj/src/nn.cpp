#include "sotvae/nn.hpp"

#include <cmath>
#include <stdexcept>

namespace sotvae {

TensorPtr ParamRegistry::create(const std::string& name,
                                std::vector<std::size_t> shape, Rng& rng,
                                double stddev) {
    auto t = randn(std::move(shape), rng, stddev, true);
    adopt(name, t);
    return t;
}

TensorPtr ParamRegistry::create_zeros(const std::string& name,
                                      std::vector<std::size_t> shape) {
    auto t = make_tensor(std::move(shape), true);
    adopt(name, t);
    return t;
}

TensorPtr ParamRegistry::create_ones(const std::string& name,
                                     std::vector<std::size_t> shape) {
    auto t = make_tensor(std::move(shape), true);
    for (auto& v : t->data) v = 1.0;
    adopt(name, t);
    return t;
}

void ParamRegistry::adopt(const std::string& name, const TensorPtr& t) {
    if (!params_.emplace(name, t).second)
        throw std::logic_error("duplicate parameter name: " + name);
}

TensorPtr ParamRegistry::at(const std::string& name) const {
    auto it = params_.find(name);
    if (it == params_.end()) throw std::out_of_range("no parameter named " + name);
    return it->second;
}

void ParamRegistry::zero_grads() {
    for (auto& [name, t] : params_) t->zero_grad();
}

Linear::Linear(ParamRegistry& reg, const std::string& name, std::size_t in,
               std::size_t out, Rng& rng, bool bias) {
    w = reg.create(name + ".w", {in, out}, rng, 1.0 / std::sqrt((double)in));
    if (bias) b = reg.create_zeros(name + ".b", {out});
}

TensorPtr Linear::operator()(const TensorPtr& x) const {
    auto y = matmul(x, w);
    return b ? add_rowwise(y, b) : y;
}

Embedding::Embedding(ParamRegistry& reg, const std::string& name, std::size_t count,
                     std::size_t d, Rng& rng) {
    table = reg.create(name + ".table", {count, d}, rng, 1.0 / std::sqrt((double)d));
}

LayerNormModule::LayerNormModule(ParamRegistry& reg, const std::string& name,
                                 std::size_t d) {
    gain = reg.create_ones(name + ".gain", {d});
    bias = reg.create_zeros(name + ".bias", {d});
}

MultiHeadAttention::MultiHeadAttention(ParamRegistry& reg, const std::string& name,
                                       std::size_t d, std::size_t heads_, Rng& rng)
    : heads(heads_),
      wq(reg, name + ".q", d, d, rng),
      wk(reg, name + ".k", d, d, rng),
      wv(reg, name + ".v", d, d, rng),
      wo(reg, name + ".o", d, d, rng) {
    if (d % heads != 0)
        throw std::invalid_argument("multi_head_attention: d=" + std::to_string(d) +
                                    " not divisible by heads=" +
                                    std::to_string(heads));
}

TensorPtr MultiHeadAttention::operator()(const TensorPtr& q, const TensorPtr& k,
                                         const TensorPtr& v,
                                         const std::vector<double>* attn_bias,
                                         std::vector<TensorPtr>* attn_out) const {
    const std::size_t d = wq.w->shape[0];
    const std::size_t dh = d / heads;
    auto qp = wq(q), kp = wk(k), vp = wv(v);
    const double sc = 1.0 / std::sqrt(static_cast<double>(dh));
    std::vector<TensorPtr> head_outs;
    for (std::size_t h = 0; h < heads; ++h) {
        auto qh = slice_cols(qp, h * dh, (h + 1) * dh);
        auto kh = slice_cols(kp, h * dh, (h + 1) * dh);
        auto vh = slice_cols(vp, h * dh, (h + 1) * dh);
        auto scores = scale(matmul(qh, transpose(kh)), sc);
        auto attn = softmax_rows(scores, attn_bias);
        if (attn_out) attn_out->push_back(attn);
        head_outs.push_back(matmul(attn, vh));
    }
    return wo(heads == 1 ? head_outs[0] : concat_cols(head_outs));
}

FeedForward::FeedForward(ParamRegistry& reg, const std::string& name, std::size_t d,
                         std::size_t ffn, Rng& rng)
    : in(reg, name + ".in", d, ffn, rng), out(reg, name + ".out", ffn, d, rng) {}

EncoderLayer::EncoderLayer(ParamRegistry& reg, const std::string& name, std::size_t d,
                           std::size_t heads, std::size_t ffn, Rng& rng)
    : attn(reg, name + ".attn", d, heads, rng),
      ln1(reg, name + ".ln1", d),
      ln2(reg, name + ".ln2", d),
      ff(reg, name + ".ff", d, ffn, rng) {}

TensorPtr EncoderLayer::operator()(const TensorPtr& x, const ForwardCtx& ctx,
                                   const std::vector<double>* attn_bias) const {
    auto a = ln1(add(x, ctx.drop(attn(x, x, x, attn_bias))));
    return ln2(add(a, ctx.drop(ff(a))));
}

CrossLayer::CrossLayer(ParamRegistry& reg, const std::string& name, std::size_t d,
                       std::size_t heads, std::size_t ffn, Rng& rng)
    : attn(reg, name + ".attn", d, heads, rng),
      ln1(reg, name + ".ln1", d),
      ln2(reg, name + ".ln2", d),
      ff(reg, name + ".ff", d, ffn, rng) {}

TensorPtr CrossLayer::operator()(const TensorPtr& y, const TensorPtr& x,
                                 const ForwardCtx& ctx,
                                 const std::vector<double>* attn_bias) const {
    auto a = ln1(add(y, ctx.drop(attn(y, x, x, attn_bias))));
    return ln2(add(a, ctx.drop(ff(a))));
}

LSTMCell::LSTMCell(ParamRegistry& reg, const std::string& name, std::size_t in,
                   std::size_t hidden_, Rng& rng)
    : hidden(hidden_) {
    wx = reg.create(name + ".wx", {in, 4 * hidden}, rng, 1.0 / std::sqrt((double)in));
    wh = reg.create(name + ".wh", {hidden, 4 * hidden}, rng,
                    1.0 / std::sqrt((double)hidden));
    b = reg.create_zeros(name + ".b", {4 * hidden});
}

std::pair<TensorPtr, TensorPtr> LSTMCell::step(const TensorPtr& x, const TensorPtr& h,
                                               const TensorPtr& c) const {
    auto gates = add_rowwise(add(matmul(x, wx), matmul(h, wh)), b);
    auto i_g = sigmoid_op(slice_cols(gates, 0, hidden));
    auto f_g = sigmoid_op(slice_cols(gates, hidden, 2 * hidden));
    auto g_g = tanh_op(slice_cols(gates, 2 * hidden, 3 * hidden));
    auto o_g = sigmoid_op(slice_cols(gates, 3 * hidden, 4 * hidden));
    auto c_next = add(mul(f_g, c), mul(i_g, g_g));
    auto h_next = mul(o_g, tanh_op(c_next));
    return {h_next, c_next};
}

CoAttention::CoAttention(ParamRegistry& reg, const std::string& name, std::size_t d,
                         std::size_t heads, std::size_t ffn, std::size_t layers_,
                         Rng& rng)
    : layers(layers_) {
    if (layers == 0) throw std::invalid_argument("co_attention: need at least 1 layer");
    for (std::size_t l = 0; l < layers; ++l) {
        enc_x.emplace_back(reg, name + ".x" + std::to_string(l), d, heads, ffn, rng);
        cross_y.emplace_back(reg, name + ".y" + std::to_string(l), d, heads, ffn, rng);
    }
    pool_x_h = Linear(reg, name + ".poolx.h", d, d, rng);
    pool_x_o = Linear(reg, name + ".poolx.o", d, 1, rng);
    pool_y_h = Linear(reg, name + ".pooly.h", d, d, rng);
    pool_y_o = Linear(reg, name + ".pooly.o", d, 1, rng);
}

namespace {

// Additive attention bias masking padded key rows.
std::vector<double> key_pad_bias(std::size_t lq, const std::vector<char>& pad) {
    std::vector<double> bias(lq * pad.size(), 0.0);
    for (std::size_t i = 0; i < lq; ++i)
        for (std::size_t j = 0; j < pad.size(); ++j)
            if (pad[j]) bias[i * pad.size() + j] = -1e30;
    return bias;
}

}  // namespace

TensorPtr CoAttention::pool(const TensorPtr& last, bool x_side,
                            const std::vector<char>* pad,
                            TensorPtr* alpha_out) const {
    const auto& h = x_side ? pool_x_h : pool_y_h;
    const auto& o = x_side ? pool_x_o : pool_y_o;
    auto scores = transpose(o(tanh_op(h(last))));  // [1 x rows]
    std::vector<double> bias;
    if (pad) {
        bias.assign(last->rows(), 0.0);
        for (std::size_t j = 0; j < pad->size(); ++j)
            if ((*pad)[j]) bias[j] = -1e30;
    }
    auto alpha = softmax_rows(scores, pad ? &bias : nullptr);
    if (alpha_out) *alpha_out = alpha;
    return matmul(alpha, last);  // [1 x d]
}

CoAttention::Result CoAttention::operator()(const TensorPtr& x, const TensorPtr& y,
                                            const ForwardCtx& ctx,
                                            const std::vector<char>* x_pad,
                                            const std::vector<char>* y_pad) const {
    if (x->rows() == 0 || y->rows() == 0)
        throw std::invalid_argument("co_attention: empty input sequence");
    std::vector<double> self_bias, cross_bias;
    if (x_pad) {
        self_bias = key_pad_bias(x->rows(), *x_pad);
        cross_bias = key_pad_bias(y->rows(), *x_pad);
    }
    auto xl = x;
    auto yl = y;
    for (std::size_t l = 0; l < layers; ++l) {
        xl = enc_x[l](xl, ctx, x_pad ? &self_bias : nullptr);
        yl = cross_y[l](yl, xl, ctx, x_pad ? &cross_bias : nullptr);
    }
    Result r;
    r.x_last = xl;
    r.y_last = yl;
    r.x_hat = pool(xl, true, x_pad, &r.alpha_x);
    r.y_hat = pool(yl, false, y_pad, &r.alpha_y);
    return r;
}

std::pair<std::vector<TensorPtr>, std::vector<TensorPtr>> CoAttention::encode_stacks(
    const std::vector<TensorPtr>& x_seqs, const std::vector<TensorPtr>& y_seqs,
    const ForwardCtx& ctx) const {
    auto xs = x_seqs;
    auto ys = y_seqs;
    for (std::size_t l = 0; l < layers; ++l) {
        for (auto& xt : xs) xt = enc_x[l](xt, ctx);
        // Keys/values for the cross direction: positions of X pooled by mean.
        TensorPtr xbar = xs[0];
        for (std::size_t t = 1; t < xs.size(); ++t) xbar = add(xbar, xs[t]);
        xbar = scale(xbar, 1.0 / static_cast<double>(xs.size()));
        for (auto& yu : ys) yu = cross_y[l](yu, xbar, ctx);
    }
    return {xs, ys};
}

std::vector<double> causal_bias(std::size_t len) {
    std::vector<double> bias(len * len, 0.0);
    for (std::size_t i = 0; i < len; ++i)
        for (std::size_t j = i + 1; j < len; ++j) bias[i * len + j] = -1e30;
    return bias;
}

}  // namespace sotvae
