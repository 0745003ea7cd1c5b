#include "sotvae/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

#include "sotvae/kernels.hpp"

namespace sotvae {

namespace {

std::size_t numel(const std::vector<std::size_t>& shape) {
    std::size_t n = 1;
    for (auto d : shape) n *= d;
    return n;
}

bool tracked(const TensorPtr& t) { return t->requires_grad; }

// Marks the result as a graph node when any input is tracked.
void record(const TensorPtr& out, std::vector<TensorPtr> parents,
            std::function<void(Tensor&)> fn) {
    bool any = false;
    for (const auto& p : parents)
        if (tracked(p)) any = true;
    if (!any) return;
    out->requires_grad = true;
    out->parents = std::move(parents);
    out->backward_fn = std::move(fn);
}

void check_same_shape(const TensorPtr& a, const TensorPtr& b, const char* op) {
    if (a->shape != b->shape)
        throw std::invalid_argument(std::string(op) + ": shape mismatch " +
                                    shape_str(a->shape) + " vs " + shape_str(b->shape));
}

}  // namespace

double Tensor::item() const {
    if (data.size() != 1) throw std::logic_error("item(): tensor is not scalar");
    return data[0];
}

std::string shape_str(const std::vector<std::size_t>& s) {
    std::ostringstream os;
    os << "[";
    for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "x" : "") << s[i];
    os << "]";
    return os.str();
}

void assert_finite(const Tensor& t, const std::string& context) {
    for (double v : t.data)
        if (!std::isfinite(v))
            throw std::runtime_error("non-finite value in " + context);
}

TensorPtr make_tensor(std::vector<std::size_t> shape, bool requires_grad) {
    auto t = std::make_shared<Tensor>();
    t->shape = std::move(shape);
    t->data.assign(numel(t->shape), 0.0);
    t->requires_grad = requires_grad;
    return t;
}

TensorPtr make_tensor(std::vector<std::size_t> shape, std::vector<double> data,
                      bool requires_grad) {
    if (numel(shape) != data.size())
        throw std::invalid_argument("make_tensor: data length " +
                                    std::to_string(data.size()) +
                                    " does not match shape " + shape_str(shape));
    auto t = std::make_shared<Tensor>();
    t->shape = std::move(shape);
    t->data = std::move(data);
    t->requires_grad = requires_grad;
    return t;
}

TensorPtr scalar(double v) {
    return make_tensor({1}, std::vector<double>{v});
}

TensorPtr randn(std::vector<std::size_t> shape, Rng& rng, double stddev,
                bool requires_grad) {
    auto t = make_tensor(std::move(shape), requires_grad);
    for (auto& v : t->data) v = rng.normal() * stddev;
    return t;
}

TensorPtr matmul(const TensorPtr& a, const TensorPtr& b) {
    if (a->shape.size() != 2 || b->shape.size() != 2 || a->shape[1] != b->shape[0])
        throw std::invalid_argument("matmul: incompatible shapes " +
                                    shape_str(a->shape) + " and " + shape_str(b->shape));
    const std::size_t m = a->shape[0], k = a->shape[1], n = b->shape[1];
    auto out = make_tensor({m, n});
    kernels::matmul(a->data.data(), b->data.data(), out->data.data(), m, k, n);
    record(out, {a, b}, [m, k, n](Tensor& self) {
        auto& pa = self.parents[0];
        auto& pb = self.parents[1];
        if (pa->requires_grad) {
            pa->ensure_grad();
            kernels::matmul_bt(self.grad.data(), pb->data.data(), pa->grad.data(),
                               m, n, k);
        }
        if (pb->requires_grad) {
            pb->ensure_grad();
            kernels::matmul_at(pa->data.data(), self.grad.data(), pb->grad.data(),
                               m, k, n);
        }
    });
    return out;
}

TensorPtr transpose(const TensorPtr& a) {
    if (a->shape.size() != 2)
        throw std::invalid_argument("transpose: need 2-D tensor, got " +
                                    shape_str(a->shape));
    const std::size_t m = a->shape[0], n = a->shape[1];
    auto out = make_tensor({n, m});
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) out->data[j * m + i] = a->data[i * n + j];
    record(out, {a}, [m, n](Tensor& self) {
        auto& p = self.parents[0];
        p->ensure_grad();
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j)
                p->grad[i * n + j] += self.grad[j * m + i];
    });
    return out;
}

TensorPtr add(const TensorPtr& a, const TensorPtr& b) {
    check_same_shape(a, b, "add");
    auto out = make_tensor(a->shape);
    for (std::size_t i = 0; i < out->size(); ++i)
        out->data[i] = a->data[i] + b->data[i];
    record(out, {a, b}, [](Tensor& self) {
        for (auto& p : self.parents) {
            if (!p->requires_grad) continue;
            p->ensure_grad();
            for (std::size_t i = 0; i < self.size(); ++i) p->grad[i] += self.grad[i];
        }
    });
    return out;
}

TensorPtr sub(const TensorPtr& a, const TensorPtr& b) {
    check_same_shape(a, b, "sub");
    auto out = make_tensor(a->shape);
    for (std::size_t i = 0; i < out->size(); ++i)
        out->data[i] = a->data[i] - b->data[i];
    record(out, {a, b}, [](Tensor& self) {
        auto& pa = self.parents[0];
        auto& pb = self.parents[1];
        if (pa->requires_grad) {
            pa->ensure_grad();
            for (std::size_t i = 0; i < self.size(); ++i) pa->grad[i] += self.grad[i];
        }
        if (pb->requires_grad) {
            pb->ensure_grad();
            for (std::size_t i = 0; i < self.size(); ++i) pb->grad[i] -= self.grad[i];
        }
    });
    return out;
}

TensorPtr mul(const TensorPtr& a, const TensorPtr& b) {
    check_same_shape(a, b, "mul");
    auto out = make_tensor(a->shape);
    for (std::size_t i = 0; i < out->size(); ++i)
        out->data[i] = a->data[i] * b->data[i];
    record(out, {a, b}, [](Tensor& self) {
        auto& pa = self.parents[0];
        auto& pb = self.parents[1];
        if (pa->requires_grad) {
            pa->ensure_grad();
            for (std::size_t i = 0; i < self.size(); ++i)
                pa->grad[i] += self.grad[i] * pb->data[i];
        }
        if (pb->requires_grad) {
            pb->ensure_grad();
            for (std::size_t i = 0; i < self.size(); ++i)
                pb->grad[i] += self.grad[i] * pa->data[i];
        }
    });
    return out;
}

TensorPtr add_rowwise(const TensorPtr& a, const TensorPtr& bias) {
    const std::size_t m = a->rows(), n = a->cols();
    if (bias->size() != n)
        throw std::invalid_argument("add_rowwise: bias length " +
                                    std::to_string(bias->size()) +
                                    " vs columns " + std::to_string(n));
    auto out = make_tensor(a->shape);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j)
            out->data[i * n + j] = a->data[i * n + j] + bias->data[j];
    record(out, {a, bias}, [m, n](Tensor& self) {
        auto& pa = self.parents[0];
        auto& pb = self.parents[1];
        if (pa->requires_grad) {
            pa->ensure_grad();
            for (std::size_t i = 0; i < self.size(); ++i) pa->grad[i] += self.grad[i];
        }
        if (pb->requires_grad) {
            pb->ensure_grad();
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t j = 0; j < n; ++j)
                    pb->grad[j] += self.grad[i * n + j];
        }
    });
    return out;
}

TensorPtr scale(const TensorPtr& a, double c) {
    auto out = make_tensor(a->shape);
    for (std::size_t i = 0; i < out->size(); ++i) out->data[i] = a->data[i] * c;
    record(out, {a}, [c](Tensor& self) {
        auto& p = self.parents[0];
        p->ensure_grad();
        for (std::size_t i = 0; i < self.size(); ++i) p->grad[i] += self.grad[i] * c;
    });
    return out;
}

TensorPtr tanh_op(const TensorPtr& a) {
    auto out = make_tensor(a->shape);
    for (std::size_t i = 0; i < out->size(); ++i) out->data[i] = std::tanh(a->data[i]);
    record(out, {a}, [](Tensor& self) {
        auto& p = self.parents[0];
        p->ensure_grad();
        for (std::size_t i = 0; i < self.size(); ++i)
            p->grad[i] += self.grad[i] * (1.0 - self.data[i] * self.data[i]);
    });
    return out;
}

TensorPtr relu_op(const TensorPtr& a) {
    auto out = make_tensor(a->shape);
    for (std::size_t i = 0; i < out->size(); ++i)
        out->data[i] = a->data[i] > 0.0 ? a->data[i] : 0.0;
    record(out, {a}, [](Tensor& self) {
        auto& p = self.parents[0];
        p->ensure_grad();
        for (std::size_t i = 0; i < self.size(); ++i)
            if (p->data[i] > 0.0) p->grad[i] += self.grad[i];
    });
    return out;
}

TensorPtr sigmoid_op(const TensorPtr& a) {
    auto out = make_tensor(a->shape);
    for (std::size_t i = 0; i < out->size(); ++i)
        out->data[i] = 1.0 / (1.0 + std::exp(-a->data[i]));
    record(out, {a}, [](Tensor& self) {
        auto& p = self.parents[0];
        p->ensure_grad();
        for (std::size_t i = 0; i < self.size(); ++i)
            p->grad[i] += self.grad[i] * self.data[i] * (1.0 - self.data[i]);
    });
    return out;
}

TensorPtr exp_op(const TensorPtr& a) {
    auto out = make_tensor(a->shape);
    for (std::size_t i = 0; i < out->size(); ++i) out->data[i] = std::exp(a->data[i]);
    record(out, {a}, [](Tensor& self) {
        auto& p = self.parents[0];
        p->ensure_grad();
        for (std::size_t i = 0; i < self.size(); ++i)
            p->grad[i] += self.grad[i] * self.data[i];
    });
    return out;
}

TensorPtr log_op(const TensorPtr& a) {
    auto out = make_tensor(a->shape);
    for (std::size_t i = 0; i < out->size(); ++i) {
        if (a->data[i] <= 0.0)
            throw std::domain_error("log_op: non-positive input");
        out->data[i] = std::log(a->data[i]);
    }
    record(out, {a}, [](Tensor& self) {
        auto& p = self.parents[0];
        p->ensure_grad();
        for (std::size_t i = 0; i < self.size(); ++i)
            p->grad[i] += self.grad[i] / p->data[i];
    });
    return out;
}

TensorPtr add_scalar(const TensorPtr& a, double c) {
    auto out = make_tensor(a->shape);
    for (std::size_t i = 0; i < out->size(); ++i) out->data[i] = a->data[i] + c;
    record(out, {a}, [](Tensor& self) {
        auto& p = self.parents[0];
        p->ensure_grad();
        for (std::size_t i = 0; i < self.size(); ++i) p->grad[i] += self.grad[i];
    });
    return out;
}

TensorPtr clamp_op(const TensorPtr& a, double lo, double hi) {
    auto out = make_tensor(a->shape);
    for (std::size_t i = 0; i < out->size(); ++i)
        out->data[i] = std::clamp(a->data[i], lo, hi);
    record(out, {a}, [lo, hi](Tensor& self) {
        auto& p = self.parents[0];
        p->ensure_grad();
        for (std::size_t i = 0; i < self.size(); ++i)
            if (p->data[i] > lo && p->data[i] < hi) p->grad[i] += self.grad[i];
    });
    return out;
}

TensorPtr square(const TensorPtr& a) {
    auto out = make_tensor(a->shape);
    for (std::size_t i = 0; i < out->size(); ++i)
        out->data[i] = a->data[i] * a->data[i];
    record(out, {a}, [](Tensor& self) {
        auto& p = self.parents[0];
        p->ensure_grad();
        for (std::size_t i = 0; i < self.size(); ++i)
            p->grad[i] += self.grad[i] * 2.0 * p->data[i];
    });
    return out;
}

TensorPtr mul_const(const TensorPtr& a, const std::vector<double>& mask) {
    if (mask.size() != a->size())
        throw std::invalid_argument("mul_const: mask length mismatch");
    auto out = make_tensor(a->shape);
    for (std::size_t i = 0; i < out->size(); ++i)
        out->data[i] = a->data[i] * mask[i];
    record(out, {a}, [mask](Tensor& self) {
        auto& p = self.parents[0];
        p->ensure_grad();
        for (std::size_t i = 0; i < self.size(); ++i)
            p->grad[i] += self.grad[i] * mask[i];
    });
    return out;
}

TensorPtr softmax_rows(const TensorPtr& x, const std::vector<double>* attn_bias) {
    const std::size_t m = x->rows(), n = x->cols();
    if (attn_bias && attn_bias->size() != x->size())
        throw std::invalid_argument("softmax_rows: bias length mismatch");
    auto out = make_tensor(x->shape);
    for (std::size_t i = 0; i < m; ++i) {
        double mx = -1e300;
        for (std::size_t j = 0; j < n; ++j) {
            double v = x->data[i * n + j] + (attn_bias ? (*attn_bias)[i * n + j] : 0.0);
            out->data[i * n + j] = v;
            mx = std::max(mx, v);
        }
        double sum = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            double e = std::exp(out->data[i * n + j] - mx);
            out->data[i * n + j] = e;
            sum += e;
        }
        for (std::size_t j = 0; j < n; ++j) out->data[i * n + j] /= sum;
    }
    record(out, {x}, [m, n](Tensor& self) {
        auto& p = self.parents[0];
        p->ensure_grad();
        for (std::size_t i = 0; i < m; ++i) {
            double dot = 0.0;
            for (std::size_t j = 0; j < n; ++j)
                dot += self.grad[i * n + j] * self.data[i * n + j];
            for (std::size_t j = 0; j < n; ++j)
                p->grad[i * n + j] +=
                    self.data[i * n + j] * (self.grad[i * n + j] - dot);
        }
    });
    return out;
}

TensorPtr log_softmax_rows(const TensorPtr& x) {
    const std::size_t m = x->rows(), n = x->cols();
    auto out = make_tensor(x->shape);
    for (std::size_t i = 0; i < m; ++i) {
        double mx = -1e300;
        for (std::size_t j = 0; j < n; ++j) mx = std::max(mx, x->data[i * n + j]);
        double sum = 0.0;
        for (std::size_t j = 0; j < n; ++j) sum += std::exp(x->data[i * n + j] - mx);
        const double lse = mx + std::log(sum);
        for (std::size_t j = 0; j < n; ++j)
            out->data[i * n + j] = x->data[i * n + j] - lse;
    }
    record(out, {x}, [m, n](Tensor& self) {
        auto& p = self.parents[0];
        p->ensure_grad();
        for (std::size_t i = 0; i < m; ++i) {
            double gsum = 0.0;
            for (std::size_t j = 0; j < n; ++j) gsum += self.grad[i * n + j];
            for (std::size_t j = 0; j < n; ++j)
                p->grad[i * n + j] += self.grad[i * n + j] -
                                      std::exp(self.data[i * n + j]) * gsum;
        }
    });
    return out;
}

TensorPtr layer_norm(const TensorPtr& x, const TensorPtr& gain,
                     const TensorPtr& bias, double eps) {
    const std::size_t m = x->rows(), n = x->cols();
    if (gain->size() != n || bias->size() != n)
        throw std::invalid_argument("layer_norm: gain/bias length vs columns " +
                                    std::to_string(n));
    auto out = make_tensor(x->shape);
    std::vector<double> xhat(x->size()), inv_std(m);
    for (std::size_t i = 0; i < m; ++i) {
        double mean = 0.0;
        for (std::size_t j = 0; j < n; ++j) mean += x->data[i * n + j];
        mean /= n;
        double var = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            double d = x->data[i * n + j] - mean;
            var += d * d;
        }
        var /= n;
        inv_std[i] = 1.0 / std::sqrt(var + eps);
        for (std::size_t j = 0; j < n; ++j) {
            xhat[i * n + j] = (x->data[i * n + j] - mean) * inv_std[i];
            out->data[i * n + j] = xhat[i * n + j] * gain->data[j] + bias->data[j];
        }
    }
    record(out, {x, gain, bias},
           [m, n, xhat = std::move(xhat), inv_std = std::move(inv_std)](Tensor& self) {
               auto& px = self.parents[0];
               auto& pg = self.parents[1];
               auto& pb = self.parents[2];
               if (pg->requires_grad) pg->ensure_grad();
               if (pb->requires_grad) pb->ensure_grad();
               if (px->requires_grad) px->ensure_grad();
               for (std::size_t i = 0; i < m; ++i) {
                   double mean_dxh = 0.0, mean_dxh_xh = 0.0;
                   for (std::size_t j = 0; j < n; ++j) {
                       const double g = self.grad[i * n + j];
                       const double xh = xhat[i * n + j];
                       if (pg->requires_grad) pg->grad[j] += g * xh;
                       if (pb->requires_grad) pb->grad[j] += g;
                       const double dxh = g * pg->data[j];
                       mean_dxh += dxh;
                       mean_dxh_xh += dxh * xh;
                   }
                   if (!px->requires_grad) continue;
                   mean_dxh /= n;
                   mean_dxh_xh /= n;
                   for (std::size_t j = 0; j < n; ++j) {
                       const double dxh = self.grad[i * n + j] * pg->data[j];
                       px->grad[i * n + j] +=
                           inv_std[i] * (dxh - mean_dxh - xhat[i * n + j] * mean_dxh_xh);
                   }
               }
           });
    return out;
}

TensorPtr sum_all(const TensorPtr& x) {
    auto out = make_tensor({1});
    for (double v : x->data) out->data[0] += v;
    record(out, {x}, [](Tensor& self) {
        auto& p = self.parents[0];
        p->ensure_grad();
        for (std::size_t i = 0; i < p->size(); ++i) p->grad[i] += self.grad[0];
    });
    return out;
}

TensorPtr sum_rows(const TensorPtr& x) {
    const std::size_t m = x->rows(), n = x->cols();
    auto out = make_tensor({1, n});
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) out->data[j] += x->data[i * n + j];
    record(out, {x}, [m, n](Tensor& self) {
        auto& p = self.parents[0];
        p->ensure_grad();
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j) p->grad[i * n + j] += self.grad[j];
    });
    return out;
}

TensorPtr mean_all(const TensorPtr& x) {
    return scale(sum_all(x), 1.0 / static_cast<double>(x->size()));
}

TensorPtr concat_rows(const std::vector<TensorPtr>& parts) {
    if (parts.empty()) throw std::invalid_argument("concat_rows: empty input");
    const std::size_t n = parts[0]->cols();
    std::size_t m = 0;
    for (const auto& p : parts) {
        if (p->cols() != n)
            throw std::invalid_argument("concat_rows: column mismatch");
        m += p->rows();
    }
    auto out = make_tensor({m, n});
    std::size_t r = 0;
    for (const auto& p : parts) {
        std::copy(p->data.begin(), p->data.end(), out->data.begin() + r * n);
        r += p->rows();
    }
    record(out, parts, [n](Tensor& self) {
        std::size_t r = 0;
        for (auto& p : self.parents) {
            if (p->requires_grad) {
                p->ensure_grad();
                for (std::size_t i = 0; i < p->size(); ++i)
                    p->grad[i] += self.grad[r * n + i];
            }
            r += p->rows();
        }
    });
    return out;
}

TensorPtr concat_cols(const std::vector<TensorPtr>& parts) {
    if (parts.empty()) throw std::invalid_argument("concat_cols: empty input");
    const std::size_t m = parts[0]->rows();
    std::size_t n = 0;
    std::vector<std::size_t> widths;
    for (const auto& p : parts) {
        if (p->rows() != m) throw std::invalid_argument("concat_cols: row mismatch");
        widths.push_back(p->cols());
        n += p->cols();
    }
    auto out = make_tensor({m, n});
    std::size_t c = 0;
    for (std::size_t pi = 0; pi < parts.size(); ++pi) {
        const auto& p = parts[pi];
        for (std::size_t i = 0; i < m; ++i)
            std::copy(p->data.begin() + i * widths[pi],
                      p->data.begin() + (i + 1) * widths[pi],
                      out->data.begin() + i * n + c);
        c += widths[pi];
    }
    record(out, parts, [m, n, widths](Tensor& self) {
        std::size_t c = 0;
        for (std::size_t pi = 0; pi < self.parents.size(); ++pi) {
            auto& p = self.parents[pi];
            const std::size_t w = widths[pi];
            if (p->requires_grad) {
                p->ensure_grad();
                for (std::size_t i = 0; i < m; ++i)
                    for (std::size_t j = 0; j < w; ++j)
                        p->grad[i * w + j] += self.grad[i * n + c + j];
            }
            c += w;
        }
    });
    return out;
}

TensorPtr row(const TensorPtr& x, std::size_t i) {
    const std::size_t n = x->cols();
    if (i >= x->rows()) throw std::out_of_range("row: index out of range");
    auto out = make_tensor({1, n});
    std::copy(x->data.begin() + i * n, x->data.begin() + (i + 1) * n,
              out->data.begin());
    record(out, {x}, [i, n](Tensor& self) {
        auto& p = self.parents[0];
        p->ensure_grad();
        for (std::size_t j = 0; j < n; ++j) p->grad[i * n + j] += self.grad[j];
    });
    return out;
}

TensorPtr slice_cols(const TensorPtr& x, std::size_t c0, std::size_t c1) {
    const std::size_t m = x->rows(), n = x->cols();
    if (c0 >= c1 || c1 > n) throw std::out_of_range("slice_cols: bad range");
    const std::size_t w = c1 - c0;
    auto out = make_tensor({m, w});
    for (std::size_t i = 0; i < m; ++i)
        std::copy(x->data.begin() + i * n + c0, x->data.begin() + i * n + c1,
                  out->data.begin() + i * w);
    record(out, {x}, [m, n, c0, w](Tensor& self) {
        auto& p = self.parents[0];
        p->ensure_grad();
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < w; ++j)
                p->grad[i * n + c0 + j] += self.grad[i * w + j];
    });
    return out;
}

TensorPtr embedding_rows(const TensorPtr& table, const std::vector<int>& ids) {
    const std::size_t v = table->rows(), d = table->cols();
    auto out = make_tensor({ids.size(), d});
    for (std::size_t i = 0; i < ids.size(); ++i) {
        if (ids[i] < 0 || static_cast<std::size_t>(ids[i]) >= v)
            throw std::out_of_range("embedding_rows: id " + std::to_string(ids[i]) +
                                    " outside table of " + std::to_string(v));
        std::copy(table->data.begin() + ids[i] * d,
                  table->data.begin() + (ids[i] + 1) * d, out->data.begin() + i * d);
    }
    record(out, {table}, [ids, d](Tensor& self) {
        auto& p = self.parents[0];
        p->ensure_grad();
        for (std::size_t i = 0; i < ids.size(); ++i)
            for (std::size_t j = 0; j < d; ++j)
                p->grad[ids[i] * d + j] += self.grad[i * d + j];
    });
    return out;
}

TensorPtr dropout(const TensorPtr& x, double p, Rng& rng, bool training) {
    if (!training || p <= 0.0) return x;
    if (p >= 1.0) throw std::invalid_argument("dropout: p must be < 1");
    std::vector<double> mask(x->size());
    const double keep = 1.0 / (1.0 - p);
    for (auto& m : mask) m = rng.uniform() < p ? 0.0 : keep;
    return mul_const(x, mask);
}

TensorPtr gather_nll(const TensorPtr& log_probs, const std::vector<int>& targets) {
    const std::size_t m = log_probs->rows(), n = log_probs->cols();
    if (targets.size() != m)
        throw std::invalid_argument("gather_nll: " + std::to_string(targets.size()) +
                                    " targets for " + std::to_string(m) + " rows");
    std::size_t count = 0;
    double total = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        if (targets[i] < 0) continue;
        if (static_cast<std::size_t>(targets[i]) >= n)
            throw std::out_of_range("gather_nll: target out of range");
        total -= log_probs->data[i * n + targets[i]];
        ++count;
    }
    if (count == 0) throw std::invalid_argument("gather_nll: no scored positions");
    auto out = make_tensor({1}, std::vector<double>{total / count});
    record(out, {log_probs}, [targets, n, count](Tensor& self) {
        auto& p = self.parents[0];
        p->ensure_grad();
        const double g = self.grad[0] / count;
        for (std::size_t i = 0; i < targets.size(); ++i)
            if (targets[i] >= 0) p->grad[i * n + targets[i]] -= g;
    });
    return out;
}

void backward(const TensorPtr& loss) {
    if (loss->size() != 1)
        throw std::logic_error("backward: loss must be scalar, got " +
                               shape_str(loss->shape));
    // Post-order DFS, then reverse for topological backward order.
    std::vector<Tensor*> order;
    std::unordered_set<Tensor*> seen;
    std::vector<std::pair<TensorPtr, std::size_t>> stack;
    stack.emplace_back(loss, 0);
    seen.insert(loss.get());
    while (!stack.empty()) {
        auto& [node, idx] = stack.back();
        if (idx < node->parents.size()) {
            TensorPtr next = node->parents[idx++];
            if (next->requires_grad && !seen.count(next.get())) {
                seen.insert(next.get());
                stack.emplace_back(std::move(next), 0);
            }
        } else {
            order.push_back(node.get());
            stack.pop_back();
        }
    }
    loss->ensure_grad();
    loss->grad[0] += 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Tensor* t = *it;
        if (t->backward_fn) {
            t->ensure_grad();
            t->backward_fn(*t);
        }
    }
}

}  // namespace sotvae
