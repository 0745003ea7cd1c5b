#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "gradcheck.hpp"
#include "sotvae/kernels.hpp"
#include "sotvae/nn.hpp"
#include "sotvae/tensor.hpp"

using namespace sotvae;

TEST_CASE("matmul identity") {
    Rng rng(1);
    auto a = randn({3, 3}, rng, 1.0);
    auto eye = make_tensor({3, 3});
    for (int i = 0; i < 3; ++i) eye->data[i * 3 + i] = 1.0;
    auto out = matmul(eye, a);
    for (std::size_t i = 0; i < 9; ++i) CHECK(out->data[i] == doctest::Approx(a->data[i]));
}

TEST_CASE("matmul hand case") {
    auto a = make_tensor({1, 2}, {1, 2});
    auto b = make_tensor({2, 1}, {3, 4});
    CHECK(matmul(a, b)->data[0] == doctest::Approx(11.0));
}

TEST_CASE("matmul shape mismatch names both shapes") {
    auto a = make_tensor({2, 3});
    auto b = make_tensor({2, 3});
    CHECK_THROWS_WITH_AS(matmul(a, b),
                         doctest::Contains("[2x3]"), std::invalid_argument);
}

TEST_CASE("matmul gradient vs finite differences") {
    Rng rng(7);
    auto a = randn({3, 4}, rng, 1.0, true);
    auto b = randn({4, 2}, rng, 1.0, true);
    auto rep = gradcheck::check({a, b}, [&] { return sum_all(square(matmul(a, b))); });
    CHECK(gradcheck::ok(rep));
}

TEST_CASE("softmax basics") {
    auto x = make_tensor({1, 3}, {0, 0, 0});
    auto s = softmax_rows(x);
    for (int j = 0; j < 3; ++j) CHECK(s->data[j] == doctest::Approx(1.0 / 3));

    auto xc = make_tensor({1, 3}, {5, 5, 5});
    auto sc = softmax_rows(xc);
    for (int j = 0; j < 3; ++j) CHECK(sc->data[j] == doctest::Approx(s->data[j]));
}

TEST_CASE("softmax rows sum to one within 1e-12") {
    Rng rng(3);
    auto x = randn({5, 7}, rng, 3.0);
    auto s = softmax_rows(x);
    for (int i = 0; i < 5; ++i) {
        double sum = 0;
        for (int j = 0; j < 7; ++j) sum += s->data[i * 7 + j];
        CHECK(std::fabs(sum - 1.0) < 1e-12);
    }
}

TEST_CASE("softmax gradient") {
    Rng rng(11);
    auto x = randn({2, 5}, rng, 1.0, true);
    auto w = randn({2, 5}, rng, 1.0);
    auto rep = gradcheck::check({x}, [&] { return sum_all(mul(softmax_rows(x), w)); });
    CHECK(gradcheck::ok(rep));
}

TEST_CASE("layer_norm constant row maps to bias") {
    auto x = make_tensor({1, 4}, {2, 2, 2, 2});
    auto g = make_tensor({4}, {1, 1, 1, 1});
    auto b = make_tensor({4}, {0, 0, 0, 0});
    auto y = layer_norm(x, g, b);
    for (int j = 0; j < 4; ++j) CHECK(y->data[j] == doctest::Approx(0.0));
}

TEST_CASE("layer_norm already-normalized row") {
    auto x = make_tensor({1, 2}, {1, -1});
    auto g = make_tensor({2}, {1, 1});
    auto b = make_tensor({2}, {0, 0});
    auto y = layer_norm(x, g, b, 1e-12);
    CHECK(y->data[0] == doctest::Approx(1.0));
    CHECK(y->data[1] == doctest::Approx(-1.0));
}

TEST_CASE("layer_norm pre-affine rows have zero mean unit variance") {
    Rng rng(5);
    auto x = randn({4, 8}, rng, 2.0);
    auto g = make_tensor({8});
    for (auto& v : g->data) v = 1.0;
    auto b = make_tensor({8});
    auto y = layer_norm(x, g, b, 1e-12);
    for (int i = 0; i < 4; ++i) {
        double mean = 0, var = 0;
        for (int j = 0; j < 8; ++j) mean += y->data[i * 8 + j];
        mean /= 8;
        CHECK(std::fabs(mean) < 1e-10);
        for (int j = 0; j < 8; ++j) {
            double d = y->data[i * 8 + j] - mean;
            var += d * d;
        }
        CHECK(var / 8 == doctest::Approx(1.0).epsilon(1e-6));
    }
}

TEST_CASE("layer_norm gradient") {
    Rng rng(13);
    auto x = randn({3, 6}, rng, 1.0, true);
    auto g = randn({6}, rng, 0.5, true);
    for (auto& v : g->data) v += 1.0;
    auto b = randn({6}, rng, 0.5, true);
    auto w = randn({3, 6}, rng, 1.0);
    auto rep = gradcheck::check(
        {x, g, b}, [&] { return sum_all(mul(layer_norm(x, g, b), w)); });
    CHECK(gradcheck::ok(rep));
}

TEST_CASE("multi-head attention: singleton key gets weight 1") {
    Rng rng(17);
    ParamRegistry reg;
    MultiHeadAttention mha(reg, "mha", 8, 2, rng);
    auto q = randn({3, 8}, rng, 1.0);
    auto k = randn({1, 8}, rng, 1.0);
    std::vector<TensorPtr> attn;
    mha(q, k, k, nullptr, &attn);
    for (const auto& a : attn)
        for (double w : a->data) CHECK(w == doctest::Approx(1.0));
}

TEST_CASE("multi-head attention: equal keys make output row-permutation invariant") {
    Rng rng(19);
    ParamRegistry reg;
    MultiHeadAttention mha(reg, "mha", 8, 2, rng);
    auto q = randn({2, 8}, rng, 1.0);
    auto k = make_tensor({3, 8});
    for (int j = 0; j < 8; ++j)
        for (int i = 0; i < 3; ++i) k->data[i * 8 + j] = 0.3 * j;
    // identical rows: permuting keys/values is a no-op by construction
    auto out1 = mha(q, k, k);
    auto out2 = mha(q, k, k);
    for (std::size_t i = 0; i < out1->size(); ++i)
        CHECK(out1->data[i] == doctest::Approx(out2->data[i]));
}

TEST_CASE("multi-head attention rejects indivisible head count") {
    Rng rng(23);
    ParamRegistry reg;
    CHECK_THROWS_AS(MultiHeadAttention(reg, "m", 10, 3, rng), std::invalid_argument);
}

TEST_CASE("multi-head attention gradient") {
    Rng rng(29);
    ParamRegistry reg;
    MultiHeadAttention mha(reg, "mha", 8, 2, rng);
    auto q = randn({2, 8}, rng, 1.0, true);
    auto k = randn({3, 8}, rng, 1.0, true);
    auto v = randn({3, 8}, rng, 1.0, true);
    auto rep = gradcheck::check({q, k, v}, [&] { return sum_all(mha(q, k, v)); });
    CHECK(gradcheck::ok(rep));
}

TEST_CASE("lstm zero weights give zero hidden state") {
    Rng rng(31);
    ParamRegistry reg;
    LSTMCell cell(reg, "lstm", 4, 6, rng);
    for (auto& v : cell.wx->data) v = 0.0;
    for (auto& v : cell.wh->data) v = 0.0;
    auto x = randn({1, 4}, rng, 1.0);
    auto h = make_tensor({1, 6});
    auto c = make_tensor({1, 6});
    auto [h2, c2] = cell.step(x, h, c);
    for (double v : h2->data) CHECK(v == doctest::Approx(0.0));
}

TEST_CASE("lstm hidden state bounded in (-1,1)") {
    Rng rng(37);
    ParamRegistry reg;
    LSTMCell cell(reg, "lstm", 4, 6, rng);
    auto h = make_tensor({1, 6});
    auto c = make_tensor({1, 6});
    for (int t = 0; t < 5; ++t) {
        auto x = randn({1, 4}, rng, 3.0);
        auto [h2, c2] = cell.step(x, h, c);
        h = h2;
        c = c2;
        for (double v : h->data) {
            CHECK(v > -1.0);
            CHECK(v < 1.0);
        }
        for (double v : c->data) CHECK(std::isfinite(v));
    }
}

TEST_CASE("lstm gradient through 3 unrolled steps") {
    Rng rng(41);
    ParamRegistry reg;
    LSTMCell cell(reg, "lstm", 3, 4, rng);
    auto x0 = randn({1, 3}, rng, 1.0, true);
    auto x1 = randn({1, 3}, rng, 1.0, true);
    auto x2 = randn({1, 3}, rng, 1.0, true);
    std::vector<TensorPtr> leaves = {x0, x1, x2, cell.wx, cell.wh, cell.b};
    auto rep = gradcheck::check(leaves, [&] {
        auto h = make_tensor({1, 4});
        auto c = make_tensor({1, 4});
        for (const auto& x : {x0, x1, x2}) {
            auto [h2, c2] = cell.step(x, h, c);
            h = h2;
            c = c2;
        }
        return sum_all(square(h));
    });
    CHECK(gradcheck::ok(rep));
}

TEST_CASE("backward: linear case and disconnected parameter") {
    Rng rng(43);
    auto w = randn({3, 2}, rng, 1.0, true);
    auto unused = randn({2, 2}, rng, 1.0, true);
    auto x = make_tensor({2, 3}, {1, 2, 3, 4, 5, 6});
    auto loss = sum_all(matmul(x, w));
    backward(loss);
    // d/dW sum(XW) = column sums of X
    CHECK(w->grad[0] == doctest::Approx(5.0));
    CHECK(w->grad[2] == doctest::Approx(7.0));
    CHECK(w->grad[4] == doctest::Approx(9.0));
    CHECK(unused->grad.empty());
}

TEST_CASE("backward on non-scalar is a contract error") {
    auto t = make_tensor({2, 2}, true);
    CHECK_THROWS_AS(backward(t), std::logic_error);
}

TEST_CASE("backward accumulates across calls") {
    auto w = make_tensor({1, 1}, {2.0}, true);
    auto loss1 = sum_all(square(w));
    backward(loss1);
    CHECK(w->grad[0] == doctest::Approx(4.0));
    auto loss2 = sum_all(square(w));
    backward(loss2);
    CHECK(w->grad[0] == doctest::Approx(8.0));
}

TEST_CASE("composite attention+layernorm stack gradient") {
    Rng rng(47);
    ParamRegistry reg;
    EncoderLayer layer(reg, "enc", 8, 2, 16, rng);
    auto x = randn({3, 8}, rng, 1.0, true);
    std::vector<TensorPtr> leaves = {x};
    for (auto& [n, p] : reg.params()) leaves.push_back(p);
    ForwardCtx ctx;  // eval mode: no dropout
    auto rep = gradcheck::check(leaves, [&] { return sum_all(square(layer(x, ctx))); });
    CHECK(gradcheck::ok(rep));
}

TEST_CASE("dropout determinism under fixed seed") {
    Rng r1(99), r2(99);
    auto x = make_tensor({4, 4});
    for (auto& v : x->data) v = 1.0;
    auto a = dropout(x, 0.5, r1, true);
    auto b = dropout(x, 0.5, r2, true);
    for (std::size_t i = 0; i < 16; ++i) CHECK(a->data[i] == b->data[i]);
}

TEST_CASE("omp kernels match serial reference") {
    Rng rng(53);
    const std::size_t m = 9, k = 13, n = 7;
    std::vector<double> a(m * k), b(k * n);
    for (auto& v : a) v = rng.normal();
    for (auto& v : b) v = rng.normal();

    std::vector<double> c1(m * n, 0.0), c2(m * n, 0.0);
    kernels::matmul_serial(a.data(), b.data(), c1.data(), m, k, n);
    kernels::matmul_omp(a.data(), b.data(), c2.data(), m, k, n);
    for (std::size_t i = 0; i < m * n; ++i) CHECK(c1[i] == doctest::Approx(c2[i]));

    std::vector<double> d1(m * k, 0.0), d2(m * k, 0.0);
    kernels::matmul_bt_serial(c1.data(), b.data(), d1.data(), m, n, k);
    kernels::matmul_bt_omp(c1.data(), b.data(), d2.data(), m, n, k);
    for (std::size_t i = 0; i < m * k; ++i) CHECK(d1[i] == doctest::Approx(d2[i]));

    std::vector<double> e1(k * n, 0.0), e2(k * n, 0.0);
    kernels::matmul_at_serial(a.data(), c1.data(), e1.data(), m, k, n);
    kernels::matmul_at_omp(a.data(), c1.data(), e2.data(), m, k, n);
    for (std::size_t i = 0; i < k * n; ++i) CHECK(e1[i] == doctest::Approx(e2[i]));
}

TEST_CASE("assert_finite flags NaN") {
    auto x = make_tensor({2}, {1.0, std::nan("")});
    CHECK_THROWS_AS(assert_finite(*x, "test"), std::runtime_error);
}
