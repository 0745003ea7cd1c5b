#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "gradcheck.hpp"
#include "sotvae/latent.hpp"

using namespace sotvae;

namespace {

ModelConfig tiny_cfg() {
    ModelConfig cfg;
    cfg.vocab_size = 30;
    cfg.n_sentiments = 3;
    cfg.d = 16;
    cfg.d_z = 4;
    cfg.heads = 2;
    cfg.ffn = 32;
    cfg.dropout = 0.0;
    return cfg;
}

struct Fixture {
    ParamRegistry reg;
    Embedding word_emb;
    LatentModule latent;

    explicit Fixture(const ModelConfig& cfg, std::uint64_t seed = 3)
        : word_emb([&] {
              Rng r(seed);
              return Embedding(reg, "word_emb", cfg.vocab_size, cfg.d, r);
          }()),
          latent([&] {
              Rng r(seed + 1);
              return LatentModule(reg, cfg, word_emb, r);
          }()) {}
};

}  // namespace

TEST_CASE("one-hot encodes the label") {
    Fixture fx(tiny_cfg());
    auto s = fx.latent.one_hot(1);
    CHECK(s == std::vector<double>{0.0, 1.0, 0.0});
    CHECK_THROWS_AS(fx.latent.one_hot(5), std::out_of_range);
}

TEST_CASE("prior sample with eps=0 is the component mean") {
    Fixture fx(tiny_cfg());
    auto z = fx.latent.sample_prior(2, nullptr);
    auto means = fx.latent.prior_means();
    for (std::size_t j = 0; j < 4; ++j)
        CHECK(z->data[j] == means->data[2 * 4 + j]);
}

TEST_CASE("prior samples have the configured moments (Monte-Carlo)") {
    ModelConfig cfg = tiny_cfg();
    Fixture fx(cfg);
    Rng rng(11);
    const std::size_t n = 20000;
    std::vector<double> sum(4, 0.0), sum_sq(4, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        auto z = fx.latent.sample_prior(1, fx.latent.draw_eps(rng));
        for (std::size_t j = 0; j < 4; ++j) {
            sum[j] += z->data[j];
            sum_sq[j] += z->data[j] * z->data[j];
        }
    }
    auto means = fx.latent.prior_means();
    for (std::size_t j = 0; j < 4; ++j) {
        double mean = sum[j] / n;
        double var = sum_sq[j] / n - mean * mean;
        CHECK(mean == doctest::Approx(means->data[4 + j]).epsilon(0.02));
        // sigma = 0.2 so the variance must land near 0.04
        CHECK(var == doctest::Approx(0.04).epsilon(0.05));
    }
}

TEST_CASE("posterior log-variances respect the clamp range") {
    Fixture fx(tiny_cfg());
    ForwardCtx ctx;
    auto post = fx.latent.encode_posterior({5, 6, 7}, 1, ctx);
    CHECK(post.means->shape == std::vector<std::size_t>{3, 4});
    CHECK(post.log_vars->shape == std::vector<std::size_t>{3, 4});
    for (double lv : post.log_vars->data) {
        CHECK(lv >= -10.0);
        CHECK(lv <= 4.0);
    }
}

TEST_CASE("posterior sample with eps=0 is the selected component mean") {
    Fixture fx(tiny_cfg());
    ForwardCtx ctx;
    auto post = fx.latent.encode_posterior({5, 6, 7}, 2, ctx);
    auto z = fx.latent.sample_posterior(post, 2, nullptr);
    for (std::size_t j = 0; j < 4; ++j)
        CHECK(z->data[j] == doctest::Approx(post.means->data[2 * 4 + j]));
}

TEST_CASE("blend mask limits: lambda 0 and 1 reproduce the inputs exactly") {
    Fixture fx(tiny_cfg());
    Rng rng(5);
    auto z_post = randn({1, 4}, rng, 1.0);
    auto z_prior = randn({1, 4}, rng, 1.0);
    auto all_post = fx.latent.blend_mask(z_post, z_prior, 0.0, rng);
    auto all_prior = fx.latent.blend_mask(z_post, z_prior, 1.0, rng);
    for (std::size_t j = 0; j < 4; ++j) {
        CHECK(all_post.z->data[j] == z_post->data[j]);
        CHECK(all_prior.z->data[j] == z_prior->data[j]);
    }
}

TEST_CASE("blend mask draws the exact rounded count of prior coordinates") {
    ModelConfig cfg = tiny_cfg();
    cfg.d_z = 512;
    Fixture fx(cfg);
    Rng rng(5);
    auto z_post = randn({1, 512}, rng, 1.0);
    auto z_prior = randn({1, 512}, rng, 1.0);
    for (int rep = 0; rep < 5; ++rep) {
        auto blended = fx.latent.blend_mask(z_post, z_prior, 0.30, rng);
        std::size_t ones = 0;
        for (double m : blended.mask) ones += m == 1.0;
        CHECK(ones == 154);  // round(0.30 * 512)
    }
    CHECK_THROWS_AS(fx.latent.blend_mask(z_post, z_prior, 1.5, rng),
                    std::invalid_argument);
}

TEST_CASE("standard-normal variant uses a single unit-variance component") {
    ModelConfig cfg = tiny_cfg();
    cfg.diversity = DiversityMode::Smd;
    Fixture fx(cfg);
    CHECK(fx.latent.components() == 1);
    CHECK(fx.latent.sigma() == 1.0);
    for (double m : fx.latent.prior_means()->data) CHECK(m == 0.0);
}

TEST_CASE("posterior sampling is differentiable end to end") {
    ModelConfig cfg = tiny_cfg();
    Fixture fx(cfg);
    ForwardCtx ctx;
    Rng rng(9);
    auto eps = fx.latent.draw_eps(rng);
    std::vector<TensorPtr> leaves = {fx.reg.at("latent.head1.w"),
                                     fx.reg.at("latent.prior_means")};
    auto rep = gradcheck::check(leaves, [&] {
        auto post = fx.latent.encode_posterior({5, 6}, 1, ctx);
        auto z_post = fx.latent.sample_posterior(post, 1, eps);
        auto z_prior = fx.latent.sample_prior(1, eps);
        Rng mask_rng(77);
        auto blended = fx.latent.blend_mask(z_post, z_prior, 0.5, mask_rng);
        return sum_all(square(fx.latent.encode_z(blended.z)));
    });
    CHECK(gradcheck::ok(rep));
}
