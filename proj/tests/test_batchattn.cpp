#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "sotvae/batchattn.hpp"
#include "sotvae/model.hpp"

using namespace sotvae;

namespace {

ModelConfig tiny_cfg() {
    ModelConfig cfg;
    cfg.vocab_size = 30;
    cfg.d = 16;
    cfg.d_in = 6;
    cfg.d_z = 4;
    cfg.heads = 2;
    cfg.ffn = 32;
    cfg.co_layers = 1;
    cfg.dec_layers = 1;
    cfg.dropout = 0.0;
    return cfg;
}

struct Fixture {
    ParamRegistry reg;
    BatchAttention ba;

    explicit Fixture(const ModelConfig& cfg, std::uint64_t seed = 3)
        : ba([&] {
              Rng r(seed);
              return BatchAttention(reg, cfg, r);
          }()) {}
};

std::vector<TensorPtr> random_feats(const std::vector<std::size_t>& lengths,
                                    std::size_t d, Rng& rng) {
    std::vector<TensorPtr> out;
    for (std::size_t len : lengths) out.push_back(randn({len, d}, rng, 1.0));
    return out;
}

}  // namespace

TEST_CASE("inference-time use is rejected") {
    Fixture fx(tiny_cfg());
    Rng rng(4);
    auto text = random_feats({3}, 16, rng);
    auto frames = random_feats({2}, 16, rng);
    ForwardCtx eval_ctx;  // training = false
    CHECK_THROWS_AS(fx.ba(text, frames, eval_ctx), std::logic_error);
}

TEST_CASE("a singleton batch still produces pooled vectors") {
    Fixture fx(tiny_cfg());
    Rng rng(4);
    auto text = random_feats({3}, 16, rng);
    auto frames = random_feats({2}, 16, rng);
    ForwardCtx ctx{true, &rng, 0.0};
    auto out = fx.ba(text, frames, ctx);
    REQUIRE(out.v_hat_e_b.size() == 1);
    REQUIRE(out.v_hat_i_b.size() == 1);
    for (double v : out.v_hat_e_b[0]->data) CHECK(std::isfinite(v));
    for (double v : out.v_hat_i_b[0]->data) CHECK(std::isfinite(v));
}

TEST_CASE("outputs are equivariant under batch permutation") {
    Fixture fx(tiny_cfg());
    Rng rng(4);
    // Ragged lengths on purpose: padding must not leak across samples.
    auto text = random_feats({3, 5, 2}, 16, rng);
    auto frames = random_feats({2, 2, 4}, 16, rng);
    ForwardCtx ctx{true, &rng, 0.0};
    auto base = fx.ba(text, frames, ctx);

    const std::vector<std::size_t> perm = {2, 0, 1};
    std::vector<TensorPtr> text_p, frames_p;
    for (std::size_t i : perm) {
        text_p.push_back(text[i]);
        frames_p.push_back(frames[i]);
    }
    auto permuted = fx.ba(text_p, frames_p, ctx);
    for (std::size_t i = 0; i < perm.size(); ++i) {
        for (std::size_t j = 0; j < 16; ++j) {
            CHECK(permuted.v_hat_e_b[i]->data[j] ==
                  doctest::Approx(base.v_hat_e_b[perm[i]]->data[j])
                      .epsilon(1e-12));
            CHECK(permuted.v_hat_i_b[i]->data[j] ==
                  doctest::Approx(base.v_hat_i_b[perm[i]]->data[j])
                      .epsilon(1e-12));
        }
    }
}

TEST_CASE("batchformer variant runs and differs from identity pooling") {
    ModelConfig cfg = tiny_cfg();
    cfg.batchattn = BatchAttnMode::BatchFormer;
    Fixture fx(cfg);
    Rng rng(4);
    auto text = random_feats({3, 3}, 16, rng);
    auto frames = random_feats({2, 2}, 16, rng);
    ForwardCtx ctx{true, &rng, 0.0};
    auto out = fx.ba(text, frames, ctx);
    CHECK(out.v_hat_e_b.size() == 2);
    CHECK(out.v_hat_i_b.size() == 2);
}

TEST_CASE("auxiliary path adds no decoder parameters") {
    ModelConfig with = tiny_cfg();
    ModelConfig without = tiny_cfg();
    without.batchattn = BatchAttnMode::Off;
    SoTvae m_with(with, 1), m_without(without, 1);

    std::vector<std::string> dec_with, dec_without;
    for (const auto& [name, t] : m_with.params().params())
        if (name.rfind("decoder.", 0) == 0) dec_with.push_back(name);
    for (const auto& [name, t] : m_without.params().params())
        if (name.rfind("decoder.", 0) == 0) dec_without.push_back(name);
    CHECK(dec_with == dec_without);

    // The only extra parameters live under the batch-attention namespace.
    for (const auto& [name, t] : m_with.params().params())
        if (m_without.params().params().find(name) ==
            m_without.params().params().end())
            CHECK(name.rfind("batchattn.", 0) == 0);
}

TEST_CASE("module weights do not shift the other modules' initialization") {
    ModelConfig with = tiny_cfg();
    ModelConfig without = tiny_cfg();
    without.batchattn = BatchAttnMode::Off;
    SoTvae m_with(with, 1), m_without(without, 1);
    for (const auto& [name, t] : m_without.params().params()) {
        auto other = m_with.params().at(name);
        CHECK(other->data == t->data);
    }
}
