#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <limits>

#include "sotvae/checkpoint.hpp"
#include "sotvae/trainer.hpp"

using namespace sotvae;

namespace {

ModelConfig tiny_cfg() {
    ModelConfig cfg;
    cfg.vocab_size = 0;  // filled from the vocabulary
    cfg.n_sentiments = 3;
    cfg.d = 16;
    cfg.d_in = 6;
    cfg.d_z = 4;
    cfg.d_pre = 8;
    cfg.heads = 2;
    cfg.ffn = 32;
    cfg.co_layers = 1;
    cfg.dec_layers = 1;
    cfg.max_len = 8;
    cfg.dropout = 0.1;
    return cfg;
}

struct Pipeline {
    SynthResult data;
    ModelConfig mcfg;
    TrainConfig tcfg;

    Pipeline() {
        GeneratorConfig gcfg;
        gcfg.vocab_size = 120;
        gcfg.n_samples = 24;
        gcfg.d_in = 6;
        gcfg.seed = 21;
        data = synth_corpus(gcfg);
        mcfg = tiny_cfg();
        mcfg.vocab_size = data.vocab.size();
        tcfg.batch_size = 8;
        tcfg.epochs = 2;
        tcfg.seed = 17;
    }
};

}  // namespace

TEST_CASE("adam leaves parameters unchanged under zero gradients") {
    ParamRegistry reg;
    Rng rng(3);
    auto p = reg.create("p", {2, 2}, rng, 1.0);
    auto before = p->data;
    Adam adam(reg);
    p->ensure_grad();
    adam.step(0.1);
    CHECK(p->data == before);
}

TEST_CASE("adam first step matches the hand-evaluated recurrence") {
    ParamRegistry reg;
    auto p = make_tensor({1}, std::vector<double>{1.0}, true);
    reg.adopt("p", p);
    p->ensure_grad();
    p->grad[0] = 0.5;
    Adam adam(reg);
    adam.step(0.1);
    // t=1: m_hat = g, v_hat = g^2, update = lr * g / (|g| + eps) ~ lr.
    double expected = 1.0 - 0.1 * 0.5 / (0.5 + 1e-8);
    CHECK(p->data[0] == doctest::Approx(expected).epsilon(1e-9));
}

TEST_CASE("gradient clipping rescales to the requested global norm") {
    ParamRegistry reg;
    auto p = make_tensor({2}, {3.0, 4.0}, true);
    reg.adopt("p", p);
    p->ensure_grad();
    p->grad = {3.0, 4.0};  // norm 5
    clip_gradients(reg, 1.0);
    CHECK(global_grad_norm(reg) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(p->grad[0] == doctest::Approx(0.6));
    p->grad = {0.3, 0.4};  // already below the cap: untouched
    clip_gradients(reg, 1.0);
    CHECK(p->grad[0] == doctest::Approx(0.3));
}

TEST_CASE("learning-rate schedule decays by 1/4 every 2 epochs after 4") {
    TrainConfig t;
    CHECK(t.lr_at_epoch(0) == doctest::Approx(1e-4));
    CHECK(t.lr_at_epoch(5) == doctest::Approx(1e-4));
    CHECK(t.lr_at_epoch(6) == doctest::Approx(2.5e-5));
    CHECK(t.lr_at_epoch(7) == doctest::Approx(2.5e-5));
    CHECK(t.lr_at_epoch(8) == doctest::Approx(6.25e-6));
}

TEST_CASE("one full-model step leaves every parameter with a finite gradient") {
    Pipeline pl;
    SoTvae model(pl.mcfg, 1);
    std::vector<const CommentSample*> batch;
    for (int i = 0; i < 4; ++i) batch.push_back(&pl.data.corpus.samples[i]);
    Rng rng(5);
    model.params().zero_grads();
    auto losses = model.train_batch(batch, 2.0, 0.3, rng);
    backward(losses.total);
    // The decoder's cross-attention blocks attend over a single pooled
    // vector, so their softmax is identically 1 and the query/key
    // projections carry no gradient by construction.
    auto structurally_zero = [](const std::string& name) {
        if (name.rfind("decoder.l", 0) != 0) return false;
        for (const char* block : {".frames.", ".text.", ".sent.", ".latent."})
            if (name.find(block) != std::string::npos)
                return name.find(".q.") != std::string::npos ||
                       name.find(".k.") != std::string::npos;
        return false;
    };
    for (const auto& [name, t] : model.params().params()) {
        REQUIRE_MESSAGE(!t->grad.empty(), name);
        double norm = 0.0;
        for (double g : t->grad) {
            REQUIRE_MESSAGE(std::isfinite(g), name);
            norm += g * g;
        }
        if (!structurally_zero(name)) CHECK_MESSAGE(norm > 0.0, name);
    }
}

TEST_CASE("training is deterministic given the seed") {
    Pipeline pl;
    SoTvae a(pl.mcfg, 1), b(pl.mcfg, 1);
    train_model(a, pl.data.corpus, pl.tcfg);
    train_model(b, pl.data.corpus, pl.tcfg);
    for (const auto& [name, t] : a.params().params())
        CHECK(b.params().at(name)->data == t->data);
}

TEST_CASE("ablation parity: disabled modules drop out of the checkpoint") {
    Pipeline pl;
    ModelConfig send = pl.mcfg;
    send.diversity = DiversityMode::Send;
    SoTvae model(send, 1);
    for (const auto& [name, t] : model.params().params()) {
        CHECK(name.find("latent.prior_means") == std::string::npos);
        CHECK(name.find("latent.head") == std::string::npos);
        CHECK(name.find("latent.post_enc") == std::string::npos);
    }
    // SEND still carries the sentiment embedding.
    CHECK_NOTHROW(model.params().at("latent.sent_emb.table"));
}

TEST_CASE("non-finite loss aborts with the offending step named") {
    Pipeline pl;
    SoTvae model(pl.mcfg, 1);
    auto p = model.params().at("word_emb.table");
    for (double& v : p->data) v = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_WITH_AS(train_model(model, pl.data.corpus, pl.tcfg),
                         doctest::Contains("epoch"), std::runtime_error);
}

TEST_CASE("checkpoint roundtrip restores weights bitwise") {
    Pipeline pl;
    SoTvae model(pl.mcfg, 1);
    train_model(model, pl.data.corpus, pl.tcfg);
    const std::string path = "/tmp/sotvae_test_ckpt.bin";
    save_checkpoint(path, model.params(), model.config(), 2);

    Checkpoint ckpt = load_checkpoint(path);
    CHECK(ckpt.epoch == 2);
    SoTvae restored(ckpt.config, 99);  // different init seed on purpose
    apply_checkpoint(ckpt, restored.params());
    for (const auto& [name, t] : model.params().params())
        CHECK(restored.params().at(name)->data == t->data);

    // Bitwise identical eval-mode forward outputs after reload.
    const CommentSample& s = pl.data.corpus.samples[0];
    auto enc_a = model.encode_eval(s);
    auto enc_b = restored.encode_eval(s);
    CHECK(enc_a.v_hat_e->data == enc_b.v_hat_e->data);
    CHECK(model.score_candidate(enc_a, s.target_tokens) ==
          restored.score_candidate(enc_b, s.target_tokens));
    std::filesystem::remove(path);
}

TEST_CASE("resume from checkpoint reproduces the uninterrupted run") {
    Pipeline pl;
    TrainConfig tcfg = pl.tcfg;
    tcfg.epochs = 3;

    SoTvae straight(pl.mcfg, 1);
    train_model(straight, pl.data.corpus, tcfg);

    const std::string dir = "/tmp/sotvae_test_resume";
    SoTvae first_leg(pl.mcfg, 1);
    TrainConfig two = tcfg;
    two.epochs = 2;
    train_model(first_leg, pl.data.corpus, two, dir);

    Checkpoint ckpt = load_checkpoint(dir + "/epoch_1.ckpt");
    REQUIRE(ckpt.epoch == 2);
    REQUIRE(ckpt.opt.has_value());
    SoTvae resumed(ckpt.config, 1);
    apply_checkpoint(ckpt, resumed.params());
    train_model(resumed, pl.data.corpus, tcfg, "", ckpt.epoch, &*ckpt.opt);

    for (const auto& [name, t] : straight.params().params())
        CHECK(resumed.params().at(name)->data == t->data);
    std::filesystem::remove_all(dir);
}

TEST_CASE("split_corpus is deterministic and size-correct") {
    Pipeline pl;
    Corpus train_a, test_a, train_b, test_b;
    split_corpus(pl.data.corpus, 0.25, 7, train_a, test_a);
    split_corpus(pl.data.corpus, 0.25, 7, train_b, test_b);
    CHECK(test_a.samples.size() == 6);
    CHECK(train_a.samples.size() == 18);
    CHECK(train_a.samples[0].sample_id == train_b.samples[0].sample_id);
    CHECK(test_a.samples[0].sample_id == test_b.samples[0].sample_id);
}
