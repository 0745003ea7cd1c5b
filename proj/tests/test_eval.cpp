#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <set>

#include "sotvae/eval.hpp"

using namespace sotvae;

namespace {

// Independent brute-force corpus BLEU: linear-scan n-gram matching with
// reference clipping, add-one smoothing for orders >= 2, closest-length
// brevity penalty. Deliberately written without maps so it shares no
// structure with the implementation under test.
double brute_bleu(const std::vector<std::vector<int>>& hyps,
                  const std::vector<std::vector<std::vector<int>>>& refs,
                  std::size_t max_n) {
    auto grams = [](const std::vector<int>& t, std::size_t n) {
        std::vector<std::vector<int>> out;
        for (std::size_t i = 0; i + n <= t.size(); ++i)
            out.emplace_back(t.begin() + i, t.begin() + i + n);
        return out;
    };
    auto count_in = [](const std::vector<std::vector<int>>& gs,
                       const std::vector<int>& g) {
        std::size_t c = 0;
        for (const auto& x : gs) c += x == g;
        return c;
    };

    std::vector<double> num(max_n, 0.0), den(max_n, 0.0);
    double hyp_len = 0.0, ref_len = 0.0;
    for (std::size_t i = 0; i < hyps.size(); ++i) {
        hyp_len += static_cast<double>(hyps[i].size());
        std::size_t best = refs[i][0].size();
        for (const auto& r : refs[i]) {
            auto d = [&](std::size_t L) {
                return L > hyps[i].size() ? L - hyps[i].size()
                                          : hyps[i].size() - L;
            };
            if (d(r.size()) < d(best) || (d(r.size()) == d(best) && r.size() < best))
                best = r.size();
        }
        ref_len += static_cast<double>(best);
        for (std::size_t n = 1; n <= max_n; ++n) {
            auto hg = grams(hyps[i], n);
            std::vector<std::vector<int>> counted;
            for (const auto& g : hg) {
                den[n - 1] += 1.0;
                if (count_in(counted, g) > 0) continue;  // tally each type once
                counted.push_back(g);
                std::size_t in_hyp = count_in(hg, g), clip = 0;
                for (const auto& r : refs[i])
                    clip = std::max(clip, count_in(grams(r, n), g));
                num[n - 1] += static_cast<double>(std::min(in_hyp, clip));
            }
        }
    }
    double log_p = 0.0;
    for (std::size_t n = 1; n <= max_n; ++n) {
        double a = num[n - 1] + (n >= 2 ? 1.0 : 0.0);
        double b = den[n - 1] + (n >= 2 ? 1.0 : 0.0);
        if (a <= 0.0 || b <= 0.0) return 0.0;
        log_p += std::log(a / b) / static_cast<double>(max_n);
    }
    double bp = hyp_len <= 0.0 ? 0.0
                : hyp_len >= ref_len ? 1.0
                                     : std::exp(1.0 - ref_len / hyp_len);
    return 100.0 * bp * std::exp(log_p);
}

}  // namespace

TEST_CASE("tf-idf vectors are L2-normalized and cosine is identity on self") {
    TfIdfIndex idx = TfIdfIndex::build({{1, 2}, {2, 3}, {3, 4}});
    auto v = idx.vectorize({1, 2, 2});
    double norm = 0.0;
    for (const auto& [t, w] : v) norm += w * w;
    CHECK(norm == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(TfIdfIndex::cosine(v, v) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(TfIdfIndex::cosine(v, idx.vectorize({9})) == 0.0);
}

TEST_CASE("rare terms dominate tf-idf similarity") {
    // Token 9 appears in one document, token 1 in three of four.
    TfIdfIndex idx = TfIdfIndex::build({{1, 9}, {1, 2}, {1, 3}, {4, 5}});
    auto probe = idx.vectorize({1, 9});
    double sim_rare = TfIdfIndex::cosine(probe, idx.vectorize({9}));
    double sim_common = TfIdfIndex::cosine(probe, idx.vectorize({1}));
    CHECK(sim_rare > sim_common);
}

TEST_CASE("ranking metric hand cases") {
    std::vector<std::size_t> ranked(100);
    for (std::size_t i = 0; i < 100; ++i) ranked[i] = i;

    SUBCASE("single correct at rank 1") {
        auto m = ranking_metrics(ranked, {0});
        CHECK(m.recall1 == 1.0);
        CHECK(m.mean_rank == 1.0);
        CHECK(m.mrr == 1.0);
    }
    SUBCASE("single correct at rank 4") {
        auto m = ranking_metrics(ranked, {3});
        CHECK(m.recall1 == 0.0);
        CHECK(m.recall5 == 1.0);
        CHECK(m.mrr == doctest::Approx(0.25));
    }
    SUBCASE("two corrects at ranks 2 and 10") {
        auto m = ranking_metrics(ranked, {1, 9});
        CHECK(m.mean_rank == doctest::Approx(6.0));
        CHECK(m.mrr == doctest::Approx(0.3));
        CHECK(m.recall5 == doctest::Approx(0.5));
    }
    SUBCASE("empty correct set is a contract error") {
        CHECK_THROWS_AS(ranking_metrics(ranked, {}), std::invalid_argument);
    }
}

TEST_CASE("rank_by_scores is descending with index tie-breaks") {
    auto ranked = rank_by_scores({0.5, 0.9, 0.5, 0.1});
    CHECK(ranked == std::vector<std::size_t>{1, 0, 2, 3});
}

TEST_CASE("uniform random scorer yields chance-level mean rank") {
    Rng rng(99);
    double total = 0.0;
    const int trials = 2000;
    for (int t = 0; t < trials; ++t) {
        std::vector<double> scores(100);
        for (double& s : scores) s = rng.uniform();
        auto ranked = rank_by_scores(scores);
        for (std::size_t r = 0; r < ranked.size(); ++r)
            if (ranked[r] == 0) total += static_cast<double>(r + 1);
    }
    CHECK(total / trials == doctest::Approx(50.5).epsilon(0.04));
}

TEST_CASE("bleu hand cases") {
    SUBCASE("identical to a reference scores 100 at unigram level") {
        CHECK(corpus_bleu({{1, 2, 3}}, {{{1, 2, 3}}}, 1) ==
              doctest::Approx(100.0).epsilon(1e-12));
    }
    SUBCASE("token-disjoint hypothesis scores 0") {
        CHECK(corpus_bleu({{7, 8}}, {{{1, 2, 3}}}, 1) == 0.0);
    }
    SUBCASE("three of four unigrams matched with BP=1 gives 75") {
        // Hypotheses of total length 4 with 3 clipped matches; references
        // are no longer than the hypotheses so no brevity penalty.
        CHECK(corpus_bleu({{1, 2}, {3, 9}}, {{{1, 2}}, {{3, 4}}}, 1) ==
              doctest::Approx(75.0).epsilon(1e-12));
    }
}

TEST_CASE("bleu_self degenerate and disjoint cases") {
    std::vector<std::vector<std::vector<int>>> identical = {
        {{1, 2, 3}, {1, 2, 3}, {1, 2, 3}}};
    CHECK(bleu_self(identical, 1) == doctest::Approx(100.0).epsilon(1e-12));
    CHECK(bleu_self(identical, 4) == doctest::Approx(100.0).epsilon(1e-9));

    std::vector<std::vector<std::vector<int>>> disjoint = {
        {{1, 2}, {3, 4}, {5, 6}}};
    CHECK(bleu_self(disjoint, 1) == 0.0);

    std::vector<std::vector<std::vector<int>>> single = {{{1, 2}}};
    CHECK_THROWS_AS(bleu_self(single, 1), std::invalid_argument);
}

TEST_CASE("bleu_self is invariant under permutation of the generations") {
    std::vector<std::vector<std::vector<int>>> gens = {
        {{1, 2, 3}, {2, 3, 4}, {9, 2}}};
    std::vector<std::vector<std::vector<int>>> permuted = {
        {{9, 2}, {1, 2, 3}, {2, 3, 4}}};
    CHECK(bleu_self(gens, 2) == doctest::Approx(bleu_self(permuted, 2)).epsilon(1e-12));
}

TEST_CASE("implementation matches the brute-force counter on random fixtures") {
    Rng rng(123);
    for (int fixture = 0; fixture < 100; ++fixture) {
        std::size_t n_samples = 1 + rng.index(3);
        std::vector<std::vector<int>> hyps;
        std::vector<std::vector<std::vector<int>>> refs;
        for (std::size_t s = 0; s < n_samples; ++s) {
            std::vector<int> h(rng.index(6));
            for (int& t : h) t = 1 + static_cast<int>(rng.index(5));
            hyps.push_back(h);
            std::vector<std::vector<int>> rs(1 + rng.index(3));
            for (auto& r : rs) {
                r.resize(1 + rng.index(6));
                for (int& t : r) t = 1 + static_cast<int>(rng.index(5));
            }
            refs.push_back(rs);
        }
        std::size_t max_n = 1 + rng.index(4);
        CHECK(corpus_bleu(hyps, refs, max_n) ==
              doctest::Approx(brute_bleu(hyps, refs, max_n)).epsilon(1e-12));
    }
}

TEST_CASE("candidate sets have exactly 100 deduplicated entries") {
    GeneratorConfig gcfg;
    gcfg.vocab_size = 150;
    gcfg.n_samples = 400;
    gcfg.seed = 5;
    SynthResult res = synth_corpus(gcfg);
    TfIdfIndex idx;
    {
        std::vector<std::vector<int>> docs;
        for (const auto& s : res.corpus.samples) docs.push_back(s.target_tokens);
        idx = TfIdfIndex::build(docs);
    }
    Rng rng(9);
    CandidateSet set =
        build_candidate_set(res.corpus.samples[0], res.corpus, idx, rng);
    CHECK(set.candidates.size() == 100);
    std::set<std::vector<int>> uniq(set.candidates.begin(), set.candidates.end());
    CHECK(uniq.size() == 100);
    CHECK(!set.correct_indices.empty());
    for (std::size_t c : set.correct_indices)
        CHECK(set.kinds[c] == CandidateKind::Correct);
}

TEST_CASE("candidate construction is deterministic given the seed") {
    GeneratorConfig gcfg;
    gcfg.vocab_size = 150;
    gcfg.n_samples = 400;
    gcfg.seed = 5;
    SynthResult res = synth_corpus(gcfg);
    std::vector<std::vector<int>> docs;
    for (const auto& s : res.corpus.samples) docs.push_back(s.target_tokens);
    TfIdfIndex idx = TfIdfIndex::build(docs);
    Rng r1(42), r2(42);
    CandidateSet a = build_candidate_set(res.corpus.samples[3], res.corpus, idx, r1);
    CandidateSet b = build_candidate_set(res.corpus.samples[3], res.corpus, idx, r2);
    CHECK(a.candidates == b.candidates);
}

TEST_CASE("a too-small corpus raises a shortfall error") {
    GeneratorConfig gcfg;
    gcfg.vocab_size = 110;
    gcfg.n_samples = 20;
    gcfg.seed = 5;
    SynthResult res = synth_corpus(gcfg);
    std::vector<std::vector<int>> docs;
    for (const auto& s : res.corpus.samples) docs.push_back(s.target_tokens);
    TfIdfIndex idx = TfIdfIndex::build(docs);
    Rng rng(1);
    CHECK_THROWS_WITH_AS(
        build_candidate_set(res.corpus.samples[0], res.corpus, idx, rng),
        doctest::Contains("short by"), std::runtime_error);
}
