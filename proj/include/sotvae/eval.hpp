#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "sotvae/data.hpp"
#include "sotvae/model.hpp"
#include "sotvae/rng.hpp"

namespace sotvae {

// Sparse TF-IDF vectors over token ids with idf(t) = log((1+D)/(1+df(t))) + 1,
// L2-normalized, built on the training split only.
class TfIdfIndex {
public:
    static TfIdfIndex build(const std::vector<std::vector<int>>& docs);

    std::size_t n_docs() const { return n_docs_; }
    std::map<int, double> vectorize(const std::vector<int>& tokens) const;
    static double cosine(const std::map<int, double>& a,
                         const std::map<int, double>& b);

private:
    std::size_t n_docs_ = 0;
    std::map<int, std::size_t> df_;
};

enum class CandidateKind { Correct, Plausible, Popular, Random };

struct CandidateSet {
    std::vector<std::vector<int>> candidates;  // exactly 100
    std::vector<CandidateKind> kinds;
    std::vector<std::size_t> correct_indices;
    std::size_t backfilled = 0;  // plausible/popular shortfall covered by random
};

// 100 candidates: the sample's references, the 50 training comments most
// similar to the video title by TF-IDF cosine, the 20 most frequent
// training comments, and random training comments to fill, deduplicated.
CandidateSet build_candidate_set(const CommentSample& sample,
                                 const Corpus& train, const TfIdfIndex& index,
                                 Rng& rng);

// Indices sorted by descending score, ties broken by candidate index.
std::vector<std::size_t> rank_by_scores(const std::vector<double>& scores);

struct RankingMetrics {
    double recall1 = 0, recall5 = 0, recall10 = 0;
    double mean_rank = 0, mrr = 0;
};

RankingMetrics ranking_metrics(const std::vector<std::size_t>& ranked,
                               const std::vector<std::size_t>& correct_indices);

// Corpus-level BLEU@max_n as a percentage: clipped n-gram precisions with
// add-one smoothing for orders >= 2, standard brevity penalty against the
// closest reference length.
double corpus_bleu(
    const std::vector<std::vector<int>>& hypotheses,
    const std::vector<std::vector<std::vector<int>>>& references,
    std::size_t max_n);

// Every generation of a sample scored against the sample's reference set.
double bleu_ref(
    const std::vector<std::vector<std::vector<int>>>& generations,
    const std::vector<std::vector<std::vector<int>>>& references,
    std::size_t max_n);

// Every generation scored against the other N-1 generations of its sample.
double bleu_self(const std::vector<std::vector<std::vector<int>>>& generations,
                 std::size_t max_n);

struct ControllabilityResult {
    double match_rate = 0;             // over non-empty generations
    std::size_t empty_count = 0;
    std::vector<double> per_class_rate;
    std::vector<std::size_t> per_class_nonempty;
};

ControllabilityResult controllability(const SoTvae& model, const Corpus& test,
                                      const SentimentLexicon& lexicon,
                                      Rng& rng);

struct EvalReport {
    double recall1 = 0, recall5 = 0, recall10 = 0, mean_rank = 0, mrr = 0;
    double bleu_ref1 = 0, bleu_ref4 = 0, bleu_self1 = 0, bleu_self4 = 0;
    double sentiment_match_rate = 0;
    std::size_t empty_generations = 0;
    std::vector<std::size_t> meaningful_counts;  // histogram, index = # non-empty
    std::string provenance;  // full config text embedded for reproducibility

    std::string to_kv() const;
    static std::string csv_header();
    std::string to_csv_row() const;
};

EvalReport evaluate_model(const SoTvae& model, const Corpus& train,
                          const Corpus& test, const SentimentLexicon& lexicon,
                          std::uint64_t seed);

}  // namespace sotvae
