#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

namespace sotvae {

// Token ids 0-3 are reserved and never appear as content tokens.
struct Vocabulary {
    static constexpr int PAD = 0, BOS = 1, EOS = 2, UNK = 3;

    std::vector<std::string> tokens;
    std::unordered_map<std::string, int> ids;

    Vocabulary();
    int add(const std::string& token);
    int id(const std::string& token) const;  // UNK for unknown tokens
    const std::string& token(int id) const;
    std::size_t size() const { return tokens.size(); }

    void save(const std::string& path) const;
    static Vocabulary load(const std::string& path);
};

std::vector<int> tokenize(const std::string& text, const Vocabulary& vocab);
std::string detokenize(const std::vector<int>& ids, const Vocabulary& vocab);

// Rule-based stand-in for a pre-trained sentiment analyzer: sums
// per-token weights and maps the score to equal-width bins over
// [-score_range, score_range].
struct SentimentLexicon {
    std::unordered_map<int, double> weights;  // token id -> weight
    double score_range = 3.0;

    double score(const std::vector<int>& token_ids) const;
    int label(const std::vector<int>& token_ids, std::size_t n_classes) const;
};

struct CommentSample {
    std::string sample_id;
    std::vector<std::vector<double>> frames;  // k vectors of d_in floats
    std::vector<int> surrounding_tokens;
    std::vector<int> target_tokens;
    int sentiment_label = 0;
    std::vector<std::vector<int>> references;
    std::vector<int> title_tokens;
};

struct Corpus {
    std::vector<CommentSample> samples;
};

struct GeneratorConfig {
    std::size_t vocab_size = 200;
    std::size_t n_samples = 1000;
    std::size_t k = 5;             // frames per sample
    std::size_t d_in = 32;
    std::size_t m = 5;             // surrounding comments
    std::size_t p_max = 60;        // surrounding-token cap, truncate from the left
    std::size_t n_refs = 4;
    std::size_t n_classes = 3;
    std::vector<double> sentiment_mixture = {1.0 / 3, 1.0 / 3, 1.0 / 3};
    int imbalance_class = -1;      // class whose weight gets scaled
    double imbalance_ratio = 1.0;
    // Fraction of samples whose viewer stayed silent: the target comment is
    // empty (and therefore labeled neutral). Real live-comment data contains
    // such comments, and they give a trained decoder a genuine "nothing to
    // say" fallback instead of forcing it to emit content tokens.
    double empty_frac = 0.05;
    std::uint64_t seed = 1;
};

struct SynthResult {
    Corpus corpus;
    Vocabulary vocab;
    SentimentLexicon lexicon;
    std::vector<int> intended_labels;  // what the generator meant to emit
};

SynthResult synth_corpus(const GeneratorConfig& cfg);

// Builds the same vocabulary/lexicon the generator would, without samples
// (needed to interpret a corpus file written by `synth-data`).
void build_synth_vocab(const GeneratorConfig& cfg, Vocabulary& vocab,
                       SentimentLexicon& lexicon);

void save_lexicon(const SentimentLexicon& lexicon, const std::string& path);
SentimentLexicon load_lexicon(const std::string& path);

void save_corpus(const Corpus& corpus, const Vocabulary& vocab,
                 const std::string& path);
Corpus load_corpus(const std::string& path, const Vocabulary& vocab);

void validate_sample(const CommentSample& s, std::size_t vocab_size,
                     std::size_t n_classes);

}  // namespace sotvae
