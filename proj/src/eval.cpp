#include "sotvae/eval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <sstream>
#include <stdexcept>

namespace sotvae {

TfIdfIndex TfIdfIndex::build(const std::vector<std::vector<int>>& docs) {
    TfIdfIndex idx;
    idx.n_docs_ = docs.size();
    for (const auto& doc : docs) {
        std::set<int> uniq(doc.begin(), doc.end());
        for (int t : uniq) ++idx.df_[t];
    }
    return idx;
}

std::map<int, double> TfIdfIndex::vectorize(
    const std::vector<int>& tokens) const {
    std::map<int, double> vec;
    for (int t : tokens) vec[t] += 1.0;
    double norm_sq = 0.0;
    for (auto& [t, tf] : vec) {
        auto it = df_.find(t);
        std::size_t df = it == df_.end() ? 0 : it->second;
        double idf = std::log((1.0 + static_cast<double>(n_docs_)) /
                              (1.0 + static_cast<double>(df))) + 1.0;
        tf *= idf;
        norm_sq += tf * tf;
    }
    if (norm_sq > 0.0) {
        double inv = 1.0 / std::sqrt(norm_sq);
        for (auto& [t, w] : vec) w *= inv;
    }
    return vec;
}

double TfIdfIndex::cosine(const std::map<int, double>& a,
                          const std::map<int, double>& b) {
    double dot = 0.0;
    for (const auto& [t, w] : a) {
        auto it = b.find(t);
        if (it != b.end()) dot += w * it->second;
    }
    return dot;
}

CandidateSet build_candidate_set(const CommentSample& sample,
                                 const Corpus& train, const TfIdfIndex& index,
                                 Rng& rng) {
    constexpr std::size_t kTotal = 100, kPlausible = 50, kPopular = 20;
    CandidateSet set;
    std::set<std::vector<int>> seen;
    auto push = [&](const std::vector<int>& tokens, CandidateKind kind) {
        if (!seen.insert(tokens).second) return false;
        set.candidates.push_back(tokens);
        set.kinds.push_back(kind);
        return true;
    };

    if (sample.references.empty())
        throw std::invalid_argument("build_candidate_set: sample has no references");
    for (const auto& ref : sample.references)
        if (push(ref, CandidateKind::Correct))
            set.correct_indices.push_back(set.candidates.size() - 1);

    // Plausible: training comments closest to the video title by TF-IDF.
    std::map<int, double> title_vec = index.vectorize(sample.title_tokens);
    std::vector<std::pair<double, std::size_t>> sims;
    sims.reserve(train.samples.size());
    for (std::size_t i = 0; i < train.samples.size(); ++i) {
        double sim =
            TfIdfIndex::cosine(title_vec,
                               index.vectorize(train.samples[i].target_tokens));
        sims.emplace_back(-sim, i);  // negate so equal sims keep corpus order
    }
    std::sort(sims.begin(), sims.end());
    std::size_t plausible = 0;
    for (const auto& [neg_sim, i] : sims) {
        if (plausible >= kPlausible) break;
        if (push(train.samples[i].target_tokens, CandidateKind::Plausible))
            ++plausible;
    }

    // Popular: globally most frequent training comments.
    std::map<std::vector<int>, std::size_t> freq;
    for (const auto& s : train.samples) ++freq[s.target_tokens];
    std::vector<std::pair<std::size_t, const std::vector<int>*>> by_freq;
    by_freq.reserve(freq.size());
    for (const auto& [tokens, count] : freq) by_freq.emplace_back(count, &tokens);
    std::sort(by_freq.begin(), by_freq.end(),
              [](const auto& a, const auto& b) {
                  return a.first != b.first ? a.first > b.first
                                            : *a.second < *b.second;
              });
    std::size_t popular = 0;
    for (const auto& [count, tokens] : by_freq) {
        if (popular >= kPopular || set.candidates.size() >= kTotal) break;
        if (push(*tokens, CandidateKind::Popular)) ++popular;
    }
    set.backfilled = (kPlausible - plausible) + (kPopular - popular);

    // Random fill from the training comments.
    std::vector<std::size_t> order(train.samples.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), rng.engine());
    for (std::size_t i : order) {
        if (set.candidates.size() >= kTotal) break;
        push(train.samples[i].target_tokens, CandidateKind::Random);
    }
    if (set.candidates.size() < kTotal) {
        std::ostringstream os;
        os << "build_candidate_set: corpus supplies only "
           << set.candidates.size() << " distinct candidates, need " << kTotal
           << " (short by " << (kTotal - set.candidates.size()) << ")";
        throw std::runtime_error(os.str());
    }
    return set;
}

std::vector<std::size_t> rank_by_scores(const std::vector<double>& scores) {
    std::vector<std::size_t> idx(scores.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
        return scores[a] > scores[b];
    });
    return idx;
}

RankingMetrics ranking_metrics(
    const std::vector<std::size_t>& ranked,
    const std::vector<std::size_t>& correct_indices) {
    if (correct_indices.empty())
        throw std::invalid_argument("ranking_metrics: empty correct set");
    std::vector<std::size_t> position(ranked.size(), 0);
    for (std::size_t r = 0; r < ranked.size(); ++r)
        position[ranked[r]] = r + 1;  // 1-based rank

    const double n_correct = static_cast<double>(correct_indices.size());
    RankingMetrics m;
    std::size_t in1 = 0, in5 = 0, in10 = 0;
    for (std::size_t c : correct_indices) {
        std::size_t rank = position[c];
        if (rank <= 1) ++in1;
        if (rank <= 5) ++in5;
        if (rank <= 10) ++in10;
        m.mean_rank += static_cast<double>(rank);
        m.mrr += 1.0 / static_cast<double>(rank);
    }
    auto recall_at = [&](std::size_t hits, std::size_t k) {
        return static_cast<double>(hits) /
               std::min(n_correct, static_cast<double>(k));
    };
    m.recall1 = recall_at(in1, 1);
    m.recall5 = recall_at(in5, 5);
    m.recall10 = recall_at(in10, 10);
    m.mean_rank /= n_correct;
    m.mrr /= n_correct;
    return m;
}

namespace {

using Ngram = std::vector<int>;

std::map<Ngram, std::size_t> ngram_counts(const std::vector<int>& tokens,
                                          std::size_t n) {
    std::map<Ngram, std::size_t> counts;
    if (tokens.size() >= n)
        for (std::size_t i = 0; i + n <= tokens.size(); ++i)
            ++counts[Ngram(tokens.begin() + i, tokens.begin() + i + n)];
    return counts;
}

}  // namespace

double corpus_bleu(const std::vector<std::vector<int>>& hypotheses,
                   const std::vector<std::vector<std::vector<int>>>& references,
                   std::size_t max_n) {
    if (hypotheses.size() != references.size())
        throw std::invalid_argument("corpus_bleu: size mismatch");
    if (max_n == 0) throw std::invalid_argument("corpus_bleu: max_n must be >= 1");

    std::vector<double> matched(max_n, 0.0), total(max_n, 0.0);
    double hyp_len = 0.0, ref_len = 0.0;
    for (std::size_t i = 0; i < hypotheses.size(); ++i) {
        const auto& hyp = hypotheses[i];
        const auto& refs = references[i];
        if (refs.empty())
            throw std::invalid_argument("corpus_bleu: empty reference set");
        hyp_len += static_cast<double>(hyp.size());

        // Closest reference length; ties go to the shorter reference.
        std::size_t closest = refs[0].size();
        for (const auto& r : refs) {
            auto dist = [&](std::size_t len) {
                return len > hyp.size() ? len - hyp.size() : hyp.size() - len;
            };
            if (dist(r.size()) < dist(closest) ||
                (dist(r.size()) == dist(closest) && r.size() < closest))
                closest = r.size();
        }
        ref_len += static_cast<double>(closest);

        for (std::size_t n = 1; n <= max_n; ++n) {
            auto hyp_counts = ngram_counts(hyp, n);
            std::map<Ngram, std::size_t> max_ref;
            for (const auto& r : refs)
                for (const auto& [g, c] : ngram_counts(r, n))
                    max_ref[g] = std::max(max_ref[g], c);
            for (const auto& [g, c] : hyp_counts) {
                auto it = max_ref.find(g);
                std::size_t clip = it == max_ref.end() ? 0 : it->second;
                matched[n - 1] += static_cast<double>(std::min(c, clip));
                total[n - 1] += static_cast<double>(c);
            }
        }
    }

    double log_prec = 0.0;
    for (std::size_t n = 1; n <= max_n; ++n) {
        double num = matched[n - 1], den = total[n - 1];
        if (n >= 2) {
            num += 1.0;
            den += 1.0;
        }
        if (num <= 0.0 || den <= 0.0) return 0.0;
        log_prec += std::log(num / den);
    }
    log_prec /= static_cast<double>(max_n);
    double bp = hyp_len >= ref_len || hyp_len <= 0.0
                    ? (hyp_len <= 0.0 ? 0.0 : 1.0)
                    : std::exp(1.0 - ref_len / hyp_len);
    return 100.0 * bp * std::exp(log_prec);
}

double bleu_ref(const std::vector<std::vector<std::vector<int>>>& generations,
                const std::vector<std::vector<std::vector<int>>>& references,
                std::size_t max_n) {
    if (generations.size() != references.size())
        throw std::invalid_argument("bleu_ref: size mismatch");
    std::vector<std::vector<int>> hyps;
    std::vector<std::vector<std::vector<int>>> refs;
    for (std::size_t i = 0; i < generations.size(); ++i) {
        if (generations[i].empty() || references[i].empty())
            throw std::invalid_argument("bleu_ref: sample without generations or references");
        for (const auto& g : generations[i]) {
            hyps.push_back(g);
            refs.push_back(references[i]);
        }
    }
    return corpus_bleu(hyps, refs, max_n);
}

double bleu_self(const std::vector<std::vector<std::vector<int>>>& generations,
                 std::size_t max_n) {
    std::vector<std::vector<int>> hyps;
    std::vector<std::vector<std::vector<int>>> refs;
    for (const auto& gens : generations) {
        if (gens.size() < 2)
            throw std::invalid_argument("bleu_self: needs N >= 2 generations per sample");
        for (std::size_t j = 0; j < gens.size(); ++j) {
            hyps.push_back(gens[j]);
            std::vector<std::vector<int>> others;
            for (std::size_t k = 0; k < gens.size(); ++k)
                if (k != j) others.push_back(gens[k]);
            refs.push_back(std::move(others));
        }
    }
    return corpus_bleu(hyps, refs, max_n);
}

ControllabilityResult controllability(const SoTvae& model, const Corpus& test,
                                      const SentimentLexicon& lexicon,
                                      Rng& rng) {
    const std::size_t n = model.config().n_sentiments;
    ControllabilityResult res;
    res.per_class_rate.assign(n, 0.0);
    res.per_class_nonempty.assign(n, 0);
    std::vector<std::size_t> matches(n, 0);
    for (const auto& sample : test.samples) {
        for (std::size_t j = 0; j < n; ++j) {
            TensorPtr eps =
                model.latent() ? model.latent()->draw_eps(rng) : nullptr;
            GenerationResult g =
                model.generate(sample, static_cast<int>(j), eps,
                               DecodeMode::Greedy, 1.0, nullptr);
            if (g.empty()) {
                ++res.empty_count;
                continue;
            }
            ++res.per_class_nonempty[j];
            if (lexicon.label(g.tokens, n) == static_cast<int>(j)) ++matches[j];
        }
    }
    std::size_t total_nonempty = 0, total_matches = 0;
    for (std::size_t j = 0; j < n; ++j) {
        total_nonempty += res.per_class_nonempty[j];
        total_matches += matches[j];
        res.per_class_rate[j] =
            res.per_class_nonempty[j] == 0
                ? 0.0
                : static_cast<double>(matches[j]) /
                      static_cast<double>(res.per_class_nonempty[j]);
    }
    res.match_rate = total_nonempty == 0
                         ? 0.0
                         : static_cast<double>(total_matches) /
                               static_cast<double>(total_nonempty);
    return res;
}

namespace {

std::string fmt(double v) {
    std::ostringstream os;
    os.precision(10);
    os << v;
    return os.str();
}

}  // namespace

std::string EvalReport::to_kv() const {
    std::ostringstream os;
    os << "recall@1=" << fmt(recall1) << "\n"
       << "recall@5=" << fmt(recall5) << "\n"
       << "recall@10=" << fmt(recall10) << "\n"
       << "mean_rank=" << fmt(mean_rank) << "\n"
       << "mrr=" << fmt(mrr) << "\n"
       << "bleu_ref@1=" << fmt(bleu_ref1) << "\n"
       << "bleu_ref@4=" << fmt(bleu_ref4) << "\n"
       << "bleu_self@1=" << fmt(bleu_self1) << "\n"
       << "bleu_self@4=" << fmt(bleu_self4) << "\n"
       << "sentiment_match_rate=" << fmt(sentiment_match_rate) << "\n"
       << "empty_generations=" << empty_generations << "\n";
    for (std::size_t i = 0; i < meaningful_counts.size(); ++i)
        os << "meaningful_count_" << i << "=" << meaningful_counts[i] << "\n";
    if (!provenance.empty()) {
        os << "# configuration\n";
        std::istringstream is(provenance);
        std::string line;
        while (std::getline(is, line)) os << "# " << line << "\n";
    }
    return os.str();
}

std::string EvalReport::csv_header() {
    return "recall1,recall5,recall10,mean_rank,mrr,bleu_ref1,bleu_ref4,"
           "bleu_self1,bleu_self4,sentiment_match_rate,empty_generations";
}

std::string EvalReport::to_csv_row() const {
    std::ostringstream os;
    os << fmt(recall1) << ',' << fmt(recall5) << ',' << fmt(recall10) << ','
       << fmt(mean_rank) << ',' << fmt(mrr) << ',' << fmt(bleu_ref1) << ','
       << fmt(bleu_ref4) << ',' << fmt(bleu_self1) << ',' << fmt(bleu_self4)
       << ',' << fmt(sentiment_match_rate) << ',' << empty_generations;
    return os.str();
}

EvalReport evaluate_model(const SoTvae& model, const Corpus& train,
                          const Corpus& test, const SentimentLexicon& lexicon,
                          std::uint64_t seed) {
    if (test.samples.empty())
        throw std::invalid_argument("evaluate_model: empty test split");

    std::vector<std::vector<int>> train_docs;
    train_docs.reserve(train.samples.size());
    for (const auto& s : train.samples) train_docs.push_back(s.target_tokens);
    TfIdfIndex index = TfIdfIndex::build(train_docs);

    const std::size_t n_test = test.samples.size();
    std::vector<RankingMetrics> per_sample(n_test);
    std::vector<std::vector<std::vector<int>>> gens(n_test), refs(n_test);

#pragma omp parallel for schedule(dynamic)
    for (std::size_t i = 0; i < n_test; ++i) {
        const CommentSample& sample = test.samples[i];
        Rng sample_rng(seed ^ (0x9e3779b97f4a7c15ULL * (i + 1)));
        CandidateSet set = build_candidate_set(sample, train, index, sample_rng);
        EncodedContext enc = model.encode_eval(sample);
        std::vector<double> scores(set.candidates.size());
        for (std::size_t c = 0; c < set.candidates.size(); ++c)
            scores[c] = model.score_candidate(enc, set.candidates[c]);
        per_sample[i] = ranking_metrics(rank_by_scores(scores),
                                        set.correct_indices);

        std::vector<GenerationResult> g = model.generate_diverse(sample, sample_rng);
        for (const auto& r : g) gens[i].push_back(r.tokens);
        refs[i] = sample.references;
    }

    EvalReport report;
    for (const auto& m : per_sample) {
        report.recall1 += m.recall1;
        report.recall5 += m.recall5;
        report.recall10 += m.recall10;
        report.mean_rank += m.mean_rank;
        report.mrr += m.mrr;
    }
    const double inv = 1.0 / static_cast<double>(n_test);
    report.recall1 *= inv;
    report.recall5 *= inv;
    report.recall10 *= inv;
    report.mean_rank *= inv;
    report.mrr *= inv;

    // Empty generations carry no n-grams but stay in the corpus statistics.
    report.bleu_ref1 = bleu_ref(gens, refs, 1);
    report.bleu_ref4 = bleu_ref(gens, refs, 4);
    if (model.config().n_sentiments >= 2) {
        report.bleu_self1 = bleu_self(gens, 1);
        report.bleu_self4 = bleu_self(gens, 4);
    }

    report.meaningful_counts.assign(model.config().n_sentiments + 1, 0);
    for (const auto& sample_gens : gens) {
        std::size_t nonempty = 0;
        for (const auto& g : sample_gens) nonempty += !g.empty();
        std::size_t bin = std::min(nonempty, report.meaningful_counts.size() - 1);
        ++report.meaningful_counts[bin];
    }

    Rng ctrl_rng(seed + 1);
    ControllabilityResult ctrl = controllability(model, test, lexicon, ctrl_rng);
    report.sentiment_match_rate = ctrl.match_rate;
    report.empty_generations = ctrl.empty_count;
    report.provenance = model.config().serialize();
    return report;
}

}  // namespace sotvae
