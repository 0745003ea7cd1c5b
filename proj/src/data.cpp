#include "sotvae/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>
#include <stdexcept>

#include "sotvae/rng.hpp"

namespace sotvae {

Vocabulary::Vocabulary() {
    for (const char* t : {"<pad>", "<bos>", "<eos>", "<unk>"}) add(t);
}

int Vocabulary::add(const std::string& token) {
    auto it = ids.find(token);
    if (it != ids.end()) return it->second;
    int id = static_cast<int>(tokens.size());
    tokens.push_back(token);
    ids.emplace(token, id);
    return id;
}

int Vocabulary::id(const std::string& token) const {
    auto it = ids.find(token);
    return it == ids.end() ? UNK : it->second;
}

const std::string& Vocabulary::token(int id) const {
    if (id < 0 || static_cast<std::size_t>(id) >= tokens.size())
        throw std::out_of_range("token id " + std::to_string(id) +
                                " outside vocabulary of " +
                                std::to_string(tokens.size()));
    return tokens[id];
}

void Vocabulary::save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write vocabulary file: " + path);
    for (const auto& t : tokens) out << t << "\n";
}

Vocabulary Vocabulary::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read vocabulary file: " + path);
    Vocabulary v;
    v.tokens.clear();
    v.ids.clear();
    std::string line;
    while (std::getline(in, line)) v.add(line);
    if (v.size() < 4)
        throw std::runtime_error("vocabulary file too short: " + path);
    return v;
}

std::vector<int> tokenize(const std::string& text, const Vocabulary& vocab) {
    std::vector<int> out;
    std::istringstream is(text);
    std::string tok;
    while (is >> tok) out.push_back(vocab.id(tok));
    return out;
}

std::string detokenize(const std::vector<int>& ids, const Vocabulary& vocab) {
    std::string out;
    for (std::size_t i = 0; i < ids.size(); ++i) {
        if (i) out += ' ';
        out += vocab.token(ids[i]);
    }
    return out;
}

double SentimentLexicon::score(const std::vector<int>& token_ids) const {
    double s = 0.0;
    for (int id : token_ids) {
        auto it = weights.find(id);
        if (it != weights.end()) s += it->second;
    }
    return s;
}

int SentimentLexicon::label(const std::vector<int>& token_ids,
                            std::size_t n_classes) const {
    const double s = std::clamp(score(token_ids), -score_range, score_range);
    const double width = 2.0 * score_range / n_classes;
    auto bin = static_cast<long>(std::floor((s + score_range) / width));
    bin = std::clamp<long>(bin, 0, static_cast<long>(n_classes) - 1);
    return static_cast<int>(bin);
}

namespace {

constexpr std::size_t kTopics = 10;
constexpr std::size_t kWordsPerTopic = 8;
constexpr std::size_t kWordsPerClass = 6;

struct SynthVocab {
    int sep;
    std::vector<std::vector<int>> topic_words;           // [topic][word]
    std::vector<std::vector<int>> class_words;           // [class][word]
    std::vector<int> fillers;
};

SynthVocab build_vocab_impl(const GeneratorConfig& cfg, Vocabulary& vocab,
                            SentimentLexicon& lexicon) {
    if (cfg.vocab_size < 50)
        throw std::invalid_argument("synth_corpus: vocab_size must be >= 50");
    SynthVocab sv;
    sv.sep = vocab.add("<sep>");
    for (std::size_t t = 0; t < kTopics; ++t) {
        sv.topic_words.emplace_back();
        for (std::size_t w = 0; w < kWordsPerTopic; ++w)
            sv.topic_words.back().push_back(
                vocab.add("t" + std::to_string(t) + "w" + std::to_string(w)));
    }
    lexicon.score_range = 3.0;
    const double width = 2.0 * lexicon.score_range / cfg.n_classes;
    for (std::size_t c = 0; c < cfg.n_classes; ++c) {
        sv.class_words.emplace_back();
        // Weight = the bin center, so a single lexicon token lands in bin c.
        const double w = -lexicon.score_range + (c + 0.5) * width;
        for (std::size_t j = 0; j < kWordsPerClass; ++j) {
            int id = vocab.add("s" + std::to_string(c) + "w" + std::to_string(j));
            sv.class_words.back().push_back(id);
            lexicon.weights[id] = w;
        }
    }
    while (vocab.size() < cfg.vocab_size)
        sv.fillers.push_back(vocab.add("f" + std::to_string(sv.fillers.size())));
    if (sv.fillers.empty())
        throw std::invalid_argument(
            "synth_corpus: vocab_size too small for topic/sentiment words");
    return sv;
}

std::vector<double> effective_mixture(const GeneratorConfig& cfg) {
    if (cfg.sentiment_mixture.size() != cfg.n_classes)
        throw std::invalid_argument("synth_corpus: mixture size != n_classes");
    auto mix = cfg.sentiment_mixture;
    for (double w : mix)
        if (w < 0.0)
            throw std::invalid_argument("synth_corpus: negative mixture weight");
    if (cfg.imbalance_class >= 0) {
        if (static_cast<std::size_t>(cfg.imbalance_class) >= mix.size())
            throw std::invalid_argument("synth_corpus: imbalance_class out of range");
        if (cfg.imbalance_ratio < 0.0)
            throw std::invalid_argument("synth_corpus: negative imbalance_ratio");
        mix[cfg.imbalance_class] *= cfg.imbalance_ratio;
    }
    double total = 0.0;
    for (double w : mix) total += w;
    if (total <= 0.0)
        throw std::invalid_argument("synth_corpus: mixture sums to zero");
    for (double& w : mix) w /= total;
    return mix;
}

int draw_class(const std::vector<double>& mix, Rng& rng) {
    double u = rng.uniform(), acc = 0.0;
    for (std::size_t c = 0; c < mix.size(); ++c) {
        acc += mix[c];
        if (u < acc) return static_cast<int>(c);
    }
    return static_cast<int>(mix.size()) - 1;
}

// Sentiment-templated comment: two class words anchor the score in the
// intended bin, topic words carry the subject, fillers pad it out.
std::vector<int> make_comment(const SynthVocab& sv, std::size_t topic, int cls,
                              Rng& rng) {
    std::vector<int> out;
    const auto& cw = sv.class_words[cls];
    const auto& tw = sv.topic_words[topic];
    out.push_back(cw[rng.index(cw.size())]);
    out.push_back(tw[rng.index(tw.size())]);
    out.push_back(cw[rng.index(cw.size())]);
    const std::size_t extra = rng.index(3);  // 0..2 trailing words
    for (std::size_t i = 0; i < extra; ++i)
        out.push_back(rng.uniform() < 0.5 ? tw[rng.index(tw.size())]
                                          : sv.fillers[rng.index(sv.fillers.size())]);
    return out;
}

}  // namespace

void build_synth_vocab(const GeneratorConfig& cfg, Vocabulary& vocab,
                       SentimentLexicon& lexicon) {
    build_vocab_impl(cfg, vocab, lexicon);
}

SynthResult synth_corpus(const GeneratorConfig& cfg) {
    if (cfg.n_samples < 1)
        throw std::invalid_argument("synth_corpus: n_samples must be >= 1");
    SynthResult res;
    SynthVocab sv = build_vocab_impl(cfg, res.vocab, res.lexicon);
    const auto mix = effective_mixture(cfg);

    Rng rng(cfg.seed);
    // Fixed per-topic frame-feature directions for the whole corpus.
    std::vector<std::vector<double>> topic_dirs(kTopics,
                                                std::vector<double>(cfg.d_in));
    for (auto& dir : topic_dirs)
        for (auto& v : dir) v = rng.normal();

    for (std::size_t i = 0; i < cfg.n_samples; ++i) {
        CommentSample s;
        s.sample_id = "s" + std::to_string(i);
        const std::size_t topic = rng.index(kTopics);
        const int cls = draw_class(mix, rng);

        s.frames.resize(cfg.k);
        for (auto& f : s.frames) {
            f.resize(cfg.d_in);
            for (std::size_t j = 0; j < cfg.d_in; ++j)
                f[j] = topic_dirs[topic][j] + 0.1 * rng.normal();
        }

        for (std::size_t c = 0; c < cfg.m; ++c) {
            if (c) s.surrounding_tokens.push_back(sv.sep);
            const int ctx_cls = draw_class(mix, rng);
            auto comment = make_comment(sv, topic, ctx_cls, rng);
            s.surrounding_tokens.insert(s.surrounding_tokens.end(), comment.begin(),
                                        comment.end());
        }
        if (s.surrounding_tokens.size() > cfg.p_max)
            s.surrounding_tokens.erase(
                s.surrounding_tokens.begin(),
                s.surrounding_tokens.end() - static_cast<long>(cfg.p_max));

        const bool silent = rng.uniform() < cfg.empty_frac;
        if (!silent) s.target_tokens = make_comment(sv, topic, cls, rng);
        s.sentiment_label = res.lexicon.label(s.target_tokens, cfg.n_classes);
        s.references.push_back(s.target_tokens);
        for (std::size_t r = 1; r < cfg.n_refs; ++r)
            s.references.push_back(
                make_comment(sv, topic, draw_class(mix, rng), rng));

        const auto& tw = sv.topic_words[topic];
        for (int j = 0; j < 3; ++j) s.title_tokens.push_back(tw[rng.index(tw.size())]);

        res.intended_labels.push_back(silent ? s.sentiment_label : cls);
        res.corpus.samples.push_back(std::move(s));
    }
    return res;
}

void validate_sample(const CommentSample& s, std::size_t vocab_size,
                     std::size_t n_classes) {
    auto check_tokens = [&](const std::vector<int>& toks, const char* what) {
        for (int t : toks)
            if (t < 0 || static_cast<std::size_t>(t) >= vocab_size)
                throw std::runtime_error("sample " + s.sample_id + ": " + what +
                                         " token out of vocabulary");
    };
    if (s.frames.empty())
        throw std::runtime_error("sample " + s.sample_id + ": no frames");
    for (const auto& f : s.frames)
        if (f.size() != s.frames[0].size())
            throw std::runtime_error("sample " + s.sample_id +
                                     ": inconsistent frame widths");
    check_tokens(s.surrounding_tokens, "surrounding");
    check_tokens(s.target_tokens, "target");
    check_tokens(s.title_tokens, "title");
    for (const auto& r : s.references) check_tokens(r, "reference");
    if (s.sentiment_label < 0 ||
        static_cast<std::size_t>(s.sentiment_label) >= n_classes)
        throw std::runtime_error("sample " + s.sample_id +
                                 ": sentiment label out of range");
    if (std::find(s.references.begin(), s.references.end(), s.target_tokens) ==
        s.references.end())
        throw std::runtime_error("sample " + s.sample_id +
                                 ": target not among references");
}

namespace {

std::string fmt_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::vector<std::string> split(const std::string& s, const std::string& delim) {
    std::vector<std::string> out;
    std::size_t pos = 0;
    while (true) {
        std::size_t next = s.find(delim, pos);
        if (next == std::string::npos) {
            out.push_back(s.substr(pos));
            return out;
        }
        out.push_back(s.substr(pos, next - pos));
        pos = next + delim.size();
    }
}

[[noreturn]] void parse_fail(std::size_t line_no, const std::string& field,
                             const std::string& detail) {
    throw std::runtime_error("corpus parse error at line " +
                             std::to_string(line_no) + ", field '" + field +
                             "': " + detail);
}

}  // namespace

void save_lexicon(const SentimentLexicon& lexicon, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write lexicon file: " + path);
    out << "score_range\t" << std::setprecision(17) << lexicon.score_range
        << "\n";
    std::map<int, double> sorted(lexicon.weights.begin(),
                                 lexicon.weights.end());
    for (const auto& [id, w] : sorted)
        out << id << "\t" << std::setprecision(17) << w << "\n";
}

SentimentLexicon load_lexicon(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read lexicon file: " + path);
    SentimentLexicon lex;
    std::string key;
    if (!(in >> key >> lex.score_range) || key != "score_range")
        throw std::runtime_error("malformed lexicon header in " + path);
    int id;
    double w;
    while (in >> id >> w) lex.weights[id] = w;
    return lex;
}

void save_corpus(const Corpus& corpus, const Vocabulary& vocab,
                 const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write corpus file: " + path);
    for (const auto& s : corpus.samples) {
        out << s.sample_id << '\t' << s.sentiment_label << '\t';
        for (std::size_t f = 0; f < s.frames.size(); ++f) {
            if (f) out << '|';
            for (std::size_t j = 0; j < s.frames[f].size(); ++j) {
                if (j) out << ',';
                out << fmt_double(s.frames[f][j]);
            }
        }
        out << '\t' << detokenize(s.surrounding_tokens, vocab) << '\t'
            << detokenize(s.target_tokens, vocab) << '\t';
        for (std::size_t r = 0; r < s.references.size(); ++r) {
            if (r) out << "||";
            out << detokenize(s.references[r], vocab);
        }
        out << '\t' << detokenize(s.title_tokens, vocab) << '\n';
    }
}

Corpus load_corpus(const std::string& path, const Vocabulary& vocab) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read corpus file: " + path);
    Corpus corpus;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        auto fields = split(line, "\t");
        if (fields.size() != 7)
            parse_fail(line_no, "record",
                       "expected 7 tab-separated fields, got " +
                           std::to_string(fields.size()));
        CommentSample s;
        s.sample_id = fields[0];
        if (s.sample_id.empty()) parse_fail(line_no, "sample_id", "empty");
        try {
            s.sentiment_label = std::stoi(fields[1]);
        } catch (const std::exception&) {
            parse_fail(line_no, "sentiment_label", "not an integer: " + fields[1]);
        }
        for (const auto& vec : split(fields[2], "|")) {
            s.frames.emplace_back();
            for (const auto& num : split(vec, ",")) {
                try {
                    s.frames.back().push_back(std::stod(num));
                } catch (const std::exception&) {
                    parse_fail(line_no, "frames", "bad float: " + num);
                }
            }
        }
        s.surrounding_tokens = tokenize(fields[3], vocab);
        // Empty targets are legal (silent viewers); they round-trip as an
        // empty field and as an empty entry in the reference list.
        s.target_tokens = tokenize(fields[4], vocab);
        for (const auto& ref : split(fields[5], "||"))
            s.references.push_back(tokenize(ref, vocab));
        s.title_tokens = tokenize(fields[6], vocab);
        corpus.samples.push_back(std::move(s));
    }
    return corpus;
}

}  // namespace sotvae
