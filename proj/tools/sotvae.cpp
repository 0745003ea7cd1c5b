// Command-line entry point: data synthesis, training, generation,
// evaluation and ablation sweeps over one deterministic pipeline.
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "sotvae/checkpoint.hpp"
#include "sotvae/data.hpp"
#include "sotvae/eval.hpp"
#include "sotvae/model.hpp"
#include "sotvae/trainer.hpp"

namespace fs = std::filesystem;
using namespace sotvae;

namespace {

std::map<std::string, std::string> parse_kv_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read config file: " + path);
    std::map<std::string, std::string> kv;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        auto eq = line.find('=');
        if (eq == std::string::npos)
            throw std::runtime_error("malformed config line: " + line);
        kv[line.substr(0, eq)] = line.substr(eq + 1);
    }
    return kv;
}

std::map<std::string, std::string> kv_of(const std::string& serialized) {
    std::map<std::string, std::string> kv;
    std::istringstream is(serialized);
    std::string line;
    while (std::getline(is, line)) {
        auto eq = line.find('=');
        if (eq != std::string::npos) kv[line.substr(0, eq)] = line.substr(eq + 1);
    }
    return kv;
}

void apply_train_kv(TrainConfig& t, const std::map<std::string, std::string>& kv) {
    for (const auto& [k, v] : kv) {
        if (k == "lr") t.lr = std::stod(v);
        else if (k == "batch_size") t.batch_size = std::stoul(v);
        else if (k == "epochs") t.epochs = std::stoul(v);
        else if (k == "decay_start_epoch") t.decay_start_epoch = std::stoul(v);
        else if (k == "decay_every") t.decay_every = std::stoul(v);
        else if (k == "decay_factor") t.decay_factor = std::stod(v);
        else if (k == "grad_clip") t.grad_clip = std::stod(v);
        else if (k == "beta") t.beta = std::stod(v);
        else if (k == "gamma") t.gamma = std::stod(v);
        else if (k == "test_fraction") t.test_fraction = std::stod(v);
        else if (k == "seed") t.seed = std::stoull(v);
    }
}

// Flags shared by every subcommand that builds a model and/or trains.
struct CommonOpts {
    std::string config_path, data_dir, out_dir = "out";
    std::uint64_t seed = 1;
    bool paper_scale = false;
    std::size_t sentiments = 0, batch_size = 0, epochs = 0, dim = 0;
    double mask_ratio = -1.0, beta = -1.0, gamma = -1.0;
    std::string variant = "full";
};

void add_common_flags(CLI::App* cmd, CommonOpts& o, bool wants_data) {
    cmd->add_option("--config", o.config_path, "key=value config file");
    if (wants_data)
        cmd->add_option("--data", o.data_dir, "dataset directory from synth-data")
            ->required();
    cmd->add_option("--out", o.out_dir, "output directory");
    cmd->add_option("--seed", o.seed, "random seed");
    cmd->add_flag("--paper-scale", o.paper_scale,
                  "use the full-scale hyperparameters");
    cmd->add_option("--sentiments", o.sentiments, "number of sentiment classes");
    cmd->add_option("--mask-ratio", o.mask_ratio, "latent mask ratio lambda");
    cmd->add_option("--beta", o.beta, "KL weight");
    cmd->add_option("--gamma", o.gamma, "sentiment-loss weight");
    cmd->add_option("--batch-size", o.batch_size, "mini-batch size");
    cmd->add_option("--epochs", o.epochs, "training epochs");
    cmd->add_option("--d", o.dim, "model width");
    cmd->add_option("--variant", o.variant, "model variant")
        ->check(CLI::IsMember({"full", "no-diversity", "send", "smd", "no-mask",
                               "no-batchattn", "batchformer"}));
}

void apply_variant(ModelConfig& cfg, const std::string& variant) {
    if (variant == "full") return;
    if (variant == "no-diversity") cfg.diversity = DiversityMode::Off;
    else if (variant == "send") cfg.diversity = DiversityMode::Send;
    else if (variant == "smd") cfg.diversity = DiversityMode::Smd;
    else if (variant == "no-mask") cfg.mask_ratio = 0.0;
    else if (variant == "no-batchattn") cfg.batchattn = BatchAttnMode::Off;
    else if (variant == "batchformer") cfg.batchattn = BatchAttnMode::BatchFormer;
}

std::pair<ModelConfig, TrainConfig> resolve_configs(const CommonOpts& o) {
    ModelConfig m;
    TrainConfig t;
    if (o.paper_scale) m.apply_paper_scale();
    if (!o.config_path.empty()) {
        auto file_kv = parse_kv_file(o.config_path);
        auto kv = kv_of(m.serialize());
        for (const auto& [k, v] : file_kv) kv[k] = v;
        m = ModelConfig::deserialize(kv);
        apply_train_kv(t, file_kv);
    }
    apply_variant(m, o.variant);
    if (o.sentiments) m.n_sentiments = o.sentiments;
    if (o.mask_ratio >= 0.0) m.mask_ratio = o.mask_ratio;
    if (o.dim) m.d = o.dim;
    if (o.beta >= 0.0) t.beta = o.beta;
    if (o.gamma >= 0.0) t.gamma = o.gamma;
    if (o.batch_size) t.batch_size = o.batch_size;
    if (o.epochs) t.epochs = o.epochs;
    t.seed = o.seed;
    return {m, t};
}

struct Dataset {
    Corpus corpus;
    Vocabulary vocab;
    SentimentLexicon lexicon;
};

Dataset load_dataset(const std::string& dir) {
    Dataset d;
    d.vocab = Vocabulary::load(dir + "/vocab.txt");
    d.lexicon = load_lexicon(dir + "/lexicon.txt");
    d.corpus = load_corpus(dir + "/corpus.tsv", d.vocab);
    return d;
}

void write_provenance(const std::string& path, const ModelConfig& m,
                      const TrainConfig& t) {
    std::ofstream out(path);
    out << m.serialize() << t.serialize();
}

std::unique_ptr<SoTvae> load_model(const std::string& ckpt_path) {
    Checkpoint ckpt = load_checkpoint(ckpt_path);
    auto model = std::make_unique<SoTvae>(ckpt.config, /*init_seed=*/1);
    apply_checkpoint(ckpt, model->params());
    return model;
}

int cmd_synth_data(const CommonOpts& o, const GeneratorConfig& gen) {
    fs::create_directories(o.out_dir);
    SynthResult res = synth_corpus(gen);
    res.vocab.save(o.out_dir + "/vocab.txt");
    save_lexicon(res.lexicon, o.out_dir + "/lexicon.txt");
    save_corpus(res.corpus, res.vocab, o.out_dir + "/corpus.tsv");
    std::ofstream prov(o.out_dir + "/gen_config.txt");
    prov << "vocab_size=" << gen.vocab_size << "\nn_samples=" << gen.n_samples
         << "\nk=" << gen.k << "\nd_in=" << gen.d_in << "\nm=" << gen.m
         << "\np_max=" << gen.p_max << "\nn_refs=" << gen.n_refs
         << "\nn_classes=" << gen.n_classes
         << "\nimbalance_class=" << gen.imbalance_class
         << "\nimbalance_ratio=" << gen.imbalance_ratio
         << "\nseed=" << gen.seed << "\n";
    std::cout << "wrote " << res.corpus.samples.size() << " samples to "
              << o.out_dir << "\n";
    return 0;
}

int cmd_train(const CommonOpts& o) {
    auto [mcfg, tcfg] = resolve_configs(o);
    Dataset data = load_dataset(o.data_dir);
    mcfg.vocab_size = data.vocab.size();
    Corpus train, test;
    split_corpus(data.corpus, tcfg.test_fraction, tcfg.seed, train, test);
    SoTvae model(mcfg, tcfg.seed);
    TrainLog log = train_model(model, train, tcfg, o.out_dir);
    write_provenance(o.out_dir + "/config.txt", mcfg, tcfg);
    if (!log.epochs.empty())
        std::cout << "final loss_total=" << log.epochs.back().total << "\n";
    std::cout << "checkpoints in " << o.out_dir << "\n";
    return 0;
}

int cmd_generate(const CommonOpts& o, const std::string& ckpt_path,
                 const std::string& out_file) {
    Dataset data = load_dataset(o.data_dir);
    auto model = load_model(ckpt_path);
    TrainConfig tcfg;
    tcfg.seed = o.seed;
    Corpus train, test;
    split_corpus(data.corpus, tcfg.test_fraction, tcfg.seed, train, test);

    std::ofstream out(out_file);
    if (!out) throw std::runtime_error("cannot write " + out_file);
    std::istringstream cfg_lines(model->config().serialize());
    std::string line;
    while (std::getline(cfg_lines, line)) out << "# " << line << "\n";
    Rng rng(o.seed);
    for (const auto& sample : test.samples) {
        auto gens = model->generate_diverse(sample, rng);
        for (const auto& g : gens)
            out << sample.sample_id << "\t" << g.sentiment << "\t"
                << detokenize(g.tokens, data.vocab) << "\n";
    }
    std::cout << "wrote generations for " << test.samples.size()
              << " samples to " << out_file << "\n";
    return 0;
}

int cmd_evaluate(const CommonOpts& o, const std::string& ckpt_path) {
    Dataset data = load_dataset(o.data_dir);
    auto model = load_model(ckpt_path);
    TrainConfig tcfg;
    tcfg.seed = o.seed;
    Corpus train, test;
    split_corpus(data.corpus, tcfg.test_fraction, tcfg.seed, train, test);
    EvalReport report =
        evaluate_model(*model, train, test, data.lexicon, o.seed);
    fs::create_directories(o.out_dir);
    std::ofstream kv(o.out_dir + "/report.txt");
    kv << report.to_kv();
    std::ofstream csv(o.out_dir + "/report.csv");
    csv << EvalReport::csv_header() << "\n" << report.to_csv_row() << "\n";
    std::cout << report.to_kv();
    return 0;
}

int cmd_ablate(const CommonOpts& o, const std::string& grid) {
    Dataset data = load_dataset(o.data_dir);
    fs::create_directories(o.out_dir);
    std::ofstream csv(o.out_dir + "/ablation.csv");
    csv << "variant," << EvalReport::csv_header() << ",final_loss_rc\n";

    struct Run {
        std::string name, variant;
        double mask = -1.0;
    };
    std::vector<Run> runs;
    if (grid == "variants") {
        for (const char* v : {"full", "no-diversity", "send", "smd", "no-mask",
                              "no-batchattn", "batchformer"})
            runs.push_back({v, v, -1.0});
    } else if (grid == "mask") {
        for (double lam : {0.0, 0.15, 0.30, 0.45}) {
            std::ostringstream name;
            name << "mask_" << lam;
            runs.push_back({name.str(), "full", lam});
        }
    } else {
        throw std::runtime_error("unknown ablation grid: " + grid);
    }

    for (const Run& run : runs) {
        CommonOpts ro = o;
        ro.variant = run.variant;
        if (run.mask >= 0.0) ro.mask_ratio = run.mask;
        auto [mcfg, tcfg] = resolve_configs(ro);
        mcfg.vocab_size = data.vocab.size();
        Corpus train, test;
        split_corpus(data.corpus, tcfg.test_fraction, tcfg.seed, train, test);
        SoTvae model(mcfg, tcfg.seed);
        std::string run_dir = o.out_dir + "/" + run.name;
        TrainLog log = train_model(model, train, tcfg, run_dir);
        EvalReport report =
            evaluate_model(model, train, test, data.lexicon, o.seed);
        csv << run.name << "," << report.to_csv_row() << ","
            << log.epochs.back().rc << "\n";
        csv.flush();
        std::cout << run.name << ": bleu_self@1=" << report.bleu_self1
                  << " match=" << report.sentiment_match_rate << "\n";
    }
    std::cout << "ablation table in " << o.out_dir << "/ablation.csv\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"sentiment-conditioned diverse comment generation"};
    app.require_subcommand(1);

    CommonOpts synth_o, train_o, gen_o, eval_o, ablate_o, dump_o;
    GeneratorConfig gen_cfg;
    std::string ckpt_path, gen_out = "generations.tsv", grid = "variants";

    CLI::App* synth = app.add_subcommand("synth-data", "write a synthetic corpus");
    synth->add_option("--out", synth_o.out_dir, "output directory");
    synth->add_option("--seed", gen_cfg.seed, "random seed");
    synth->add_option("--samples", gen_cfg.n_samples, "number of samples");
    synth->add_option("--vocab", gen_cfg.vocab_size, "vocabulary size");
    synth->add_option("--sentiments", gen_cfg.n_classes, "sentiment classes");
    synth->add_option("--frames", gen_cfg.k, "frames per sample");
    synth->add_option("--d-in", gen_cfg.d_in, "frame feature width");
    synth->add_option("--imbalance-class", gen_cfg.imbalance_class,
                      "class to starve (-1 = balanced)");
    synth->add_option("--imbalance-ratio", gen_cfg.imbalance_ratio,
                      "mixture weight multiplier for the starved class");

    CLI::App* train = app.add_subcommand("train", "train a model");
    add_common_flags(train, train_o, true);

    CLI::App* generate = app.add_subcommand("generate",
                                            "write diverse generations");
    add_common_flags(generate, gen_o, true);
    generate->add_option("--ckpt", ckpt_path, "checkpoint path")->required();
    generate->add_option("--out-file", gen_out, "output file");

    CLI::App* evaluate = app.add_subcommand("evaluate", "run the eval protocol");
    add_common_flags(evaluate, eval_o, true);
    evaluate->add_option("--ckpt", ckpt_path, "checkpoint path")->required();

    CLI::App* ablate = app.add_subcommand("ablate", "train + evaluate a grid");
    add_common_flags(ablate, ablate_o, true);
    ablate->add_option("--grid", grid, "grid to sweep")
        ->check(CLI::IsMember({"variants", "mask"}));

    CLI::App* dump = app.add_subcommand("dump-config",
                                        "print the resolved configuration");
    add_common_flags(dump, dump_o, false);

    CLI11_PARSE(app, argc, argv);

    try {
        if (synth->parsed()) return cmd_synth_data(synth_o, gen_cfg);
        if (train->parsed()) return cmd_train(train_o);
        if (generate->parsed()) return cmd_generate(gen_o, ckpt_path, gen_out);
        if (evaluate->parsed()) return cmd_evaluate(eval_o, ckpt_path);
        if (ablate->parsed()) return cmd_ablate(ablate_o, grid);
        if (dump->parsed()) {
            auto [mcfg, tcfg] = resolve_configs(dump_o);
            std::cout << mcfg.serialize() << tcfg.serialize();
            return 0;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
