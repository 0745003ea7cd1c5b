#pragma once

#include <cstdint>
#include <map>
#include <string>

namespace sotvae {

enum class DiversityMode { Off, Send, Smd, Full };
enum class BatchAttnMode { Off, BatchFormer, Full };
enum class CoAttnOrder { Default, CoA1 };  // CoA1 swaps the argument order

std::string to_string(DiversityMode m);
std::string to_string(BatchAttnMode m);
DiversityMode diversity_from_string(const std::string& s);
BatchAttnMode batchattn_from_string(const std::string& s);

struct ModelConfig {
    std::size_t vocab_size = 200;
    std::size_t n_sentiments = 3;
    std::size_t d = 128;       // hidden size
    std::size_t d_in = 32;     // raw frame-feature width
    std::size_t d_z = 128;     // latent dimensionality
    std::size_t d_pre = 64;    // sentiment-predictor hidden width
    std::size_t heads = 4;
    std::size_t ffn = 256;
    std::size_t co_layers = 2;
    std::size_t dec_layers = 2;
    std::size_t max_len = 20;
    double dropout = 0.1;
    double sigma_prior = 0.2;
    double mask_ratio = 0.30;
    bool learnable_prior_means = true;
    bool kl_weighted_by_s = false;
    bool softmax_sent_head = false;  // default is the sigmoid head
    DiversityMode diversity = DiversityMode::Full;
    BatchAttnMode batchattn = BatchAttnMode::Full;
    CoAttnOrder coattn_order = CoAttnOrder::Default;

    // Full-scale dimensions; the desk-scale values above are the defaults.
    void apply_paper_scale() {
        d = 512;
        ffn = 2048;
        heads = 8;
        co_layers = 3;
        dec_layers = 6;
        d_z = 128;
        d_pre = 256;
    }

    std::string serialize() const;
    static ModelConfig deserialize(const std::map<std::string, std::string>& kv);
    std::uint64_t hash() const;  // FNV-1a over serialize()
};

struct TrainConfig {
    double lr = 1e-4;
    std::size_t batch_size = 32;
    std::size_t epochs = 20;
    std::size_t decay_start_epoch = 4;   // decay by 1/4 every 2 epochs after this
    std::size_t decay_every = 2;
    double decay_factor = 0.25;
    double grad_clip = 5.0;
    double beta = 2.0;
    double gamma = 0.3;
    double test_fraction = 0.10;
    std::uint64_t seed = 1;

    double lr_at_epoch(std::size_t epoch) const;
    std::string serialize() const;
};

}  // namespace sotvae
