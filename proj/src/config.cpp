#include "sotvae/config.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace sotvae {

std::string to_string(DiversityMode m) {
    switch (m) {
        case DiversityMode::Off: return "off";
        case DiversityMode::Send: return "send";
        case DiversityMode::Smd: return "smd";
        case DiversityMode::Full: return "full";
    }
    return "full";
}

std::string to_string(BatchAttnMode m) {
    switch (m) {
        case BatchAttnMode::Off: return "off";
        case BatchAttnMode::BatchFormer: return "batchformer";
        case BatchAttnMode::Full: return "full";
    }
    return "full";
}

DiversityMode diversity_from_string(const std::string& s) {
    if (s == "off") return DiversityMode::Off;
    if (s == "send") return DiversityMode::Send;
    if (s == "smd") return DiversityMode::Smd;
    if (s == "full") return DiversityMode::Full;
    throw std::invalid_argument("unknown diversity mode: " + s);
}

BatchAttnMode batchattn_from_string(const std::string& s) {
    if (s == "off") return BatchAttnMode::Off;
    if (s == "batchformer") return BatchAttnMode::BatchFormer;
    if (s == "full") return BatchAttnMode::Full;
    throw std::invalid_argument("unknown batch-attention mode: " + s);
}

std::string ModelConfig::serialize() const {
    std::ostringstream os;
    os << "vocab_size=" << vocab_size << "\n"
       << "n_sentiments=" << n_sentiments << "\n"
       << "d=" << d << "\n"
       << "d_in=" << d_in << "\n"
       << "d_z=" << d_z << "\n"
       << "d_pre=" << d_pre << "\n"
       << "heads=" << heads << "\n"
       << "ffn=" << ffn << "\n"
       << "co_layers=" << co_layers << "\n"
       << "dec_layers=" << dec_layers << "\n"
       << "max_len=" << max_len << "\n"
       << "dropout=" << dropout << "\n"
       << "sigma_prior=" << sigma_prior << "\n"
       << "mask_ratio=" << mask_ratio << "\n"
       << "learnable_prior_means=" << (learnable_prior_means ? 1 : 0) << "\n"
       << "kl_weighted_by_s=" << (kl_weighted_by_s ? 1 : 0) << "\n"
       << "softmax_sent_head=" << (softmax_sent_head ? 1 : 0) << "\n"
       << "diversity=" << to_string(diversity) << "\n"
       << "batchattn=" << to_string(batchattn) << "\n"
       << "coattn_order=" << (coattn_order == CoAttnOrder::CoA1 ? "coa1" : "default")
       << "\n";
    return os.str();
}

ModelConfig ModelConfig::deserialize(const std::map<std::string, std::string>& kv) {
    ModelConfig c;
    auto get = [&](const char* key) -> const std::string& {
        auto it = kv.find(key);
        if (it == kv.end())
            throw std::invalid_argument(std::string("config missing key: ") + key);
        return it->second;
    };
    c.vocab_size = std::stoul(get("vocab_size"));
    c.n_sentiments = std::stoul(get("n_sentiments"));
    c.d = std::stoul(get("d"));
    c.d_in = std::stoul(get("d_in"));
    c.d_z = std::stoul(get("d_z"));
    c.d_pre = std::stoul(get("d_pre"));
    c.heads = std::stoul(get("heads"));
    c.ffn = std::stoul(get("ffn"));
    c.co_layers = std::stoul(get("co_layers"));
    c.dec_layers = std::stoul(get("dec_layers"));
    c.max_len = std::stoul(get("max_len"));
    c.dropout = std::stod(get("dropout"));
    c.sigma_prior = std::stod(get("sigma_prior"));
    c.mask_ratio = std::stod(get("mask_ratio"));
    c.learnable_prior_means = get("learnable_prior_means") == "1";
    c.kl_weighted_by_s = get("kl_weighted_by_s") == "1";
    c.softmax_sent_head = get("softmax_sent_head") == "1";
    c.diversity = diversity_from_string(get("diversity"));
    c.batchattn = batchattn_from_string(get("batchattn"));
    c.coattn_order =
        get("coattn_order") == "coa1" ? CoAttnOrder::CoA1 : CoAttnOrder::Default;
    return c;
}

std::uint64_t ModelConfig::hash() const {
    const std::string s = serialize();
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

double TrainConfig::lr_at_epoch(std::size_t epoch) const {
    if (epoch < decay_start_epoch) return lr;
    const std::size_t steps = (epoch - decay_start_epoch) / decay_every;
    return lr * std::pow(decay_factor, static_cast<double>(steps));
}

std::string TrainConfig::serialize() const {
    std::ostringstream os;
    os << "lr=" << lr << "\nbatch_size=" << batch_size << "\nepochs=" << epochs
       << "\ndecay_start_epoch=" << decay_start_epoch
       << "\ndecay_every=" << decay_every << "\ndecay_factor=" << decay_factor
       << "\ngrad_clip=" << grad_clip << "\nbeta=" << beta << "\ngamma=" << gamma
       << "\ntest_fraction=" << test_fraction << "\nseed=" << seed << "\n";
    return os.str();
}

}  // namespace sotvae
