#include "sotvae/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace sotvae {

Adam::Adam(ParamRegistry& reg, double beta1, double beta2, double eps)
    : reg_(&reg), beta1_(beta1), beta2_(beta2), eps_(eps) {
    for (const auto& [name, t] : reg.params()) {
        m_[name].assign(t->size(), 0.0);
        v_[name].assign(t->size(), 0.0);
    }
}

void Adam::step(double lr) {
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (const auto& [name, t] : reg_->params()) {
        if (t->grad.empty()) continue;
        auto& m = m_[name];
        auto& v = v_[name];
        for (std::size_t i = 0; i < t->data.size(); ++i) {
            double g = t->grad[i];
            m[i] = beta1_ * m[i] + (1.0 - beta1_) * g;
            v[i] = beta2_ * v[i] + (1.0 - beta2_) * g * g;
            double m_hat = m[i] / bc1;
            double v_hat = v[i] / bc2;
            t->data[i] -= lr * m_hat / (std::sqrt(v_hat) + eps_);
        }
    }
}

OptimizerState Adam::state() const {
    OptimizerState st;
    st.step = t_;
    st.m = m_;
    st.v = v_;
    return st;
}

void Adam::load_state(const OptimizerState& st) {
    t_ = st.step;
    for (auto& [name, m] : m_) {
        auto mi = st.m.find(name), vi = st.v.find(name);
        if (mi == st.m.end() || vi == st.v.end())
            throw std::runtime_error("Adam: state missing moments for " + name);
        if (mi->second.size() != m.size())
            throw std::runtime_error("Adam: moment size mismatch for " + name);
        m = mi->second;
        v_[name] = vi->second;
    }
}

double global_grad_norm(const ParamRegistry& reg) {
    double sum_sq = 0.0;
    for (const auto& [name, t] : reg.params())
        for (double g : t->grad) sum_sq += g * g;
    return std::sqrt(sum_sq);
}

void clip_gradients(ParamRegistry& reg, double max_norm) {
    double norm = global_grad_norm(reg);
    if (norm <= max_norm || norm == 0.0) return;
    double scale = max_norm / norm;
    for (const auto& [name, t] : reg.params())
        for (double& g : t->grad) g *= scale;
}

std::string TrainLog::to_csv() const {
    std::ostringstream os;
    os << "epoch,lr,loss_rc,loss_rc_aux,loss_z,loss_pre,loss_total\n";
    os.precision(10);
    for (const auto& e : epochs)
        os << e.epoch << ',' << e.lr << ',' << e.rc << ',' << e.rc_aux << ','
           << e.z << ',' << e.pre << ',' << e.total << "\n";
    return os.str();
}

void split_corpus(const Corpus& all, double test_fraction, std::uint64_t seed,
                  Corpus& train, Corpus& test) {
    if (test_fraction < 0.0 || test_fraction >= 1.0)
        throw std::invalid_argument("split_corpus: test_fraction out of range");
    std::vector<std::size_t> order(all.samples.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(seed ^ 0x5370006974000001ULL);
    std::shuffle(order.begin(), order.end(), rng.engine());
    std::size_t n_test = static_cast<std::size_t>(
        std::llround(test_fraction * static_cast<double>(all.samples.size())));
    train.samples.clear();
    test.samples.clear();
    for (std::size_t i = 0; i < order.size(); ++i) {
        const CommentSample& s = all.samples[order[i]];
        if (i + n_test < order.size())
            train.samples.push_back(s);
        else
            test.samples.push_back(s);
    }
}

TrainLog train_model(SoTvae& model, const Corpus& train_split,
                     const TrainConfig& tcfg, const std::string& out_dir,
                     std::size_t start_epoch, const OptimizerState* resume_opt) {
    if (train_split.samples.empty())
        throw std::invalid_argument("train_model: empty training split");
    Adam adam(model.params());
    if (resume_opt) adam.load_state(*resume_opt);
    if (!out_dir.empty()) std::filesystem::create_directories(out_dir);

    TrainLog log;
    const std::size_t n = train_split.samples.size();
    for (std::size_t epoch = start_epoch; epoch < tcfg.epochs; ++epoch) {
        // One stream per epoch so a resumed run replays the same shuffle
        // and noise regardless of how it got here.
        Rng rng(tcfg.seed ^ (0x9e3779b97f4a7c15ULL * (epoch + 1)));
        std::vector<std::size_t> order(n);
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::shuffle(order.begin(), order.end(), rng.engine());

        const double lr = tcfg.lr_at_epoch(epoch);
        EpochLog elog;
        elog.epoch = epoch;
        elog.lr = lr;
        std::size_t n_batches = 0;
        for (std::size_t start = 0; start < n; start += tcfg.batch_size) {
            std::vector<const CommentSample*> batch;
            for (std::size_t i = start;
                 i < std::min(n, start + tcfg.batch_size); ++i)
                batch.push_back(&train_split.samples[order[i]]);

            model.params().zero_grads();
            SoTvae::BatchLosses bl =
                model.train_batch(batch, tcfg.beta, tcfg.gamma, rng);
            if (!std::isfinite(bl.total_value)) {
                std::ostringstream os;
                os << "train_model: non-finite loss at epoch " << epoch
                   << ", step " << n_batches;
                throw std::runtime_error(os.str());
            }
            backward(bl.total);
            clip_gradients(model.params(), tcfg.grad_clip);
            adam.step(lr);

            elog.rc += bl.rc;
            elog.rc_aux += bl.rc_aux;
            elog.z += bl.z;
            elog.pre += bl.pre;
            elog.total += bl.total_value;
            ++n_batches;
        }
        const double inv = 1.0 / static_cast<double>(n_batches);
        elog.rc *= inv;
        elog.rc_aux *= inv;
        elog.z *= inv;
        elog.pre *= inv;
        elog.total *= inv;
        log.epochs.push_back(elog);

        if (!out_dir.empty()) {
            OptimizerState st = adam.state();
            std::ostringstream name;
            name << out_dir << "/epoch_" << epoch << ".ckpt";
            save_checkpoint(name.str(), model.params(), model.config(),
                            epoch + 1, &st);
            save_checkpoint(out_dir + "/latest.ckpt", model.params(),
                            model.config(), epoch + 1, &st);
            std::ofstream csv(out_dir + "/loss_log.csv");
            csv << log.to_csv();
        }
    }
    return log;
}

}  // namespace sotvae
