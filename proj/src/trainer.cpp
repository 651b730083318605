#include "gsam/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include <nlohmann/json.hpp>

namespace gsam {

using nlohmann::json;

void TrainConfig::validate() const {
    if (epochs < 1 || batch_size < 1) throw std::invalid_argument("TrainConfig: epochs/batch_size >= 1");
    if (lr0 <= 0.0) throw std::invalid_argument("TrainConfig: lr0 must be positive");
    if (loss != "cross_entropy") throw std::invalid_argument("TrainConfig: unknown loss " + loss);
}

double cosine_lr(int epoch, int total, double lr0) {
    if (total <= 0) throw std::invalid_argument("cosine_lr: total must be positive");
    if (epoch < 0 || epoch > total) throw std::invalid_argument("cosine_lr: epoch out of range");
    return lr0 * 0.5 * (1.0 + std::cos(M_PI * static_cast<double>(epoch) / total));
}

// ---------------------------------------------------------------------------
// Adam
// ---------------------------------------------------------------------------

Adam::Adam(ParamRegistry& registry, double beta1, double beta2, double eps)
    : registry_(registry), beta1_(beta1), beta2_(beta2), eps_(eps) {
    for (const Parameter* p : registry_.items()) {
        m_.emplace_back(p->value.shape());
        v_.emplace_back(p->value.shape());
    }
}

void Adam::step(double lr) {
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    const auto& params = registry_.items();
    for (size_t i = 0; i < params.size(); ++i) {
        Parameter* p = params[i];
        if (p->frozen) continue;
        Tensor& m = m_[i];
        Tensor& v = v_[i];
        for (long long k = 0; k < p->value.size(); ++k) {
            const double g = p->grad[k];
            m[k] = beta1_ * m[k] + (1.0 - beta1_) * g;
            v[k] = beta2_ * v[k] + (1.0 - beta2_) * g * g;
            const double mhat = m[k] / bc1;
            const double vhat = v[k] / bc2;
            p->value[k] -= lr * mhat / (std::sqrt(vhat) + eps_);
        }
    }
}

void Adam::export_state(std::map<std::string, Tensor>& out) const {
    const auto& params = registry_.items();
    for (size_t i = 0; i < params.size(); ++i) {
        out["adam.m:" + params[i]->name] = m_[i];
        out["adam.v:" + params[i]->name] = v_[i];
    }
}

void Adam::import_state(const std::map<std::string, Tensor>& in, long long step_count) {
    const auto& params = registry_.items();
    for (size_t i = 0; i < params.size(); ++i) {
        m_[i] = in.at("adam.m:" + params[i]->name);
        v_[i] = in.at("adam.v:" + params[i]->name);
    }
    t_ = step_count;
}

// ---------------------------------------------------------------------------
// Loss and evaluation
// ---------------------------------------------------------------------------

double cross_entropy_loss(const Tensor& logits, const std::vector<const LabelMask*>& labels,
                          Tensor* dlogits) {
    const int b = logits.dim(0), k = logits.dim(1), h = logits.dim(2), w = logits.dim(3);
    if (static_cast<int>(labels.size()) != b) {
        throw std::invalid_argument("cross_entropy_loss: batch size mismatch");
    }
    if (dlogits) *dlogits = Tensor(logits.shape());
    const double inv_n = 1.0 / (static_cast<double>(b) * h * w);
    double loss = 0.0;
    std::vector<double> probs(static_cast<size_t>(k));
    for (int bi = 0; bi < b; ++bi) {
        const LabelMask& lab = *labels[static_cast<size_t>(bi)];
        if (lab.h != h || lab.w != w) {
            throw std::invalid_argument("cross_entropy_loss: label dims mismatch");
        }
        for (int i = 0; i < h; ++i)
            for (int j = 0; j < w; ++j) {
                double mx = logits.at(bi, 0, i, j);
                for (int c = 1; c < k; ++c) mx = std::max(mx, logits.at(bi, c, i, j));
                double sum = 0.0;
                for (int c = 0; c < k; ++c) {
                    probs[static_cast<size_t>(c)] = std::exp(logits.at(bi, c, i, j) - mx);
                    sum += probs[static_cast<size_t>(c)];
                }
                const int target = lab.at(i, j);
                if (target >= k) throw std::invalid_argument("cross_entropy_loss: label id out of range");
                loss -= (std::log(probs[static_cast<size_t>(target)]) - std::log(sum)) * inv_n;
                if (dlogits) {
                    for (int c = 0; c < k; ++c) {
                        const double p = probs[static_cast<size_t>(c)] / sum;
                        dlogits->at(bi, c, i, j) = (p - (c == target ? 1.0 : 0.0)) * inv_n;
                    }
                }
            }
    }
    return loss;
}

LabelMask predict_labels(const Tensor& logits, int batch_index) {
    const int k = logits.dim(1), h = logits.dim(2), w = logits.dim(3);
    LabelMask out(h, w);
    for (int i = 0; i < h; ++i)
        for (int j = 0; j < w; ++j) {
            int best = 0;
            double bv = logits.at(batch_index, 0, i, j);
            for (int c = 1; c < k; ++c) {
                const double v = logits.at(batch_index, c, i, j);
                if (v > bv) {
                    bv = v;
                    best = c;
                }
            }
            out.at(i, j) = static_cast<uint8_t>(best);
        }
    return out;
}

ConfusionMatrix::Iou evaluate(const GsamModel& model, const std::vector<Sample>& samples) {
    if (samples.empty()) throw std::invalid_argument("evaluate: empty sample set");
    ConfusionMatrix cm(model.config().num_classes);
    for (const Sample& s : samples) {
        const Tensor logits = model.forward(s.image);
        cm.accumulate(predict_labels(logits, 0), s.label);
    }
    return cm.iou();
}

// ---------------------------------------------------------------------------
// Trainer
// ---------------------------------------------------------------------------

Trainer::Trainer(GsamModel& model, const TrainConfig& cfg)
    : model_(model), cfg_(cfg), adam_(model.registry()) {
    cfg_.validate();
    for (const Parameter* p : model_.registry().items()) {
        if (p->frozen) frozen_snapshot_.push_back(p->value);
    }
}

void Trainer::verify_frozen() const {
    size_t k = 0;
    for (const Parameter* p : model_.registry().items()) {
        if (!p->frozen) continue;
        if (!(p->value == frozen_snapshot_[k])) {
            throw std::runtime_error("frozen parameter changed during training: " + p->name);
        }
        ++k;
    }
}

TrainLog Trainer::train(const std::vector<Sample>& train_set, const std::vector<Sample>& val_set,
                        const std::function<void(int, const TrainLog&)>& epoch_callback,
                        int run_until) {
    if (train_set.empty()) throw std::invalid_argument("Trainer: empty training set");
    const int end_epoch = run_until < 0 ? cfg_.epochs : std::min(run_until, cfg_.epochs);
    TrainLog log;

    for (int epoch = start_epoch_; epoch < end_epoch; ++epoch) {
        const double lr = cosine_lr(epoch, cfg_.epochs, cfg_.lr0);

        // Deterministic epoch shuffle, independent of prior epochs.
        std::vector<size_t> order(train_set.size());
        std::iota(order.begin(), order.end(), 0);
        std::mt19937_64 shuffle_rng = sample_rng(cfg_.seed, -1, epoch);
        std::shuffle(order.begin(), order.end(), shuffle_rng);

        double epoch_loss = 0.0;
        int n_batches = 0;
        for (size_t start = 0; start < order.size(); start += static_cast<size_t>(cfg_.batch_size)) {
            const size_t end = std::min(order.size(), start + static_cast<size_t>(cfg_.batch_size));
            const int b = static_cast<int>(end - start);

            // Crop each sample with its own per-(seed, index, epoch) stream.
            std::vector<Sample> batch;
            batch.reserve(static_cast<size_t>(b));
            for (size_t k = start; k < end; ++k) {
                std::mt19937_64 rng = sample_rng(cfg_.seed, static_cast<int>(order[k]), epoch);
                batch.push_back(augment(train_set[order[k]], cfg_.augment, rng));
            }
            Tensor images({b, 3, batch[0].label.h, batch[0].label.w});
            std::vector<const LabelMask*> labels;
            for (int bi = 0; bi < b; ++bi) {
                const Tensor& im = batch[static_cast<size_t>(bi)].image;
                for (long long k = 0; k < im.size(); ++k) {
                    images[static_cast<long long>(bi) * im.size() + k] = im[k];
                }
                labels.push_back(&batch[static_cast<size_t>(bi)].label);
            }

            GsamModel::Cache cache;
            const Tensor logits = model_.forward(images, &cache);
            Tensor dlogits;
            const double loss = cross_entropy_loss(logits, labels, &dlogits);
            if (!std::isfinite(loss)) {
                throw std::runtime_error("NaN/Inf loss at epoch " + std::to_string(epoch) +
                                         ", batch " + std::to_string(n_batches) + ", lr " +
                                         std::to_string(lr));
            }
            model_.registry().zero_grads();
            model_.backward(cache, dlogits);
            adam_.step(lr);

            epoch_loss += loss;
            ++n_batches;
        }

        log.lr.push_back(lr);
        log.loss.push_back(epoch_loss / n_batches);
        if (!val_set.empty()) {
            log.val_miou.push_back(evaluate(model_, val_set).mean);
        } else {
            log.val_miou.push_back(std::nan(""));
        }
        verify_frozen();
        if (epoch_callback) epoch_callback(epoch, log);
    }
    return log;
}

void Trainer::restore(const LoadedCheckpoint& ckpt) {
    restore_parameters(model_, ckpt);
    const json meta = json::parse(ckpt.meta_json);
    if (meta.contains("next_epoch")) {
        start_epoch_ = meta.at("next_epoch").get<int>();
        adam_.import_state(ckpt.extra, meta.at("adam_step").get<long long>());
    }
    // Snapshot again: frozen values now come from the checkpoint.
    frozen_snapshot_.clear();
    for (const Parameter* p : model_.registry().items()) {
        if (p->frozen) frozen_snapshot_.push_back(p->value);
    }
}

void Trainer::save(const std::string& path, int next_epoch) const {
    std::map<std::string, Tensor> extra;
    adam_.export_state(extra);
    json meta;
    meta["next_epoch"] = next_epoch;
    meta["adam_step"] = adam_.step_count();
    save_checkpoint(path, model_, extra, meta.dump());
}

void write_train_log_csv(const std::string& path, const TrainLog& log) {
    std::ofstream os(path);
    os << "epoch,lr,loss,val_miou\n";
    for (size_t i = 0; i < log.loss.size(); ++i) {
        os << i << "," << log.lr[i] << "," << log.loss[i] << "," << log.val_miou[i] << "\n";
    }
    if (!os) throw std::runtime_error("write_train_log_csv: write failed: " + path);
}

void write_train_log_summary(const std::string& path, const TrainLog& log) {
    json j;
    j["epochs"] = log.loss.size();
    j["loss"] = log.loss;
    j["val_miou"] = log.val_miou;
    j["lr"] = log.lr;
    if (!log.loss.empty()) {
        j["final_loss"] = log.loss.back();
        j["final_val_miou"] = log.val_miou.back();
    }
    std::ofstream os(path);
    os << j.dump(2) << "\n";
    if (!os) throw std::runtime_error("write_train_log_summary: write failed: " + path);
}

}  // namespace gsam
