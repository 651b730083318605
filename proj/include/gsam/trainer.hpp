#pragma once

#include <functional>
#include <string>
#include <vector>

#include "gsam/data.hpp"
#include "gsam/model.hpp"

namespace gsam {

struct TrainConfig {
    int epochs = 20;
    int batch_size = 8;
    double lr0 = 0.005;
    uint64_t seed = 0;
    std::string loss = "cross_entropy";
    AugmentConfig augment;

    void validate() const;
};

struct TrainLog {
    std::vector<double> loss;       // per epoch, mean over batches
    std::vector<double> val_miou;   // per epoch, NaN if no val set
    std::vector<double> lr;
};

// lr = lr0 * 0.5 * (1 + cos(pi * epoch / total))
double cosine_lr(int epoch, int total, double lr0);

// Adam over a registry; frozen parameters are never touched.
class Adam {
public:
    explicit Adam(ParamRegistry& registry, double beta1 = 0.9, double beta2 = 0.999,
                  double eps = 1e-8);

    void step(double lr);
    long long step_count() const { return t_; }

    // Slot access for checkpoint round trips.
    void export_state(std::map<std::string, Tensor>& out) const;
    void import_state(const std::map<std::string, Tensor>& in, long long step_count);

private:
    ParamRegistry& registry_;
    double beta1_, beta2_, eps_;
    long long t_ = 0;
    std::vector<Tensor> m_, v_;
};

// Mean per-pixel softmax cross-entropy; fills dlogits when given.
double cross_entropy_loss(const Tensor& logits, const std::vector<const LabelMask*>& labels,
                          Tensor* dlogits);

// Full-size evaluation: argmax logits vs ground truth over a sample set.
ConfusionMatrix::Iou evaluate(const GsamModel& model, const std::vector<Sample>& samples);
LabelMask predict_labels(const Tensor& logits, int batch_index);

// Optimization loop: random-crop batches, Adam with the cosine schedule,
// per-epoch full-size validation. Frozen tensors are snapshot at the start
// and verified bit-identical at every epoch (a violation throws). NaN loss
// aborts with epoch/batch/lr context. Deterministic given the seed.
class Trainer {
public:
    Trainer(GsamModel& model, const TrainConfig& cfg);

    // epoch_callback (optional) runs after each epoch, e.g. for logging.
    // run_until stops early (exclusive epoch) without altering the cosine
    // schedule's span — an interrupted run a later resume can finish.
    TrainLog train(const std::vector<Sample>& train_set, const std::vector<Sample>& val_set,
                   const std::function<void(int, const TrainLog&)>& epoch_callback = {},
                   int run_until = -1);

    // Resume support: continue from a loaded checkpoint's optimizer state.
    void restore(const LoadedCheckpoint& ckpt);
    int start_epoch() const { return start_epoch_; }
    // Parameters + optimizer slots + progress metadata in one archive.
    void save(const std::string& path, int next_epoch) const;

private:
    void verify_frozen() const;

    GsamModel& model_;
    TrainConfig cfg_;
    Adam adam_;
    std::vector<Tensor> frozen_snapshot_;
    int start_epoch_ = 0;
};

void write_train_log_csv(const std::string& path, const TrainLog& log);
void write_train_log_summary(const std::string& path, const TrainLog& log);

}  // namespace gsam
