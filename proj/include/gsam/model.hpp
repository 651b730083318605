#pragma once

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "gsam/cnn.hpp"
#include "gsam/encoder.hpp"

namespace gsam {

struct ModelConfig {
    EncoderConfig encoder;
    CnnConfig cnn;
    int num_classes = 2;
    std::vector<int> decoder_channels = {64, 48, 32};
    FreezePolicy freeze = default_freeze_policy();

    void validate() const;
};

struct ParameterSummary {
    long long total = 0;
    long long learnable = 0;
    long long frozen = 0;
};

// One line of the analytical cost model.
struct CostEntry {
    std::string name;
    std::string kind;            // conv | depthwise_conv | linear | norm | attn_scores
    std::vector<int> input_dims;
    long long macs = 0;
    long long params = 0;
};

struct CostReport {
    std::vector<CostEntry> entries;
    long long total_macs = 0;
    long long total_params = 0;
    // Counting convention, echoed into every serialized report.
    std::string note;
};

// Full assembly: pad to patch multiples, CNN features fused into the
// transformer's pre/post token grids, encoder with PEG + adapters, dense
// decoder, crop back to the original dims.
class GsamModel {
public:
    GsamModel(const ModelConfig& cfg, uint64_t init_seed);
    GsamModel(const GsamModel&) = delete;
    GsamModel& operator=(const GsamModel&) = delete;

    struct DecoderStage {
        Conv2d conv;
        ChannelNorm norm;
    };

    struct DecoderStageCache {
        Conv2d::Cache conv_c;
        ChannelNorm::Cache norm_c;
        Tensor relu_in;
        int pre_up_h = 0, pre_up_w = 0;
    };

    struct Cache {
        int orig_h = 0, orig_w = 0;
        int pad_h = 0, pad_w = 0;
        CnnEncoder::Cache cnn_c;
        CnnEncoder::FuseCache fuse_pre_c, fuse_post_c;
        ImageEncoder::Cache enc_c;
        std::vector<DecoderStageCache> dec_c;
        Conv2d::Cache cls_c;
        int cls_h = 0, cls_w = 0;
        long long macs = 0;
    };

    // image: [B, 3, H, W], H and W >= patch_size (any aspect ratio).
    // Returns logits [B, num_classes, H, W] — spatial dims match the input
    // exactly, padding is internal.
    Tensor forward(const Tensor& image, Cache* cache = nullptr) const;
    // Accumulates parameter gradients; image gradients are discarded.
    void backward(const Cache& cache, const Tensor& dlogits);

    ParameterSummary parameter_summary() const;
    CostReport cost_report(int h, int w) const;

    ParamRegistry& registry() { return registry_; }
    const ParamRegistry& registry() const { return registry_; }
    const ModelConfig& config() const { return config_; }
    // Freeze patterns that matched nothing at construction.
    const std::vector<std::string>& freeze_warnings() const { return freeze_warnings_; }

    ModelConfig config_;
    CnnEncoder cnn;
    ImageEncoder encoder;
    std::vector<DecoderStage> decoder;
    Conv2d classifier;

private:
    ParamRegistry registry_;
    std::vector<std::string> freeze_warnings_;
};

// ---------------------------------------------------------------------------
// Checkpoints: single binary archive holding the config (canonical JSON),
// the named parameter tensors with frozen flags, and optional extra tensors
// (optimizer slots) plus a metadata JSON blob. Round-trips bit-exactly.
// ---------------------------------------------------------------------------

struct LoadedCheckpoint {
    std::string config_json;
    std::map<std::string, Tensor> params;
    std::map<std::string, bool> frozen;
    std::map<std::string, Tensor> extra;
    std::string meta_json;
};

void save_checkpoint(const std::string& path, const GsamModel& model,
                     const std::map<std::string, Tensor>& extra = {},
                     const std::string& meta_json = "{}");
LoadedCheckpoint load_checkpoint(const std::string& path);
// Copies loaded tensors and frozen flags into a freshly built model; throws
// on any name or shape mismatch.
void restore_parameters(GsamModel& model, const LoadedCheckpoint& ckpt);

}  // namespace gsam
