#pragma once

#include <optional>

#include "gsam/adapter.hpp"
#include "gsam/layers.hpp"
#include "gsam/peg.hpp"

namespace gsam {

struct EncoderConfig {
    int patch_size = 16;
    int embed_dim = 96;
    int depth = 4;
    int num_heads = 4;
    AdapterConfig adapter;
    bool use_peg = true;

    void validate() const;
};

// Pre-norm transformer block. The adapter taps the attention output (the same
// tensor the FFN branch normalizes) and its contribution is added next to the
// FFN residual.
class TransformerBlock {
public:
    TransformerBlock() = default;
    TransformerBlock(const EncoderConfig& cfg, std::mt19937_64& rng);

    struct Cache {
        LayerNorm::Cache ln1_c, ln2_c;
        MultiHeadAttention::Cache attn_c;
        Linear::Cache fc1_c, fc2_c;
        Tensor gelu_in;
        Adapter::Cache adapter_c;
        int b = 0, ht = 0, wt = 0;
        long long macs = 0;
    };

    Tensor forward(const Tensor& tokens, Cache* cache = nullptr) const;
    Tensor backward(const Cache& cache, const Tensor& dy);

    void collect(ParamRegistry& reg, const std::string& prefix);

    long long macs(int ht, int wt) const;
    // Base transformer parameters only (attention + FFN); adapter and norms
    // excluded. This is the set the default policy freezes.
    long long base_param_count() const;

    LayerNorm ln1, ln2;
    MultiHeadAttention attn;
    Linear fc1, fc2;   // FFN with 4x expansion, GELU between
    Adapter adapter;
    int embed_dim = 0;
};

// Patch embedding -> PEG -> depth transformer blocks. Token grid dims follow
// the input dims, so the same weights serve any image whose sides are
// multiples of patch_size.
class ImageEncoder {
public:
    ImageEncoder() = default;
    ImageEncoder(const EncoderConfig& cfg, std::mt19937_64& rng);

    struct Cache {
        Conv2d::Cache patch_c;
        Peg::Cache peg_c;
        std::vector<TransformerBlock::Cache> block_c;
        bool had_pre = false, had_post = false;
        long long macs = 0;
    };

    // image: [B, 3, H, W] with H, W divisible by patch_size (the model pads).
    // injected_pre/post: optional [B, H/p, W/p, E] grids added before PEG and
    // after the last block.
    Tensor encode(const Tensor& image, const Tensor* injected_pre = nullptr,
                  const Tensor* injected_post = nullptr, Cache* cache = nullptr) const;

    struct Grads {
        Tensor image;   // dL/dimage
        Tensor pre;     // dL/d(injected_pre), empty if absent
        Tensor post;    // dL/d(injected_post), empty if absent
    };
    Grads backward(const Cache& cache, const Tensor& dy);

    void collect(ParamRegistry& reg, const std::string& prefix);

    EncoderConfig config;
    Conv2d patch_embed;
    Peg peg;
    std::vector<TransformerBlock> blocks;
};

// Default freezing: the base transformer weights (attention and FFN
// projections) stay fixed; norms, patch embedding, PEG and adapters train.
FreezePolicy default_freeze_policy();

}  // namespace gsam
