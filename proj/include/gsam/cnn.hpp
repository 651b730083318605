#pragma once

#include <vector>

#include "gsam/layers.hpp"

namespace gsam {

struct CnnConfig {
    std::vector<int> stage_channels = {16, 32, 64};
    int tap_stage = 2;                  // which stage's output feeds the fusion
    int proj_dim = 96;                  // must equal the encoder embed_dim
    bool separate_projections = false;  // one shared 1x1 projection by default

    void validate() const;
    int cumulative_stride() const;      // total downsampling at the tap
};

// Small residual CNN whose tap-stage features get projected to the token
// embedding and added at the transformer's pre-input and post-output points.
class CnnEncoder {
public:
    CnnEncoder() = default;
    CnnEncoder(const CnnConfig& cfg, std::mt19937_64& rng);

    struct Stage {
        Conv2d down;       // stride-2 3x3
        ChannelNorm norm0;
        Conv2d conv1, conv2;
        ChannelNorm norm1, norm2;
    };

    struct StageCache {
        Conv2d::Cache down_c, conv1_c, conv2_c;
        ChannelNorm::Cache norm0_c, norm1_c, norm2_c;
        Tensor relu0_in, relu1_in, relu_out_in;
        int pre_trim_h = 0, pre_trim_w = 0;
        long long macs = 0;
    };

    struct Cache {
        std::vector<StageCache> stages;
        long long macs = 0;
    };

    struct FuseCache {
        Conv2d::Cache proj_c;
        int feat_h = 0, feat_w = 0;
        long long macs = 0;
    };

    // image: [B, 3, H, W] -> tap-stage feature map [B, C_tap, H/s, W/s]
    Tensor features(const Tensor& image, Cache* cache = nullptr) const;
    Tensor features_backward(const Cache& cache, const Tensor& dfeat);

    // Projects to proj_dim, resizes to the token grid and converts layout.
    // `which` selects the projection when separate_projections is on (0 = pre,
    // 1 = post); ignored otherwise.
    Tensor fuse(const Tensor& feat, int ht, int wt, int which = 0,
                FuseCache* cache = nullptr) const;
    // Returns dL/dfeat.
    Tensor fuse_backward(const FuseCache& cache, const Tensor& dgrid, int which = 0);

    void collect(ParamRegistry& reg, const std::string& prefix);

    CnnConfig config;
    std::vector<Stage> stages;      // built up to and including tap_stage
    std::vector<Conv2d> proj;       // 1 shared or 2 separate 1x1 projections
};

}  // namespace gsam
