#pragma once

#include <array>
#include <string>
#include <vector>

#include "gsam/layers.hpp"

namespace gsam {

enum class AdapterBranch { Conv1x1, Conv3x3, DilatedR1, DilatedR2, DilatedR3 };

std::string branch_name(AdapterBranch b);

struct AdapterConfig {
    int embed_dim = 96;
    int bottleneck_dim = 12;
    std::vector<AdapterBranch> branch_set = {
        AdapterBranch::Conv1x1, AdapterBranch::Conv3x3,
        AdapterBranch::DilatedR1, AdapterBranch::DilatedR2, AdapterBranch::DilatedR3};
    std::array<int, 3> rates = {12, 24, 36};
    double scale = 1.0;
    std::string activation = "relu";

    void validate() const;
    bool has(AdapterBranch b) const;
    int rate_of(AdapterBranch b) const;   // dilation rate of a branch (1 for plain convs)
};

// Bottleneck adapter attached in parallel to a transformer block's FFN:
// down-projection, a bank of convolutional branches with growing receptive
// fields summed on top of the identity, activation, up-projection. An empty
// branch set degenerates to the plain FC-activation-FC adapter.
class Adapter {
public:
    Adapter() = default;
    Adapter(const AdapterConfig& config, std::mt19937_64& rng);

    struct Cache {
        Linear::Cache down_c, up_c;
        std::vector<Conv2d::Cache> branch_c;
        Tensor branch_sum;   // [B, bneck, Ht, Wt] pre-activation sum (identity included)
        Tensor act_in;
        int b = 0, ht = 0, wt = 0;
        long long macs = 0;
    };

    // tokens: [B, Ht, Wt, E] -> same shape; the caller adds this residually.
    Tensor forward(const Tensor& tokens, Cache* cache = nullptr) const;
    Tensor backward(const Cache& cache, const Tensor& dy);

    void collect(ParamRegistry& reg, const std::string& prefix);

    long long macs(int ht, int wt) const;
    long long param_count() const;

    AdapterConfig config;
    Linear down;                 // E -> bneck
    std::vector<Conv2d> branches;
    Linear up;                   // bneck -> E, zero init so the adapter starts silent
    Activation act = Activation::Relu;
};

struct AblationVariant {
    std::string key;            // CLI name, e.g. "no_dilated"
    std::string display_name;   // results-table name, e.g. "w/o ALL Dilated Convolutions"
    AdapterConfig config;
};

// The nine adapter configurations the ablation harness trains: the plain
// adapter, every single-branch removal, the two grouped removals, and the
// full five-branch adapter.
std::vector<AblationVariant> ablation_variants(const AdapterConfig& full);

const AblationVariant& find_variant(const std::vector<AblationVariant>& variants,
                                    const std::string& key);

}  // namespace gsam
