#pragma once

#include "gsam/layers.hpp"

namespace gsam {

// Positional Encoding Generator: a zero-initialized depthwise convolution over
// the token grid, added residually. Replaces a fixed-size learnable positional
// embedding so the grid can have any spatial extent.
class Peg {
public:
    Peg() = default;
    explicit Peg(int embed_dim, int kernel = 3);

    struct Cache {
        Conv2d::Cache conv;
        long long macs = 0;
    };

    // tokens: [B, Ht, Wt, E] -> same shape, any Ht/Wt >= 1
    Tensor forward(const Tensor& tokens, Cache* cache = nullptr) const;
    Tensor backward(const Cache& cache, const Tensor& dy);

    void collect(ParamRegistry& reg, const std::string& prefix) { dw.collect(reg, prefix + ".dw"); }

    int embed_dim() const { return dw.spec.in_channels; }
    long long macs(int ht, int wt) const { return dw.spec.macs(ht, wt); }
    long long param_count() const { return dw.spec.param_count(); }

    Conv2d dw;   // depthwise: groups == in == out == embed_dim
};

}  // namespace gsam
