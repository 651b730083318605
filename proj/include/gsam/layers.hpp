#pragma once

#include <random>
#include <string>
#include <vector>

#include "gsam/param.hpp"
#include "gsam/tensor.hpp"

namespace gsam {

// ---------------------------------------------------------------------------
// Convolution
// ---------------------------------------------------------------------------

struct ConvSpec {
    int in_channels = 1;
    int out_channels = 1;
    int kernel = 1;       // square kernels only
    int stride = 1;
    int dilation_rate = 1;
    int groups = 1;
    int padding = 0;      // pixels per side

    void validate() const;

    // Kernel footprint once dilation spreads the taps apart.
    int effective_kernel() const { return kernel + (kernel - 1) * (dilation_rate - 1); }
    int out_dim(int in) const { return (in + 2 * padding - effective_kernel()) / stride + 1; }

    // "Same" padding for odd kernels: output spatial dims equal input dims at stride 1.
    static int same_padding(int kernel, int dilation_rate) {
        return dilation_rate * (kernel - 1) / 2;
    }

    long long macs(int in_h, int in_w) const;   // per input item (batch of 1)
    long long param_count(bool with_bias = true) const;
};

class Conv2d {
public:
    Conv2d() = default;
    Conv2d(ConvSpec spec, std::mt19937_64& rng);           // He init, zero bias
    Conv2d(ConvSpec spec);                                 // zero init (weights and bias)

    struct Cache {
        std::vector<int> in_shape;
        std::vector<Tensor> cols;   // one [inCg*k*k, outH*outW] matrix per (batch, group)
        long long macs = 0;
    };

    // x: [B, inC, H, W] -> [B, outC, H', W']
    Tensor forward(const Tensor& x, Cache* cache = nullptr) const;
    // Accumulates weight/bias grads, returns dL/dx.
    Tensor backward(const Cache& cache, const Tensor& dy);

    void collect(ParamRegistry& reg, const std::string& prefix);

    ConvSpec spec;
    Parameter weight;   // [outC, inC/groups, k, k]
    Parameter bias;     // [outC]
};

// ---------------------------------------------------------------------------
// Linear (applied row-wise over token matrices)
// ---------------------------------------------------------------------------

class Linear {
public:
    Linear() = default;
    Linear(int in_dim, int out_dim, std::mt19937_64& rng, double stddev);
    Linear(int in_dim, int out_dim);   // zero init

    struct Cache {
        Tensor input;   // [N, in]
        long long macs = 0;
    };

    // x: [N, in] -> [N, out]
    Tensor forward(const Tensor& x, Cache* cache = nullptr) const;
    Tensor backward(const Cache& cache, const Tensor& dy);

    void collect(ParamRegistry& reg, const std::string& prefix);

    long long macs(long long n_rows) const;
    long long param_count() const { return weight.value.size() + bias.value.size(); }

    int in_dim() const { return weight.value.dim(1); }
    int out_dim() const { return weight.value.dim(0); }

    Parameter weight;   // [out, in]
    Parameter bias;     // [out]
};

// ---------------------------------------------------------------------------
// LayerNorm over the last dimension of an [N, C] matrix
// ---------------------------------------------------------------------------

class LayerNorm {
public:
    LayerNorm() = default;
    explicit LayerNorm(int dim);

    struct Cache {
        Tensor xhat;      // [N, C]
        Tensor inv_std;   // [N]
    };

    Tensor forward(const Tensor& x, Cache* cache = nullptr) const;
    Tensor backward(const Cache& cache, const Tensor& dy);

    void collect(ParamRegistry& reg, const std::string& prefix);

    int dim() const { return gamma.value.dim(0); }
    long long param_count() const { return gamma.value.size() + beta.value.size(); }

    Parameter gamma;
    Parameter beta;
    double eps = 1e-5;
};

// Same normalization applied across channels of a [B, C, H, W] map,
// independently at every spatial position. Batch-free, so train and eval
// behave identically.
class ChannelNorm {
public:
    ChannelNorm() = default;
    explicit ChannelNorm(int channels) : ln(channels) {}

    struct Cache {
        LayerNorm::Cache ln;
        std::vector<int> in_shape;
    };

    Tensor forward(const Tensor& x, Cache* cache = nullptr) const;
    Tensor backward(const Cache& cache, const Tensor& dy);

    void collect(ParamRegistry& reg, const std::string& prefix) { ln.collect(reg, prefix); }
    long long param_count() const { return ln.param_count(); }

    LayerNorm ln;
};

// ---------------------------------------------------------------------------
// Activations
// ---------------------------------------------------------------------------

enum class Activation { Relu, Gelu };

Activation activation_from_name(const std::string& name);
std::string activation_name(Activation a);

Tensor act_forward(Activation a, const Tensor& x, Tensor* cache_input = nullptr);
Tensor act_backward(Activation a, const Tensor& cached_input, const Tensor& dy);

// ---------------------------------------------------------------------------
// Multi-head self-attention over a token grid
// ---------------------------------------------------------------------------

class MultiHeadAttention {
public:
    MultiHeadAttention() = default;
    MultiHeadAttention(int embed_dim, int num_heads, std::mt19937_64& rng);

    struct Cache {
        Linear::Cache qkv_c, out_c;
        Tensor qkv;    // [B*N, 3E]
        Tensor attn;   // [B, heads, N, N] softmax rows
        Tensor ctx;    // [B*N, E]
        int b = 0, n = 0;
        long long macs = 0;
    };

    // tokens: [B, Ht, Wt, E] -> same shape, for any grid size
    Tensor forward(const Tensor& tokens, Cache* cache = nullptr) const;
    Tensor backward(const Cache& cache, const Tensor& dy);

    void collect(ParamRegistry& reg, const std::string& prefix);

    // MAC split used by the cost model: projections scale with N, score/value
    // products scale with N^2.
    long long proj_macs(long long n_tokens) const;
    long long score_macs(long long n_tokens) const;
    long long param_count() const { return qkv.param_count() + out.param_count(); }

    int embed_dim = 0;
    int num_heads = 0;
    Linear qkv;   // E -> 3E
    Linear out;   // E -> E
};

// ---------------------------------------------------------------------------
// Bilinear resize (no parameters, counted as 0 MACs by the cost model)
// ---------------------------------------------------------------------------

// x: [B, C, H, W] -> [B, C, out_h, out_w]. Half-pixel mapping with edge
// clamping; preserves constant fields exactly and never leaves [min, max]
// of the input.
Tensor bilinear_resize(const Tensor& x, int out_h, int out_w);
// Transpose of the forward interpolation.
Tensor bilinear_resize_backward(const Tensor& dy, int in_h, int in_w);

// Row-wise softmax of an [N, M] matrix (numerically stabilized).
void softmax_rows(Tensor& m);

}  // namespace gsam
