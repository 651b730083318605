#include "gsam/encoder.hpp"

#include <cmath>

namespace gsam {

void EncoderConfig::validate() const {
    if (patch_size < 1 || embed_dim <= 0 || depth <= 0 || num_heads <= 0) {
        throw std::invalid_argument("EncoderConfig: non-positive field");
    }
    if (embed_dim % num_heads != 0) {
        throw std::invalid_argument("EncoderConfig: embed_dim not divisible by num_heads");
    }
    AdapterConfig a = adapter;
    a.embed_dim = embed_dim;
    a.validate();
}

// ---------------------------------------------------------------------------
// TransformerBlock
// ---------------------------------------------------------------------------

TransformerBlock::TransformerBlock(const EncoderConfig& cfg, std::mt19937_64& rng)
    : embed_dim(cfg.embed_dim) {
    ln1 = LayerNorm(cfg.embed_dim);
    ln2 = LayerNorm(cfg.embed_dim);
    attn = MultiHeadAttention(cfg.embed_dim, cfg.num_heads, rng);
    const int hidden = 4 * cfg.embed_dim;
    const double stddev = 0.02;
    fc1 = Linear(cfg.embed_dim, hidden, rng, stddev);
    fc2 = Linear(hidden, cfg.embed_dim, rng, stddev);
    AdapterConfig acfg = cfg.adapter;
    acfg.embed_dim = cfg.embed_dim;
    adapter = Adapter(acfg, rng);
}

Tensor TransformerBlock::forward(const Tensor& tokens, Cache* cache) const {
    const int b = tokens.dim(0), ht = tokens.dim(1), wt = tokens.dim(2);
    const int n = b * ht * wt;

    Cache local;
    Cache& c = cache ? *cache : local;
    c.b = b;
    c.ht = ht;
    c.wt = wt;

    // Attention sub-block.
    Tensor flat = tokens.reshaped({n, embed_dim});
    Tensor normed = ln1.forward(flat, &c.ln1_c);
    Tensor attn_out = attn.forward(normed.reshaped({b, ht, wt, embed_dim}), &c.attn_c);
    Tensor a = tokens;
    a.add_(attn_out);

    // FFN sub-block with the adapter in parallel.
    Tensor a_flat = a.reshaped({n, embed_dim});
    Tensor normed2 = ln2.forward(a_flat, &c.ln2_c);
    Tensor h = fc1.forward(normed2, &c.fc1_c);
    Tensor g = act_forward(Activation::Gelu, h, &c.gelu_in);
    Tensor ffn = fc2.forward(g, &c.fc2_c);
    Tensor adapter_out = adapter.forward(a, &c.adapter_c);

    Tensor y = a;
    y.add_(ffn.reshaped({b, ht, wt, embed_dim}));
    y.add_(adapter_out);

    c.macs = c.attn_c.macs + c.fc1_c.macs + c.fc2_c.macs + c.adapter_c.macs;
    return y;
}

Tensor TransformerBlock::backward(const Cache& c, const Tensor& dy) {
    const int b = c.b, ht = c.ht, wt = c.wt;
    const int n = b * ht * wt;

    // y = a + ffn(a) + adapter(a)
    Tensor da = dy;
    Tensor dffn_flat = dy.reshaped({n, embed_dim});
    Tensor dg = fc2.backward(c.fc2_c, dffn_flat);
    Tensor dh = act_backward(Activation::Gelu, c.gelu_in, dg);
    Tensor dnormed2 = fc1.backward(c.fc1_c, dh);
    Tensor da_ffn = ln2.backward(c.ln2_c, dnormed2);
    da.add_(da_ffn.reshaped({b, ht, wt, embed_dim}));
    da.add_(adapter.backward(c.adapter_c, dy));

    // a = x + attn(ln1(x))
    Tensor dx = da;
    Tensor dattn_in = attn.backward(c.attn_c, da);
    Tensor dnormed = dattn_in.reshaped({n, embed_dim});
    Tensor dx_attn = ln1.backward(c.ln1_c, dnormed);
    dx.add_(dx_attn.reshaped({b, ht, wt, embed_dim}));
    return dx;
}

void TransformerBlock::collect(ParamRegistry& reg, const std::string& prefix) {
    ln1.collect(reg, prefix + ".ln1");
    attn.collect(reg, prefix + ".attn");
    ln2.collect(reg, prefix + ".ln2");
    fc1.collect(reg, prefix + ".ffn.fc1");
    fc2.collect(reg, prefix + ".ffn.fc2");
    adapter.collect(reg, prefix + ".adapter");
}

long long TransformerBlock::macs(int ht, int wt) const {
    const long long n = static_cast<long long>(ht) * wt;
    return attn.proj_macs(n) + attn.score_macs(n) + fc1.macs(n) + fc2.macs(n) +
           adapter.macs(ht, wt);
}

long long TransformerBlock::base_param_count() const {
    return attn.param_count() + fc1.param_count() + fc2.param_count();
}

// ---------------------------------------------------------------------------
// ImageEncoder
// ---------------------------------------------------------------------------

ImageEncoder::ImageEncoder(const EncoderConfig& cfg, std::mt19937_64& rng) : config(cfg) {
    config.validate();
    ConvSpec spec;
    spec.in_channels = 3;
    spec.out_channels = cfg.embed_dim;
    spec.kernel = cfg.patch_size;
    spec.stride = cfg.patch_size;
    patch_embed = Conv2d(spec, rng);
    peg = Peg(cfg.embed_dim);
    blocks.reserve(static_cast<size_t>(cfg.depth));
    for (int i = 0; i < cfg.depth; ++i) blocks.emplace_back(cfg, rng);
}

Tensor ImageEncoder::encode(const Tensor& image, const Tensor* injected_pre,
                            const Tensor* injected_post, Cache* cache) const {
    if (image.rank() != 4 || image.dim(1) != 3) {
        throw std::invalid_argument("ImageEncoder: image must be [B,3,H,W]");
    }
    if (image.dim(2) % config.patch_size != 0 || image.dim(3) % config.patch_size != 0) {
        throw std::invalid_argument("ImageEncoder: image dims " + std::to_string(image.dim(2)) +
                                    "x" + std::to_string(image.dim(3)) +
                                    " not divisible by patch_size " +
                                    std::to_string(config.patch_size) +
                                    " (the model pads before encoding)");
    }
    const int b = image.dim(0);
    const int ht = image.dim(2) / config.patch_size;
    const int wt = image.dim(3) / config.patch_size;
    const std::vector<int> grid_shape = {b, ht, wt, config.embed_dim};

    Cache local;
    Cache& c = cache ? *cache : local;
    c.block_c.resize(blocks.size());
    c.had_pre = injected_pre != nullptr;
    c.had_post = injected_post != nullptr;

    Tensor tokens = feature_to_tokens(patch_embed.forward(image, &c.patch_c));
    if (injected_pre) {
        check_shape(*injected_pre, grid_shape, "ImageEncoder: injected_pre");
        tokens.add_(*injected_pre);
    }
    if (config.use_peg) tokens = peg.forward(tokens, &c.peg_c);
    for (size_t i = 0; i < blocks.size(); ++i) {
        tokens = blocks[i].forward(tokens, &c.block_c[i]);
    }
    if (injected_post) {
        check_shape(*injected_post, grid_shape, "ImageEncoder: injected_post");
        tokens.add_(*injected_post);
    }

    c.macs = c.patch_c.macs + (config.use_peg ? c.peg_c.macs : 0);
    for (const auto& bc : c.block_c) c.macs += bc.macs;
    return tokens;
}

ImageEncoder::Grads ImageEncoder::backward(const Cache& c, const Tensor& dy) {
    Grads g;
    Tensor d = dy;
    if (c.had_post) g.post = d;   // post-injection is a plain add
    for (size_t i = blocks.size(); i-- > 0;) {
        d = blocks[i].backward(c.block_c[i], d);
    }
    if (config.use_peg) d = peg.backward(c.peg_c, d);
    if (c.had_pre) g.pre = d;
    g.image = patch_embed.backward(c.patch_c, tokens_to_feature(d));
    return g;
}

void ImageEncoder::collect(ParamRegistry& reg, const std::string& prefix) {
    patch_embed.collect(reg, prefix + ".patch_embed");
    peg.collect(reg, prefix + ".peg");
    for (size_t i = 0; i < blocks.size(); ++i) {
        blocks[i].collect(reg, prefix + ".blocks." + std::to_string(i));
    }
}

FreezePolicy default_freeze_policy() {
    return FreezePolicy{{"encoder.blocks.*.attn.*", "encoder.blocks.*.ffn.*"}};
}

}  // namespace gsam
