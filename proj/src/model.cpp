#include "gsam/model.hpp"

#include <cstring>
#include <fstream>
#include <iostream>

#include "gsam/config.hpp"

namespace gsam {

void ModelConfig::validate() const {
    encoder.validate();
    cnn.validate();
    if (num_classes < 2) throw std::invalid_argument("ModelConfig: num_classes must be >= 2");
    if (decoder_channels.empty()) throw std::invalid_argument("ModelConfig: empty decoder");
    if (cnn.proj_dim != encoder.embed_dim) {
        throw std::invalid_argument("ModelConfig: cnn.proj_dim must equal encoder.embed_dim");
    }
}

namespace {

ConvSpec conv_spec(int in_c, int out_c, int kernel, int stride, int padding) {
    ConvSpec s;
    s.in_channels = in_c;
    s.out_channels = out_c;
    s.kernel = kernel;
    s.stride = stride;
    s.padding = padding;
    return s;
}

int round_up(int v, int multiple) { return ((v + multiple - 1) / multiple) * multiple; }

// Zero-pad bottom/right to the target dims.
Tensor pad_image(const Tensor& image, int pad_h, int pad_w) {
    if (image.dim(2) == pad_h && image.dim(3) == pad_w) return image;
    Tensor out({image.dim(0), image.dim(1), pad_h, pad_w});
    for (int b = 0; b < image.dim(0); ++b)
        for (int c = 0; c < image.dim(1); ++c)
            for (int h = 0; h < image.dim(2); ++h)
                for (int w = 0; w < image.dim(3); ++w)
                    out.at(b, c, h, w) = image.at(b, c, h, w);
    return out;
}

Tensor crop_map(const Tensor& x, int h, int w) {
    if (x.dim(2) == h && x.dim(3) == w) return x;
    Tensor out({x.dim(0), x.dim(1), h, w});
    for (int b = 0; b < x.dim(0); ++b)
        for (int c = 0; c < x.dim(1); ++c)
            for (int i = 0; i < h; ++i)
                for (int j = 0; j < w; ++j)
                    out.at(b, c, i, j) = x.at(b, c, i, j);
    return out;
}

Tensor uncrop_grad(const Tensor& dy, int pad_h, int pad_w) {
    if (dy.dim(2) == pad_h && dy.dim(3) == pad_w) return dy;
    Tensor out({dy.dim(0), dy.dim(1), pad_h, pad_w});
    for (int b = 0; b < dy.dim(0); ++b)
        for (int c = 0; c < dy.dim(1); ++c)
            for (int i = 0; i < dy.dim(2); ++i)
                for (int j = 0; j < dy.dim(3); ++j)
                    out.at(b, c, i, j) = dy.at(b, c, i, j);
    return out;
}

}  // namespace

GsamModel::GsamModel(const ModelConfig& cfg, uint64_t init_seed) : config_(cfg) {
    config_.validate();
    std::mt19937_64 rng(init_seed);
    cnn = CnnEncoder(config_.cnn, rng);
    encoder = ImageEncoder(config_.encoder, rng);

    int in_c = config_.encoder.embed_dim;
    for (int out_c : config_.decoder_channels) {
        DecoderStage st;
        st.conv = Conv2d(conv_spec(in_c, out_c, 3, 1, 1), rng);
        st.norm = ChannelNorm(out_c);
        decoder.push_back(std::move(st));
        in_c = out_c;
    }
    classifier = Conv2d(conv_spec(in_c, config_.num_classes, 1, 1, 0), rng);

    cnn.collect(registry_, "cnn");
    encoder.collect(registry_, "encoder");
    for (size_t i = 0; i < decoder.size(); ++i) {
        const std::string p = "decoder.stages." + std::to_string(i);
        decoder[i].conv.collect(registry_, p + ".conv");
        decoder[i].norm.collect(registry_, p + ".norm");
    }
    classifier.collect(registry_, "decoder.classifier");

    freeze_warnings_ = apply_freeze(registry_, config_.freeze);
    for (const std::string& pat : freeze_warnings_) {
        std::cerr << "[gsam] warning: freeze pattern '" << pat << "' matched no parameters\n";
    }
}

Tensor GsamModel::forward(const Tensor& image, Cache* cache) const {
    if (image.rank() != 4 || image.dim(1) != 3) {
        throw std::invalid_argument("GsamModel: image must be [B,3,H,W]");
    }
    const int p = config_.encoder.patch_size;
    if (image.dim(2) < p || image.dim(3) < p) {
        throw std::invalid_argument("GsamModel: image " + std::to_string(image.dim(2)) + "x" +
                                    std::to_string(image.dim(3)) + " smaller than patch_size " +
                                    std::to_string(p) + "; pad the input to at least one patch");
    }

    Cache local;
    Cache& c = cache ? *cache : local;
    c.orig_h = image.dim(2);
    c.orig_w = image.dim(3);
    c.pad_h = round_up(c.orig_h, p);
    c.pad_w = round_up(c.orig_w, p);

    const Tensor padded = pad_image(image, c.pad_h, c.pad_w);
    const int ht = c.pad_h / p, wt = c.pad_w / p;

    const Tensor feat = cnn.features(padded, &c.cnn_c);
    const Tensor pre = cnn.fuse(feat, ht, wt, 0, &c.fuse_pre_c);
    Tensor post_storage;
    const Tensor* post = &pre;
    if (config_.cnn.separate_projections) {
        post_storage = cnn.fuse(feat, ht, wt, 1, &c.fuse_post_c);
        post = &post_storage;
    }

    const Tensor tokens = encoder.encode(padded, &pre, post, &c.enc_c);

    Tensor x = tokens_to_feature(tokens);
    c.dec_c.resize(decoder.size());
    for (size_t i = 0; i < decoder.size(); ++i) {
        DecoderStageCache& dc = c.dec_c[i];
        x = decoder[i].norm.forward(decoder[i].conv.forward(x, &dc.conv_c), &dc.norm_c);
        x = act_forward(Activation::Relu, x, &dc.relu_in);
        dc.pre_up_h = x.dim(2);
        dc.pre_up_w = x.dim(3);
        x = bilinear_resize(x, 2 * x.dim(2), 2 * x.dim(3));
    }
    c.cls_h = x.dim(2);
    c.cls_w = x.dim(3);
    Tensor logits = classifier.forward(x, &c.cls_c);
    logits = bilinear_resize(logits, c.pad_h, c.pad_w);
    logits = crop_map(logits, c.orig_h, c.orig_w);

    c.macs = c.cnn_c.macs + c.fuse_pre_c.macs +
             (config_.cnn.separate_projections ? c.fuse_post_c.macs : 0) + c.enc_c.macs +
             c.cls_c.macs;
    for (const auto& dc : c.dec_c) c.macs += dc.conv_c.macs;

    if (!logits.all_finite()) throw std::runtime_error("GsamModel: non-finite logits");
    return logits;
}

void GsamModel::backward(const Cache& c, const Tensor& dlogits) {
    check_shape(dlogits, {dlogits.dim(0), config_.num_classes, c.orig_h, c.orig_w},
                "GsamModel::backward");

    Tensor d = uncrop_grad(dlogits, c.pad_h, c.pad_w);
    d = bilinear_resize_backward(d, c.cls_h, c.cls_w);
    d = classifier.backward(c.cls_c, d);
    for (size_t i = decoder.size(); i-- > 0;) {
        const DecoderStageCache& dc = c.dec_c[i];
        d = bilinear_resize_backward(d, dc.pre_up_h, dc.pre_up_w);
        d = act_backward(Activation::Relu, dc.relu_in, d);
        d = decoder[i].conv.backward(dc.conv_c, decoder[i].norm.backward(dc.norm_c, d));
    }

    ImageEncoder::Grads eg = encoder.backward(c.enc_c, feature_to_tokens(d));

    Tensor dfeat;
    if (config_.cnn.separate_projections) {
        dfeat = cnn.fuse_backward(c.fuse_pre_c, eg.pre, 0);
        dfeat.add_(cnn.fuse_backward(c.fuse_post_c, eg.post, 1));
    } else {
        Tensor dgrid = eg.pre;
        dgrid.add_(eg.post);
        dfeat = cnn.fuse_backward(c.fuse_pre_c, dgrid, 0);
    }
    cnn.features_backward(c.cnn_c, dfeat);
}

ParameterSummary GsamModel::parameter_summary() const {
    ParameterSummary s;
    s.total = registry_.total_count();
    s.learnable = registry_.learnable_count();
    s.frozen = registry_.frozen_count();
    return s;
}

// ---------------------------------------------------------------------------
// Analytical cost model. Walks the exact structure forward() executes, with
// dims derived arithmetically. MACs count multiplications only; bias adds,
// norms, activations, softmax, bilinear resizes and residual adds are 0.
// ---------------------------------------------------------------------------

CostReport GsamModel::cost_report(int h, int w) const {
    const int p = config_.encoder.patch_size;
    if (h < p || w < p) throw std::invalid_argument("cost_report: size smaller than patch_size");
    CostReport r;
    r.note = "MACs count multiplications only (one multiply-add = 1 MAC); "
             "bias adds, norms, activations, softmax, bilinear resizes and "
             "element-wise adds are counted as 0 MACs.";

    const auto add = [&r](const std::string& name, const std::string& kind,
                          std::vector<int> dims, long long macs, long long params) {
        r.entries.push_back({name, kind, std::move(dims), macs, params});
        r.total_macs += macs;
        r.total_params += params;
    };
    const auto conv_entry = [&](const std::string& name, const Conv2d& cv, int in_h, int in_w) {
        add(name, cv.spec.groups == cv.spec.in_channels && cv.spec.groups > 1 ? "depthwise_conv"
                                                                              : "conv",
            {cv.spec.in_channels, in_h, in_w}, cv.spec.macs(in_h, in_w), cv.spec.param_count());
    };
    const auto linear_entry = [&](const std::string& name, const Linear& ln, long long n) {
        add(name, "linear", {static_cast<int>(n), ln.in_dim()}, ln.macs(n), ln.param_count());
    };
    const auto norm_entry = [&](const std::string& name, long long params) {
        add(name, "norm", {}, 0, params);
    };

    const int pad_h = round_up(h, p), pad_w = round_up(w, p);

    // CNN encoder
    int ch = pad_h, cw = pad_w;
    for (size_t i = 0; i < cnn.stages.size(); ++i) {
        const std::string sp = "cnn.stages." + std::to_string(i);
        const CnnEncoder::Stage& st = cnn.stages[i];
        ch &= ~1;   // stage inputs are trimmed to even dims
        cw &= ~1;
        conv_entry(sp + ".down", st.down, ch, cw);
        ch = st.down.spec.out_dim(ch);
        cw = st.down.spec.out_dim(cw);
        norm_entry(sp + ".norm0", st.norm0.param_count());
        conv_entry(sp + ".conv1", st.conv1, ch, cw);
        norm_entry(sp + ".norm1", st.norm1.param_count());
        conv_entry(sp + ".conv2", st.conv2, ch, cw);
        norm_entry(sp + ".norm2", st.norm2.param_count());
    }
    for (size_t i = 0; i < cnn.proj.size(); ++i) {
        conv_entry("cnn.proj." + std::to_string(i), cnn.proj[i], ch, cw);
    }

    // Transformer encoder
    const int ht = pad_h / p, wt = pad_w / p;
    const long long n = static_cast<long long>(ht) * wt;
    conv_entry("encoder.patch_embed", encoder.patch_embed, pad_h, pad_w);
    if (config_.encoder.use_peg) conv_entry("encoder.peg.dw", encoder.peg.dw, ht, wt);
    for (size_t i = 0; i < encoder.blocks.size(); ++i) {
        const std::string bp = "encoder.blocks." + std::to_string(i);
        const TransformerBlock& blk = encoder.blocks[i];
        norm_entry(bp + ".ln1", blk.ln1.param_count());
        linear_entry(bp + ".attn.qkv", blk.attn.qkv, n);
        add(bp + ".attn.scores", "attn_scores", {static_cast<int>(n), blk.attn.embed_dim},
            blk.attn.score_macs(n), 0);
        linear_entry(bp + ".attn.out", blk.attn.out, n);
        norm_entry(bp + ".ln2", blk.ln2.param_count());
        linear_entry(bp + ".ffn.fc1", blk.fc1, n);
        linear_entry(bp + ".ffn.fc2", blk.fc2, n);
        const std::string ap = bp + ".adapter";
        linear_entry(ap + ".down", blk.adapter.down, n);
        for (size_t j = 0; j < blk.adapter.branches.size(); ++j) {
            conv_entry(ap + "." + branch_name(blk.adapter.config.branch_set[j]),
                       blk.adapter.branches[j], ht, wt);
        }
        linear_entry(ap + ".up", blk.adapter.up, n);
    }

    // Decoder
    int dh = ht, dw = wt;
    for (size_t i = 0; i < decoder.size(); ++i) {
        const std::string dp = "decoder.stages." + std::to_string(i);
        conv_entry(dp + ".conv", decoder[i].conv, dh, dw);
        norm_entry(dp + ".norm", decoder[i].norm.param_count());
        dh *= 2;
        dw *= 2;
    }
    conv_entry("decoder.classifier", classifier, dh, dw);
    return r;
}

// ---------------------------------------------------------------------------
// Checkpoint IO
// ---------------------------------------------------------------------------

namespace {

constexpr char kMagic[8] = {'G', 'S', 'A', 'M', 'C', 'K', 'P', '1'};

void write_u64(std::ostream& os, uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
    os.write(reinterpret_cast<const char*>(b), 8);
}

uint64_t read_u64(std::istream& is) {
    unsigned char b[8];
    is.read(reinterpret_cast<char*>(b), 8);
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(b[i]) << (8 * i);
    return v;
}

void write_string(std::ostream& os, const std::string& s) {
    write_u64(os, s.size());
    os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string read_string(std::istream& is) {
    const uint64_t len = read_u64(is);
    std::string s(len, '\0');
    is.read(s.data(), static_cast<std::streamsize>(len));
    return s;
}

void write_tensor(std::ostream& os, const std::string& name, const Tensor& t, bool frozen) {
    write_string(os, name);
    os.put(frozen ? 1 : 0);
    write_u64(os, t.shape().size());
    for (int d : t.shape()) write_u64(os, static_cast<uint64_t>(d));
    os.write(reinterpret_cast<const char*>(t.data()),
             static_cast<std::streamsize>(t.size() * sizeof(double)));
}

std::tuple<std::string, Tensor, bool> read_tensor(std::istream& is) {
    std::string name = read_string(is);
    const bool frozen = is.get() != 0;
    const uint64_t rank = read_u64(is);
    std::vector<int> shape(rank);
    for (uint64_t i = 0; i < rank; ++i) shape[i] = static_cast<int>(read_u64(is));
    Tensor t(shape);
    is.read(reinterpret_cast<char*>(t.data()),
            static_cast<std::streamsize>(t.size() * sizeof(double)));
    return {std::move(name), std::move(t), frozen};
}

}  // namespace

void save_checkpoint(const std::string& path, const GsamModel& model,
                     const std::map<std::string, Tensor>& extra, const std::string& meta_json) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open checkpoint for writing: " + path);
    os.write(kMagic, sizeof(kMagic));
    write_string(os, model_config_to_json(model.config()));
    write_string(os, meta_json);
    write_u64(os, model.registry().items().size());
    for (const Parameter* p : model.registry().items()) {
        write_tensor(os, p->name, p->value, p->frozen);
    }
    write_u64(os, extra.size());
    for (const auto& [name, t] : extra) write_tensor(os, name, t, false);
    if (!os) throw std::runtime_error("checkpoint write failed: " + path);
}

LoadedCheckpoint load_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open checkpoint: " + path);
    char magic[8];
    is.read(magic, 8);
    if (!is || std::memcmp(magic, kMagic, 8) != 0) {
        throw std::runtime_error("not a checkpoint file: " + path);
    }
    LoadedCheckpoint ckpt;
    ckpt.config_json = read_string(is);
    ckpt.meta_json = read_string(is);
    const uint64_t n_params = read_u64(is);
    for (uint64_t i = 0; i < n_params; ++i) {
        auto [name, t, frozen] = read_tensor(is);
        ckpt.frozen[name] = frozen;
        ckpt.params.emplace(std::move(name), std::move(t));
    }
    const uint64_t n_extra = read_u64(is);
    for (uint64_t i = 0; i < n_extra; ++i) {
        auto [name, t, frozen] = read_tensor(is);
        (void)frozen;
        ckpt.extra.emplace(std::move(name), std::move(t));
    }
    if (!is) throw std::runtime_error("truncated checkpoint: " + path);
    return ckpt;
}

void restore_parameters(GsamModel& model, const LoadedCheckpoint& ckpt) {
    for (Parameter* p : model.registry().items()) {
        const auto it = ckpt.params.find(p->name);
        if (it == ckpt.params.end()) {
            throw std::runtime_error("checkpoint missing parameter: " + p->name);
        }
        if (!it->second.same_shape(p->value)) {
            throw std::runtime_error("checkpoint shape mismatch for " + p->name);
        }
        p->value = it->second;
        p->frozen = ckpt.frozen.at(p->name);
    }
    if (ckpt.params.size() != model.registry().items().size()) {
        throw std::runtime_error("checkpoint has extra parameters");
    }
}

}  // namespace gsam
