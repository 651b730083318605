#include "gsam/cnn.hpp"

namespace gsam {

void CnnConfig::validate() const {
    if (stage_channels.empty()) throw std::invalid_argument("CnnConfig: no stages");
    for (int c : stage_channels) {
        if (c <= 0) throw std::invalid_argument("CnnConfig: non-positive stage channels");
    }
    if (tap_stage < 0 || tap_stage >= static_cast<int>(stage_channels.size())) {
        throw std::invalid_argument("CnnConfig: tap_stage out of range");
    }
    if (proj_dim <= 0) throw std::invalid_argument("CnnConfig: non-positive proj_dim");
}

int CnnConfig::cumulative_stride() const {
    int s = 1;
    for (int i = 0; i <= tap_stage; ++i) s *= 2;
    return s;
}

namespace {

ConvSpec conv3x3(int in_c, int out_c, int stride) {
    ConvSpec s;
    s.in_channels = in_c;
    s.out_channels = out_c;
    s.kernel = 3;
    s.stride = stride;
    s.padding = 1;
    return s;
}

ConvSpec conv1x1(int in_c, int out_c) {
    ConvSpec s;
    s.in_channels = in_c;
    s.out_channels = out_c;
    return s;
}

// Stride-2 k=3 p=1 convs round up on odd dims; trimming the trailing
// row/column first keeps every stage at exact floor(in/2), so the tap dims
// are H/stride and W/stride, floored.
Tensor trim_to_even(const Tensor& x) {
    const int h = x.dim(2) & ~1, w = x.dim(3) & ~1;
    if (h == x.dim(2) && w == x.dim(3)) return x;
    Tensor out({x.dim(0), x.dim(1), h, w});
    for (int b = 0; b < x.dim(0); ++b)
        for (int c = 0; c < x.dim(1); ++c)
            for (int i = 0; i < h; ++i)
                for (int j = 0; j < w; ++j) out.at(b, c, i, j) = x.at(b, c, i, j);
    return out;
}

Tensor untrim_grad(const Tensor& d, int h, int w) {
    if (d.dim(2) == h && d.dim(3) == w) return d;
    Tensor out({d.dim(0), d.dim(1), h, w});
    for (int b = 0; b < d.dim(0); ++b)
        for (int c = 0; c < d.dim(1); ++c)
            for (int i = 0; i < d.dim(2); ++i)
                for (int j = 0; j < d.dim(3); ++j) out.at(b, c, i, j) = d.at(b, c, i, j);
    return out;
}

}  // namespace

CnnEncoder::CnnEncoder(const CnnConfig& cfg, std::mt19937_64& rng) : config(cfg) {
    config.validate();
    int in_c = 3;
    for (int i = 0; i <= config.tap_stage; ++i) {
        const int out_c = config.stage_channels[static_cast<size_t>(i)];
        Stage st;
        st.down = Conv2d(conv3x3(in_c, out_c, 2), rng);
        st.norm0 = ChannelNorm(out_c);
        st.conv1 = Conv2d(conv3x3(out_c, out_c, 1), rng);
        st.norm1 = ChannelNorm(out_c);
        st.conv2 = Conv2d(conv3x3(out_c, out_c, 1), rng);
        st.norm2 = ChannelNorm(out_c);
        stages.push_back(std::move(st));
        in_c = out_c;
    }
    // Like PEG and the adapter up-projection, the fusion path starts silent:
    // zero projections keep the pretrained-style token stream intact until
    // training decides how much CNN signal to mix in.
    const int n_proj = config.separate_projections ? 2 : 1;
    for (int i = 0; i < n_proj; ++i) {
        proj.emplace_back(conv1x1(in_c, config.proj_dim));
    }
}

Tensor CnnEncoder::features(const Tensor& image, Cache* cache) const {
    if (image.rank() != 4 || image.dim(1) != 3) {
        throw std::invalid_argument("CnnEncoder: image must be [B,3,H,W]");
    }
    const int stride = config.cumulative_stride();
    if (image.dim(2) < stride || image.dim(3) < stride) {
        throw std::invalid_argument("CnnEncoder: image " + std::to_string(image.dim(2)) + "x" +
                                    std::to_string(image.dim(3)) + " smaller than cumulative stride " +
                                    std::to_string(stride));
    }
    Cache local;
    Cache& c = cache ? *cache : local;
    c.stages.resize(stages.size());
    c.macs = 0;

    Tensor x = image;
    for (size_t i = 0; i < stages.size(); ++i) {
        const Stage& st = stages[i];
        StageCache& sc = c.stages[i];
        sc.pre_trim_h = x.dim(2);
        sc.pre_trim_w = x.dim(3);
        x = trim_to_even(x);
        Tensor d = st.norm0.forward(st.down.forward(x, &sc.down_c), &sc.norm0_c);
        d = act_forward(Activation::Relu, d, &sc.relu0_in);
        // residual pair of 3x3 convs
        Tensor h = st.norm1.forward(st.conv1.forward(d, &sc.conv1_c), &sc.norm1_c);
        h = act_forward(Activation::Relu, h, &sc.relu1_in);
        h = st.norm2.forward(st.conv2.forward(h, &sc.conv2_c), &sc.norm2_c);
        h.add_(d);
        x = act_forward(Activation::Relu, h, &sc.relu_out_in);
        sc.macs = sc.down_c.macs + sc.conv1_c.macs + sc.conv2_c.macs;
        c.macs += sc.macs;
    }
    return x;
}

Tensor CnnEncoder::features_backward(const Cache& c, const Tensor& dfeat) {
    Tensor d = dfeat;
    for (size_t i = stages.size(); i-- > 0;) {
        Stage& st = stages[i];
        const StageCache& sc = c.stages[i];
        Tensor dh = act_backward(Activation::Relu, sc.relu_out_in, d);
        Tensor dd = dh;   // residual skip
        Tensor t = st.conv2.backward(sc.conv2_c, st.norm2.backward(sc.norm2_c, dh));
        t = act_backward(Activation::Relu, sc.relu1_in, t);
        t = st.conv1.backward(sc.conv1_c, st.norm1.backward(sc.norm1_c, t));
        dd.add_(t);
        dd = act_backward(Activation::Relu, sc.relu0_in, dd);
        d = st.down.backward(sc.down_c, st.norm0.backward(sc.norm0_c, dd));
        d = untrim_grad(d, sc.pre_trim_h, sc.pre_trim_w);
    }
    return d;
}

Tensor CnnEncoder::fuse(const Tensor& feat, int ht, int wt, int which, FuseCache* cache) const {
    const Conv2d& p = proj[config.separate_projections ? static_cast<size_t>(which) : 0];
    FuseCache local;
    FuseCache& c = cache ? *cache : local;
    c.feat_h = feat.dim(2);
    c.feat_w = feat.dim(3);
    Tensor projected = p.forward(feat, &c.proj_c);
    Tensor resized = bilinear_resize(projected, ht, wt);
    c.macs = c.proj_c.macs;
    return feature_to_tokens(resized);
}

Tensor CnnEncoder::fuse_backward(const FuseCache& c, const Tensor& dgrid, int which) {
    Conv2d& p = proj[config.separate_projections ? static_cast<size_t>(which) : 0];
    Tensor dresized = tokens_to_feature(dgrid);
    Tensor dprojected = bilinear_resize_backward(dresized, c.feat_h, c.feat_w);
    return p.backward(c.proj_c, dprojected);
}

void CnnEncoder::collect(ParamRegistry& reg, const std::string& prefix) {
    for (size_t i = 0; i < stages.size(); ++i) {
        const std::string sp = prefix + ".stages." + std::to_string(i);
        stages[i].down.collect(reg, sp + ".down");
        stages[i].norm0.collect(reg, sp + ".norm0");
        stages[i].conv1.collect(reg, sp + ".conv1");
        stages[i].norm1.collect(reg, sp + ".norm1");
        stages[i].conv2.collect(reg, sp + ".conv2");
        stages[i].norm2.collect(reg, sp + ".norm2");
    }
    for (size_t i = 0; i < proj.size(); ++i) {
        proj[i].collect(reg, prefix + ".proj." + std::to_string(i));
    }
}

}  // namespace gsam
