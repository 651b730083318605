#include "gsam/gradcheck_suite.hpp"

#include <algorithm>

#include "gsam/model.hpp"

namespace gsam {

namespace {

Tensor random_tensor(std::vector<int> shape, std::mt19937_64& rng, double scale = 1.0) {
    Tensor t(std::move(shape));
    std::normal_distribution<double> dist(0.0, scale);
    for (long long i = 0; i < t.size(); ++i) t[i] = dist(rng);
    return t;
}

struct ConvFn : DiffFn {
    explicit ConvFn(Conv2d layer) : conv(std::move(layer)) {}
    Tensor forward(const Tensor& x) override { return conv.forward(x); }
    void forward_backward(const Tensor& x) override {
        Conv2d::Cache cache;
        const Tensor y = conv.forward(x, &cache);
        dx = conv.backward(cache, Tensor::full(y.shape(), 1.0));
    }
    std::vector<Parameter*> params() override { return {&conv.weight, &conv.bias}; }
    const Tensor* input_grad() const override { return &dx; }
    Conv2d conv;
    Tensor dx;
};

struct LinearFn : DiffFn {
    explicit LinearFn(Linear layer) : lin(std::move(layer)) {}
    Tensor forward(const Tensor& x) override { return lin.forward(x); }
    void forward_backward(const Tensor& x) override {
        Linear::Cache cache;
        const Tensor y = lin.forward(x, &cache);
        dx = lin.backward(cache, Tensor::full(y.shape(), 1.0));
    }
    std::vector<Parameter*> params() override { return {&lin.weight, &lin.bias}; }
    const Tensor* input_grad() const override { return &dx; }
    Linear lin;
    Tensor dx;
};

struct LayerNormFn : DiffFn {
    explicit LayerNormFn(int dim) : ln(dim) {}
    Tensor forward(const Tensor& x) override { return weighted(ln.forward(x)); }
    void forward_backward(const Tensor& x) override {
        LayerNorm::Cache cache;
        const Tensor y = ln.forward(x, &cache);
        Tensor dy(y.shape());
        for (long long i = 0; i < dy.size(); ++i) dy[i] = weight(i);
        dx = ln.backward(cache, dy);
    }
    std::vector<Parameter*> params() override { return {&ln.gamma, &ln.beta}; }
    const Tensor* input_grad() const override { return &dx; }

    // A plain sum has zero gradient through the normalized part (it is
    // mean-free), which would vacuously pass; weight the outputs instead.
    static double weight(long long i) { return 0.25 + 0.1 * static_cast<double>(i % 7); }
    static Tensor weighted(Tensor y) {
        for (long long i = 0; i < y.size(); ++i) y[i] *= weight(i);
        return y;
    }
    LayerNorm ln;
    Tensor dx;
};

struct ChannelNormFn : DiffFn {
    explicit ChannelNormFn(int channels) : cn(channels) {}
    Tensor forward(const Tensor& x) override { return LayerNormFn::weighted(cn.forward(x)); }
    void forward_backward(const Tensor& x) override {
        ChannelNorm::Cache cache;
        const Tensor y = cn.forward(x, &cache);
        Tensor dy(y.shape());
        for (long long i = 0; i < dy.size(); ++i) dy[i] = LayerNormFn::weight(i);
        dx = cn.backward(cache, dy);
    }
    std::vector<Parameter*> params() override { return {&cn.ln.gamma, &cn.ln.beta}; }
    const Tensor* input_grad() const override { return &dx; }
    ChannelNorm cn;
    Tensor dx;
};

struct AttentionFn : DiffFn {
    explicit AttentionFn(MultiHeadAttention layer) : attn(std::move(layer)) {}
    Tensor forward(const Tensor& x) override { return attn.forward(x); }
    void forward_backward(const Tensor& x) override {
        MultiHeadAttention::Cache cache;
        const Tensor y = attn.forward(x, &cache);
        dx = attn.backward(cache, Tensor::full(y.shape(), 1.0));
    }
    std::vector<Parameter*> params() override {
        return {&attn.qkv.weight, &attn.qkv.bias, &attn.out.weight, &attn.out.bias};
    }
    const Tensor* input_grad() const override { return &dx; }
    MultiHeadAttention attn;
    Tensor dx;
};

struct PegFn : DiffFn {
    explicit PegFn(int embed) : peg(embed) {}
    Tensor forward(const Tensor& x) override { return peg.forward(x); }
    void forward_backward(const Tensor& x) override {
        Peg::Cache cache;
        const Tensor y = peg.forward(x, &cache);
        dx = peg.backward(cache, Tensor::full(y.shape(), 1.0));
    }
    std::vector<Parameter*> params() override { return {&peg.dw.weight, &peg.dw.bias}; }
    const Tensor* input_grad() const override { return &dx; }
    Peg peg;
    Tensor dx;
};

struct AdapterFn : DiffFn {
    AdapterFn(const AdapterConfig& cfg, std::mt19937_64& rng) : adapter(cfg, rng) {
        // The up projection initializes to zero so the adapter starts silent;
        // perturb it so its gradients are informative here.
        std::normal_distribution<double> dist(0.0, 0.3);
        for (long long i = 0; i < adapter.up.weight.value.size(); ++i) {
            adapter.up.weight.value[i] = dist(rng);
        }
    }
    Tensor forward(const Tensor& x) override { return adapter.forward(x); }
    void forward_backward(const Tensor& x) override {
        Adapter::Cache cache;
        const Tensor y = adapter.forward(x, &cache);
        dx = adapter.backward(cache, Tensor::full(y.shape(), 1.0));
    }
    std::vector<Parameter*> params() override {
        std::vector<Parameter*> ps = {&adapter.down.weight, &adapter.down.bias};
        for (Conv2d& br : adapter.branches) {
            ps.push_back(&br.weight);
            ps.push_back(&br.bias);
        }
        ps.push_back(&adapter.up.weight);
        ps.push_back(&adapter.up.bias);
        return ps;
    }
    const Tensor* input_grad() const override { return &dx; }
    Adapter adapter;
    Tensor dx;
};

struct CnnFn : DiffFn {
    CnnFn(const CnnConfig& cfg, std::mt19937_64& rng) : cnn(cfg, rng) {}
    Tensor forward(const Tensor& x) override { return cnn.features(x); }
    void forward_backward(const Tensor& x) override {
        CnnEncoder::Cache cache;
        const Tensor y = cnn.features(x, &cache);
        cnn.features_backward(cache, Tensor::full(y.shape(), 1.0));
    }
    std::vector<Parameter*> params() override {
        ParamRegistry reg;
        cnn.collect(reg, "cnn");
        return reg.items();
    }
    CnnEncoder cnn;
};

struct ModelFn : DiffFn {
    ModelFn(const ModelConfig& cfg, uint64_t seed) : model(cfg, seed) {
        // Wake the zero-initialized tensors (PEG, adapter up) so every
        // gradient path carries signal.
        std::mt19937_64 rng(seed ^ 0x5eedULL);
        std::normal_distribution<double> dist(0.0, 0.2);
        for (Parameter* p : model.registry().items()) {
            bool all_zero = true;
            for (long long i = 0; i < p->value.size() && all_zero; ++i) {
                all_zero = p->value[i] == 0.0;
            }
            if (all_zero && p->name.find(".bias") == std::string::npos) {
                for (long long i = 0; i < p->value.size(); ++i) p->value[i] = dist(rng);
            }
        }
    }
    Tensor forward(const Tensor& x) override { return model.forward(x); }
    void forward_backward(const Tensor& x) override {
        GsamModel::Cache cache;
        const Tensor y = model.forward(x, &cache);
        model.backward(cache, Tensor::full(y.shape(), 1.0));
    }
    std::vector<Parameter*> params() override { return model.registry().items(); }
    GsamModel model;
};

ConvSpec make_spec(int in_c, int out_c, int k, int stride, int dilation, int groups, int pad) {
    ConvSpec s;
    s.in_channels = in_c;
    s.out_channels = out_c;
    s.kernel = k;
    s.stride = stride;
    s.dilation_rate = dilation;
    s.groups = groups;
    s.padding = pad;
    return s;
}

}  // namespace

std::vector<SuiteEntry> run_gradcheck_suite(uint64_t seed) {
    std::vector<SuiteEntry> out;
    std::mt19937_64 rng(seed);
    GradCheckOptions opt;
    opt.check_input = true;

    const auto run = [&](const std::string& name, DiffFn& fn, const Tensor& x,
                         const GradCheckOptions& o) {
        out.push_back({name, grad_check(fn, x, o)});
    };

    {
        ConvFn fn(Conv2d(make_spec(2, 3, 3, 1, 1, 1, 1), rng));
        run("conv3x3", fn, random_tensor({1, 2, 6, 6}, rng), opt);
    }
    {
        ConvFn fn(Conv2d(make_spec(2, 4, 3, 2, 1, 1, 1), rng));
        run("conv3x3_stride2", fn, random_tensor({1, 2, 7, 7}, rng), opt);
    }
    {
        ConvFn fn(Conv2d(make_spec(4, 4, 3, 1, 1, 2, 1), rng));
        run("conv3x3_groups2", fn, random_tensor({1, 4, 5, 5}, rng), opt);
    }
    {
        ConvFn fn(Conv2d(make_spec(3, 3, 3, 1, 1, 3, 1), rng));
        run("conv3x3_depthwise", fn, random_tensor({1, 3, 6, 6}, rng), opt);
    }
    for (int rate : {12, 24, 36}) {
        ConvFn fn(Conv2d(make_spec(2, 2, 3, 1, rate, 1, ConvSpec::same_padding(3, rate)), rng));
        run("conv3x3_dilated_r" + std::to_string(rate), fn, random_tensor({1, 2, 8, 8}, rng), opt);
    }
    {
        LinearFn fn(Linear(5, 4, rng, 0.5));
        run("linear", fn, random_tensor({6, 5}, rng), opt);
    }
    {
        LayerNormFn fn(6);
        std::normal_distribution<double> d(0.0, 1.0);
        for (long long i = 0; i < fn.ln.gamma.value.size(); ++i) fn.ln.gamma.value[i] = 1.0 + 0.2 * d(rng);
        run("layer_norm", fn, random_tensor({5, 6}, rng), opt);
    }
    {
        ChannelNormFn fn(4);
        run("channel_norm", fn, random_tensor({1, 4, 3, 3}, rng), opt);
    }
    {
        AttentionFn fn(MultiHeadAttention(8, 2, rng));
        run("attention", fn, random_tensor({1, 3, 4, 8}, rng), opt);
    }
    {
        PegFn fn(5);
        // Zero-init PEG has zero weights; perturb so the check is not vacuous.
        std::normal_distribution<double> d(0.0, 0.3);
        for (long long i = 0; i < fn.peg.dw.weight.value.size(); ++i) fn.peg.dw.weight.value[i] = d(rng);
        run("peg", fn, random_tensor({1, 4, 3, 5}, rng), opt);
    }

    AdapterConfig full;
    full.embed_dim = 12;
    full.bottleneck_dim = 6;
    for (const AblationVariant& v : ablation_variants(full)) {
        AdapterFn fn(v.config, rng);
        run("adapter_" + v.key, fn, random_tensor({1, 3, 3, 12}, rng), opt);
    }
    {
        CnnConfig cfg;
        cfg.stage_channels = {3, 4};
        cfg.tap_stage = 1;
        cfg.proj_dim = 8;
        CnnFn fn(cfg, rng);
        GradCheckOptions o = opt;
        o.max_entries_per_param = 24;
        run("cnn_encoder", fn, random_tensor({1, 3, 8, 8}, rng), o);
    }
    {
        ModelConfig cfg;
        cfg.encoder.patch_size = 16;
        cfg.encoder.embed_dim = 16;
        cfg.encoder.depth = 1;
        cfg.encoder.num_heads = 2;
        cfg.encoder.adapter.embed_dim = 16;
        cfg.encoder.adapter.bottleneck_dim = 6;
        cfg.cnn.stage_channels = {4, 6, 8};
        cfg.cnn.proj_dim = 16;
        cfg.num_classes = 2;
        cfg.decoder_channels = {8, 6, 6};
        cfg.freeze.frozen_name_patterns.clear();   // check every parameter
        ModelFn fn(cfg, seed);
        GradCheckOptions o;
        o.max_entries_per_param = 12;
        o.seed = seed;
        Tensor x = random_tensor({1, 3, 16, 16}, rng, 0.5);
        run("model_end_to_end", fn, x, o);
    }
    return out;
}

double suite_max_error(const std::vector<SuiteEntry>& entries) {
    double worst = 0.0;
    for (const SuiteEntry& e : entries) worst = std::max(worst, e.report.max_rel_error);
    return worst;
}

}  // namespace gsam
