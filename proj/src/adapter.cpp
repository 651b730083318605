#include "gsam/adapter.hpp"

#include <algorithm>

namespace gsam {

std::string branch_name(AdapterBranch b) {
    switch (b) {
        case AdapterBranch::Conv1x1: return "conv1x1";
        case AdapterBranch::Conv3x3: return "conv3x3";
        case AdapterBranch::DilatedR1: return "dilated_r1";
        case AdapterBranch::DilatedR2: return "dilated_r2";
        case AdapterBranch::DilatedR3: return "dilated_r3";
    }
    return "?";
}

void AdapterConfig::validate() const {
    if (embed_dim <= 0 || bottleneck_dim <= 0) {
        throw std::invalid_argument("AdapterConfig: non-positive dims");
    }
    if (bottleneck_dim >= embed_dim) {
        throw std::invalid_argument("AdapterConfig: bottleneck_dim must be < embed_dim");
    }
    if (!(rates[0] < rates[1] && rates[1] < rates[2])) {
        throw std::invalid_argument("AdapterConfig: rates must be strictly increasing");
    }
    if (rates[0] < 1) throw std::invalid_argument("AdapterConfig: rates must be positive");
    activation_from_name(activation);
}

bool AdapterConfig::has(AdapterBranch b) const {
    return std::find(branch_set.begin(), branch_set.end(), b) != branch_set.end();
}

int AdapterConfig::rate_of(AdapterBranch b) const {
    switch (b) {
        case AdapterBranch::DilatedR1: return rates[0];
        case AdapterBranch::DilatedR2: return rates[1];
        case AdapterBranch::DilatedR3: return rates[2];
        default: return 1;
    }
}

Adapter::Adapter(const AdapterConfig& cfg, std::mt19937_64& rng) : config(cfg) {
    config.validate();
    act = activation_from_name(config.activation);
    const double stddev = 1.0 / std::sqrt(static_cast<double>(config.embed_dim));
    down = Linear(config.embed_dim, config.bottleneck_dim, rng, stddev);
    for (AdapterBranch b : config.branch_set) {
        ConvSpec spec;
        spec.in_channels = config.bottleneck_dim;
        spec.out_channels = config.bottleneck_dim;
        spec.kernel = (b == AdapterBranch::Conv1x1) ? 1 : 3;
        spec.dilation_rate = config.rate_of(b);
        spec.padding = ConvSpec::same_padding(spec.kernel, spec.dilation_rate);
        branches.emplace_back(spec, rng);
    }
    up = Linear(config.bottleneck_dim, config.embed_dim);   // zero init
}

Tensor Adapter::forward(const Tensor& tokens, Cache* cache) const {
    if (tokens.rank() != 4 || tokens.dim(3) != config.embed_dim) {
        throw std::invalid_argument("Adapter: token grid shape " + Tensor::shape_str(tokens.shape()) +
                                    " does not match embed_dim=" + std::to_string(config.embed_dim));
    }
    const int b = tokens.dim(0), ht = tokens.dim(1), wt = tokens.dim(2);
    const int n = b * ht * wt;

    Cache local;
    Cache& c = cache ? *cache : local;
    c.b = b;
    c.ht = ht;
    c.wt = wt;
    c.branch_c.resize(branches.size());

    Tensor h = down.forward(tokens.reshaped({n, config.embed_dim}), &c.down_c);

    // Token rows are in row-major (Ht, Wt) order, so the reshape to a spatial
    // map is a pure layout change.
    Tensor hsp = tokens_to_feature(h.reshaped({b, ht, wt, config.bottleneck_dim}));
    Tensor sum = hsp;   // identity term keeps the sum linear in the branch set
    for (size_t i = 0; i < branches.size(); ++i) {
        sum.add_(branches[i].forward(hsp, &c.branch_c[i]));
    }
    c.branch_sum = sum;

    Tensor a = act_forward(act, feature_to_tokens(sum).reshaped({n, config.bottleneck_dim}),
                           &c.act_in);
    Tensor y = up.forward(a, &c.up_c);
    y.scale_(config.scale);

    c.macs = c.down_c.macs + c.up_c.macs;
    for (const auto& bc : c.branch_c) c.macs += bc.macs;
    return y.reshaped({b, ht, wt, config.embed_dim});
}

Tensor Adapter::backward(const Cache& c, const Tensor& dy) {
    const int n = c.b * c.ht * c.wt;
    Tensor dys = dy.reshaped({n, config.embed_dim});
    dys.scale_(config.scale);
    Tensor da = up.backward(c.up_c, dys);
    Tensor dsum_flat = act_backward(act, c.act_in, da);
    Tensor dsum = tokens_to_feature(dsum_flat.reshaped({c.b, c.ht, c.wt, config.bottleneck_dim}));

    Tensor dh = dsum;   // identity term
    for (size_t i = 0; i < branches.size(); ++i) {
        dh.add_(branches[i].backward(c.branch_c[i], dsum));
    }
    Tensor dh_flat = feature_to_tokens(dh).reshaped({n, config.bottleneck_dim});
    Tensor dx = down.backward(c.down_c, dh_flat);
    return dx.reshaped({c.b, c.ht, c.wt, config.embed_dim});
}

void Adapter::collect(ParamRegistry& reg, const std::string& prefix) {
    down.collect(reg, prefix + ".down");
    for (size_t i = 0; i < branches.size(); ++i) {
        branches[i].collect(reg, prefix + "." + branch_name(config.branch_set[i]));
    }
    up.collect(reg, prefix + ".up");
}

long long Adapter::macs(int ht, int wt) const {
    long long m = down.macs(static_cast<long long>(ht) * wt) + up.macs(static_cast<long long>(ht) * wt);
    for (const Conv2d& br : branches) m += br.spec.macs(ht, wt);
    return m;
}

long long Adapter::param_count() const {
    long long n = down.param_count() + up.param_count();
    for (const Conv2d& br : branches) n += br.spec.param_count();
    return n;
}

std::vector<AblationVariant> ablation_variants(const AdapterConfig& full) {
    if (full.branch_set.size() != 5) {
        throw std::invalid_argument("ablation_variants: expects the full five-branch config");
    }
    const auto without = [&](std::vector<AdapterBranch> removed) {
        AdapterConfig c = full;
        c.branch_set.clear();
        for (AdapterBranch b : full.branch_set) {
            if (std::find(removed.begin(), removed.end(), b) == removed.end()) {
                c.branch_set.push_back(b);
            }
        }
        return c;
    };
    AdapterConfig plain = full;
    plain.branch_set.clear();

    const std::string r1 = std::to_string(full.rates[0]);
    const std::string r2 = std::to_string(full.rates[1]);
    const std::string r3 = std::to_string(full.rates[2]);
    return {
        {"adaptformer", "AdaptFormer", plain},
        {"no_conv", "w/o ALL Convolutions", without({AdapterBranch::Conv1x1, AdapterBranch::Conv3x3,
                                                     AdapterBranch::DilatedR1, AdapterBranch::DilatedR2,
                                                     AdapterBranch::DilatedR3})},
        {"no_dilated", "w/o ALL Dilated Convolutions",
         without({AdapterBranch::DilatedR1, AdapterBranch::DilatedR2, AdapterBranch::DilatedR3})},
        {"no_conv1x1", "w/o 1x1 Convolution", without({AdapterBranch::Conv1x1})},
        {"no_conv3x3", "w/o 3x3 Convolution", without({AdapterBranch::Conv3x3})},
        {"no_dilated_r" + r1, "w/o Dilated Convolution(r=" + r1 + ")", without({AdapterBranch::DilatedR1})},
        {"no_dilated_r" + r2, "w/o Dilated Convolution(r=" + r2 + ")", without({AdapterBranch::DilatedR2})},
        {"no_dilated_r" + r3, "w/o Dilated Convolution(r=" + r3 + ")", without({AdapterBranch::DilatedR3})},
        {"full", "SM-AdaptFormer", full},
    };
}

const AblationVariant& find_variant(const std::vector<AblationVariant>& variants,
                                    const std::string& key) {
    for (const AblationVariant& v : variants) {
        if (v.key == key) return v;
    }
    std::string known;
    for (const AblationVariant& v : variants) known += (known.empty() ? "" : ", ") + v.key;
    throw std::invalid_argument("unknown adapter variant '" + key + "' (known: " + known + ")");
}

}  // namespace gsam
