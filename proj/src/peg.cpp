#include "gsam/peg.hpp"

namespace gsam {

Peg::Peg(int embed_dim, int kernel) {
    ConvSpec spec;
    spec.in_channels = embed_dim;
    spec.out_channels = embed_dim;
    spec.groups = embed_dim;
    spec.kernel = kernel;
    spec.padding = ConvSpec::same_padding(kernel, 1);
    // Zero init: training starts from the identity positional map.
    dw = Conv2d(spec);
}

Tensor Peg::forward(const Tensor& tokens, Cache* cache) const {
    if (tokens.rank() != 4 || tokens.dim(3) != embed_dim()) {
        throw std::invalid_argument("Peg: token grid shape " + Tensor::shape_str(tokens.shape()) +
                                    " does not match embed_dim=" + std::to_string(embed_dim()));
    }
    const Tensor fmap = tokens_to_feature(tokens);
    Tensor conv = dw.forward(fmap, cache ? &cache->conv : nullptr);
    Tensor y = feature_to_tokens(conv);
    y.add_(tokens);
    if (cache) cache->macs = cache->conv.macs;
    return y;
}

Tensor Peg::backward(const Cache& cache, const Tensor& dy) {
    Tensor dconv = dw.backward(cache.conv, tokens_to_feature(dy));
    Tensor dx = feature_to_tokens(dconv);
    dx.add_(dy);   // residual path
    return dx;
}

}  // namespace gsam
