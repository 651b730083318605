#include "gsam/layers.hpp"

#include <Eigen/Dense>

#include <cmath>

namespace gsam {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMat>;
using ConstMatMap = Eigen::Map<const RowMat>;

// ---------------------------------------------------------------------------
// ConvSpec
// ---------------------------------------------------------------------------

void ConvSpec::validate() const {
    if (in_channels <= 0 || out_channels <= 0 || kernel <= 0 || stride <= 0 ||
        dilation_rate <= 0 || groups <= 0 || padding < 0) {
        throw std::invalid_argument("ConvSpec: non-positive field");
    }
    if (in_channels % groups != 0 || out_channels % groups != 0) {
        throw std::invalid_argument("ConvSpec: channels not divisible by groups");
    }
}

long long ConvSpec::macs(int in_h, int in_w) const {
    const long long out_h = out_dim(in_h), out_w = out_dim(in_w);
    if (out_h <= 0 || out_w <= 0) return 0;
    return static_cast<long long>(out_channels) * (in_channels / groups) * kernel * kernel *
           out_h * out_w;
}

long long ConvSpec::param_count(bool with_bias) const {
    long long n = static_cast<long long>(out_channels) * (in_channels / groups) * kernel * kernel;
    if (with_bias) n += out_channels;
    return n;
}

// ---------------------------------------------------------------------------
// Conv2d
// ---------------------------------------------------------------------------

Conv2d::Conv2d(ConvSpec s, std::mt19937_64& rng) : spec(s) {
    spec.validate();
    weight.init({spec.out_channels, spec.in_channels / spec.groups, spec.kernel, spec.kernel});
    bias.init({spec.out_channels});
    init_he(weight, rng, (spec.in_channels / spec.groups) * spec.kernel * spec.kernel);
}

Conv2d::Conv2d(ConvSpec s) : spec(s) {
    spec.validate();
    weight.init({spec.out_channels, spec.in_channels / spec.groups, spec.kernel, spec.kernel});
    bias.init({spec.out_channels});
}

static void im2col(const Tensor& x, int b, int group, const ConvSpec& s,
                   int out_h, int out_w, Tensor& cols) {
    const int in_cg = s.in_channels / s.groups;
    const int k = s.kernel;
    const int h = x.dim(2), w = x.dim(3);
    double* col = cols.data();
    for (int c = 0; c < in_cg; ++c) {
        const int ci = group * in_cg + c;
        for (int ki = 0; ki < k; ++ki) {
            for (int kj = 0; kj < k; ++kj) {
                for (int oh = 0; oh < out_h; ++oh) {
                    const int ih = oh * s.stride - s.padding + ki * s.dilation_rate;
                    if (ih < 0 || ih >= h) {
                        for (int ow = 0; ow < out_w; ++ow) *col++ = 0.0;
                        continue;
                    }
                    for (int ow = 0; ow < out_w; ++ow) {
                        const int iw = ow * s.stride - s.padding + kj * s.dilation_rate;
                        *col++ = (iw < 0 || iw >= w) ? 0.0 : x.at(b, ci, ih, iw);
                    }
                }
            }
        }
    }
}

static void col2im_add(const Tensor& dcols, int b, int group, const ConvSpec& s,
                       int out_h, int out_w, Tensor& dx) {
    const int in_cg = s.in_channels / s.groups;
    const int k = s.kernel;
    const int h = dx.dim(2), w = dx.dim(3);
    const double* col = dcols.data();
    for (int c = 0; c < in_cg; ++c) {
        const int ci = group * in_cg + c;
        for (int ki = 0; ki < k; ++ki) {
            for (int kj = 0; kj < k; ++kj) {
                for (int oh = 0; oh < out_h; ++oh) {
                    const int ih = oh * s.stride - s.padding + ki * s.dilation_rate;
                    if (ih < 0 || ih >= h) {
                        col += out_w;
                        continue;
                    }
                    for (int ow = 0; ow < out_w; ++ow, ++col) {
                        const int iw = ow * s.stride - s.padding + kj * s.dilation_rate;
                        if (iw >= 0 && iw < w) dx.at(b, ci, ih, iw) += *col;
                    }
                }
            }
        }
    }
}

Tensor Conv2d::forward(const Tensor& x, Cache* cache) const {
    if (x.rank() != 4 || x.dim(1) != spec.in_channels) {
        throw std::invalid_argument("Conv2d: input shape " + Tensor::shape_str(x.shape()) +
                                    " does not match in_channels=" + std::to_string(spec.in_channels));
    }
    if (!x.all_finite()) throw std::runtime_error("Conv2d: non-finite input");

    const int batch = x.dim(0), h = x.dim(2), w = x.dim(3);
    const int out_h = spec.out_dim(h), out_w = spec.out_dim(w);
    if (out_h <= 0 || out_w <= 0) {
        throw std::invalid_argument("Conv2d: input " + std::to_string(h) + "x" + std::to_string(w) +
                                    " too small for effective kernel " +
                                    std::to_string(spec.effective_kernel()));
    }
    const int groups = spec.groups;
    const int out_cg = spec.out_channels / groups;
    const int kg = (spec.in_channels / groups) * spec.kernel * spec.kernel;
    const long long p = static_cast<long long>(out_h) * out_w;

    Tensor y({batch, spec.out_channels, out_h, out_w});
    ConstMatMap wmat(weight.value.data(), spec.out_channels, kg);

    Tensor cols_local({kg, out_h * out_w});
    if (cache) {
        cache->in_shape = x.shape();
        cache->cols.assign(static_cast<size_t>(batch) * groups, Tensor());
        cache->macs = static_cast<long long>(batch) * spec.macs(h, w);
    }
    for (int b = 0; b < batch; ++b) {
        for (int g = 0; g < groups; ++g) {
            Tensor& cols = cache ? cache->cols[static_cast<size_t>(b) * groups + g] : cols_local;
            if (cache) cols = Tensor({kg, out_h * out_w});
            im2col(x, b, g, spec, out_h, out_w, cols);
            ConstMatMap cmat(cols.data(), kg, p);
            MatMap ymat(y.data() + (static_cast<long long>(b) * spec.out_channels + g * out_cg) * p,
                        out_cg, p);
            ymat.noalias() = wmat.middleRows(g * out_cg, out_cg) * cmat;
            for (int oc = 0; oc < out_cg; ++oc) {
                ymat.row(oc).array() += bias.value[g * out_cg + oc];
            }
        }
    }
    return y;
}

Tensor Conv2d::backward(const Cache& cache, const Tensor& dy) {
    const int batch = cache.in_shape[0], h = cache.in_shape[2], w = cache.in_shape[3];
    const int out_h = spec.out_dim(h), out_w = spec.out_dim(w);
    check_shape(dy, {batch, spec.out_channels, out_h, out_w}, "Conv2d::backward");

    const int groups = spec.groups;
    const int out_cg = spec.out_channels / groups;
    const int kg = (spec.in_channels / groups) * spec.kernel * spec.kernel;
    const long long p = static_cast<long long>(out_h) * out_w;

    Tensor dx(cache.in_shape);
    ConstMatMap wmat(weight.value.data(), spec.out_channels, kg);
    MatMap dwmat(weight.grad.data(), spec.out_channels, kg);
    Tensor dcols({kg, out_h * out_w});

    for (int b = 0; b < batch; ++b) {
        for (int g = 0; g < groups; ++g) {
            const Tensor& cols = cache.cols[static_cast<size_t>(b) * groups + g];
            ConstMatMap cmat(cols.data(), kg, p);
            ConstMatMap dymat(
                dy.data() + (static_cast<long long>(b) * spec.out_channels + g * out_cg) * p,
                out_cg, p);
            dwmat.middleRows(g * out_cg, out_cg).noalias() += dymat * cmat.transpose();
            for (int oc = 0; oc < out_cg; ++oc) {
                bias.grad[g * out_cg + oc] += dymat.row(oc).sum();
            }
            MatMap dcmat(dcols.data(), kg, p);
            dcmat.noalias() = wmat.middleRows(g * out_cg, out_cg).transpose() * dymat;
            col2im_add(dcols, b, g, spec, out_h, out_w, dx);
        }
    }
    return dx;
}

void Conv2d::collect(ParamRegistry& reg, const std::string& prefix) {
    weight.name = prefix + ".weight";
    bias.name = prefix + ".bias";
    reg.add(&weight);
    reg.add(&bias);
}

// ---------------------------------------------------------------------------
// Linear
// ---------------------------------------------------------------------------

Linear::Linear(int in_dim, int out_dim, std::mt19937_64& rng, double stddev) {
    weight.init({out_dim, in_dim});
    bias.init({out_dim});
    init_normal(weight, rng, stddev);
}

Linear::Linear(int in_dim, int out_dim) {
    weight.init({out_dim, in_dim});
    bias.init({out_dim});
}

Tensor Linear::forward(const Tensor& x, Cache* cache) const {
    if (x.rank() != 2 || x.dim(1) != in_dim()) {
        throw std::invalid_argument("Linear: input shape " + Tensor::shape_str(x.shape()) +
                                    " does not match in_dim=" + std::to_string(in_dim()));
    }
    const int n = x.dim(0);
    Tensor y({n, out_dim()});
    ConstMatMap xm(x.data(), n, in_dim());
    ConstMatMap wm(weight.value.data(), out_dim(), in_dim());
    MatMap ym(y.data(), n, out_dim());
    ym.noalias() = xm * wm.transpose();
    for (int j = 0; j < out_dim(); ++j) ym.col(j).array() += bias.value[j];
    if (cache) {
        cache->input = x;
        cache->macs = macs(n);
    }
    return y;
}

Tensor Linear::backward(const Cache& cache, const Tensor& dy) {
    const int n = cache.input.dim(0);
    check_shape(dy, {n, out_dim()}, "Linear::backward");
    ConstMatMap dym(dy.data(), n, out_dim());
    ConstMatMap xm(cache.input.data(), n, in_dim());
    MatMap dwm(weight.grad.data(), out_dim(), in_dim());
    dwm.noalias() += dym.transpose() * xm;
    for (int j = 0; j < out_dim(); ++j) bias.grad[j] += dym.col(j).sum();

    Tensor dx({n, in_dim()});
    ConstMatMap wm(weight.value.data(), out_dim(), in_dim());
    MatMap dxm(dx.data(), n, in_dim());
    dxm.noalias() = dym * wm;
    return dx;
}

void Linear::collect(ParamRegistry& reg, const std::string& prefix) {
    weight.name = prefix + ".weight";
    bias.name = prefix + ".bias";
    reg.add(&weight);
    reg.add(&bias);
}

long long Linear::macs(long long n_rows) const {
    return n_rows * in_dim() * out_dim();
}

// ---------------------------------------------------------------------------
// LayerNorm
// ---------------------------------------------------------------------------

LayerNorm::LayerNorm(int dim) {
    gamma.init({dim});
    beta.init({dim});
    init_const(gamma, 1.0);
}

Tensor LayerNorm::forward(const Tensor& x, Cache* cache) const {
    if (x.rank() != 2 || x.dim(1) != dim()) {
        throw std::invalid_argument("LayerNorm: input shape " + Tensor::shape_str(x.shape()) +
                                    " does not match dim=" + std::to_string(dim()));
    }
    const int n = x.dim(0), c = dim();
    Tensor y({n, c});
    Tensor xhat({n, c});
    Tensor inv_std({n});
    for (int i = 0; i < n; ++i) {
        double mean = 0.0;
        for (int j = 0; j < c; ++j) mean += x.at(i, j);
        mean /= c;
        double var = 0.0;
        for (int j = 0; j < c; ++j) {
            const double d = x.at(i, j) - mean;
            var += d * d;
        }
        var /= c;
        const double is = 1.0 / std::sqrt(var + eps);
        inv_std[i] = is;
        for (int j = 0; j < c; ++j) {
            const double xh = (x.at(i, j) - mean) * is;
            xhat.at(i, j) = xh;
            y.at(i, j) = xh * gamma.value[j] + beta.value[j];
        }
    }
    if (cache) {
        cache->xhat = xhat;
        cache->inv_std = inv_std;
    }
    return y;
}

Tensor LayerNorm::backward(const Cache& cache, const Tensor& dy) {
    const int n = cache.xhat.dim(0), c = dim();
    check_shape(dy, {n, c}, "LayerNorm::backward");
    Tensor dx({n, c});
    for (int i = 0; i < n; ++i) {
        double m1 = 0.0, m2 = 0.0;
        for (int j = 0; j < c; ++j) {
            const double dxh = dy.at(i, j) * gamma.value[j];
            m1 += dxh;
            m2 += dxh * cache.xhat.at(i, j);
            gamma.grad[j] += dy.at(i, j) * cache.xhat.at(i, j);
            beta.grad[j] += dy.at(i, j);
        }
        m1 /= c;
        m2 /= c;
        const double is = cache.inv_std[i];
        for (int j = 0; j < c; ++j) {
            const double dxh = dy.at(i, j) * gamma.value[j];
            dx.at(i, j) = is * (dxh - m1 - cache.xhat.at(i, j) * m2);
        }
    }
    return dx;
}

void LayerNorm::collect(ParamRegistry& reg, const std::string& prefix) {
    gamma.name = prefix + ".weight";
    beta.name = prefix + ".bias";
    reg.add(&gamma);
    reg.add(&beta);
}

// ---------------------------------------------------------------------------
// ChannelNorm
// ---------------------------------------------------------------------------

Tensor ChannelNorm::forward(const Tensor& x, Cache* cache) const {
    const Tensor tok = feature_to_tokens(x);   // [B, H, W, C]
    const Tensor flat = tok.reshaped({static_cast<int>(tok.size()) / x.dim(1), x.dim(1)});
    Tensor y = ln.forward(flat, cache ? &cache->ln : nullptr);
    if (cache) cache->in_shape = x.shape();
    return tokens_to_feature(y.reshaped(tok.shape()));
}

Tensor ChannelNorm::backward(const Cache& cache, const Tensor& dy) {
    const Tensor tok = feature_to_tokens(dy);
    const int c = cache.in_shape[1];
    Tensor dflat = ln.backward(cache.ln, tok.reshaped({static_cast<int>(tok.size()) / c, c}));
    const std::vector<int>& s = cache.in_shape;
    return tokens_to_feature(dflat.reshaped({s[0], s[2], s[3], s[1]}));
}

// ---------------------------------------------------------------------------
// Activations
// ---------------------------------------------------------------------------

Activation activation_from_name(const std::string& name) {
    if (name == "relu") return Activation::Relu;
    if (name == "gelu") return Activation::Gelu;
    throw std::invalid_argument("unknown activation: " + name);
}

std::string activation_name(Activation a) {
    return a == Activation::Relu ? "relu" : "gelu";
}

static double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x * M_SQRT1_2)); }

static double gelu_grad(double x) {
    const double phi = std::exp(-0.5 * x * x) / std::sqrt(2.0 * M_PI);
    return 0.5 * (1.0 + std::erf(x * M_SQRT1_2)) + x * phi;
}

Tensor act_forward(Activation a, const Tensor& x, Tensor* cache_input) {
    if (cache_input) *cache_input = x;
    Tensor y(x.shape());
    if (a == Activation::Relu) {
        for (long long i = 0; i < x.size(); ++i) y[i] = x[i] > 0.0 ? x[i] : 0.0;
    } else {
        for (long long i = 0; i < x.size(); ++i) y[i] = gelu(x[i]);
    }
    return y;
}

Tensor act_backward(Activation a, const Tensor& cached_input, const Tensor& dy) {
    Tensor dx(dy.shape());
    if (a == Activation::Relu) {
        for (long long i = 0; i < dy.size(); ++i) dx[i] = cached_input[i] > 0.0 ? dy[i] : 0.0;
    } else {
        for (long long i = 0; i < dy.size(); ++i) dx[i] = gelu_grad(cached_input[i]) * dy[i];
    }
    return dx;
}

// ---------------------------------------------------------------------------
// MultiHeadAttention
// ---------------------------------------------------------------------------

MultiHeadAttention::MultiHeadAttention(int embed, int heads, std::mt19937_64& rng)
    : embed_dim(embed), num_heads(heads) {
    if (embed % heads != 0) {
        throw std::invalid_argument("MultiHeadAttention: embed_dim " + std::to_string(embed) +
                                    " not divisible by num_heads " + std::to_string(heads));
    }
    const double stddev = 1.0 / std::sqrt(static_cast<double>(embed));
    qkv = Linear(embed, 3 * embed, rng, stddev);
    out = Linear(embed, embed, rng, stddev);
}

void softmax_rows(Tensor& m) {
    const int n = m.dim(0), c = m.dim(1);
    for (int i = 0; i < n; ++i) {
        double mx = m.at(i, 0);
        for (int j = 1; j < c; ++j) mx = std::max(mx, m.at(i, j));
        double sum = 0.0;
        for (int j = 0; j < c; ++j) {
            const double e = std::exp(m.at(i, j) - mx);
            m.at(i, j) = e;
            sum += e;
        }
        for (int j = 0; j < c; ++j) m.at(i, j) /= sum;
    }
}

Tensor MultiHeadAttention::forward(const Tensor& tokens, Cache* cache) const {
    if (tokens.rank() != 4 || tokens.dim(3) != embed_dim) {
        throw std::invalid_argument("MultiHeadAttention: token grid shape " +
                                    Tensor::shape_str(tokens.shape()) + " does not match embed_dim=" +
                                    std::to_string(embed_dim));
    }
    const int b = tokens.dim(0), ht = tokens.dim(1), wt = tokens.dim(2);
    const int n = ht * wt, dh = embed_dim / num_heads;
    const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

    Cache local;
    Cache& c = cache ? *cache : local;
    c.b = b;
    c.n = n;

    const Tensor flat = tokens.reshaped({b * n, embed_dim});
    c.qkv = qkv.forward(flat, &c.qkv_c);
    c.attn = Tensor({b, num_heads, n, n});
    c.ctx = Tensor({b * n, embed_dim});

    ConstMatMap qkvm(c.qkv.data(), b * n, 3 * embed_dim);
    MatMap ctxm(c.ctx.data(), b * n, embed_dim);
    for (int bi = 0; bi < b; ++bi) {
        for (int h = 0; h < num_heads; ++h) {
            auto q = qkvm.block(bi * n, h * dh, n, dh);
            auto k = qkvm.block(bi * n, embed_dim + h * dh, n, dh);
            auto v = qkvm.block(bi * n, 2 * embed_dim + h * dh, n, dh);
            MatMap a(c.attn.data() + (static_cast<long long>(bi) * num_heads + h) * n * n, n, n);
            a.noalias() = scale * (q * k.transpose());
            for (int i = 0; i < n; ++i) {
                const double mx = a.row(i).maxCoeff();
                a.row(i) = (a.row(i).array() - mx).exp();
                a.row(i) /= a.row(i).sum();
            }
            ctxm.block(bi * n, h * dh, n, dh).noalias() = a * v;
        }
    }
    Tensor y = out.forward(c.ctx, &c.out_c);
    c.macs = static_cast<long long>(b) * (proj_macs(n) + score_macs(n));
    return y.reshaped({b, ht, wt, embed_dim});
}

Tensor MultiHeadAttention::backward(const Cache& c, const Tensor& dy) {
    const int b = c.b, n = c.n;
    const int dh = embed_dim / num_heads;
    const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
    const int ht = dy.dim(1), wt = dy.dim(2);

    const Tensor dflat = dy.reshaped({b * n, embed_dim});
    Tensor dctx = out.backward(c.out_c, dflat);

    Tensor dqkv({b * n, 3 * embed_dim});
    ConstMatMap qkvm(c.qkv.data(), b * n, 3 * embed_dim);
    ConstMatMap dctxm(dctx.data(), b * n, embed_dim);
    MatMap dqkvm(dqkv.data(), b * n, 3 * embed_dim);

    RowMat da(n, n), ds(n, n);
    for (int bi = 0; bi < b; ++bi) {
        for (int h = 0; h < num_heads; ++h) {
            auto q = qkvm.block(bi * n, h * dh, n, dh);
            auto k = qkvm.block(bi * n, embed_dim + h * dh, n, dh);
            auto v = qkvm.block(bi * n, 2 * embed_dim + h * dh, n, dh);
            ConstMatMap a(c.attn.data() + (static_cast<long long>(bi) * num_heads + h) * n * n, n, n);
            auto dc = dctxm.block(bi * n, h * dh, n, dh);

            da.noalias() = dc * v.transpose();
            // softmax rows: ds = a .* (da - rowsum(da .* a))
            for (int i = 0; i < n; ++i) {
                const double dot = (da.row(i).array() * a.row(i).array()).sum();
                ds.row(i) = a.row(i).array() * (da.row(i).array() - dot);
            }
            dqkvm.block(bi * n, h * dh, n, dh).noalias() = scale * (ds * k);
            dqkvm.block(bi * n, embed_dim + h * dh, n, dh).noalias() = scale * (ds.transpose() * q);
            dqkvm.block(bi * n, 2 * embed_dim + h * dh, n, dh).noalias() = a.transpose() * dc;
        }
    }
    Tensor dx = qkv.backward(c.qkv_c, dqkv);
    return dx.reshaped({b, ht, wt, embed_dim});
}

void MultiHeadAttention::collect(ParamRegistry& reg, const std::string& prefix) {
    qkv.collect(reg, prefix + ".qkv");
    out.collect(reg, prefix + ".out");
}

long long MultiHeadAttention::proj_macs(long long n_tokens) const {
    return qkv.macs(n_tokens) + out.macs(n_tokens);
}

long long MultiHeadAttention::score_macs(long long n_tokens) const {
    return 2 * n_tokens * n_tokens * embed_dim;
}

// ---------------------------------------------------------------------------
// Bilinear resize
// ---------------------------------------------------------------------------

namespace {

struct BilinearTap {
    int i0, i1;
    double w0, w1;
};

BilinearTap bilinear_tap(int out_idx, int out_dim, int in_dim) {
    const double src = (out_idx + 0.5) * static_cast<double>(in_dim) / out_dim - 0.5;
    const int i0 = static_cast<int>(std::floor(src));
    const double w1 = src - i0;
    BilinearTap t;
    t.i0 = std::min(std::max(i0, 0), in_dim - 1);
    t.i1 = std::min(std::max(i0 + 1, 0), in_dim - 1);
    t.w0 = 1.0 - w1;
    t.w1 = w1;
    return t;
}

}  // namespace

Tensor bilinear_resize(const Tensor& x, int out_h, int out_w) {
    if (x.rank() != 4) throw std::invalid_argument("bilinear_resize: rank-4 expected");
    if (out_h <= 0 || out_w <= 0) throw std::invalid_argument("bilinear_resize: bad output size");
    const int b = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
    Tensor y({b, c, out_h, out_w});
    std::vector<BilinearTap> ys(out_h), xs(out_w);
    for (int i = 0; i < out_h; ++i) ys[i] = bilinear_tap(i, out_h, h);
    for (int j = 0; j < out_w; ++j) xs[j] = bilinear_tap(j, out_w, w);
    for (int bi = 0; bi < b; ++bi)
        for (int ci = 0; ci < c; ++ci)
            for (int i = 0; i < out_h; ++i)
                for (int j = 0; j < out_w; ++j) {
                    const BilinearTap& ty = ys[i];
                    const BilinearTap& tx = xs[j];
                    y.at(bi, ci, i, j) =
                        ty.w0 * (tx.w0 * x.at(bi, ci, ty.i0, tx.i0) + tx.w1 * x.at(bi, ci, ty.i0, tx.i1)) +
                        ty.w1 * (tx.w0 * x.at(bi, ci, ty.i1, tx.i0) + tx.w1 * x.at(bi, ci, ty.i1, tx.i1));
                }
    return y;
}

Tensor bilinear_resize_backward(const Tensor& dy, int in_h, int in_w) {
    const int b = dy.dim(0), c = dy.dim(1), out_h = dy.dim(2), out_w = dy.dim(3);
    Tensor dx({b, c, in_h, in_w});
    std::vector<BilinearTap> ys(out_h), xs(out_w);
    for (int i = 0; i < out_h; ++i) ys[i] = bilinear_tap(i, out_h, in_h);
    for (int j = 0; j < out_w; ++j) xs[j] = bilinear_tap(j, out_w, in_w);
    for (int bi = 0; bi < b; ++bi)
        for (int ci = 0; ci < c; ++ci)
            for (int i = 0; i < out_h; ++i)
                for (int j = 0; j < out_w; ++j) {
                    const BilinearTap& ty = ys[i];
                    const BilinearTap& tx = xs[j];
                    const double g = dy.at(bi, ci, i, j);
                    dx.at(bi, ci, ty.i0, tx.i0) += ty.w0 * tx.w0 * g;
                    dx.at(bi, ci, ty.i0, tx.i1) += ty.w0 * tx.w1 * g;
                    dx.at(bi, ci, ty.i1, tx.i0) += ty.w1 * tx.w0 * g;
                    dx.at(bi, ci, ty.i1, tx.i1) += ty.w1 * tx.w1 * g;
                }
    return dx;
}

}  // namespace gsam
