#pragma once

// Independent reference implementations the tests check the library against.
// Everything here is deliberately written as plain loop nests, sharing no
// code with the implementation paths under test.

#include <cstdint>
#include <random>
#include <vector>

#include "gsam/data.hpp"
#include "gsam/layers.hpp"
#include "gsam/tensor.hpp"

namespace oracles {

// Dilated grouped cross-correlation, one tap at a time:
// y[i] = sum_k x[i + r*k] * w[k] + bias. Also counts every multiplication it
// executes when macs is non-null.
inline gsam::Tensor conv2d_loopnest(const gsam::Tensor& x, const gsam::ConvSpec& s,
                                    const gsam::Tensor& weight, const gsam::Tensor& bias,
                                    long long* macs = nullptr) {
    const int batch = x.dim(0);
    const int out_h = s.out_dim(x.dim(2)), out_w = s.out_dim(x.dim(3));
    const int in_cg = s.in_channels / s.groups, out_cg = s.out_channels / s.groups;
    gsam::Tensor y({batch, s.out_channels, out_h, out_w});
    long long count = 0;
    for (int b = 0; b < batch; ++b)
        for (int oc = 0; oc < s.out_channels; ++oc) {
            const int g = oc / out_cg;
            for (int oh = 0; oh < out_h; ++oh)
                for (int ow = 0; ow < out_w; ++ow) {
                    double acc = 0.0;
                    for (int ic = 0; ic < in_cg; ++ic)
                        for (int ki = 0; ki < s.kernel; ++ki)
                            for (int kj = 0; kj < s.kernel; ++kj) {
                                const int ih = oh * s.stride - s.padding + ki * s.dilation_rate;
                                const int iw = ow * s.stride - s.padding + kj * s.dilation_rate;
                                const double xv =
                                    (ih < 0 || ih >= x.dim(2) || iw < 0 || iw >= x.dim(3))
                                        ? 0.0
                                        : x.at(b, g * in_cg + ic, ih, iw);
                                acc += xv * weight.at(oc, ic, ki, kj);
                                ++count;   // one multiply-accumulate
                            }
                    y.at(b, oc, oh, ow) = acc + bias[oc];
                }
        }
    if (macs) *macs = count;
    return y;
}

// Linear layer multiplication count by literal iteration.
inline long long linear_macs_loopnest(int n_rows, int in_dim, int out_dim) {
    long long count = 0;
    for (int r = 0; r < n_rows; ++r)
        for (int o = 0; o < out_dim; ++o)
            for (int i = 0; i < in_dim; ++i) ++count;
    return count;
}

// Per-class IoU by direct pixel enumeration (no confusion matrix).
inline std::pair<std::vector<double>, double> miou_enumeration(const gsam::LabelMask& pred,
                                                               const gsam::LabelMask& gt,
                                                               int num_classes) {
    std::vector<double> per_class(static_cast<size_t>(num_classes),
                                  std::numeric_limits<double>::quiet_NaN());
    double sum = 0.0;
    int present = 0;
    for (int c = 0; c < num_classes; ++c) {
        long long inter = 0, uni = 0;
        for (size_t i = 0; i < gt.ids.size(); ++i) {
            const bool in_pred = pred.ids[i] == c, in_gt = gt.ids[i] == c;
            if (in_pred && in_gt) ++inter;
            if (in_pred || in_gt) ++uni;
        }
        if (uni == 0) continue;
        per_class[static_cast<size_t>(c)] = static_cast<double>(inter) / static_cast<double>(uni);
        sum += per_class[static_cast<size_t>(c)];
        ++present;
    }
    return {per_class, sum / present};
}

inline gsam::Tensor random_tensor(std::vector<int> shape, std::mt19937_64& rng, double scale = 1.0) {
    gsam::Tensor t(std::move(shape));
    std::normal_distribution<double> dist(0.0, scale);
    for (long long i = 0; i < t.size(); ++i) t[i] = dist(rng);
    return t;
}

inline double max_abs_diff(const gsam::Tensor& a, const gsam::Tensor& b) {
    double m = 0.0;
    for (long long i = 0; i < a.size(); ++i) m = std::max(m, std::fabs(a[i] - b[i]));
    return m;
}

}  // namespace oracles
