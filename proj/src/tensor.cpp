#include "gsam/tensor.hpp"

#include <cmath>
#include <sstream>

namespace gsam {

long long Tensor::count(const std::vector<int>& shape) {
    long long n = 1;
    for (int d : shape) {
        if (d <= 0) throw std::invalid_argument("Tensor: non-positive dim in " + shape_str(shape));
        n *= d;
    }
    return n;
}

std::string Tensor::shape_str(const std::vector<int>& shape) {
    std::ostringstream os;
    os << "[";
    for (size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
    os << "]";
    return os.str();
}

bool Tensor::all_finite() const {
    for (double v : data_) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

Tensor Tensor::reshaped(std::vector<int> shape) const {
    if (count(shape) != size()) {
        throw std::invalid_argument("Tensor::reshaped: element count mismatch, " +
                                    shape_str(shape_) + " -> " + shape_str(shape));
    }
    Tensor t = *this;
    t.shape_ = std::move(shape);
    return t;
}

void Tensor::add_(const Tensor& o) {
    if (!same_shape(o)) {
        throw std::invalid_argument("Tensor::add_: shape mismatch " + shape_str(shape_) +
                                    " vs " + shape_str(o.shape_));
    }
    for (size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
}

void Tensor::scale_(double s) {
    for (double& v : data_) v *= s;
}

Tensor tokens_to_feature(const Tensor& tokens) {
    if (tokens.rank() != 4) throw std::invalid_argument("tokens_to_feature: rank-4 expected");
    const int b = tokens.dim(0), h = tokens.dim(1), w = tokens.dim(2), e = tokens.dim(3);
    Tensor out({b, e, h, w});
    for (int bi = 0; bi < b; ++bi)
        for (int hi = 0; hi < h; ++hi)
            for (int wi = 0; wi < w; ++wi)
                for (int ei = 0; ei < e; ++ei)
                    out.at(bi, ei, hi, wi) = tokens.at(bi, hi, wi, ei);
    return out;
}

Tensor feature_to_tokens(const Tensor& fmap) {
    if (fmap.rank() != 4) throw std::invalid_argument("feature_to_tokens: rank-4 expected");
    const int b = fmap.dim(0), e = fmap.dim(1), h = fmap.dim(2), w = fmap.dim(3);
    Tensor out({b, h, w, e});
    for (int bi = 0; bi < b; ++bi)
        for (int ei = 0; ei < e; ++ei)
            for (int hi = 0; hi < h; ++hi)
                for (int wi = 0; wi < w; ++wi)
                    out.at(bi, hi, wi, ei) = fmap.at(bi, ei, hi, wi);
    return out;
}

void check_shape(const Tensor& t, const std::vector<int>& expect, const std::string& what) {
    if (t.shape() != expect) {
        throw std::invalid_argument(what + ": expected shape " + Tensor::shape_str(expect) +
                                    ", got " + Tensor::shape_str(t.shape()));
    }
}

}  // namespace gsam
