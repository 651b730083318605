#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace gsam {

// Dense row-major tensor of doubles. Rank is dynamic but everything in this
// project is rank 1, 2 or 4: [N], [rows, cols], [B, C, H, W] feature maps and
// [B, Ht, Wt, E] token grids.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(std::vector<int> shape) : shape_(std::move(shape)) {
        data_.assign(static_cast<size_t>(count(shape_)), 0.0);
    }

    static Tensor zeros(std::vector<int> shape) { return Tensor(std::move(shape)); }

    static Tensor full(std::vector<int> shape, double v) {
        Tensor t(std::move(shape));
        t.fill(v);
        return t;
    }

    int rank() const { return static_cast<int>(shape_.size()); }
    int dim(int i) const { return shape_[static_cast<size_t>(i)]; }
    const std::vector<int>& shape() const { return shape_; }
    long long size() const { return static_cast<long long>(data_.size()); }
    bool empty() const { return data_.empty(); }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }

    double& operator[](long long i) { return data_[static_cast<size_t>(i)]; }
    double operator[](long long i) const { return data_[static_cast<size_t>(i)]; }

    // rank-2 accessors
    double& at(int i, int j) { return data_[static_cast<size_t>(i) * shape_[1] + j]; }
    double at(int i, int j) const { return data_[static_cast<size_t>(i) * shape_[1] + j]; }

    // rank-4 accessors
    double& at(int a, int b, int c, int d) {
        return data_[offset4(a, b, c, d)];
    }
    double at(int a, int b, int c, int d) const {
        return data_[offset4(a, b, c, d)];
    }

    void fill(double v) { data_.assign(data_.size(), v); }

    bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

    bool all_finite() const;

    // Same data, new shape; element count must match.
    Tensor reshaped(std::vector<int> shape) const;

    // this += o (shapes must match)
    void add_(const Tensor& o);
    // this *= s
    void scale_(double s);

    bool operator==(const Tensor& o) const { return shape_ == o.shape_ && data_ == o.data_; }

    static long long count(const std::vector<int>& shape);
    static std::string shape_str(const std::vector<int>& shape);

private:
    size_t offset4(int a, int b, int c, int d) const {
        return ((static_cast<size_t>(a) * shape_[1] + b) * shape_[2] + c) * shape_[3] + d;
    }

    std::vector<int> shape_;
    std::vector<double> data_;
};

// Layout conversions between the two rank-4 conventions.
// tokens: [B, Ht, Wt, E]  <->  feature map: [B, E, Ht, Wt]
Tensor tokens_to_feature(const Tensor& tokens);
Tensor feature_to_tokens(const Tensor& fmap);

void check_shape(const Tensor& t, const std::vector<int>& expect, const std::string& what);

}  // namespace gsam
