#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "gsam/param.hpp"
#include "gsam/tensor.hpp"

namespace gsam {

// Anything differentiable enough to be finite-difference checked: a pure
// forward, a forward+backward pass that leaves dLoss/dparam in the parameter
// grad slots (loss = sum of outputs), and the parameter list.
class DiffFn {
public:
    virtual ~DiffFn() = default;
    virtual Tensor forward(const Tensor& x) = 0;
    virtual void forward_backward(const Tensor& x) = 0;
    virtual std::vector<Parameter*> params() = 0;
    // dLoss/dx from the last forward_backward, if the module exposes it.
    virtual const Tensor* input_grad() const { return nullptr; }
};

struct GradCheckReport {
    double max_rel_error = 0.0;
    std::map<std::string, double> per_parameter_errors;
    bool ok(double tolerance) const;
};

struct GradCheckOptions {
    double h = 1e-5;                  // central-difference step (64-bit)
    int max_entries_per_param = 0;    // 0 = check every entry
    uint64_t seed = 0;                // entry subsampling seed
    bool check_input = false;         // also FD-check dLoss/dx as pseudo-parameter "input"
};

// Central finite differences against the analytic gradients. Frozen
// parameters are skipped entirely. A non-finite analytic gradient is
// reported as an infinite error, never passed silently.
GradCheckReport grad_check(DiffFn& fn, const Tensor& x, const GradCheckOptions& opt = {});

}  // namespace gsam
