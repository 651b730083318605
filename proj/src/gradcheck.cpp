#include "gsam/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

namespace gsam {

bool GradCheckReport::ok(double tolerance) const {
    return std::isfinite(max_rel_error) && max_rel_error < tolerance;
}

namespace {

double loss_of(DiffFn& fn, const Tensor& x) {
    const Tensor y = fn.forward(x);
    double s = 0.0;
    for (long long i = 0; i < y.size(); ++i) s += y[i];
    return s;
}

// Entries to probe for a tensor of the given size.
std::vector<long long> pick_entries(long long size, int max_entries, std::mt19937_64& rng) {
    if (max_entries <= 0 || size <= max_entries) {
        std::vector<long long> all(static_cast<size_t>(size));
        std::iota(all.begin(), all.end(), 0LL);
        return all;
    }
    std::vector<long long> picked;
    picked.reserve(static_cast<size_t>(max_entries));
    std::uniform_int_distribution<long long> dist(0, size - 1);
    while (static_cast<int>(picked.size()) < max_entries) {
        const long long idx = dist(rng);
        if (std::find(picked.begin(), picked.end(), idx) == picked.end()) picked.push_back(idx);
    }
    std::sort(picked.begin(), picked.end());
    return picked;
}

double rel_error(double analytic, double numeric) {
    if (!std::isfinite(analytic) || !std::isfinite(numeric)) {
        return std::numeric_limits<double>::infinity();
    }
    const double denom = std::max({1.0, std::fabs(analytic), std::fabs(numeric)});
    return std::fabs(analytic - numeric) / denom;
}

}  // namespace

GradCheckReport grad_check(DiffFn& fn, const Tensor& x, const GradCheckOptions& opt) {
    GradCheckReport report;

    for (Parameter* p : fn.params()) p->zero_grad();
    fn.forward_backward(x);

    // Snapshot analytic gradients before we start perturbing values.
    std::vector<Tensor> analytic;
    for (Parameter* p : fn.params()) analytic.push_back(p->grad);
    Tensor analytic_input;
    if (opt.check_input && fn.input_grad()) analytic_input = *fn.input_grad();

    std::mt19937_64 rng(opt.seed);
    const std::vector<Parameter*> params = fn.params();
    for (size_t pi = 0; pi < params.size(); ++pi) {
        Parameter* p = params[pi];
        if (p->frozen) continue;
        double worst = 0.0;
        for (long long idx : pick_entries(p->value.size(), opt.max_entries_per_param, rng)) {
            const double orig = p->value[idx];
            p->value[idx] = orig + opt.h;
            const double lp = loss_of(fn, x);
            p->value[idx] = orig - opt.h;
            const double lm = loss_of(fn, x);
            p->value[idx] = orig;
            const double numeric = (lp - lm) / (2.0 * opt.h);
            worst = std::max(worst, rel_error(analytic[pi][idx], numeric));
        }
        report.per_parameter_errors[p->name.empty() ? "param" + std::to_string(pi) : p->name] = worst;
        report.max_rel_error = std::max(report.max_rel_error, worst);
    }

    if (opt.check_input && analytic_input.size() > 0) {
        Tensor xp = x;
        double worst = 0.0;
        for (long long idx : pick_entries(x.size(), opt.max_entries_per_param, rng)) {
            const double orig = xp[idx];
            xp[idx] = orig + opt.h;
            const double lp = loss_of(fn, xp);
            xp[idx] = orig - opt.h;
            const double lm = loss_of(fn, xp);
            xp[idx] = orig;
            const double numeric = (lp - lm) / (2.0 * opt.h);
            worst = std::max(worst, rel_error(analytic_input[idx], numeric));
        }
        report.per_parameter_errors["input"] = worst;
        report.max_rel_error = std::max(report.max_rel_error, worst);
    }
    return report;
}

}  // namespace gsam
