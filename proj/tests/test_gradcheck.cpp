#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "gsam/gradcheck.hpp"
#include "gsam/gradcheck_suite.hpp"
#include "oracles.hpp"

using namespace gsam;

namespace {

struct LinearFn : DiffFn {
    explicit LinearFn(Linear l) : lin(std::move(l)) {}
    Tensor forward(const Tensor& x) override { return lin.forward(x); }
    void forward_backward(const Tensor& x) override {
        Linear::Cache c;
        const Tensor y = lin.forward(x, &c);
        lin.backward(c, Tensor::full(y.shape(), 1.0));
    }
    std::vector<Parameter*> params() override { return {&lin.weight, &lin.bias}; }
    Linear lin;
};

}  // namespace

TEST_CASE("full gradient suite stays under 1e-4 at 64-bit") {
    const auto entries = run_gradcheck_suite(7);
    // conv (plain, strided, grouped, depthwise, dilated r=12/24/36), linear,
    // norms, attention, peg, 9 adapter variants, cnn, end-to-end model
    CHECK(entries.size() >= 19);
    for (const auto& e : entries) {
        INFO(e.name, " max_rel_error=", e.report.max_rel_error);
        CHECK(e.report.ok(1e-4));
    }
    CHECK(suite_max_error(entries) < 1e-4);

    bool has_e2e = false, has_r36 = false;
    for (const auto& e : entries) {
        has_e2e |= e.name == "model_end_to_end";
        has_r36 |= e.name == "conv3x3_dilated_r36";
    }
    CHECK(has_e2e);
    CHECK(has_r36);
}

TEST_CASE("report max equals the max over per-parameter errors") {
    const auto entries = run_gradcheck_suite(11);
    for (const auto& e : entries) {
        double worst = 0.0;
        for (const auto& [name, err] : e.report.per_parameter_errors) worst = std::max(worst, err);
        CHECK(e.report.max_rel_error == worst);
    }
}

TEST_CASE("zero-weight linear: weight gradient is the column-sum outer product") {
    // With W = 0 and loss = sum(y), dL/dW[o][i] = sum_n x[n][i] and dL/db = N.
    std::mt19937_64 rng(13);
    LinearFn fn(Linear(4, 3));
    const Tensor x = oracles::random_tensor({5, 4}, rng);

    const GradCheckReport report = grad_check(fn, x, {});
    CHECK(report.ok(1e-6));

    fn.lin.weight.zero_grad();
    fn.lin.bias.zero_grad();
    fn.forward_backward(x);
    for (int o = 0; o < 3; ++o) {
        for (int i = 0; i < 4; ++i) {
            double expect = 0.0;
            for (int n = 0; n < 5; ++n) expect += x.at(n, i);
            CHECK(fn.lin.weight.grad.at(o, i) == doctest::Approx(expect).epsilon(1e-12));
        }
        CHECK(fn.lin.bias.grad[o] == doctest::Approx(5.0));
    }
}

TEST_CASE("frozen parameters are excluded from the report") {
    std::mt19937_64 rng(19);
    LinearFn fn(Linear(4, 3, rng, 0.4));
    fn.lin.weight.name = "w";
    fn.lin.bias.name = "b";
    fn.lin.weight.frozen = true;

    const Tensor x = oracles::random_tensor({5, 4}, rng);
    const GradCheckReport report = grad_check(fn, x, {});
    CHECK(report.per_parameter_errors.count("w") == 0);
    CHECK(report.per_parameter_errors.count("b") == 1);
    CHECK(report.ok(1e-6));
}

TEST_CASE("non-finite gradients are reported, not passed") {
    struct BadFn : DiffFn {
        BadFn() { p.init({2}); p.name = "p"; }
        Tensor forward(const Tensor& x) override { return x; }
        void forward_backward(const Tensor&) override {
            p.grad[0] = std::numeric_limits<double>::quiet_NaN();
        }
        std::vector<Parameter*> params() override { return {&p}; }
        Parameter p;
    } fn;
    const GradCheckReport report = grad_check(fn, Tensor({1, 2}), {});
    CHECK(!report.ok(1e-4));
    CHECK(std::isinf(report.max_rel_error));
}
