#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "gsam/macs.hpp"
#include "oracles.hpp"

using namespace gsam;

namespace {

ModelConfig toy_model() {
    ModelConfig cfg;
    cfg.encoder.patch_size = 16;
    cfg.encoder.embed_dim = 32;
    cfg.encoder.depth = 2;
    cfg.encoder.num_heads = 2;
    cfg.encoder.adapter.embed_dim = 32;
    cfg.encoder.adapter.bottleneck_dim = 8;
    cfg.cnn.stage_channels = {8, 12, 16};
    cfg.cnn.proj_dim = 32;
    cfg.num_classes = 3;
    cfg.decoder_channels = {16, 12, 8};
    return cfg;
}

ConvSpec spec_of(int in_c, int out_c, int k, int groups) {
    ConvSpec s;
    s.in_channels = in_c;
    s.out_channels = out_c;
    s.kernel = k;
    s.groups = groups;
    return s;
}

}  // namespace

TEST_CASE("single conv formula: 3 in, 8 out, k3, 4x4 out = 3456 MACs") {
    const ConvSpec s = spec_of(3, 8, 3, 1);
    // 6x6 input, no padding -> 4x4 output
    CHECK(s.macs(6, 6) == 3456);
    long long counted = 0;
    std::mt19937_64 rng(3);
    const Tensor x = oracles::random_tensor({1, 3, 6, 6}, rng);
    Tensor w({8, 3, 3, 3}), b({8});
    oracles::conv2d_loopnest(x, s, w, b, &counted);
    CHECK(counted == 3456);
}

TEST_CASE("depthwise conv counts C * k^2 * out pixels") {
    const ConvSpec s = spec_of(10, 10, 3, 10);
    CHECK(s.macs(8, 8) == 10LL * 9 * 6 * 6);
    long long counted = 0;
    std::mt19937_64 rng(5);
    const Tensor x = oracles::random_tensor({1, 10, 8, 8}, rng);
    Tensor w({10, 1, 3, 3}), b({10});
    oracles::conv2d_loopnest(x, s, w, b, &counted);
    CHECK(counted == s.macs(8, 8));
}

TEST_CASE("analytical conv/linear entries equal brute-force counting on small inputs") {
    std::mt19937_64 rng(7);
    for (const auto& [in_c, out_c, k, groups, pad] :
         {std::tuple{2, 4, 3, 1, 1}, {4, 4, 3, 4, 1}, {3, 6, 1, 3, 0}, {2, 2, 3, 1, 3}}) {
        ConvSpec s = spec_of(in_c, out_c, k, groups);
        s.padding = pad;
        const Tensor x = oracles::random_tensor({1, in_c, 8, 8}, rng);
        Tensor w({out_c, in_c / groups, k, k}), b({out_c});
        long long counted = 0;
        oracles::conv2d_loopnest(x, s, w, b, &counted);
        CHECK(s.macs(8, 8) == counted);
    }
    Linear lin(7, 9);
    CHECK(lin.macs(8) == oracles::linear_macs_loopnest(8, 7, 9));
}

TEST_CASE("cost report structure: totals are entry sums, params match the registry") {
    const ModelConfig cfg = toy_model();
    const CostReport r = count_macs(cfg, 64, 64);
    long long macs = 0, params = 0;
    for (const CostEntry& e : r.entries) {
        CHECK(e.macs >= 0);
        CHECK(e.params >= 0);
        macs += e.macs;
        params += e.params;
    }
    CHECK(r.total_macs == macs);
    CHECK(r.total_params == params);

    const GsamModel model(cfg, 0);
    CHECK(r.total_params == model.parameter_summary().total);
    CHECK(!r.note.empty());
}

TEST_CASE("analytical total equals the forward-pass accounting hooks") {
    const ModelConfig cfg = toy_model();
    const GsamModel model(cfg, 3);
    std::mt19937_64 rng(3);
    for (const auto& [h, w] : {std::pair{32, 32}, {48, 64}, {100, 60}}) {
        GsamModel::Cache cache;
        model.forward(oracles::random_tensor({1, 3, h, w}, rng, 0.2), &cache);
        CHECK(cache.macs == model.cost_report(h, w).total_macs);
    }
}

TEST_CASE("doubling the side: conv entries x4, attention scores x16") {
    const ModelConfig cfg = toy_model();
    for (int s : {32, 64}) {
        const CostReport small = count_macs(cfg, s, s);
        const CostReport big = count_macs(cfg, 2 * s, 2 * s);
        REQUIRE(small.entries.size() == big.entries.size());
        for (size_t i = 0; i < small.entries.size(); ++i) {
            const CostEntry& a = small.entries[i];
            const CostEntry& b = big.entries[i];
            REQUIRE(a.name == b.name);
            if (a.kind == "conv" || a.kind == "depthwise_conv" || a.kind == "linear") {
                CHECK(b.macs == 4 * a.macs);
            } else if (a.kind == "attn_scores") {
                CHECK(b.macs == 16 * a.macs);
            } else {
                CHECK(b.macs == 0);
            }
            CHECK(a.params == b.params);
        }
    }
}

TEST_CASE("size sweep increases strictly over 32..256 and emits CSV") {
    const ModelConfig cfg = toy_model();
    const std::vector<std::pair<int, int>> sizes = {{32, 32}, {64, 64}, {128, 128}, {256, 256}};
    const auto rows = size_sweep(cfg, sizes);
    REQUIRE(rows.size() == 4);
    for (size_t i = 1; i < rows.size(); ++i) CHECK(rows[i].total_macs > rows[i - 1].total_macs);
    for (const SweepRow& r : rows) CHECK(r.total_params == rows[0].total_params);

    const std::string csv = sweep_to_csv(rows);
    CHECK(csv.find("size_h,size_w,total_macs,total_params") == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 5);

    const auto one = size_sweep(cfg, {{64, 64}});
    CHECK(one.size() == 1);
    CHECK_THROWS_AS(size_sweep(cfg, {}), std::invalid_argument);
}

TEST_CASE("128/64 total ratio sits between the conv and attention scaling laws") {
    const auto rows = size_sweep(toy_model(), {{64, 64}, {128, 128}});
    const double ratio = static_cast<double>(rows[1].total_macs) / rows[0].total_macs;
    CHECK(ratio > 4.0);
    CHECK(ratio < 16.0);
}

TEST_CASE("report serializers carry every entry") {
    const CostReport r = count_macs(toy_model(), 32, 32);
    const std::string csv = cost_report_to_csv(r);
    const std::string js = cost_report_to_json(r);
    CHECK(std::count(csv.begin(), csv.end(), '\n') ==
          static_cast<long>(r.entries.size()) + 3);   // note + header + entries + total
    CHECK(js.find("\"total_macs\"") != std::string::npos);
    CHECK(js.find("attn_scores") != std::string::npos);
    CHECK(csv.find("decoder.classifier") != std::string::npos);

    CHECK_THROWS_AS(count_macs(toy_model(), 8, 8), std::invalid_argument);
}
