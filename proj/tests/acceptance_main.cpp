// Acceptance suite: one line per criterion, nonzero exit when any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "derived_checks.hpp"
#include "oracles.hpp"
#include "xhrnet/analysis.hpp"
#include "xhrnet/graph_engine.hpp"
#include "xhrnet/heatmap.hpp"

using namespace xhrnet;

namespace {

int failures = 0;

void report(int number, const std::string& what, bool ok, const std::string& detail) {
    std::printf("[%s] criterion %d: %s (%s)\n", ok ? "PASS" : "FAIL", number, what.c_str(),
                detail.c_str());
    if (!ok) ++failures;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

bool within(long long value, double target, double rel) {
    return std::fabs(value - target) <= rel * target;
}

std::string meg(long long v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2fM", v / 1e6);
    return buf;
}

void criterion1_complexity() {
    const auto t0 = std::chrono::steady_clock::now();
    const NetConfig x18 = net_config_x18();
    const NetConfig x30 = net_config_x30();
    const long long p18 = count_params(x18);
    const long long p30 = count_params(x30);
    const long long m18a = count_macs(x18, {256, 192}).total_macs;
    const long long m30a = count_macs(x30, {256, 192}).total_macs;
    const long long m18b = count_macs(x18, {384, 288}).total_macs;
    const long long m30b = count_macs(x30, {384, 288}).total_macs;
    const double dt = seconds_since(t0);
    const bool ok = p18 >= 1'200'000 && p18 <= 1'400'000 && p30 >= 2'000'000 &&
                    p30 <= 2'250'000 && within(m18a, 194.5e6, 0.04) &&
                    within(m30a, 300.4e6, 0.04) && within(m18b, 433.2e6, 0.04) &&
                    within(m30b, 668.0e6, 0.04) && dt < 1.0;
    report(1, "params and macs reproduce the published complexity tables", ok,
           "x18 " + meg(p18) + " params / " + meg(m18a) + "@256x192 / " + meg(m18b) +
               "@384x288; x30 " + meg(p30) + " / " + meg(m30a) + " / " + meg(m30b) + "; " +
               std::to_string(dt) + "s");
}

void criterion2_ablation() {
    NetConfig shuffle = net_config_x18();
    shuffle.block_type = BlockType::Shuffle;
    NetConfig bare = net_config_x18();
    bare.block_type = BlockType::Bare;
    const long long m_x = count_macs(net_config_x18(), {256, 192}).total_macs;
    const long long m_s = count_macs(shuffle, {256, 192}).total_macs;
    const long long m_b = count_macs(bare, {256, 192}).total_macs;
    const bool ok = within(m_s, 311.1e6, 0.05) && within(m_b, 188.9e6, 0.05) &&
                    within(m_s - m_b, 122.2e6, 0.10) && (m_x - m_b) >= 4'000'000 &&
                    (m_x - m_b) <= 7'000'000;
    report(2, "shuffle/bare ablation macs match the published deltas", ok,
           "shuffle " + meg(m_s) + ", bare " + meg(m_b) + ", pointwise delta " +
               meg(m_s - m_b) + ", susa delta " + meg(m_x - m_b));
}

void criterion3_ratios() {
    bool ok = true;
    std::string detail;
    for (int c : {128, 256, 512}) {
        const CostComparison cc = cost_compare(c, 64, 64);
        ok = ok && cc.dwsep_reduction >= 0.86 && cc.dwsep_reduction <= 0.89;
    }
    const CostComparison cc = cost_compare(40, 64, 48);
    ok = ok && cc.susa_vs_pointwise_pair < 0.06;
    char buf[96];
    std::snprintf(buf, sizeof(buf), "dwsep reduction %.4f at C=128, susa/pointwise pair %.4f",
                  cost_compare(128, 64, 64).dwsep_reduction, cc.susa_vs_pointwise_pair);
    report(3, "headline cost-reduction ratios hold", ok, buf);
}

void criterion4_order_invariance() {
    NetConfig wh = net_config_x18();
    NetConfig hw = net_config_x18();
    hw.susa_first = SusaAxis::HWise;
    hw.susa_second = SusaAxis::WWise;
    const long long pw = count_params(wh), ph = count_params(hw);
    const long long mw = count_macs(wh, {256, 192}).total_macs;
    const long long mh = count_macs(hw, {256, 192}).total_macs;
    report(4, "susa order leaves params and macs exactly unchanged", pw == ph && mw == mh,
           meg(pw) + " params, " + meg(mw) + " macs for both orders");
}

void criterion5_gradients() {
    const auto t0 = std::chrono::steady_clock::now();
    const double tol = 1e-4, eps = 1e-5;
    bool ok = true;
    std::string worst = "all within tol";
    double worst_err = 0.0;

    auto run = [&](const std::string& name, const MultiScalarFn& fn,
                   const std::vector<Tensor>& inputs) {
        GradCheckReport r = grad_check_all(fn, inputs, tol, eps);
        if (!r.pass) ok = false;
        if (r.max_rel_err > worst_err) {
            worst_err = r.max_rel_err;
            worst = name + " max_rel_err=" + std::to_string(r.max_rel_err);
        }
    };

    // susa_apply: both axes, both fusion modes, x and all params tracked
    {
        SusaParams p = make_susa_params(6, 901);
        Tensor x = random_uniform({6, 7, 5}, 902);
        for (SusaAxis axis : {SusaAxis::HWise, SusaAxis::WWise}) {
            for (FusionMode fusion : {FusionMode::Multiply, FusionMode::Add}) {
                std::vector<Tensor> inputs{x};
                auto flat = flatten_params(p);
                inputs.insert(inputs.end(), flat.begin(), flat.end());
                run(std::string("susa_apply ") + to_string(axis) + "/" + to_string(fusion),
                    [&p, axis, fusion](Graph& g, const std::vector<Var>& vs) {
                        GraphEngine eng(g);
                        std::size_t at = 1;
                        auto lp = susa_params_from_vars(p, vs, at);
                        return g.sum_all(
                            susa_apply(eng, vs[0], lp, SusaConfig{axis, fusion, 6}));
                    },
                    inputs);
            }
        }
    }
    // unidim_transform
    {
        SusaParams p = make_susa_params(5, 903);
        Tensor ctx = random_uniform({5, 6}, 904);
        std::vector<Tensor> inputs{ctx};
        auto flat = flatten_params(p);
        inputs.insert(inputs.end(), flat.begin(), flat.end());
        run("unidim_transform",
            [&p](Graph& g, const std::vector<Var>& vs) {
                GraphEngine eng(g);
                std::size_t at = 1;
                auto lp = susa_params_from_vars(p, vs, at);
                return g.sum_all(unidim_transform(eng, vs[0], lp));
            },
            inputs);
    }
    // stripe_context (loss sums both outputs)
    {
        SusaParams p = make_susa_params(4, 905);
        Tensor x = random_uniform({4, 6, 8}, 906);
        std::vector<Tensor> inputs{x};
        auto flat = flatten_params(p);
        inputs.insert(inputs.end(), flat.begin(), flat.end());
        run("stripe_context",
            [&p](Graph& g, const std::vector<Var>& vs) {
                GraphEngine eng(g);
                std::size_t at = 1;
                auto lp = susa_params_from_vars(p, vs, at);
                auto [q, ctx] = stripe_context(eng, vs[0], lp, SusaAxis::HWise);
                return g.add(g.sum_all(q), g.sum_all(ctx));
            },
            inputs);
    }
    // gc_block
    {
        GcParams p = make_gc_params(6, 2, 907);
        Tensor x = random_uniform({6, 5, 4}, 908);
        std::vector<Tensor> inputs{x};
        auto flat = flatten_params(p);
        inputs.insert(inputs.end(), flat.begin(), flat.end());
        run("gc_block",
            [&p](Graph& g, const std::vector<Var>& vs) {
                GraphEngine eng(g);
                std::size_t at = 1;
                auto lp = gc_params_from_vars(p, vs, at);
                return g.sum_all(gc_block(eng, vs[0], lp));
            },
            inputs);
    }
    // x_shuffle_block
    {
        std::mt19937_64 rng(909);
        XShuffleParams p = make_x_shuffle_params(6, rng);
        Tensor x = random_uniform({6, 5, 6}, 910);
        std::vector<Tensor> inputs{x};
        auto flat = flatten_params(p);
        inputs.insert(inputs.end(), flat.begin(), flat.end());
        run("x_shuffle_block",
            [&p](Graph& g, const std::vector<Var>& vs) {
                GraphEngine eng(g);
                std::size_t at = 1;
                auto lp = x_shuffle_from_vars(p, vs, at);
                return g.sum_all(x_shuffle_block(eng, vs[0], lp, XShuffleConfig{}));
            },
            inputs);
    }
    // dw_sep_conv
    {
        std::mt19937_64 rng(911);
        DwSepUnit u = make_dw_sep_unit(4, 6, 2, rng);
        Tensor x = random_uniform({4, 8, 8}, 912);
        std::vector<Tensor> inputs{x};
        auto flat = flatten_params(u);
        inputs.insert(inputs.end(), flat.begin(), flat.end());
        run("dw_sep_conv",
            [&u](Graph& g, const std::vector<Var>& vs) {
                GraphEngine eng(g);
                std::size_t at = 1;
                auto lu = dw_sep_from_vars(u, vs, at);
                return g.sum_all(dw_sep_conv(eng, vs[0], lu));
            },
            inputs);
    }

    const double dt = seconds_since(t0);
    ok = ok && dt < 30.0;
    report(5, "reverse-mode gradients match finite differences at 1e-4", ok,
           worst + ", " + std::to_string(dt) + "s");
}

void criterion6_oracles() {
    int bad = 0;
    std::string first_bad;
    for (const auto& check : all_derived_checks()) {
        if (!check.run()) {
            ++bad;
            if (first_bad.empty()) first_bad = check.name;
        }
    }
    report(6, "every seeded example matches its brute-force oracle", bad == 0,
           std::to_string(all_derived_checks().size()) + " checks" +
               (bad ? (", first failure: " + first_bad) : ""));
}

void criterion7_heatmap_codec() {
    bool ok = true;
    // separable project -> reconstruct identity
    Tensor sep = gaussian_heatmap(10.5, 20.25, 2.0, {64, 48}).values;
    ok = ok && reconstruction_error(sep) <= 1e-6;

    // 100-case decode sweep
    std::mt19937_64 rng(913);
    std::uniform_real_distribution<double> ux(4.0, 43.0), uy(4.0, 59.0);
    double worst = 0.0;
    for (int t = 0; t < 100; ++t) {
        const double cx = ux(rng), cy = uy(rng);
        Keypoint kp = decode(gaussian_heatmap(cx, cy, 2.0, {64, 48}).values)[0];
        worst = std::max({worst, std::fabs(kp.x - cx), std::fabs(kp.y - cy)});
    }
    ok = ok && worst <= 0.5;

    // multiplication fusion strictly sharper for coincident gaussians
    for (double sigma : {1.0, 2.0, 4.0}) {
        Tensor g = gaussian_heatmap(24.0, 32.0, sigma, {64, 48}).values;
        const long mul_area = fusion_toy(g, g, FusionMode::Multiply).half_max_area;
        const long add_area = fusion_toy(g, g, FusionMode::Add).half_max_area;
        ok = ok && mul_area < add_area;
    }
    char buf[64];
    std::snprintf(buf, sizeof(buf), "decode sweep worst error %.3fpx", worst);
    report(7, "heatmap codec identities and fusion sharpening hold", ok, buf);
}

void criterion8_end_to_end() {
    const auto t0 = std::chrono::steady_clock::now();
    Network net = Network::build(net_config_x18(), 42);
    Tensor small = random_uniform({3, 256, 192}, 914);
    const auto f0 = std::chrono::steady_clock::now();
    Tensor hm256 = net.forward(small);
    const double fwd_s = seconds_since(f0);
    bool ok = hm256.shape() == std::vector<int>{17, 64, 48} && fwd_s < 60.0;

    Tensor big = random_uniform({3, 384, 288}, 915);
    ok = ok && net.forward(big).shape() == std::vector<int>{17, 96, 72};

    const std::string path = "acceptance_roundtrip.xhw";
    net.save(path);
    Network loaded = Network::load(net_config_x18(), path);
    ok = ok && oracle::max_abs_diff(hm256, loaded.forward(small)) <= 1e-5;
    std::remove(path.c_str());

    char buf[96];
    std::snprintf(buf, sizeof(buf), "forward@256x192 %.2fs, total %.2fs", fwd_s,
                  seconds_since(t0));
    report(8, "end-to-end shapes and weights round trip", ok, buf);
}

}  // namespace

int main() {
    criterion1_complexity();
    criterion2_ablation();
    criterion3_ratios();
    criterion4_order_invariance();
    criterion5_gradients();
    criterion6_oracles();
    criterion7_heatmap_codec();
    criterion8_end_to_end();
    if (failures) {
        std::printf("%d criterion(s) FAILED\n", failures);
        return 1;
    }
    std::printf("all 8 criteria passed\n");
    return 0;
}
