#include "derived_checks.hpp"

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "xhrnet/analysis.hpp"
#include "xhrnet/blocks.hpp"
#include "xhrnet/graph_engine.hpp"
#include "xhrnet/heatmap.hpp"

namespace {

using namespace xhrnet;
using oracle::max_abs_diff;

Tensor rnd(std::vector<int> shape, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
    return random_uniform(std::move(shape), seed, lo, hi);
}

// per-channel affine applied with explicit loops (oracle side)
Tensor affine_loops(const Tensor& x, const AffineT<Tensor>& n) {
    const int c = x.shape()[0];
    const std::size_t plane = x.size() / static_cast<std::size_t>(c);
    Tensor out(x.shape());
    for (int ch = 0; ch < c; ++ch) {
        for (std::size_t p = 0; p < plane; ++p) {
            out[static_cast<std::size_t>(ch) * plane + p] =
                x[static_cast<std::size_t>(ch) * plane + p] *
                    n.scale[static_cast<std::size_t>(ch)] +
                n.shift[static_cast<std::size_t>(ch)];
        }
    }
    return out;
}

Tensor conv_unit_oracle(const Tensor& x, const ConvUnit& u) {
    Tensor y = oracle::conv2d_loops(x, u.weight, u.bias ? &*u.bias : nullptr, u.spec.sh,
                                    u.spec.ph, u.spec.groups);
    return u.norm ? affine_loops(y, *u.norm) : y;
}

Tensor dw_sep_oracle(const Tensor& x, const DwSepUnit& u) {
    return conv_unit_oracle(conv_unit_oracle(x, u.dw), u.pw);
}

bool tensor_mul_broadcast() {
    Tensor a = rnd({2, 3, 4}, 11);
    Tensor b = rnd({2, 3, 1}, 12);
    return max_abs_diff(mul(a, b), oracle::broadcast_op3(a, b, true)) <= 1e-12;
}

bool tensor_mean_axis() {
    Tensor x = rnd({3, 5, 7}, 13);
    Tensor m = reduce_mean(x, 1);
    // spot values frozen from the loop oracle
    if (std::fabs(m.at({0, 0, 0}) - 0.2490076790787093) > 1e-12) return false;
    if (std::fabs(m.at({2, 0, 6}) - 0.26940260449832182) > 1e-12) return false;
    return max_abs_diff(m, oracle::mean_axis1_3d(x)) <= 1e-12;
}

bool tensor_softmax_oracle() {
    Tensor x = rnd({48}, 14, -2.0, 2.0);
    Tensor s = softmax(x, 0);
    double total = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i) total += s[i];
    return std::fabs(total - 1.0) <= 1e-12 &&
           max_abs_diff(s, oracle::softmax_vec(x)) <= 1e-12;
}

bool tensor_layer_norm_oracle() {
    Tensor x = rnd({4, 3}, 15);
    Tensor gamma({4}, {1, 2, 3, 4});
    Tensor beta = Tensor::full({4}, 1.0);
    Tensor out = layer_norm_channels(x, gamma, beta, 1e-5);
    // spot values frozen from the direct-formula oracle
    if (std::fabs(out.at({0, 0}) - 1.9820409029171671) > 1e-10) return false;
    if (std::fabs(out.at({3, 2}) - 4.60650355578088) > 1e-10) return false;
    return max_abs_diff(out, oracle::layer_norm_2d(x, gamma, beta, 1e-5)) <= 1e-10;
}

bool tensor_conv_oracle() {
    Tensor x = rnd({2, 4, 5}, 16);
    Tensor w = rnd({3, 2, 3, 3}, 17);
    ConvSpec spec{2, 3, 3, 3, 2, 2, 1, 1, 1, false};
    Tensor out = conv2d(x, w, std::nullopt, spec);
    // spot values frozen from the six-loop oracle
    if (out.shape() != std::vector<int>{3, 2, 3}) return false;
    if (std::fabs(out.at({0, 0, 0}) - 0.28141789821859409) > 1e-10) return false;
    if (std::fabs(out.at({1, 1, 1}) - -1.9023676900126016) > 1e-10) return false;
    if (std::fabs(out.at({2, 1, 2}) - 1.0299004772958109) > 1e-10) return false;
    return max_abs_diff(out, oracle::conv2d_loops(x, w, nullptr, 2, 1, 1)) <= 1e-10;
}

bool tensor_bilinear_oracle() {
    Tensor x = rnd({1, 3, 3}, 18);
    return max_abs_diff(resize(x, {6, 6}, ResizeMode::Bilinear),
                        oracle::bilinear_loops(x, 6, 6)) <= 1e-10;
}

bool autograd_susa_fd() {
    SusaParams p = make_susa_params(4, 21);
    Tensor x = rnd({4, 6, 5}, 22);
    auto fn = [&p](Graph& g, Var vx) {
        GraphEngine eng(g);
        auto lp = lift_params(g, p, false);
        return g.sum_all(susa_apply(eng, vx, lp, SusaConfig{SusaAxis::HWise,
                                                            FusionMode::Multiply, 4}));
    };
    return grad_check(fn, x, 1e-4).pass;
}

bool autograd_layer_norm_fd() {
    Tensor x = rnd({3, 4}, 23);
    Tensor gamma = rnd({3}, 24, 0.5, 1.5);
    Tensor beta = rnd({3}, 25, -0.5, 0.5);
    auto fn = [&](Graph& g, Var vx) {
        return g.sum_all(g.layer_norm(vx, g.constant(gamma), g.constant(beta), 1e-5));
    };
    return grad_check(fn, x, 1e-5).pass;
}

bool autograd_conv_fd() {
    Tensor x = rnd({2, 5, 5}, 26);
    Tensor w = rnd({3, 2, 3, 3}, 27);
    ConvSpec spec{2, 3, 3, 3, 1, 1, 1, 1, 1, false};
    auto fn = [&](Graph& g, Var vx) {
        return g.sum_all(g.conv2d(vx, g.constant(w), std::nullopt, spec));
    };
    return grad_check(fn, x, 1e-4).pass;
}

bool susa_stripe_oracle() {
    SusaParams p = make_susa_params(3, 31);
    Tensor x = rnd({3, 4, 5}, 32);
    auto [grouping, ctx] = stripe_context(x, p, SusaAxis::HWise);
    // spot values frozen from the triple-loop oracle
    if (std::fabs(grouping.at({0, 0}) - 0.21036907304026062) > 1e-10) return false;
    if (std::fabs(ctx.values.at({1, 2}) - 0.07798753804294109) > 1e-10) return false;
    if (std::fabs(ctx.values.at({2, 3}) - 0.43556212493290791) > 1e-10) return false;
    auto [oq, octx] = oracle::stripe_context_hwise(x, p);
    return max_abs_diff(grouping, oq) <= 1e-10 && max_abs_diff(ctx.values, octx) <= 1e-10;
}

bool susa_unidim_oracle() {
    SusaParams p = make_susa_params(4, 33);
    Tensor ctx = rnd({4, 6}, 34);
    AttentionVector a = unidim_transform(StripeContext{SusaAxis::HWise, ctx}, p);
    return max_abs_diff(a.values, oracle::unidim_transform_direct(ctx, p)) <= 1e-10;
}

bool susa_apply_oracle() {
    SusaParams p = make_susa_params(4, 35);
    Tensor x = rnd({4, 6, 5}, 36);
    Tensor out = susa_apply(x, p, SusaConfig{SusaAxis::HWise, FusionMode::Multiply, 4});
    auto [oq, octx] = oracle::stripe_context_hwise(x, p);
    Tensor oa = oracle::unidim_transform_direct(octx, p);
    Tensor expect(x.shape());
    for (int c = 0; c < 4; ++c) {
        for (int i = 0; i < 6; ++i) {
            for (int j = 0; j < 5; ++j) {
                expect.at({c, i, j}) = x.at({c, i, j}) * oa.at({c, i});
            }
        }
    }
    return max_abs_diff(out, expect) <= 1e-10;
}

bool susa_gc_oracle() {
    GcParams p = make_gc_params(4, 2, 37);
    Tensor x = rnd({4, 3, 3}, 38);
    return max_abs_diff(gc_block(x, p), oracle::gc_block_direct(x, p)) <= 1e-10;
}

bool blocks_shuffle_oracle() {
    std::mt19937_64 rng(41);
    ShuffleBlockParams p = make_shuffle_block_params(4, 1, rng);
    Tensor x = rnd({4, 6, 6}, 42);
    Tensor out = shuffle_block(x, p);
    auto [keep, t] = split_half(x);
    t = conv_unit_oracle(t, p.pw1);
    t = conv_unit_oracle(t, p.dw);
    t = conv_unit_oracle(t, p.pw2);
    Tensor expect = channel_shuffle(concat_channels(keep, t), 2);
    return max_abs_diff(out, expect) <= 1e-10;
}

bool blocks_x_shuffle_oracle() {
    std::mt19937_64 rng(43);
    XShuffleParams p = make_x_shuffle_params(4, rng);
    XShuffleConfig cfg;  // default W-wise then H-wise, multiply
    Tensor x = rnd({4, 6, 5}, 44);
    Tensor out = x_shuffle_block(x, p, cfg);
    auto [keep, t] = split_half(x);
    t = susa_apply(t, p.susa1, SusaConfig{cfg.first, cfg.fusion, 2});
    t = conv_unit_oracle(t, p.dw);
    t = susa_apply(t, p.susa2, SusaConfig{cfg.second, cfg.fusion, 2});
    Tensor expect = channel_shuffle(concat_channels(keep, t), 2);
    return max_abs_diff(out, expect) <= 1e-10;
}

bool blocks_dw_sep_oracle() {
    std::mt19937_64 rng(45);
    DwSepUnit u = make_dw_sep_unit(3, 5, 2, rng);
    Tensor x = rnd({3, 8, 8}, 46);
    return max_abs_diff(dw_sep_conv(x, u), dw_sep_oracle(x, u)) <= 1e-10;
}

bool blocks_fuse_oracle() {
    std::mt19937_64 rng(47);
    FuseParams p;
    p.paths.resize(2);
    p.paths[0].resize(2);
    p.paths[1].resize(2);
    p.paths[0][1].up = make_dw_sep_unit(8, 4, 1, rng);
    p.paths[1][0].down.push_back(make_dw_sep_unit(4, 8, 2, rng));
    std::vector<Tensor> in{rnd({4, 8, 8}, 48), rnd({8, 4, 4}, 49)};
    std::vector<Tensor> out = fuse_branches(in, p);
    Tensor up = resize(dw_sep_oracle(in[1], *p.paths[0][1].up), {8, 8}, ResizeMode::Nearest);
    Tensor down = dw_sep_oracle(in[0], p.paths[1][0].down[0]);
    return max_abs_diff(out[0], add(in[0], up)) <= 1e-10 &&
           max_abs_diff(out[1], add(in[1], down)) <= 1e-10;
}

bool blocks_stem_oracle() {
    std::mt19937_64 rng(51);
    StemParams p = make_stem_params(4, rng);
    Tensor x = rnd({3, 8, 8}, 52);
    Tensor out = stem(x, p);
    Tensor y = conv_unit_oracle(x, p.conv1);
    Tensor left = conv_unit_oracle(conv_unit_oracle(y, *p.block.proj_dw), *p.block.proj_pw);
    Tensor right = conv_unit_oracle(y, p.block.pw1);
    right = conv_unit_oracle(right, p.block.dw);
    right = conv_unit_oracle(right, p.block.pw2);
    Tensor expect = channel_shuffle(concat_channels(left, right), 2);
    return max_abs_diff(out, expect) <= 1e-10;
}

bool blocks_transition_oracle() {
    std::mt19937_64 rng(53);
    TransitionParams p;
    p.existing.push_back(make_dw_sep_unit(4, 6, 1, rng));
    p.down = make_dw_sep_unit(4, 10, 2, rng);
    Tensor x = rnd({4, 8, 8}, 54);
    std::vector<Tensor> out = transition({x}, p);
    return out.size() == 2 &&
           max_abs_diff(out[0], dw_sep_oracle(x, *p.existing[0])) <= 1e-10 &&
           max_abs_diff(out[1], dw_sep_oracle(x, p.down)) <= 1e-10;
}

bool analysis_dwsep_reduction() {
    // closed form of the ratio: 1 - 1/C - 1/9, independent of H and W
    for (int c : {128, 256, 512}) {
        const CostComparison cc = cost_compare(c, 64, 64);
        const double closed = 1.0 - 1.0 / c - 1.0 / 9.0;
        if (std::fabs(cc.dwsep_reduction - closed) > 1e-12) return false;
        if (cc.dwsep_reduction < 0.86 || cc.dwsep_reduction > 0.89) return false;
    }
    return true;
}

bool heatmap_gaussian_oracle() {
    GaussianSlice g = gaussian_heatmap(10.3, 20.7, 2.0, {64, 48});
    for (int i = 0; i < 64; ++i) {
        for (int j = 0; j < 48; ++j) {
            const double expect =
                std::exp(-((j - 10.3) * (j - 10.3) + (i - 20.7) * (i - 20.7)) / 8.0);
            if (std::fabs(g.values.at({i, j}) - expect) > 1e-12) return false;
        }
    }
    return !g.empty_warning;
}

bool heatmap_project_oracle() {
    GaussianSlice g = gaussian_heatmap(10.0, 20.0, 2.0, {64, 48});
    HeatVectorPair pair = project(g.values);
    // marginals of a separable kernel are the 1d kernels, normalized
    Tensor hv({64});
    Tensor wv({48});
    double hs = 0.0, ws = 0.0;
    for (int i = 0; i < 64; ++i) {
        hv[static_cast<std::size_t>(i)] = std::exp(-(i - 20.0) * (i - 20.0) / 8.0);
        hs += hv[static_cast<std::size_t>(i)];
    }
    for (int j = 0; j < 48; ++j) {
        wv[static_cast<std::size_t>(j)] = std::exp(-(j - 10.0) * (j - 10.0) / 8.0);
        ws += wv[static_cast<std::size_t>(j)];
    }
    for (std::size_t i = 0; i < hv.size(); ++i) hv[i] /= hs;
    for (std::size_t j = 0; j < wv.size(); ++j) wv[j] /= ws;
    return max_abs_diff(pair.h_vec, hv) <= 1e-10 && max_abs_diff(pair.w_vec, wv) <= 1e-10;
}

bool heatmap_nonseparable_error() {
    Tensor a = gaussian_heatmap(10.0, 10.0, 2.0, {32, 32}).values;
    Tensor b = gaussian_heatmap(22.0, 25.0, 2.0, {32, 32}).values;
    Tensor two_peak = add(a, b);
    return reconstruction_error(two_peak) > 1e-3;
}

bool heatmap_decode_subpixel() {
    GaussianSlice g = gaussian_heatmap(10.3, 20.7, 2.0, {64, 48});
    Keypoint kp = decode(g.values)[0];
    return kp.valid && std::fabs(kp.x - 10.3) <= 0.5 && std::fabs(kp.y - 20.7) <= 0.5;
}

bool heatmap_flip_average_oracle() {
    const int k = 17, h = 8, w = 6;
    Tensor hm = rnd({k, h, w}, 55, 0.0, 1.0);
    Tensor fl = rnd({k, h, w}, 56, 0.0, 1.0);
    Tensor out = flip_average(hm, fl, coco_flip_pairs());
    std::vector<int> src(k);
    for (int c = 0; c < k; ++c) src[static_cast<std::size_t>(c)] = c;
    for (auto [l, r] : coco_flip_pairs()) {
        src[static_cast<std::size_t>(l)] = r;
        src[static_cast<std::size_t>(r)] = l;
    }
    for (int c = 0; c < k; ++c) {
        for (int i = 0; i < h; ++i) {
            for (int j = 0; j < w; ++j) {
                const double expect =
                    0.5 * (hm.at({c, i, j}) + fl.at({src[static_cast<std::size_t>(c)], i,
                                                     w - 1 - j}));
                if (std::fabs(out.at({c, i, j}) - expect) > 1e-12) return false;
            }
        }
    }
    return true;
}

bool heatmap_fusion_toy_oracle() {
    Tensor a = gaussian_heatmap(20.0, 30.0, 2.0, {64, 48}).values;
    Tensor b = gaussian_heatmap(21.0, 30.0, 2.0, {64, 48}).values;
    for (FusionMode mode : {FusionMode::Add, FusionMode::Multiply}) {
        FusionToyResult r = fusion_toy(a, b, mode);
        // brute-force pixel enumeration
        double peak = -1.0;
        int px = 0, py = 0;
        std::vector<double> fused(64 * 48);
        for (int i = 0; i < 64; ++i) {
            for (int j = 0; j < 48; ++j) {
                const double v = (mode == FusionMode::Multiply)
                                     ? a.at({i, j}) * b.at({i, j})
                                     : a.at({i, j}) + b.at({i, j});
                fused[static_cast<std::size_t>(i * 48 + j)] = v;
                if (v > peak) {
                    peak = v;
                    px = j;
                    py = i;
                }
            }
        }
        long area = 0;
        for (double v : fused) {
            if (v >= 0.5 * peak) ++area;
        }
        if (r.peak_x != px || r.peak_y != py || r.half_max_area != area) return false;
    }
    return true;
}

}  // namespace

const std::vector<DerivedCheck>& all_derived_checks() {
    static const std::vector<DerivedCheck> checks = {
        {"tensor.mul_broadcast_vs_loops", tensor_mul_broadcast},
        {"tensor.mean_axis_vs_loops", tensor_mean_axis},
        {"tensor.softmax_vs_direct", tensor_softmax_oracle},
        {"tensor.layer_norm_vs_direct", tensor_layer_norm_oracle},
        {"tensor.conv2d_vs_loops", tensor_conv_oracle},
        {"tensor.bilinear_vs_loops", tensor_bilinear_oracle},
        {"autograd.susa_backward_vs_fd", autograd_susa_fd},
        {"autograd.layer_norm_backward_vs_fd", autograd_layer_norm_fd},
        {"autograd.conv_backward_vs_fd", autograd_conv_fd},
        {"susa.stripe_context_vs_loops", susa_stripe_oracle},
        {"susa.unidim_transform_vs_direct", susa_unidim_oracle},
        {"susa.apply_vs_composed_oracle", susa_apply_oracle},
        {"susa.gc_block_vs_direct", susa_gc_oracle},
        {"blocks.shuffle_vs_composition", blocks_shuffle_oracle},
        {"blocks.x_shuffle_vs_composition", blocks_x_shuffle_oracle},
        {"blocks.dw_sep_vs_two_step", blocks_dw_sep_oracle},
        {"blocks.fuse_vs_composition", blocks_fuse_oracle},
        {"blocks.stem_vs_composition", blocks_stem_oracle},
        {"blocks.transition_vs_composition", blocks_transition_oracle},
        {"analysis.dwsep_reduction_closed_form", analysis_dwsep_reduction},
        {"heatmap.gaussian_vs_formula", heatmap_gaussian_oracle},
        {"heatmap.project_vs_marginals", heatmap_project_oracle},
        {"heatmap.nonseparable_reconstruction_error", heatmap_nonseparable_error},
        {"heatmap.decode_subpixel_center", heatmap_decode_subpixel},
        {"heatmap.flip_average_vs_loops", heatmap_flip_average_oracle},
        {"heatmap.fusion_toy_vs_enumeration", heatmap_fusion_toy_oracle},
    };
    return checks;
}
