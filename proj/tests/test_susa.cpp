#include <cmath>

#include "test_util.hpp"
#include "xhrnet/graph_engine.hpp"
#include "xhrnet/susa.hpp"

using namespace xhrnet;
using oracle::max_abs_diff;

TEST_SUITE_BEGIN("susa");

static SusaParams zero_attention_params(int c) {
    // ln_gamma = 0, ln_beta = 0 makes the attention exactly 0.5 everywhere
    SusaParams p = make_susa_params(c, 7);
    p.ln_gamma = Tensor({c});
    p.ln_beta = Tensor({c});
    return p;
}

TEST_CASE("uniform grouping weights reduce the context to a row mean") {
    SusaParams p = make_susa_params(3, 201);
    p.wq_weight = Tensor({3});
    *p.wq_bias = Tensor({3});
    Tensor x = random_uniform({3, 4, 5}, 202);
    auto [q, ctx] = stripe_context(x, p, SusaAxis::HWise);
    for (std::size_t i = 0; i < q.size(); ++i) {
        CHECK(q[i] == doctest::Approx(1.0 / 5).epsilon(1e-12));
    }
    for (int c = 0; c < 3; ++c) {
        for (int i = 0; i < 4; ++i) {
            double mean = 0.0;
            for (int j = 0; j < 5; ++j) mean += x.at({c, i, j});
            mean /= 5;
            CHECK(ctx.values.at({c, i}) == doctest::Approx(mean).epsilon(1e-12));
        }
    }
}

TEST_CASE("constant input gives a constant context for any params") {
    for (std::uint64_t seed : {11u, 12u, 13u}) {
        SusaParams p = make_susa_params(4, seed);
        Tensor x = Tensor::full({4, 5, 6}, 2.75);
        for (SusaAxis axis : {SusaAxis::HWise, SusaAxis::WWise}) {
            auto [q, ctx] = stripe_context(x, p, axis);
            for (std::size_t i = 0; i < ctx.values.size(); ++i) {
                CHECK(ctx.values[i] == doctest::Approx(2.75).epsilon(1e-12));
            }
        }
    }
}

TEST_CASE("grouping weights always sum to one per channel") {
    SusaParams p = make_susa_params(5, 203);
    Tensor x = random_uniform({5, 6, 7}, 204, -3.0, 3.0);
    for (SusaAxis axis : {SusaAxis::HWise, SusaAxis::WWise}) {
        auto [q, ctx] = stripe_context(x, p, axis);
        const int lp = q.shape()[1];
        for (int c = 0; c < 5; ++c) {
            double total = 0.0;
            for (int j = 0; j < lp; ++j) total += q.at({c, j});
            CHECK(std::fabs(total - 1.0) <= 1e-12);
        }
    }
}

TEST_CASE("unidim_transform trivial fixtures") {
    // context constant across channels, beta = 0: LN output is 0, sigmoid 0.5
    SusaParams p = make_susa_params(4, 205);
    Tensor ctx({4, 6});
    for (int l = 0; l < 6; ++l) {
        for (int c = 0; c < 4; ++c) ctx.at({c, l}) = 1.0 + l;
    }
    // wv as an average preserves channel-constancy
    p.wv_weight = Tensor::full({4, 4}, 0.25);
    AttentionVector a = unidim_transform(StripeContext{SusaAxis::HWise, ctx}, p);
    for (std::size_t i = 0; i < a.values.size(); ++i) {
        CHECK(a.values[i] == doctest::Approx(0.5).epsilon(1e-12));
    }

    SusaParams z = zero_attention_params(4);
    AttentionVector half =
        unidim_transform(StripeContext{SusaAxis::HWise, random_uniform({4, 6}, 206)}, z);
    for (std::size_t i = 0; i < half.values.size(); ++i) CHECK(half.values[i] == 0.5);
}

TEST_CASE("susa_apply constant-attention fixtures") {
    SusaParams z = zero_attention_params(4);
    Tensor x = random_uniform({4, 6, 5}, 207);
    Tensor out = susa_apply(x, z, SusaConfig{SusaAxis::HWise, FusionMode::Multiply, 4});
    CHECK(max_abs_diff(out, scale(x, 0.5)) <= 1e-15);

    Tensor added = susa_apply(x, z, SusaConfig{SusaAxis::WWise, FusionMode::Add, 4});
    Tensor expect = x;
    for (std::size_t i = 0; i < expect.size(); ++i) expect[i] += 0.5;
    CHECK(max_abs_diff(added, expect) <= 1e-15);
}

TEST_CASE("susa_apply preserves shape and strictly contracts under multiply") {
    SusaParams p = make_susa_params(4, 208);
    Tensor x = random_uniform({4, 6, 5}, 209, 0.5, 1.5);  // all entries nonzero
    for (SusaAxis axis : {SusaAxis::HWise, SusaAxis::WWise}) {
        for (FusionMode fusion : {FusionMode::Multiply, FusionMode::Add}) {
            Tensor out = susa_apply(x, p, SusaConfig{axis, fusion, 4});
            CHECK(out.shape() == x.shape());
            if (fusion == FusionMode::Multiply) {
                for (std::size_t i = 0; i < x.size(); ++i) {
                    CHECK(std::fabs(out[i]) < std::fabs(x[i]));
                }
            }
        }
    }
}

TEST_CASE("permuting W columns permutes the grouping and keeps the H-wise attention") {
    SusaParams p = make_susa_params(3, 210);
    Tensor x = random_uniform({3, 4, 5}, 211);
    const int perm[5] = {2, 4, 0, 3, 1};
    Tensor xp({3, 4, 5});
    for (int c = 0; c < 3; ++c) {
        for (int i = 0; i < 4; ++i) {
            for (int j = 0; j < 5; ++j) xp.at({c, i, j}) = x.at({c, i, perm[j]});
        }
    }
    auto [q, ctx] = stripe_context(x, p, SusaAxis::HWise);
    auto [qp, ctxp] = stripe_context(xp, p, SusaAxis::HWise);
    for (int c = 0; c < 3; ++c) {
        for (int j = 0; j < 5; ++j) {
            CHECK(qp.at({c, j}) == doctest::Approx(q.at({c, perm[j]})).epsilon(1e-12));
        }
    }
    CHECK(max_abs_diff(ctx.values, ctxp.values) <= 1e-12);
    AttentionVector a = unidim_transform(ctx, p);
    AttentionVector ap = unidim_transform(ctxp, p);
    CHECK(max_abs_diff(a.values, ap.values) <= 1e-12);
}

TEST_CASE("gc_block with zero bottleneck matrices is the identity") {
    GcParams p = make_gc_params(4, 2, 212);
    p.down = Tensor({2, 4});
    p.up = Tensor({4, 2});
    Tensor x = random_uniform({4, 5, 5}, 213);
    CHECK(max_abs_diff(gc_block(x, p), x) <= 1e-15);
}

TEST_CASE("gc_block at 1x1 ignores the context kernel") {
    Tensor x = random_uniform({4, 1, 1}, 214);
    GcParams p1 = make_gc_params(4, 2, 215);
    GcParams p2 = p1;
    p2.key_weight = random_uniform({4}, 216, -5.0, 5.0);
    // softmax over a single position is 1 either way
    CHECK(max_abs_diff(gc_block(x, p1), gc_block(x, p2)) <= 1e-15);
    CHECK_THROWS_AS(make_gc_params(4, 3, 217), SpecError);
}

TEST_CASE("W=1 stripe context equals the gc global context, and configured transforms agree") {
    // C=1, W=1: the per-channel grouping softmax sees exactly the positions the
    // gc attention sees, so with wq == wk the two context definitions coincide.
    const int h = 7;
    Tensor x = random_uniform({1, h, 1}, 218);
    const double kernel = 0.8;

    SusaParams sp = make_susa_params(1, 219);
    sp.wq_weight = Tensor({1}, {kernel});
    *sp.wq_bias = Tensor({1});
    sp.ln_gamma = Tensor({1});  // LN output collapses to beta = 0, sigmoid -> 0.5

    GcParams gp;
    gp.key_weight = Tensor({1}, {kernel});
    gp.down = Tensor({1, 1}, {1.0});
    gp.up = Tensor({1, 1}, {0.5});
    gp.ln_gamma = Tensor({1});
    gp.ln_beta = Tensor({1}, {1.0});  // relu(LN) = 1, transform = up * 1 = 0.5
    gp.ln_eps = 1e-5;

    auto [q, ctx] = stripe_context(x, sp, SusaAxis::WWise);
    Tensor gc_ctx({1, 1});
    {
        double denom = 0.0;
        for (int i = 0; i < h; ++i) denom += std::exp(kernel * x.at({0, i, 0}));
        for (int i = 0; i < h; ++i) {
            gc_ctx.at({0, 0}) += x.at({0, i, 0}) * std::exp(kernel * x.at({0, i, 0})) / denom;
        }
    }
    CHECK(max_abs_diff(ctx.values, gc_ctx) <= 1e-12);

    Tensor susa_out = susa_apply(x, sp, SusaConfig{SusaAxis::WWise, FusionMode::Add, 1});
    Tensor gc_out = gc_block(x, gp);
    CHECK(max_abs_diff(susa_out, gc_out) <= 1e-12);
}

TEST_CASE("gradients of the susa pipeline pass grad_check") {
    SusaParams p = make_susa_params(4, 220);
    Tensor x = random_uniform({4, 6, 5}, 221);
    for (SusaAxis axis : {SusaAxis::HWise, SusaAxis::WWise}) {
        for (FusionMode fusion : {FusionMode::Multiply, FusionMode::Add}) {
            std::vector<Tensor> inputs{x};
            auto params = flatten_params(p);
            inputs.insert(inputs.end(), params.begin(), params.end());
            auto fn = [&p, axis, fusion](Graph& g, const std::vector<Var>& vs) {
                GraphEngine eng(g);
                std::size_t at = 1;
                auto lp = susa_params_from_vars(p, vs, at);
                return g.sum_all(susa_apply(eng, vs[0], lp, SusaConfig{axis, fusion, 4}));
            };
            GradCheckReport r = grad_check_all(fn, inputs, 1e-4);
            CHECK_MESSAGE(r.pass, "axis=", to_string(axis), " fusion=", to_string(fusion),
                          " max_rel_err=", r.max_rel_err);
        }
    }
}

TEST_CASE("input validation") {
    SusaParams p = make_susa_params(4, 222);
    CHECK_THROWS_AS(susa_apply(random_uniform({4, 6}, 223), p,
                               SusaConfig{SusaAxis::HWise, FusionMode::Multiply, 4}),
                    DimError);
    CHECK_THROWS_AS(susa_apply(random_uniform({3, 6, 5}, 224), p,
                               SusaConfig{SusaAxis::HWise, FusionMode::Multiply, 3}),
                    DimError);
}

TEST_CASE("derived oracle checks: susa") { run_derived("susa."); }

TEST_SUITE_END();
