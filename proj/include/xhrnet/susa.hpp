#pragma once

#include <cstdint>
#include <optional>
#include <utility>

#include "xhrnet/tensor.hpp"

namespace xhrnet {

// Spatially unidimensional self-attention. One SUSA reduces the feature map
// along one spatial axis, groups the stripes with per-channel softmax weights,
// transforms the resulting C x L context with a single channel-mixing 1x1,
// and multiplies (or adds) the sigmoid attention back onto the input.

enum class SusaAxis { HWise, WWise };
enum class FusionMode { Multiply, Add };

const char* to_string(SusaAxis axis);
const char* to_string(FusionMode mode);

struct SusaConfig {
    SusaAxis axis = SusaAxis::HWise;
    FusionMode fusion = FusionMode::Multiply;
    int channels = 0;
};

template <class V>
struct SusaParamsT {
    V wq_weight;                // [C]   per-channel grouped 1x1 kernel
    std::optional<V> wq_bias;   // [C]
    V wv_weight;                // [C,C] channel-mixing 1x1 kernel
    std::optional<V> wv_bias;   // [C]
    V ln_gamma;                 // [C]
    V ln_beta;                  // [C]
    double ln_eps = 1e-5;
};
using SusaParams = SusaParamsT<Tensor>;

// Kaiming-uniform fan-in init for the kernels, gamma=1, beta=0, biases 0.
// wq carries a bias by default; wv does not (LayerNorm follows it directly).
SusaParams make_susa_params(int channels, std::uint64_t seed, bool wq_bias = true,
                            bool wv_bias = false);

struct StripeContext {
    SusaAxis axis;
    Tensor values;  // [C, H] for H-wise, [C, W] for W-wise
};

struct AttentionVector {
    SusaAxis axis;
    Tensor values;  // same layout as StripeContext, entries in (0,1)
};

// ---- compositions, generic over the evaluation engine -------------------------

// Stripe context modeling: mean along one spatial axis, per-channel grouped
// 1x1 + softmax to get grouping weights, then contract the input against them.
// Returns (grouping weights, context), shapes [C,L'] and [C,L].
template <class E>
std::pair<typename E::value, typename E::value> stripe_context(
    E& eng, const typename E::value& x, const SusaParamsT<typename E::value>& p, SusaAxis axis) {
    const auto& xs = eng.shape(x);
    if (xs.size() != 3) throw DimError("stripe_context expects a [C,H,W] input");
    const int c = xs[0], h = xs[1], w = xs[2];
    const bool hwise = (axis == SusaAxis::HWise);
    const int reduced_axis = hwise ? 1 : 2;  // averaged away
    const int lp = hwise ? w : h;            // grouping length
    const int l = hwise ? h : w;             // context length

    auto pooled = eng.reshape(eng.reduce_mean(x, reduced_axis), {c, lp});
    auto logits = eng.mul(pooled, eng.reshape(p.wq_weight, {c, 1}));
    if (p.wq_bias) logits = eng.add(logits, eng.reshape(*p.wq_bias, {c, 1}));
    auto grouping = eng.softmax(logits, 1);  // [C, L'] rows sum to 1

    auto weights3 = hwise ? eng.reshape(grouping, {c, 1, w}) : eng.reshape(grouping, {c, h, 1});
    auto context3 = eng.reduce_sum(eng.mul(x, weights3), hwise ? 2 : 1);
    auto context = eng.reshape(context3, {c, l});
    return {grouping, context};
}

// Spatially unidimensional transform: sigmoid(LN(Wv . context)).
template <class E>
typename E::value unidim_transform(E& eng, const typename E::value& context,
                                   const SusaParamsT<typename E::value>& p) {
    const auto& cs = eng.shape(context);
    if (cs.size() != 2) throw DimError("unidim_transform expects a [C,L] context");
    const int c = cs[0];
    auto t = eng.matmul(p.wv_weight, context);
    if (p.wv_bias) t = eng.add(t, eng.reshape(*p.wv_bias, {c, 1}));
    return eng.sigmoid(eng.layer_norm(t, p.ln_gamma, p.ln_beta, p.ln_eps));
}

template <class E>
typename E::value susa_apply(E& eng, const typename E::value& x,
                             const SusaParamsT<typename E::value>& p, const SusaConfig& cfg) {
    const auto& xs = eng.shape(x);
    if (xs.size() != 3) throw DimError("susa_apply expects a [C,H,W] input");
    if (cfg.channels != 0 && cfg.channels != xs[0]) {
        throw DimError("susa_apply config channels " + std::to_string(cfg.channels) +
                       " != input channels " + std::to_string(xs[0]));
    }
    const int c = xs[0], h = xs[1], w = xs[2];
    auto [grouping, context] = stripe_context(eng, x, p, cfg.axis);
    (void)grouping;
    auto attention = unidim_transform(eng, context, p);
    auto a3 = (cfg.axis == SusaAxis::HWise) ? eng.reshape(attention, {c, h, 1})
                                            : eng.reshape(attention, {c, 1, w});
    return (cfg.fusion == FusionMode::Multiply) ? eng.mul(x, a3) : eng.add(x, a3);
}

// ---- global context block (the comparison point) ------------------------------

template <class V>
struct GcParamsT {
    V key_weight;  // [C]     1x1 context kernel, shared attention over all positions
    V down;        // [C/r, C]
    V up;          // [C, C/r]
    V ln_gamma;    // [C/r]
    V ln_beta;     // [C/r]
    double ln_eps = 1e-5;
};
using GcParams = GcParamsT<Tensor>;

GcParams make_gc_params(int channels, int reduction, std::uint64_t seed);

// Softmax attention over all H*W positions, a global context vector, a
// bottleneck transform, and additive fusion.
template <class E>
typename E::value gc_block(E& eng, const typename E::value& x,
                           const GcParamsT<typename E::value>& p) {
    const auto& xs = eng.shape(x);
    if (xs.size() != 3) throw DimError("gc_block expects a [C,H,W] input");
    const int c = xs[0], h = xs[1], w = xs[2];
    const int cr = eng.shape(p.down)[0];
    if (eng.shape(p.down)[1] != c || eng.shape(p.up)[0] != c || eng.shape(p.up)[1] != cr) {
        throw SpecError("gc_block bottleneck shapes do not chain C -> C/r -> C");
    }

    auto scores = eng.reduce_sum(eng.mul(x, eng.reshape(p.key_weight, {c, 1, 1})), 0);
    auto alpha = eng.reshape(eng.softmax(eng.reshape(scores, {1, h * w}), 1), {1, h, w});
    auto pooled = eng.reduce_sum(eng.reduce_sum(eng.mul(x, alpha), 2), 1);
    auto context = eng.reshape(pooled, {c, 1});

    auto t = eng.matmul(p.down, context);
    t = eng.relu(eng.layer_norm(t, p.ln_gamma, p.ln_beta, p.ln_eps));
    auto transform = eng.matmul(p.up, t);
    return eng.add(x, eng.reshape(transform, {c, 1, 1}));
}

// ---- plain-tensor entry points -------------------------------------------------

std::pair<Tensor, StripeContext> stripe_context(const Tensor& x, const SusaParams& p,
                                                SusaAxis axis);
AttentionVector unidim_transform(const StripeContext& context, const SusaParams& p);
Tensor susa_apply(const Tensor& x, const SusaParams& p, const SusaConfig& cfg);
Tensor gc_block(const Tensor& x, const GcParams& p);

}  // namespace xhrnet
