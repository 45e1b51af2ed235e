#pragma once

#include <optional>
#include <random>
#include <vector>

#include "xhrnet/susa.hpp"
#include "xhrnet/tensor.hpp"

namespace xhrnet {

// Composite building blocks. Every conv stage carries a per-channel affine
// scale/shift (a folded inference-time norm); no activation follows the conv
// stages themselves.

template <class V>
struct AffineT {
    V scale;  // [C]
    V shift;  // [C]
};

template <class V>
struct ConvUnitT {
    V weight;
    std::optional<V> bias;
    ConvSpec spec;
    std::optional<AffineT<V>> norm;
};
using ConvUnit = ConvUnitT<Tensor>;

template <class V>
struct DwSepUnitT {
    ConvUnitT<V> dw;  // depthwise 3x3, groups = C
    ConvUnitT<V> pw;  // pointwise 1x1
};
using DwSepUnit = DwSepUnitT<Tensor>;

// Standard shuffle block. stride 1 splits channels and transforms one half
// through pw1 -> dw -> pw2; stride 2 runs both branches on the full input
// (proj_dw/proj_pw on the left) and downsamples.
template <class V>
struct ShuffleBlockParamsT {
    int stride = 1;
    ConvUnitT<V> pw1, dw, pw2;
    std::optional<ConvUnitT<V>> proj_dw, proj_pw;  // stride-2 left branch
};
using ShuffleBlockParams = ShuffleBlockParamsT<Tensor>;

// Shuffle block with both pointwise convolutions replaced by SUSA modules.
template <class V>
struct XShuffleParamsT {
    SusaParamsT<V> susa1, susa2;
    ConvUnitT<V> dw;
};
using XShuffleParams = XShuffleParamsT<Tensor>;

struct XShuffleConfig {
    SusaAxis first = SusaAxis::WWise;   // before the depthwise 3x3
    SusaAxis second = SusaAxis::HWise;  // after it, sees the enlarged receptive field
    FusionMode fusion = FusionMode::Multiply;

    void validate() const {
        if (first == second) throw SpecError("x_shuffle SUSA axes must be distinct");
    }
};

// Shuffle block with both pointwise convolutions simply removed.
template <class V>
struct BareBlockParamsT {
    ConvUnitT<V> dw;
};
using BareBlockParams = BareBlockParamsT<Tensor>;

template <class V>
struct StemParamsT {
    ConvUnitT<V> conv1;           // 3x3 stride 2
    ShuffleBlockParamsT<V> block;  // stride-2 shuffle block
};
using StemParams = StemParamsT<Tensor>;

// One fusion path from a source branch to a target branch. Both lists empty
// means the identity (same-resolution) path.
template <class V>
struct FusePathT {
    std::vector<DwSepUnitT<V>> down;  // one stride-2 dw-sep per octave
    std::optional<DwSepUnitT<V>> up;  // dw-sep to target channels, then nearest resize
};

template <class V>
struct FuseParamsT {
    std::vector<std::vector<FusePathT<V>>> paths;  // [dst][src]
};
using FuseParams = FuseParamsT<Tensor>;

template <class V>
struct TransitionParamsT {
    std::vector<std::optional<DwSepUnitT<V>>> existing;  // per existing branch; nullopt = pass
    DwSepUnitT<V> down;                                  // stride-2 unit creating the new branch
};
using TransitionParams = TransitionParamsT<Tensor>;

// ---- compositions ---------------------------------------------------------------

template <class E>
typename E::value apply_conv_unit(E& eng, const typename E::value& x,
                                  const ConvUnitT<typename E::value>& u) {
    auto y = eng.conv2d(x, u.weight, u.bias, u.spec);
    if (u.norm) {
        const int c = eng.shape(y)[0];
        y = eng.add(eng.mul(y, eng.reshape(u.norm->scale, {c, 1, 1})),
                    eng.reshape(u.norm->shift, {c, 1, 1}));
    }
    return y;
}

template <class E>
typename E::value dw_sep_conv(E& eng, const typename E::value& x,
                              const DwSepUnitT<typename E::value>& u) {
    return apply_conv_unit(eng, apply_conv_unit(eng, x, u.dw), u.pw);
}

template <class E>
typename E::value shuffle_block(E& eng, const typename E::value& x,
                                const ShuffleBlockParamsT<typename E::value>& p) {
    if (p.stride == 1) {
        auto [keep, t] = eng.split_half(x);
        t = apply_conv_unit(eng, t, p.pw1);
        t = apply_conv_unit(eng, t, p.dw);
        t = apply_conv_unit(eng, t, p.pw2);
        return eng.channel_shuffle(eng.concat_channels(keep, t), 2);
    }
    if (p.stride != 2) throw SpecError("shuffle_block stride must be 1 or 2");
    if (!p.proj_dw || !p.proj_pw) throw SpecError("stride-2 shuffle_block needs proj units");
    auto left = apply_conv_unit(eng, apply_conv_unit(eng, x, *p.proj_dw), *p.proj_pw);
    auto right = apply_conv_unit(eng, x, p.pw1);
    right = apply_conv_unit(eng, right, p.dw);
    right = apply_conv_unit(eng, right, p.pw2);
    return eng.channel_shuffle(eng.concat_channels(left, right), 2);
}

template <class E>
typename E::value x_shuffle_block(E& eng, const typename E::value& x,
                                  const XShuffleParamsT<typename E::value>& p,
                                  const XShuffleConfig& cfg) {
    cfg.validate();
    auto [keep, t] = eng.split_half(x);
    const int half = eng.shape(t)[0];
    t = susa_apply(eng, t, p.susa1, SusaConfig{cfg.first, cfg.fusion, half});
    t = apply_conv_unit(eng, t, p.dw);
    t = susa_apply(eng, t, p.susa2, SusaConfig{cfg.second, cfg.fusion, half});
    return eng.channel_shuffle(eng.concat_channels(keep, t), 2);
}

template <class E>
typename E::value bare_block(E& eng, const typename E::value& x,
                             const BareBlockParamsT<typename E::value>& p) {
    auto [keep, t] = eng.split_half(x);
    t = apply_conv_unit(eng, t, p.dw);
    return eng.channel_shuffle(eng.concat_channels(keep, t), 2);
}

template <class E>
typename E::value stem(E& eng, const typename E::value& image,
                       const StemParamsT<typename E::value>& p) {
    const auto& s = eng.shape(image);
    if (s.size() != 3) throw DimError("stem expects a [3,H,W] image");
    if (s[1] % 4 != 0 || s[2] % 4 != 0) {
        throw SpecError("stem input extents must be divisible by 4, got " + shape_str(s));
    }
    return shuffle_block(eng, apply_conv_unit(eng, image, p.conv1), p.block);
}

template <class E>
std::vector<typename E::value> fuse_branches(E& eng,
                                             const std::vector<typename E::value>& inputs,
                                             const FuseParamsT<typename E::value>& p) {
    const std::size_t n = inputs.size();
    if (n == 0 || p.paths.size() != n) throw SpecError("fuse_branches branch count mismatch");
    for (std::size_t b = 0; b + 1 < n; ++b) {
        const auto& a = eng.shape(inputs[b]);
        const auto& c = eng.shape(inputs[b + 1]);
        if (a[1] != 2 * c[1] || a[2] != 2 * c[2]) {
            throw SpecError("fuse_branches spatial extents must halve per branch");
        }
    }
    std::vector<typename E::value> out;
    out.reserve(n);
    for (std::size_t dst = 0; dst < n; ++dst) {
        std::optional<typename E::value> acc;
        for (std::size_t src = 0; src < n; ++src) {
            typename E::value term = inputs[src];
            const auto& path = p.paths[dst][src];
            if (src == dst) {
                // identity path
            } else if (src < dst) {
                if (path.down.size() != dst - src) {
                    throw SpecError("fuse_branches downsample path has wrong stage count");
                }
                for (const auto& stage : path.down) term = dw_sep_conv(eng, term, stage);
            } else {
                if (!path.up) throw SpecError("fuse_branches upsample path missing its unit");
                term = dw_sep_conv(eng, term, *path.up);
                const auto& target = eng.shape(inputs[dst]);
                term = eng.resize(term, {target[1], target[2]}, ResizeMode::Nearest);
            }
            acc = acc ? eng.add(*acc, term) : term;
        }
        out.push_back(*acc);
    }
    return out;
}

template <class E>
std::vector<typename E::value> transition(E& eng, const std::vector<typename E::value>& inputs,
                                          const TransitionParamsT<typename E::value>& p) {
    if (inputs.empty() || p.existing.size() != inputs.size()) {
        throw SpecError("transition branch count mismatch");
    }
    std::vector<typename E::value> out;
    out.reserve(inputs.size() + 1);
    for (std::size_t b = 0; b < inputs.size(); ++b) {
        out.push_back(p.existing[b] ? dw_sep_conv(eng, inputs[b], *p.existing[b]) : inputs[b]);
    }
    out.push_back(dw_sep_conv(eng, inputs.back(), p.down));
    return out;
}

// ---- parameter factories ----------------------------------------------------------

ConvUnit make_conv_unit(const ConvSpec& spec, std::mt19937_64& rng, bool affine = true);
DwSepUnit make_dw_sep_unit(int in_channels, int out_channels, int stride, std::mt19937_64& rng);
ShuffleBlockParams make_shuffle_block_params(int channels, int stride, std::mt19937_64& rng,
                                             int out_channels = 0);
XShuffleParams make_x_shuffle_params(int channels, std::mt19937_64& rng);
BareBlockParams make_bare_block_params(int channels, std::mt19937_64& rng);
StemParams make_stem_params(int stem_channels, std::mt19937_64& rng);

// ---- plain-tensor entry points ------------------------------------------------------

Tensor shuffle_block(const Tensor& x, const ShuffleBlockParams& p);
Tensor x_shuffle_block(const Tensor& x, const XShuffleParams& p, const XShuffleConfig& cfg);
Tensor bare_block(const Tensor& x, const BareBlockParams& p);
Tensor dw_sep_conv(const Tensor& x, const DwSepUnit& u);
Tensor stem(const Tensor& image, const StemParams& p);
std::vector<Tensor> fuse_branches(const std::vector<Tensor>& inputs, const FuseParams& p);
std::vector<Tensor> transition(const std::vector<Tensor>& inputs, const TransitionParams& p);

}  // namespace xhrnet
