#include "xhrnet/blocks.hpp"

#include <cmath>

#include "xhrnet/engine.hpp"

namespace xhrnet {

ConvUnit make_conv_unit(const ConvSpec& spec, std::mt19937_64& rng, bool affine) {
    spec.validate();
    // variance-preserving uniform init (gain 1): the conv stages carry no
    // activations, so this keeps the forward pass at unit scale
    const int fan_in = (spec.in_channels / spec.groups) * spec.kh * spec.kw;
    const double bound = std::sqrt(3.0 / fan_in);
    std::uniform_real_distribution<double> dist(-bound, bound);
    ConvUnit u;
    u.spec = spec;
    u.weight = Tensor(spec.weight_shape());
    for (std::size_t i = 0; i < u.weight.size(); ++i) u.weight[i] = dist(rng);
    if (spec.has_bias) u.bias = Tensor({spec.out_channels});
    if (affine) {
        u.norm = AffineT<Tensor>{Tensor::full({spec.out_channels}, 1.0),
                                 Tensor({spec.out_channels})};
    }
    return u;
}

DwSepUnit make_dw_sep_unit(int in_channels, int out_channels, int stride, std::mt19937_64& rng) {
    DwSepUnit u;
    u.dw = make_conv_unit(ConvSpec{in_channels, in_channels, 3, 3, stride, stride, 1, 1,
                                   in_channels, false},
                          rng);
    u.pw = make_conv_unit(ConvSpec{in_channels, out_channels, 1, 1, 1, 1, 0, 0, 1, false}, rng);
    return u;
}

ShuffleBlockParams make_shuffle_block_params(int channels, int stride, std::mt19937_64& rng,
                                             int out_channels) {
    ShuffleBlockParams p;
    p.stride = stride;
    if (stride == 1) {
        if (channels % 2 != 0) throw SpecError("stride-1 shuffle block needs even channels");
        const int half = channels / 2;
        p.pw1 = make_conv_unit(ConvSpec{half, half, 1, 1, 1, 1, 0, 0, 1, false}, rng);
        p.dw = make_conv_unit(ConvSpec{half, half, 3, 3, 1, 1, 1, 1, half, false}, rng);
        p.pw2 = make_conv_unit(ConvSpec{half, half, 1, 1, 1, 1, 0, 0, 1, false}, rng);
        return p;
    }
    if (stride != 2) throw SpecError("shuffle block stride must be 1 or 2");
    // downsampling unit: both branches see the full input, channels double by
    // default unless the caller pins the output width (the stem keeps it)
    const int out_c = out_channels > 0 ? out_channels : 2 * channels;
    if (out_c % 2 != 0) throw SpecError("stride-2 shuffle block needs an even output width");
    const int half = out_c / 2;
    p.proj_dw =
        make_conv_unit(ConvSpec{channels, channels, 3, 3, 2, 2, 1, 1, channels, false}, rng);
    p.proj_pw = make_conv_unit(ConvSpec{channels, half, 1, 1, 1, 1, 0, 0, 1, false}, rng);
    p.pw1 = make_conv_unit(ConvSpec{channels, half, 1, 1, 1, 1, 0, 0, 1, false}, rng);
    p.dw = make_conv_unit(ConvSpec{half, half, 3, 3, 2, 2, 1, 1, half, false}, rng);
    p.pw2 = make_conv_unit(ConvSpec{half, half, 1, 1, 1, 1, 0, 0, 1, false}, rng);
    return p;
}

XShuffleParams make_x_shuffle_params(int channels, std::mt19937_64& rng) {
    if (channels % 2 != 0) throw SpecError("x_shuffle block needs even channels");
    const int half = channels / 2;
    XShuffleParams p;
    p.susa1 = make_susa_params(half, rng());
    p.dw = make_conv_unit(ConvSpec{half, half, 3, 3, 1, 1, 1, 1, half, false}, rng);
    p.susa2 = make_susa_params(half, rng());
    return p;
}

BareBlockParams make_bare_block_params(int channels, std::mt19937_64& rng) {
    if (channels % 2 != 0) throw SpecError("bare block needs even channels");
    const int half = channels / 2;
    BareBlockParams p;
    p.dw = make_conv_unit(ConvSpec{half, half, 3, 3, 1, 1, 1, 1, half, false}, rng);
    return p;
}

StemParams make_stem_params(int stem_channels, std::mt19937_64& rng) {
    StemParams p;
    p.conv1 = make_conv_unit(ConvSpec{3, stem_channels, 3, 3, 2, 2, 1, 1, 1, false}, rng);
    p.block = make_shuffle_block_params(stem_channels, 2, rng, stem_channels);
    return p;
}

Tensor shuffle_block(const Tensor& x, const ShuffleBlockParams& p) {
    TensorEngine eng;
    return shuffle_block(eng, x, p);
}

Tensor x_shuffle_block(const Tensor& x, const XShuffleParams& p, const XShuffleConfig& cfg) {
    TensorEngine eng;
    return x_shuffle_block(eng, x, p, cfg);
}

Tensor bare_block(const Tensor& x, const BareBlockParams& p) {
    TensorEngine eng;
    return bare_block(eng, x, p);
}

Tensor dw_sep_conv(const Tensor& x, const DwSepUnit& u) {
    TensorEngine eng;
    return dw_sep_conv(eng, x, u);
}

Tensor stem(const Tensor& image, const StemParams& p) {
    TensorEngine eng;
    return stem(eng, image, p);
}

std::vector<Tensor> fuse_branches(const std::vector<Tensor>& inputs, const FuseParams& p) {
    TensorEngine eng;
    return fuse_branches(eng, inputs, p);
}

std::vector<Tensor> transition(const std::vector<Tensor>& inputs, const TransitionParams& p) {
    TensorEngine eng;
    return transition(eng, inputs, p);
}

}  // namespace xhrnet
