#include "xhrnet/susa.hpp"

#include <cmath>
#include <random>

#include "xhrnet/engine.hpp"

namespace xhrnet {

const char* to_string(SusaAxis axis) { return axis == SusaAxis::HWise ? "h" : "w"; }
const char* to_string(FusionMode mode) { return mode == FusionMode::Multiply ? "mul" : "add"; }

namespace {

Tensor kaiming_uniform(std::vector<int> shape, int fan_in, std::mt19937_64& rng) {
    const double bound = std::sqrt(6.0 / fan_in);
    std::uniform_real_distribution<double> dist(-bound, bound);
    Tensor t(std::move(shape));
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = dist(rng);
    return t;
}

}  // namespace

SusaParams make_susa_params(int channels, std::uint64_t seed, bool wq_bias, bool wv_bias) {
    if (channels < 1) throw SpecError("susa channels must be >= 1");
    std::mt19937_64 rng(seed);
    SusaParams p;
    p.wq_weight = kaiming_uniform({channels}, 1, rng);
    if (wq_bias) p.wq_bias = Tensor({channels});
    p.wv_weight = kaiming_uniform({channels, channels}, channels, rng);
    if (wv_bias) p.wv_bias = Tensor({channels});
    p.ln_gamma = Tensor::full({channels}, 1.0);
    p.ln_beta = Tensor({channels});
    return p;
}

GcParams make_gc_params(int channels, int reduction, std::uint64_t seed) {
    if (channels < 1) throw SpecError("gc channels must be >= 1");
    if (reduction < 1 || channels % reduction != 0) {
        throw SpecError("gc reduction " + std::to_string(reduction) + " must divide channels " +
                        std::to_string(channels));
    }
    const int cr = channels / reduction;
    std::mt19937_64 rng(seed);
    GcParams p;
    p.key_weight = kaiming_uniform({channels}, channels, rng);
    p.down = kaiming_uniform({cr, channels}, channels, rng);
    p.up = kaiming_uniform({channels, cr}, cr, rng);
    p.ln_gamma = Tensor::full({cr}, 1.0);
    p.ln_beta = Tensor({cr});
    return p;
}

static void check_susa_input(const Tensor& x, const SusaParams& p) {
    if (x.rank() != 3) throw DimError("expected a [C,H,W] input, got " + shape_str(x.shape()));
    if (x.shape()[0] != p.wq_weight.shape()[0]) {
        throw DimError("input has " + std::to_string(x.shape()[0]) + " channels, params have " +
                       std::to_string(p.wq_weight.shape()[0]));
    }
}

std::pair<Tensor, StripeContext> stripe_context(const Tensor& x, const SusaParams& p,
                                                SusaAxis axis) {
    check_susa_input(x, p);
    TensorEngine eng;
    auto [grouping, context] = stripe_context(eng, x, p, axis);
    return {std::move(grouping), StripeContext{axis, std::move(context)}};
}

AttentionVector unidim_transform(const StripeContext& context, const SusaParams& p) {
    if (context.values.shape()[0] != p.wq_weight.shape()[0]) {
        throw DimError("context channels do not match params");
    }
    TensorEngine eng;
    return AttentionVector{context.axis, unidim_transform(eng, context.values, p)};
}

Tensor susa_apply(const Tensor& x, const SusaParams& p, const SusaConfig& cfg) {
    check_susa_input(x, p);
    TensorEngine eng;
    return susa_apply(eng, x, p, cfg);
}

Tensor gc_block(const Tensor& x, const GcParams& p) {
    if (x.rank() != 3) throw DimError("gc_block expects a [C,H,W] input");
    if (x.shape()[0] != p.key_weight.shape()[0]) {
        throw DimError("gc_block input channels do not match params");
    }
    TensorEngine eng;
    return gc_block(eng, x, p);
}

}  // namespace xhrnet
