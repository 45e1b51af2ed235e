#pragma once

#include <optional>
#include <utility>
#include <vector>

#include "xhrnet/autograd.hpp"
#include "xhrnet/blocks.hpp"
#include "xhrnet/susa.hpp"

namespace xhrnet {

// Engine that records the layer compositions on an autograd Graph, so the
// same code that runs the forward pass can be differentiated and checked
// against finite differences.
struct GraphEngine {
    using value = Var;
    Graph* g;

    explicit GraphEngine(Graph& graph) : g(&graph) {}

    const std::vector<int>& shape(Var v) const { return v.value().shape(); }

    Var add(Var a, Var b) const { return g->add(a, b); }
    Var mul(Var a, Var b) const { return g->mul(a, b); }
    Var reduce_mean(Var x, int axis) const { return g->reduce_mean(x, axis); }
    Var reduce_sum(Var x, int axis) const { return g->reduce_sum(x, axis); }
    Var softmax(Var x, int axis) const { return g->softmax(x, axis); }
    Var sigmoid(Var x) const { return g->sigmoid(x); }
    Var relu(Var x) const { return g->relu(x); }
    Var layer_norm(Var x, Var gamma, Var beta, double eps) const {
        return g->layer_norm(x, gamma, beta, eps);
    }
    Var conv2d(Var x, Var w, const std::optional<Var>& b, const ConvSpec& spec) const {
        return g->conv2d(x, w, b, spec);
    }
    Var matmul(Var a, Var b) const { return g->matmul(a, b); }
    Var reshape(Var x, std::vector<int> shape) const { return g->reshape(x, std::move(shape)); }
    Var resize(Var x, std::pair<int, int> hw, ResizeMode mode) const {
        return g->resize(x, hw, mode);
    }
    std::pair<Var, Var> split_half(Var x) const { return g->split_half(x); }
    Var concat_channels(Var a, Var b) const { return g->concat_channels(a, b); }
    Var channel_shuffle(Var x, int groups) const { return g->channel_shuffle(x, groups); }
};

// Lifting tensor-valued parameter packs onto a graph. `track` makes every
// tensor a differentiable input. flatten_* gives the matching input order for
// grad_check_all.

inline Var lift(Graph& g, const Tensor& t, bool track) {
    return track ? g.input(t) : g.constant(t);
}

inline SusaParamsT<Var> lift_params(Graph& g, const SusaParams& p, bool track) {
    SusaParamsT<Var> out;
    out.wq_weight = lift(g, p.wq_weight, track);
    if (p.wq_bias) out.wq_bias = lift(g, *p.wq_bias, track);
    out.wv_weight = lift(g, p.wv_weight, track);
    if (p.wv_bias) out.wv_bias = lift(g, *p.wv_bias, track);
    out.ln_gamma = lift(g, p.ln_gamma, track);
    out.ln_beta = lift(g, p.ln_beta, track);
    out.ln_eps = p.ln_eps;
    return out;
}

inline GcParamsT<Var> lift_params(Graph& g, const GcParams& p, bool track) {
    GcParamsT<Var> out;
    out.key_weight = lift(g, p.key_weight, track);
    out.down = lift(g, p.down, track);
    out.up = lift(g, p.up, track);
    out.ln_gamma = lift(g, p.ln_gamma, track);
    out.ln_beta = lift(g, p.ln_beta, track);
    out.ln_eps = p.ln_eps;
    return out;
}

inline ConvUnitT<Var> lift_params(Graph& g, const ConvUnit& u, bool track) {
    ConvUnitT<Var> out;
    out.weight = lift(g, u.weight, track);
    if (u.bias) out.bias = lift(g, *u.bias, track);
    out.spec = u.spec;
    if (u.norm) out.norm = AffineT<Var>{lift(g, u.norm->scale, track), lift(g, u.norm->shift, track)};
    return out;
}

inline DwSepUnitT<Var> lift_params(Graph& g, const DwSepUnit& u, bool track) {
    return DwSepUnitT<Var>{lift_params(g, u.dw, track), lift_params(g, u.pw, track)};
}

inline XShuffleParamsT<Var> lift_params(Graph& g, const XShuffleParams& p, bool track) {
    XShuffleParamsT<Var> out;
    out.susa1 = lift_params(g, p.susa1, track);
    out.dw = lift_params(g, p.dw, track);
    out.susa2 = lift_params(g, p.susa2, track);
    return out;
}

inline std::vector<Tensor> flatten_params(const SusaParams& p) {
    std::vector<Tensor> out{p.wq_weight};
    if (p.wq_bias) out.push_back(*p.wq_bias);
    out.push_back(p.wv_weight);
    if (p.wv_bias) out.push_back(*p.wv_bias);
    out.push_back(p.ln_gamma);
    out.push_back(p.ln_beta);
    return out;
}

inline SusaParamsT<Var> susa_params_from_vars(const SusaParams& shape_like,
                                              const std::vector<Var>& vars, std::size_t& at) {
    SusaParamsT<Var> out;
    out.wq_weight = vars[at++];
    if (shape_like.wq_bias) out.wq_bias = vars[at++];
    out.wv_weight = vars[at++];
    if (shape_like.wv_bias) out.wv_bias = vars[at++];
    out.ln_gamma = vars[at++];
    out.ln_beta = vars[at++];
    out.ln_eps = shape_like.ln_eps;
    return out;
}

inline std::vector<Tensor> flatten_params(const GcParams& p) {
    return {p.key_weight, p.down, p.up, p.ln_gamma, p.ln_beta};
}

inline GcParamsT<Var> gc_params_from_vars(const GcParams& shape_like,
                                          const std::vector<Var>& vars, std::size_t& at) {
    GcParamsT<Var> out;
    out.key_weight = vars[at++];
    out.down = vars[at++];
    out.up = vars[at++];
    out.ln_gamma = vars[at++];
    out.ln_beta = vars[at++];
    out.ln_eps = shape_like.ln_eps;
    return out;
}

inline std::vector<Tensor> flatten_params(const ConvUnit& u) {
    std::vector<Tensor> out{u.weight};
    if (u.bias) out.push_back(*u.bias);
    if (u.norm) {
        out.push_back(u.norm->scale);
        out.push_back(u.norm->shift);
    }
    return out;
}

inline ConvUnitT<Var> conv_unit_from_vars(const ConvUnit& shape_like,
                                          const std::vector<Var>& vars, std::size_t& at) {
    ConvUnitT<Var> out;
    out.spec = shape_like.spec;
    out.weight = vars[at++];
    if (shape_like.bias) out.bias = vars[at++];
    if (shape_like.norm) {
        out.norm = AffineT<Var>{vars[at], vars[at + 1]};
        at += 2;
    }
    return out;
}

inline std::vector<Tensor> flatten_params(const DwSepUnit& u) {
    auto out = flatten_params(u.dw);
    auto pw = flatten_params(u.pw);
    out.insert(out.end(), pw.begin(), pw.end());
    return out;
}

inline DwSepUnitT<Var> dw_sep_from_vars(const DwSepUnit& shape_like,
                                        const std::vector<Var>& vars, std::size_t& at) {
    DwSepUnitT<Var> out;
    out.dw = conv_unit_from_vars(shape_like.dw, vars, at);
    out.pw = conv_unit_from_vars(shape_like.pw, vars, at);
    return out;
}

inline std::vector<Tensor> flatten_params(const XShuffleParams& p) {
    auto out = flatten_params(p.susa1);
    auto dw = flatten_params(p.dw);
    auto s2 = flatten_params(p.susa2);
    out.insert(out.end(), dw.begin(), dw.end());
    out.insert(out.end(), s2.begin(), s2.end());
    return out;
}

inline XShuffleParamsT<Var> x_shuffle_from_vars(const XShuffleParams& shape_like,
                                                const std::vector<Var>& vars, std::size_t& at) {
    XShuffleParamsT<Var> out;
    out.susa1 = susa_params_from_vars(shape_like.susa1, vars, at);
    out.dw = conv_unit_from_vars(shape_like.dw, vars, at);
    out.susa2 = susa_params_from_vars(shape_like.susa2, vars, at);
    return out;
}

}  // namespace xhrnet
