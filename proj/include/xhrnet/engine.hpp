#pragma once

#include <optional>
#include <utility>
#include <vector>

#include "xhrnet/tensor.hpp"

namespace xhrnet {

// Evaluation backend for the layer compositions in susa.hpp / blocks.hpp.
// TensorEngine evaluates eagerly on plain tensors; GraphEngine (see
// graph_engine.hpp) records the same primitives on an autograd tape so the
// identical composition code can be differentiated.
struct TensorEngine {
    using value = Tensor;

    const std::vector<int>& shape(const Tensor& v) const { return v.shape(); }

    Tensor add(const Tensor& a, const Tensor& b) const { return xhrnet::add(a, b); }
    Tensor mul(const Tensor& a, const Tensor& b) const { return xhrnet::mul(a, b); }
    Tensor reduce_mean(const Tensor& x, int axis) const { return xhrnet::reduce_mean(x, axis); }
    Tensor reduce_sum(const Tensor& x, int axis) const { return xhrnet::reduce_sum(x, axis); }
    Tensor softmax(const Tensor& x, int axis) const { return xhrnet::softmax(x, axis); }
    Tensor sigmoid(const Tensor& x) const { return xhrnet::sigmoid(x); }
    Tensor relu(const Tensor& x) const { return xhrnet::relu(x); }
    Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                      double eps) const {
        return xhrnet::layer_norm_channels(x, gamma, beta, eps);
    }
    Tensor conv2d(const Tensor& x, const Tensor& w, const std::optional<Tensor>& b,
                  const ConvSpec& spec) const {
        return xhrnet::conv2d(x, w, b, spec);
    }
    Tensor matmul(const Tensor& a, const Tensor& b) const { return xhrnet::matmul(a, b); }
    Tensor reshape(const Tensor& x, std::vector<int> shape) const {
        return xhrnet::reshape(x, std::move(shape));
    }
    Tensor resize(const Tensor& x, std::pair<int, int> hw, ResizeMode mode) const {
        return xhrnet::resize(x, hw, mode);
    }
    std::pair<Tensor, Tensor> split_half(const Tensor& x) const { return xhrnet::split_half(x); }
    Tensor concat_channels(const Tensor& a, const Tensor& b) const {
        return xhrnet::concat_channels(a, b);
    }
    Tensor channel_shuffle(const Tensor& x, int groups) const {
        return xhrnet::channel_shuffle(x, groups);
    }
};

}  // namespace xhrnet
