#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "xhrnet/errors.hpp"

namespace xhrnet {

// Dense row-major N-d array of doubles. Values are treated as immutable once
// an operation has produced them; every op below is a pure function.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(std::vector<int> shape);  // zero-filled
    Tensor(std::vector<int> shape, std::vector<double> data);

    static Tensor full(std::vector<int> shape, double value);
    static Tensor scalar(double value);  // shape [1]

    const std::vector<int>& shape() const { return shape_; }
    int rank() const { return static_cast<int>(shape_.size()); }
    int extent(int axis) const;
    std::size_t size() const { return data_.size(); }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    const std::vector<double>& values() const { return data_; }

    double at(std::initializer_list<int> idx) const;
    double& at(std::initializer_list<int> idx);
    double operator[](std::size_t i) const { return data_[i]; }
    double& operator[](std::size_t i) { return data_[i]; }

    bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

private:
    std::size_t flat_index(std::initializer_list<int> idx) const;

    std::vector<int> shape_;
    std::vector<double> data_;
};

std::string shape_str(const std::vector<int>& shape);
std::size_t shape_numel(const std::vector<int>& shape);

// ---- elementwise -----------------------------------------------------------

enum class EwKind { Add, Mul };

// b may have any extent of a's shape replaced by 1; it is broadcast over
// those axes. No other broadcasting is supported.
Tensor elementwise(EwKind kind, const Tensor& a, const Tensor& b);
Tensor add(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);

// ---- reductions and activations --------------------------------------------

// Keep the reduced axis with extent 1.
Tensor reduce_mean(const Tensor& x, int axis);
Tensor reduce_sum(const Tensor& x, int axis);
double sum_all(const Tensor& x);

Tensor softmax(const Tensor& x, int axis);  // max-subtracted for stability
Tensor sigmoid(const Tensor& x);
Tensor relu(const Tensor& x);

// Normalize across the leading (channel) axis at every trailing position,
// then scale by gamma and shift by beta per channel. eps sits inside the sqrt.
Tensor layer_norm_channels(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps);

// ---- convolution ------------------------------------------------------------

struct ConvSpec {
    int in_channels = 0;
    int out_channels = 0;
    int kh = 1, kw = 1;
    int sh = 1, sw = 1;
    int ph = 0, pw = 0;
    int groups = 1;
    bool has_bias = false;

    void validate() const;  // throws SpecError
    std::pair<int, int> out_hw(int h, int w) const;
    std::vector<int> weight_shape() const;  // [out, in/groups, kh, kw]
};

// Cross-correlation with zero padding on a [C,H,W] map.
Tensor conv2d(const Tensor& x, const Tensor& weight, const std::optional<Tensor>& bias,
              const ConvSpec& spec);

// ---- resampling and channel reorganization ----------------------------------

enum class ResizeMode { Nearest, Bilinear };

// Nearest takes floor of the scaled source index; bilinear is align-corners-false.
Tensor resize(const Tensor& x, std::pair<int, int> out_hw, ResizeMode mode);

std::pair<Tensor, Tensor> split_half(const Tensor& x);       // channel axis, even C
Tensor concat_channels(const Tensor& a, const Tensor& b);
Tensor channel_shuffle(const Tensor& x, int groups);         // reshape-transpose-flatten

// ---- small linear-algebra helpers -------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b);             // [M,K] x [K,N]
Tensor reshape(const Tensor& x, std::vector<int> shape);     // same element count

// Seeded uniform values in [lo, hi); used by tests and parameter init.
Tensor random_uniform(std::vector<int> shape, std::uint64_t seed, double lo = -1.0,
                      double hi = 1.0);

}  // namespace xhrnet
