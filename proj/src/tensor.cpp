#include "xhrnet/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

namespace xhrnet {

std::string shape_str(const std::vector<int>& shape) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << ',';
        os << shape[i];
    }
    os << ']';
    return os.str();
}

std::size_t shape_numel(const std::vector<int>& shape) {
    std::size_t n = 1;
    for (int e : shape) n *= static_cast<std::size_t>(e);
    return n;
}

static void check_shape(const std::vector<int>& shape) {
    if (shape.empty()) throw DimError("tensor shape must have at least one extent");
    for (int e : shape) {
        if (e < 1) throw DimError("tensor extents must be >= 1, got " + shape_str(shape));
    }
}

Tensor::Tensor(std::vector<int> shape) : shape_(std::move(shape)) {
    check_shape(shape_);
    data_.assign(shape_numel(shape_), 0.0);
}

Tensor::Tensor(std::vector<int> shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
    check_shape(shape_);
    if (data_.size() != shape_numel(shape_)) {
        throw DimError("data length " + std::to_string(data_.size()) +
                       " does not match shape " + shape_str(shape_));
    }
}

Tensor Tensor::full(std::vector<int> shape, double value) {
    Tensor t(std::move(shape));
    std::fill(t.data_.begin(), t.data_.end(), value);
    return t;
}

Tensor Tensor::scalar(double value) { return Tensor({1}, {value}); }

int Tensor::extent(int axis) const {
    if (axis < 0 || axis >= rank()) {
        throw DimError("axis " + std::to_string(axis) + " out of range for rank " +
                       std::to_string(rank()));
    }
    return shape_[static_cast<std::size_t>(axis)];
}

std::size_t Tensor::flat_index(std::initializer_list<int> idx) const {
    if (static_cast<int>(idx.size()) != rank()) {
        throw DimError("index rank mismatch");
    }
    std::size_t flat = 0;
    int axis = 0;
    for (int i : idx) {
        if (i < 0 || i >= shape_[static_cast<std::size_t>(axis)]) {
            throw DimError("index out of bounds at axis " + std::to_string(axis));
        }
        flat = flat * static_cast<std::size_t>(shape_[static_cast<std::size_t>(axis)]) +
               static_cast<std::size_t>(i);
        ++axis;
    }
    return flat;
}

double Tensor::at(std::initializer_list<int> idx) const { return data_[flat_index(idx)]; }
double& Tensor::at(std::initializer_list<int> idx) { return data_[flat_index(idx)]; }

// ---- elementwise -----------------------------------------------------------

Tensor elementwise(EwKind kind, const Tensor& a, const Tensor& b) {
    if (a.rank() != b.rank()) {
        throw DimError("elementwise rank mismatch: " + shape_str(a.shape()) + " vs " +
                       shape_str(b.shape()));
    }
    const int r = a.rank();
    for (int d = 0; d < r; ++d) {
        if (b.shape()[d] != a.shape()[d] && b.shape()[d] != 1) {
            throw DimError("shape " + shape_str(b.shape()) +
                           " does not broadcast over " + shape_str(a.shape()));
        }
    }
    Tensor out(a.shape());
    std::vector<int> idx(static_cast<std::size_t>(r), 0);
    std::vector<std::size_t> bstride(static_cast<std::size_t>(r));
    std::size_t s = 1;
    for (int d = r - 1; d >= 0; --d) {
        bstride[static_cast<std::size_t>(d)] = (b.shape()[d] == 1) ? 0 : s;
        s *= static_cast<std::size_t>(b.shape()[d]);
    }
    std::size_t bflat = 0;
    const std::size_t n = a.size();
    for (std::size_t i = 0; i < n; ++i) {
        const double av = a[i];
        const double bv = b[bflat];
        out[i] = (kind == EwKind::Add) ? av + bv : av * bv;
        // odometer increment over a's index space, tracking b's flat offset
        for (int d = r - 1; d >= 0; --d) {
            auto ud = static_cast<std::size_t>(d);
            if (++idx[ud] < a.shape()[d]) {
                bflat += bstride[ud];
                break;
            }
            idx[ud] = 0;
            bflat -= bstride[ud] * static_cast<std::size_t>(a.shape()[d] - 1);
        }
    }
    return out;
}

Tensor add(const Tensor& a, const Tensor& b) { return elementwise(EwKind::Add, a, b); }
Tensor mul(const Tensor& a, const Tensor& b) { return elementwise(EwKind::Mul, a, b); }

Tensor scale(const Tensor& a, double factor) {
    Tensor out = a;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] *= factor;
    return out;
}

// ---- reductions ------------------------------------------------------------

namespace {

struct AxisSplit {
    std::size_t outer, extent, inner;
};

AxisSplit split_at(const Tensor& x, int axis) {
    if (axis < 0 || axis >= x.rank()) {
        throw DimError("axis " + std::to_string(axis) + " out of range for shape " +
                       shape_str(x.shape()));
    }
    AxisSplit s{1, static_cast<std::size_t>(x.shape()[axis]), 1};
    for (int d = 0; d < axis; ++d) s.outer *= static_cast<std::size_t>(x.shape()[d]);
    for (int d = axis + 1; d < x.rank(); ++d) s.inner *= static_cast<std::size_t>(x.shape()[d]);
    return s;
}

}  // namespace

Tensor reduce_sum(const Tensor& x, int axis) {
    const AxisSplit s = split_at(x, axis);
    std::vector<int> oshape = x.shape();
    oshape[static_cast<std::size_t>(axis)] = 1;
    Tensor out(oshape);
    for (std::size_t o = 0; o < s.outer; ++o) {
        for (std::size_t i = 0; i < s.inner; ++i) {
            double acc = 0.0;
            for (std::size_t k = 0; k < s.extent; ++k) {
                acc += x[(o * s.extent + k) * s.inner + i];
            }
            out[o * s.inner + i] = acc;
        }
    }
    return out;
}

Tensor reduce_mean(const Tensor& x, int axis) {
    Tensor out = reduce_sum(x, axis);
    const double inv = 1.0 / static_cast<double>(x.shape()[axis]);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] *= inv;
    return out;
}

double sum_all(const Tensor& x) {
    double acc = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) acc += x[i];
    return acc;
}

Tensor softmax(const Tensor& x, int axis) {
    const AxisSplit s = split_at(x, axis);
    Tensor out(x.shape());
    for (std::size_t o = 0; o < s.outer; ++o) {
        for (std::size_t i = 0; i < s.inner; ++i) {
            double mx = -std::numeric_limits<double>::infinity();
            for (std::size_t k = 0; k < s.extent; ++k) {
                mx = std::max(mx, x[(o * s.extent + k) * s.inner + i]);
            }
            double denom = 0.0;
            for (std::size_t k = 0; k < s.extent; ++k) {
                const std::size_t p = (o * s.extent + k) * s.inner + i;
                const double e = std::exp(x[p] - mx);
                out[p] = e;
                denom += e;
            }
            for (std::size_t k = 0; k < s.extent; ++k) {
                out[(o * s.extent + k) * s.inner + i] /= denom;
            }
        }
    }
    return out;
}

Tensor sigmoid(const Tensor& x) {
    Tensor out(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double v = x[i];
        if (v >= 0.0) {
            out[i] = 1.0 / (1.0 + std::exp(-v));
        } else {
            const double e = std::exp(v);
            out[i] = e / (1.0 + e);
        }
    }
    return out;
}

Tensor relu(const Tensor& x) {
    Tensor out(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] > 0.0 ? x[i] : 0.0;
    return out;
}

Tensor layer_norm_channels(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps) {
    const int c = x.shape()[0];
    if (gamma.rank() != 1 || gamma.shape()[0] != c || beta.rank() != 1 || beta.shape()[0] != c) {
        throw DimError("layer_norm gamma/beta must have shape [" + std::to_string(c) + "]");
    }
    const std::size_t positions = x.size() / static_cast<std::size_t>(c);
    Tensor out(x.shape());
    for (std::size_t p = 0; p < positions; ++p) {
        double mean = 0.0;
        for (int ch = 0; ch < c; ++ch) mean += x[static_cast<std::size_t>(ch) * positions + p];
        mean /= c;
        double var = 0.0;
        for (int ch = 0; ch < c; ++ch) {
            const double d = x[static_cast<std::size_t>(ch) * positions + p] - mean;
            var += d * d;
        }
        var /= c;
        const double inv_std = 1.0 / std::sqrt(var + eps);
        for (int ch = 0; ch < c; ++ch) {
            const std::size_t at = static_cast<std::size_t>(ch) * positions + p;
            out[at] = gamma[static_cast<std::size_t>(ch)] * (x[at] - mean) * inv_std +
                      beta[static_cast<std::size_t>(ch)];
        }
    }
    return out;
}

// ---- convolution ------------------------------------------------------------

void ConvSpec::validate() const {
    if (in_channels < 1 || out_channels < 1) throw SpecError("conv channels must be >= 1");
    if (kh < 1 || kw < 1 || sh < 1 || sw < 1) throw SpecError("conv kernel/stride must be >= 1");
    if (ph < 0 || pw < 0) throw SpecError("conv padding must be >= 0");
    if (groups < 1 || in_channels % groups != 0 || out_channels % groups != 0) {
        throw SpecError("conv groups " + std::to_string(groups) + " must divide channels " +
                        std::to_string(in_channels) + "/" + std::to_string(out_channels));
    }
}

std::pair<int, int> ConvSpec::out_hw(int h, int w) const {
    const int oh = (h + 2 * ph - kh) / sh + 1;
    const int ow = (w + 2 * pw - kw) / sw + 1;
    if (oh < 1 || ow < 1) throw DimError("conv output would be empty");
    return {oh, ow};
}

std::vector<int> ConvSpec::weight_shape() const {
    return {out_channels, in_channels / groups, kh, kw};
}

Tensor conv2d(const Tensor& x, const Tensor& weight, const std::optional<Tensor>& bias,
              const ConvSpec& spec) {
    spec.validate();
    if (x.rank() != 3) throw DimError("conv2d expects a [C,H,W] input");
    if (x.shape()[0] != spec.in_channels) {
        throw DimError("conv2d input has " + std::to_string(x.shape()[0]) +
                       " channels, spec says " + std::to_string(spec.in_channels));
    }
    if (weight.shape() != spec.weight_shape()) {
        throw DimError("conv2d weight shape " + shape_str(weight.shape()) + " != expected " +
                       shape_str(spec.weight_shape()));
    }
    if (spec.has_bias) {
        if (!bias || bias->rank() != 1 || bias->shape()[0] != spec.out_channels) {
            throw DimError("conv2d bias must have shape [out_channels]");
        }
    }
    const int h = x.shape()[1], w = x.shape()[2];
    const auto [oh, ow] = spec.out_hw(h, w);
    const int icpg = spec.in_channels / spec.groups;
    const int ocpg = spec.out_channels / spec.groups;

    Tensor out({spec.out_channels, oh, ow});
    const double* xd = x.data();
    const double* wd = weight.data();
    double* od = out.data();
    for (int oc = 0; oc < spec.out_channels; ++oc) {
        const int g = oc / ocpg;
        const double b = spec.has_bias ? (*bias)[static_cast<std::size_t>(oc)] : 0.0;
        for (int oy = 0; oy < oh; ++oy) {
            for (int ox = 0; ox < ow; ++ox) {
                double acc = b;
                for (int ic = 0; ic < icpg; ++ic) {
                    const int xc = g * icpg + ic;
                    for (int ky = 0; ky < spec.kh; ++ky) {
                        const int iy = oy * spec.sh - spec.ph + ky;
                        if (iy < 0 || iy >= h) continue;
                        for (int kx = 0; kx < spec.kw; ++kx) {
                            const int ix = ox * spec.sw - spec.pw + kx;
                            if (ix < 0 || ix >= w) continue;
                            acc += xd[(static_cast<std::size_t>(xc) * h + iy) * w + ix] *
                                   wd[((static_cast<std::size_t>(oc) * icpg + ic) * spec.kh + ky) *
                                          spec.kw +
                                      kx];
                        }
                    }
                }
                od[(static_cast<std::size_t>(oc) * oh + oy) * ow + ox] = acc;
            }
        }
    }
    return out;
}

// ---- resize ------------------------------------------------------------------

Tensor resize(const Tensor& x, std::pair<int, int> out_hw, ResizeMode mode) {
    if (x.rank() != 3) throw DimError("resize expects a [C,H,W] input");
    const auto [h2, w2] = out_hw;
    if (h2 < 1 || w2 < 1) throw DimError("resize target extents must be >= 1");
    const int c = x.shape()[0], h = x.shape()[1], w = x.shape()[2];
    Tensor out({c, h2, w2});
    const double sy = static_cast<double>(h) / h2;
    const double sx = static_cast<double>(w) / w2;
    for (int ch = 0; ch < c; ++ch) {
        for (int oy = 0; oy < h2; ++oy) {
            for (int ox = 0; ox < w2; ++ox) {
                double v;
                if (mode == ResizeMode::Nearest) {
                    const int iy = std::min(static_cast<int>(oy * sy), h - 1);
                    const int ix = std::min(static_cast<int>(ox * sx), w - 1);
                    v = x.at({ch, iy, ix});
                } else {
                    const double fy = std::clamp((oy + 0.5) * sy - 0.5, 0.0, h - 1.0);
                    const double fx = std::clamp((ox + 0.5) * sx - 0.5, 0.0, w - 1.0);
                    const int y0 = static_cast<int>(fy);
                    const int x0 = static_cast<int>(fx);
                    const int y1 = std::min(y0 + 1, h - 1);
                    const int x1 = std::min(x0 + 1, w - 1);
                    const double ty = fy - y0, tx = fx - x0;
                    v = (1 - ty) * ((1 - tx) * x.at({ch, y0, x0}) + tx * x.at({ch, y0, x1})) +
                        ty * ((1 - tx) * x.at({ch, y1, x0}) + tx * x.at({ch, y1, x1}));
                }
                out.at({ch, oy, ox}) = v;
            }
        }
    }
    return out;
}

// ---- channel reorganization ----------------------------------------------------

std::pair<Tensor, Tensor> split_half(const Tensor& x) {
    if (x.rank() != 3) throw DimError("split_half expects a [C,H,W] input");
    const int c = x.shape()[0];
    if (c % 2 != 0) throw SpecError("split_half needs an even channel count, got " + std::to_string(c));
    const std::size_t plane = x.size() / static_cast<std::size_t>(c);
    const int half = c / 2;
    Tensor a({half, x.shape()[1], x.shape()[2]});
    Tensor b({half, x.shape()[1], x.shape()[2]});
    std::copy(x.data(), x.data() + static_cast<std::size_t>(half) * plane, a.data());
    std::copy(x.data() + static_cast<std::size_t>(half) * plane, x.data() + x.size(), b.data());
    return {std::move(a), std::move(b)};
}

Tensor concat_channels(const Tensor& a, const Tensor& b) {
    if (a.rank() != 3 || b.rank() != 3 || a.shape()[1] != b.shape()[1] ||
        a.shape()[2] != b.shape()[2]) {
        throw DimError("concat_channels needs matching spatial extents");
    }
    Tensor out({a.shape()[0] + b.shape()[0], a.shape()[1], a.shape()[2]});
    std::copy(a.data(), a.data() + a.size(), out.data());
    std::copy(b.data(), b.data() + b.size(), out.data() + a.size());
    return out;
}

Tensor channel_shuffle(const Tensor& x, int groups) {
    if (x.rank() != 3) throw DimError("channel_shuffle expects a [C,H,W] input");
    const int c = x.shape()[0];
    if (groups < 1 || c % groups != 0) {
        throw SpecError("channel_shuffle groups " + std::to_string(groups) +
                        " must divide channels " + std::to_string(c));
    }
    const int per = c / groups;
    const std::size_t plane = x.size() / static_cast<std::size_t>(c);
    Tensor out(x.shape());
    // reshape C -> (groups, per), transpose, flatten: src g*per+j -> dst j*groups+g
    for (int g = 0; g < groups; ++g) {
        for (int j = 0; j < per; ++j) {
            const std::size_t src = static_cast<std::size_t>(g * per + j) * plane;
            const std::size_t dst = static_cast<std::size_t>(j * groups + g) * plane;
            std::copy(x.data() + src, x.data() + src + plane, out.data() + dst);
        }
    }
    return out;
}

// ---- helpers -------------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.rank() != 2 || b.rank() != 2 || a.shape()[1] != b.shape()[0]) {
        throw DimError("matmul shapes " + shape_str(a.shape()) + " x " + shape_str(b.shape()));
    }
    const int m = a.shape()[0], k = a.shape()[1], n = b.shape()[1];
    Tensor out({m, n});
    for (int i = 0; i < m; ++i) {
        for (int j = 0; j < n; ++j) {
            double acc = 0.0;
            for (int t = 0; t < k; ++t) {
                acc += a[static_cast<std::size_t>(i * k + t)] *
                       b[static_cast<std::size_t>(t * n + j)];
            }
            out[static_cast<std::size_t>(i * n + j)] = acc;
        }
    }
    return out;
}

Tensor reshape(const Tensor& x, std::vector<int> shape) {
    if (shape_numel(shape) != x.size()) {
        throw DimError("reshape " + shape_str(x.shape()) + " -> " + shape_str(shape) +
                       " changes element count");
    }
    return Tensor(std::move(shape), x.values());
}

Tensor random_uniform(std::vector<int> shape, std::uint64_t seed, double lo, double hi) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> dist(lo, hi);
    Tensor t(std::move(shape));
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = dist(rng);
    return t;
}

}  // namespace xhrnet
