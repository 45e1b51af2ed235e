#include "xhrnet/autograd.hpp"

#include <algorithm>
#include <cmath>

namespace xhrnet {

const Tensor& Var::value() const {
    if (!g_) throw UsageError("Var is not bound to a graph");
    return g_->value_of(id_);
}

const Tensor& Graph::value_of(int id) const { return nodes_[static_cast<std::size_t>(id)].value; }

Var Graph::emplace(Tensor value, std::vector<int> parents, BackwardFn backward) {
    nodes_.push_back(Node{std::move(value), std::move(parents), std::move(backward), false});
    return Var(this, static_cast<int>(nodes_.size()) - 1);
}

Var Graph::input(Tensor value) {
    Var v = emplace(std::move(value), {}, nullptr);
    nodes_.back().tracked = true;
    return v;
}

Var Graph::constant(Tensor value) { return emplace(std::move(value), {}, nullptr); }

void Graph::accumulate(int id, const Tensor& g) {
    auto& slot = grads_[static_cast<std::size_t>(id)];
    if (!slot) {
        slot = g;
    } else {
        slot = xhrnet::add(*slot, g);
    }
}

namespace {

// Sum g over the axes where target has extent 1, keeping rank.
Tensor reduce_to_shape(const Tensor& g, const std::vector<int>& target) {
    Tensor out = g;
    for (int d = 0; d < static_cast<int>(target.size()); ++d) {
        if (target[static_cast<std::size_t>(d)] == 1 && out.shape()[d] != 1) {
            out = reduce_sum(out, d);
        }
    }
    return out;
}

// Expand g (singleton axes) to shape by repetition.
Tensor broadcast_to(const Tensor& g, const std::vector<int>& shape) {
    return mul(Tensor::full(shape, 1.0), g);
}

}  // namespace

Var Graph::add(Var a, Var b) {
    Tensor out = xhrnet::add(a.value(), b.value());
    const std::vector<int> bshape = b.value().shape();
    return emplace(std::move(out), {a.id(), b.id()},
                   [bshape](Graph& g, const Tensor& gout, int self) {
                       const auto& n = g.nodes_[static_cast<std::size_t>(self)];
                       g.accumulate(n.parents[0], gout);
                       g.accumulate(n.parents[1], reduce_to_shape(gout, bshape));
                   });
}

Var Graph::mul(Var a, Var b) {
    Tensor out = xhrnet::mul(a.value(), b.value());
    return emplace(std::move(out), {a.id(), b.id()},
                   [](Graph& g, const Tensor& gout, int self) {
                       const auto& n = g.nodes_[static_cast<std::size_t>(self)];
                       const Tensor& av = g.value_of(n.parents[0]);
                       const Tensor& bv = g.value_of(n.parents[1]);
                       g.accumulate(n.parents[0], xhrnet::mul(gout, bv));
                       g.accumulate(n.parents[1],
                                    reduce_to_shape(xhrnet::mul(gout, av), bv.shape()));
                   });
}

Var Graph::scale(Var a, double factor) {
    return emplace(xhrnet::scale(a.value(), factor), {a.id()},
                   [factor](Graph& g, const Tensor& gout, int self) {
                       const auto& n = g.nodes_[static_cast<std::size_t>(self)];
                       g.accumulate(n.parents[0], xhrnet::scale(gout, factor));
                   });
}

Var Graph::reduce_mean(Var x, int axis) {
    const double inv = 1.0 / x.value().shape()[axis];
    const std::vector<int> xshape = x.value().shape();
    return emplace(xhrnet::reduce_mean(x.value(), axis), {x.id()},
                   [inv, xshape](Graph& g, const Tensor& gout, int self) {
                       const auto& n = g.nodes_[static_cast<std::size_t>(self)];
                       g.accumulate(n.parents[0],
                                    xhrnet::scale(broadcast_to(gout, xshape), inv));
                   });
}

Var Graph::reduce_sum(Var x, int axis) {
    const std::vector<int> xshape = x.value().shape();
    return emplace(xhrnet::reduce_sum(x.value(), axis), {x.id()},
                   [xshape](Graph& g, const Tensor& gout, int self) {
                       const auto& n = g.nodes_[static_cast<std::size_t>(self)];
                       g.accumulate(n.parents[0], broadcast_to(gout, xshape));
                   });
}

Var Graph::softmax(Var x, int axis) {
    // dx = y * (g - sum_axis(g*y))
    return emplace(xhrnet::softmax(x.value(), axis), {x.id()},
                   [axis](Graph& g, const Tensor& gout, int self) {
                       const auto& n = g.nodes_[static_cast<std::size_t>(self)];
                       const Tensor& y = n.value;
                       Tensor gy = xhrnet::mul(gout, y);
                       Tensor dot = xhrnet::reduce_sum(gy, axis);
                       Tensor inner = xhrnet::add(gout, xhrnet::scale(broadcast_to(dot, gout.shape()), -1.0));
                       g.accumulate(n.parents[0], xhrnet::mul(y, inner));
                   });
}

Var Graph::sigmoid(Var x) {
    return emplace(xhrnet::sigmoid(x.value()), {x.id()},
                   [](Graph& g, const Tensor& gout, int self) {
                       const auto& n = g.nodes_[static_cast<std::size_t>(self)];
                       const Tensor& y = n.value;
                       Tensor d(y.shape());
                       for (std::size_t i = 0; i < y.size(); ++i) {
                           d[i] = gout[i] * y[i] * (1.0 - y[i]);
                       }
                       g.accumulate(n.parents[0], d);
                   });
}

Var Graph::relu(Var x) {
    return emplace(xhrnet::relu(x.value()), {x.id()},
                   [](Graph& g, const Tensor& gout, int self) {
                       const auto& n = g.nodes_[static_cast<std::size_t>(self)];
                       const Tensor& xv = g.value_of(n.parents[0]);
                       Tensor d(xv.shape());
                       for (std::size_t i = 0; i < xv.size(); ++i) {
                           d[i] = xv[i] > 0.0 ? gout[i] : 0.0;
                       }
                       g.accumulate(n.parents[0], d);
                   });
}

Var Graph::layer_norm(Var x, Var gamma, Var beta, double eps) {
    // Save the normalized activations and 1/std per position; backward reuses
    // them instead of recomputing statistics.
    const Tensor& xv = x.value();
    const int c = xv.shape()[0];
    const std::size_t positions = xv.size() / static_cast<std::size_t>(c);
    Tensor x_hat(xv.shape());
    std::vector<double> inv_std(positions);
    for (std::size_t p = 0; p < positions; ++p) {
        double mean = 0.0;
        for (int ch = 0; ch < c; ++ch) mean += xv[static_cast<std::size_t>(ch) * positions + p];
        mean /= c;
        double var = 0.0;
        for (int ch = 0; ch < c; ++ch) {
            const double d = xv[static_cast<std::size_t>(ch) * positions + p] - mean;
            var += d * d;
        }
        var /= c;
        inv_std[p] = 1.0 / std::sqrt(var + eps);
        for (int ch = 0; ch < c; ++ch) {
            const std::size_t at = static_cast<std::size_t>(ch) * positions + p;
            x_hat[at] = (xv[at] - mean) * inv_std[p];
        }
    }
    Tensor out = xhrnet::layer_norm_channels(xv, gamma.value(), beta.value(), eps);
    return emplace(
        std::move(out), {x.id(), gamma.id(), beta.id()},
        [x_hat, inv_std, c, positions](Graph& g, const Tensor& gout, int self) {
            const auto& n = g.nodes_[static_cast<std::size_t>(self)];
            const Tensor& gm = g.value_of(n.parents[1]);
            Tensor dgamma({c});
            Tensor dbeta({c});
            Tensor dx(x_hat.shape());
            for (std::size_t p = 0; p < positions; ++p) {
                double mean_gy = 0.0, mean_gy_xhat = 0.0;
                for (int ch = 0; ch < c; ++ch) {
                    const std::size_t at = static_cast<std::size_t>(ch) * positions + p;
                    const double gy = gout[at] * gm[static_cast<std::size_t>(ch)];
                    mean_gy += gy;
                    mean_gy_xhat += gy * x_hat[at];
                }
                mean_gy /= c;
                mean_gy_xhat /= c;
                for (int ch = 0; ch < c; ++ch) {
                    const std::size_t at = static_cast<std::size_t>(ch) * positions + p;
                    const double gy = gout[at] * gm[static_cast<std::size_t>(ch)];
                    dx[at] = (gy - mean_gy - x_hat[at] * mean_gy_xhat) * inv_std[p];
                    dgamma[static_cast<std::size_t>(ch)] += gout[at] * x_hat[at];
                    dbeta[static_cast<std::size_t>(ch)] += gout[at];
                }
            }
            g.accumulate(n.parents[0], dx);
            g.accumulate(n.parents[1], dgamma);
            g.accumulate(n.parents[2], dbeta);
        });
}

Var Graph::conv2d(Var x, Var weight, std::optional<Var> bias, const ConvSpec& spec) {
    std::optional<Tensor> bv;
    std::vector<int> parents{x.id(), weight.id()};
    if (spec.has_bias) {
        if (!bias) throw SpecError("conv2d spec has bias but no bias tensor was given");
        bv = bias->value();
        parents.push_back(bias->id());
    }
    Tensor out = xhrnet::conv2d(x.value(), weight.value(), bv, spec);
    return emplace(
        std::move(out), std::move(parents),
        [spec](Graph& g, const Tensor& gout, int self) {
            const auto& n = g.nodes_[static_cast<std::size_t>(self)];
            const Tensor& xv = g.value_of(n.parents[0]);
            const Tensor& wv = g.value_of(n.parents[1]);
            const int h = xv.shape()[1], w = xv.shape()[2];
            const int oh = gout.shape()[1], ow = gout.shape()[2];
            const int icpg = spec.in_channels / spec.groups;
            const int ocpg = spec.out_channels / spec.groups;
            Tensor dx(xv.shape());
            Tensor dw(wv.shape());
            Tensor db({spec.out_channels});
            for (int oc = 0; oc < spec.out_channels; ++oc) {
                const int grp = oc / ocpg;
                for (int oy = 0; oy < oh; ++oy) {
                    for (int ox = 0; ox < ow; ++ox) {
                        const double go =
                            gout[(static_cast<std::size_t>(oc) * oh + oy) * ow + ox];
                        if (spec.has_bias) db[static_cast<std::size_t>(oc)] += go;
                        for (int ic = 0; ic < icpg; ++ic) {
                            const int xc = grp * icpg + ic;
                            for (int ky = 0; ky < spec.kh; ++ky) {
                                const int iy = oy * spec.sh - spec.ph + ky;
                                if (iy < 0 || iy >= h) continue;
                                for (int kx = 0; kx < spec.kw; ++kx) {
                                    const int ix = ox * spec.sw - spec.pw + kx;
                                    if (ix < 0 || ix >= w) continue;
                                    const std::size_t xat =
                                        (static_cast<std::size_t>(xc) * h + iy) * w + ix;
                                    const std::size_t wat =
                                        ((static_cast<std::size_t>(oc) * icpg + ic) * spec.kh +
                                         ky) *
                                            spec.kw +
                                        kx;
                                    dx[xat] += go * wv[wat];
                                    dw[wat] += go * xv[xat];
                                }
                            }
                        }
                    }
                }
            }
            g.accumulate(n.parents[0], dx);
            g.accumulate(n.parents[1], dw);
            if (spec.has_bias) g.accumulate(n.parents[2], db);
        });
}

Var Graph::matmul(Var a, Var b) {
    return emplace(xhrnet::matmul(a.value(), b.value()), {a.id(), b.id()},
                   [](Graph& g, const Tensor& gout, int self) {
                       const auto& n = g.nodes_[static_cast<std::size_t>(self)];
                       const Tensor& av = g.value_of(n.parents[0]);
                       const Tensor& bv = g.value_of(n.parents[1]);
                       const int m = av.shape()[0], k = av.shape()[1], nn = bv.shape()[1];
                       Tensor da(av.shape());
                       Tensor db(bv.shape());
                       for (int i = 0; i < m; ++i) {
                           for (int t = 0; t < k; ++t) {
                               double acc = 0.0;
                               for (int j = 0; j < nn; ++j) {
                                   acc += gout[static_cast<std::size_t>(i * nn + j)] *
                                          bv[static_cast<std::size_t>(t * nn + j)];
                               }
                               da[static_cast<std::size_t>(i * k + t)] = acc;
                           }
                       }
                       for (int t = 0; t < k; ++t) {
                           for (int j = 0; j < nn; ++j) {
                               double acc = 0.0;
                               for (int i = 0; i < m; ++i) {
                                   acc += av[static_cast<std::size_t>(i * k + t)] *
                                          gout[static_cast<std::size_t>(i * nn + j)];
                               }
                               db[static_cast<std::size_t>(t * nn + j)] = acc;
                           }
                       }
                       g.accumulate(n.parents[0], da);
                       g.accumulate(n.parents[1], db);
                   });
}

Var Graph::reshape(Var x, std::vector<int> shape) {
    const std::vector<int> xshape = x.value().shape();
    return emplace(xhrnet::reshape(x.value(), std::move(shape)), {x.id()},
                   [xshape](Graph& g, const Tensor& gout, int self) {
                       const auto& n = g.nodes_[static_cast<std::size_t>(self)];
                       g.accumulate(n.parents[0], xhrnet::reshape(gout, xshape));
                   });
}

Var Graph::resize(Var x, std::pair<int, int> out_hw, ResizeMode mode) {
    const std::vector<int> xshape = x.value().shape();
    return emplace(
        xhrnet::resize(x.value(), out_hw, mode), {x.id()},
        [xshape, out_hw, mode](Graph& g, const Tensor& gout, int self) {
            const auto& n = g.nodes_[static_cast<std::size_t>(self)];
            const int c = xshape[0], h = xshape[1], w = xshape[2];
            const auto [h2, w2] = out_hw;
            const double sy = static_cast<double>(h) / h2;
            const double sx = static_cast<double>(w) / w2;
            Tensor dx(xshape);
            for (int ch = 0; ch < c; ++ch) {
                for (int oy = 0; oy < h2; ++oy) {
                    for (int ox = 0; ox < w2; ++ox) {
                        const double go =
                            gout[(static_cast<std::size_t>(ch) * h2 + oy) * w2 + ox];
                        if (mode == ResizeMode::Nearest) {
                            const int iy = std::min(static_cast<int>(oy * sy), h - 1);
                            const int ix = std::min(static_cast<int>(ox * sx), w - 1);
                            dx[(static_cast<std::size_t>(ch) * h + iy) * w + ix] += go;
                        } else {
                            const double fy = std::clamp((oy + 0.5) * sy - 0.5, 0.0, h - 1.0);
                            const double fx = std::clamp((ox + 0.5) * sx - 0.5, 0.0, w - 1.0);
                            const int y0 = static_cast<int>(fy);
                            const int x0 = static_cast<int>(fx);
                            const int y1 = std::min(y0 + 1, h - 1);
                            const int x1 = std::min(x0 + 1, w - 1);
                            const double ty = fy - y0, tx = fx - x0;
                            dx[(static_cast<std::size_t>(ch) * h + y0) * w + x0] +=
                                go * (1 - ty) * (1 - tx);
                            dx[(static_cast<std::size_t>(ch) * h + y0) * w + x1] +=
                                go * (1 - ty) * tx;
                            dx[(static_cast<std::size_t>(ch) * h + y1) * w + x0] +=
                                go * ty * (1 - tx);
                            dx[(static_cast<std::size_t>(ch) * h + y1) * w + x1] += go * ty * tx;
                        }
                    }
                }
            }
            g.accumulate(n.parents[0], dx);
        });
}

namespace {

Tensor slice_channels_fwd(const Tensor& x, int begin, int count) {
    const std::size_t plane = x.size() / static_cast<std::size_t>(x.shape()[0]);
    Tensor out({count, x.shape()[1], x.shape()[2]});
    std::copy(x.data() + static_cast<std::size_t>(begin) * plane,
              x.data() + static_cast<std::size_t>(begin + count) * plane, out.data());
    return out;
}

}  // namespace

std::pair<Var, Var> Graph::split_half(Var x) {
    const std::vector<int> xshape = x.value().shape();
    if (xshape.size() != 3) throw DimError("split_half expects a [C,H,W] input");
    const int c = xshape[0];
    if (c % 2 != 0) throw SpecError("split_half needs an even channel count");
    const int half = c / 2;
    // emplace may reallocate nodes_, so re-fetch the parent value per slice
    auto make_slice = [&](int begin) {
        Tensor sliced = slice_channels_fwd(value_of(x.id()), begin, half);
        return emplace(std::move(sliced), {x.id()},
                       [xshape, begin, half](Graph& g, const Tensor& gout, int self) {
                           const auto& n = g.nodes_[static_cast<std::size_t>(self)];
                           Tensor dx(xshape);
                           const std::size_t plane =
                               gout.size() / static_cast<std::size_t>(half);
                           std::copy(gout.data(), gout.data() + gout.size(),
                                     dx.data() + static_cast<std::size_t>(begin) * plane);
                           g.accumulate(n.parents[0], dx);
                       });
    };
    Var lo = make_slice(0);
    Var hi = make_slice(half);
    return {lo, hi};
}

Var Graph::concat_channels(Var a, Var b) {
    const int ca = a.value().shape()[0];
    const int cb = b.value().shape()[0];
    return emplace(xhrnet::concat_channels(a.value(), b.value()), {a.id(), b.id()},
                   [ca, cb](Graph& g, const Tensor& gout, int self) {
                       const auto& n = g.nodes_[static_cast<std::size_t>(self)];
                       g.accumulate(n.parents[0], slice_channels_fwd(gout, 0, ca));
                       g.accumulate(n.parents[1], slice_channels_fwd(gout, ca, cb));
                   });
}

Var Graph::channel_shuffle(Var x, int groups) {
    const int c = x.value().shape()[0];
    return emplace(xhrnet::channel_shuffle(x.value(), groups), {x.id()},
                   [c, groups](Graph& g, const Tensor& gout, int self) {
                       const auto& n = g.nodes_[static_cast<std::size_t>(self)];
                       // the permutation's inverse is a shuffle with the co-factor
                       g.accumulate(n.parents[0], xhrnet::channel_shuffle(gout, c / groups));
                   });
}

Var Graph::sum_all(Var x) {
    const std::vector<int> xshape = x.value().shape();
    return emplace(Tensor::scalar(xhrnet::sum_all(x.value())), {x.id()},
                   [xshape](Graph& g, const Tensor& gout, int self) {
                       const auto& n = g.nodes_[static_cast<std::size_t>(self)];
                       g.accumulate(n.parents[0], Tensor::full(xshape, gout[0]));
                   });
}

Var Graph::apply_custom(const std::vector<Var>& inputs, CustomFwd fwd, CustomBwd bwd) {
    std::vector<Tensor> vals;
    std::vector<int> parents;
    vals.reserve(inputs.size());
    for (const Var& v : inputs) {
        vals.push_back(v.value());
        parents.push_back(v.id());
    }
    Tensor out = fwd(vals);
    return emplace(std::move(out), std::move(parents),
                   [bwd](Graph& g, const Tensor& gout, int self) {
                       const auto& n = g.nodes_[static_cast<std::size_t>(self)];
                       std::vector<Tensor> vals;
                       vals.reserve(n.parents.size());
                       for (int p : n.parents) vals.push_back(g.value_of(p));
                       std::vector<Tensor> grads = bwd(vals, n.value, gout);
                       if (grads.size() != n.parents.size()) {
                           throw UsageError("custom backward returned wrong gradient count");
                       }
                       for (std::size_t i = 0; i < grads.size(); ++i) {
                           g.accumulate(n.parents[i], grads[i]);
                       }
                   });
}

void Graph::backward(Var loss) {
    if (loss.g_ != this) throw UsageError("loss belongs to a different graph");
    if (loss.value().size() != 1) {
        throw UsageError("backward requires a scalar loss, got shape " +
                         shape_str(loss.value().shape()));
    }
    grads_.assign(nodes_.size(), std::nullopt);
    grads_[static_cast<std::size_t>(loss.id())] = Tensor::full(loss.value().shape(), 1.0);
    for (int id = loss.id(); id >= 0; --id) {
        const auto& slot = grads_[static_cast<std::size_t>(id)];
        if (!slot) continue;
        const Node& node = nodes_[static_cast<std::size_t>(id)];
        if (node.backward) node.backward(*this, *slot, id);
    }
}

Tensor Graph::grad(Var v) const {
    if (v.g_ != this) throw UsageError("Var belongs to a different graph");
    if (grads_.size() != nodes_.size()) throw UsageError("grad() requires a prior backward()");
    const auto& slot = grads_[static_cast<std::size_t>(v.id())];
    if (slot) return *slot;
    return Tensor(v.value().shape());
}

// ---- finite differences and checking -----------------------------------------

Tensor finite_diff(const std::function<double(const Tensor&)>& fn, const Tensor& x, double eps) {
    if (eps <= 0.0) throw UsageError("finite_diff eps must be positive");
    Tensor grad(x.shape());
    Tensor probe = x;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double orig = probe[i];
        probe[i] = orig + eps;
        const double hi = fn(probe);
        probe[i] = orig - eps;
        const double lo = fn(probe);
        probe[i] = orig;
        grad[i] = (hi - lo) / (2.0 * eps);
    }
    return grad;
}

namespace {

constexpr double kDenomFloor = 1e-8;

// A central difference of a loss of magnitude L carries rounding noise of
// order L*ulp/(2*eps); differences below that are not measurable and count
// as agreement rather than feeding the relative-error ratio.
double fd_noise_bound(double loss_magnitude, double eps) {
    return 32.0 * std::max(loss_magnitude, 1.0) * std::numeric_limits<double>::epsilon() /
           (2.0 * eps);
}

void fold_errors(const Tensor& analytic, const Tensor& numeric, double noise_bound,
                 GradCheckReport& report) {
    for (std::size_t i = 0; i < analytic.size(); ++i) {
        const double a = analytic[i], b = numeric[i];
        const double abs_err = std::fabs(a - b);
        report.max_abs_err = std::max(report.max_abs_err, abs_err);
        ++report.element_count;
        if (abs_err <= noise_bound) continue;
        const double denom = std::max({std::fabs(a), std::fabs(b), kDenomFloor});
        report.max_rel_err = std::max(report.max_rel_err, abs_err / denom);
    }
}

}  // namespace

GradCheckReport grad_check_all(const MultiScalarFn& fn, const std::vector<Tensor>& inputs,
                               double tol, double eps) {
    if (tol <= 0.0) throw UsageError("grad_check tol must be positive");
    Graph g;
    std::vector<Var> vars;
    vars.reserve(inputs.size());
    for (const Tensor& t : inputs) vars.push_back(g.input(t));
    Var loss = fn(g, vars);
    g.backward(loss);
    const double noise_bound = fd_noise_bound(std::fabs(loss.value()[0]), eps);

    GradCheckReport report;
    for (std::size_t k = 0; k < inputs.size(); ++k) {
        Tensor analytic = g.grad(vars[k]);
        auto eval = [&](const Tensor& probe) {
            Graph g2;
            std::vector<Var> vs;
            vs.reserve(inputs.size());
            for (std::size_t j = 0; j < inputs.size(); ++j) {
                vs.push_back(g2.input(j == k ? probe : inputs[j]));
            }
            Var l = fn(g2, vs);
            if (l.value().size() != 1) throw UsageError("grad_check fn must return a scalar");
            return l.value()[0];
        };
        Tensor numeric = finite_diff(eval, inputs[k], eps);
        fold_errors(analytic, numeric, noise_bound, report);
    }
    report.pass = report.max_rel_err <= tol;
    return report;
}

GradCheckReport grad_check(const ScalarFn& fn, const Tensor& x, double tol, double eps) {
    return grad_check_all(
        [&fn](Graph& g, const std::vector<Var>& vs) { return fn(g, vs[0]); }, {x}, tol, eps);
}

}  // namespace xhrnet
