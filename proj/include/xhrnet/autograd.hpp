#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "xhrnet/tensor.hpp"

namespace xhrnet {

class Graph;

// Handle to a value recorded on a Graph.
class Var {
public:
    Var() = default;
    const Tensor& value() const;
    int id() const { return id_; }

private:
    friend class Graph;
    Var(Graph* g, int id) : g_(g), id_(id) {}
    Graph* g_ = nullptr;
    int id_ = -1;
};

// Records primitive applications in construction order (already topological)
// and replays them in reverse to accumulate gradients for tracked inputs.
// A Graph is confined to the caller that builds it; distinct graphs are
// independent.
class Graph {
public:
    Var input(Tensor value);     // tracked leaf: receives a gradient
    Var constant(Tensor value);  // untracked leaf

    Var add(Var a, Var b);  // b broadcasts over singleton axes, as in tensor add
    Var mul(Var a, Var b);
    Var scale(Var a, double factor);
    Var reduce_mean(Var x, int axis);
    Var reduce_sum(Var x, int axis);
    Var softmax(Var x, int axis);
    Var sigmoid(Var x);
    Var relu(Var x);
    Var layer_norm(Var x, Var gamma, Var beta, double eps);
    Var conv2d(Var x, Var weight, std::optional<Var> bias, const ConvSpec& spec);
    Var matmul(Var a, Var b);
    Var reshape(Var x, std::vector<int> shape);
    Var resize(Var x, std::pair<int, int> out_hw, ResizeMode mode);
    std::pair<Var, Var> split_half(Var x);
    Var concat_channels(Var a, Var b);
    Var channel_shuffle(Var x, int groups);
    Var sum_all(Var x);  // scalar [1]

    // Escape hatch for composing an op with hand-written derivatives; bwd maps
    // (inputs, output, grad_out) to one gradient per input.
    using CustomFwd = std::function<Tensor(const std::vector<Tensor>&)>;
    using CustomBwd = std::function<std::vector<Tensor>(const std::vector<Tensor>&, const Tensor&,
                                                        const Tensor&)>;
    Var apply_custom(const std::vector<Var>& inputs, CustomFwd fwd, CustomBwd bwd);

    // Runs reverse accumulation from a scalar loss. Throws UsageError if the
    // loss has more than one element. Forward values are never mutated.
    void backward(Var loss);

    // Gradient of the last backward() with respect to a tracked input;
    // zeros if the input does not influence the loss.
    Tensor grad(Var v) const;

    const Tensor& value_of(int id) const;
    std::size_t node_count() const { return nodes_.size(); }

private:
    using BackwardFn = std::function<void(Graph&, const Tensor&, int)>;

    struct Node {
        Tensor value;
        std::vector<int> parents;
        BackwardFn backward;
        bool tracked = false;
    };

    Var emplace(Tensor value, std::vector<int> parents, BackwardFn backward);
    void accumulate(int id, const Tensor& g);

    std::vector<Node> nodes_;
    std::vector<std::optional<Tensor>> grads_;
};

// Central finite differences of a scalar-valued function, one probe per element.
Tensor finite_diff(const std::function<double(const Tensor&)>& fn, const Tensor& x,
                   double eps = 1e-5);

struct GradCheckReport {
    double max_abs_err = 0.0;
    double max_rel_err = 0.0;
    std::size_t element_count = 0;
    bool pass = false;
};

// Builders hand a Graph the tracked inputs and return the scalar loss node.
using ScalarFn = std::function<Var(Graph&, Var)>;
using MultiScalarFn = std::function<Var(Graph&, const std::vector<Var>&)>;

// Compares reverse-mode gradients against central differences. Relative error
// uses max(|analytic|, |numeric|, 1e-8) as denominator.
GradCheckReport grad_check(const ScalarFn& fn, const Tensor& x, double tol, double eps = 1e-5);
GradCheckReport grad_check_all(const MultiScalarFn& fn, const std::vector<Tensor>& inputs,
                               double tol, double eps = 1e-5);

}  // namespace xhrnet
