#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "json.hpp"
#include "xhrnet/analysis.hpp"
#include "xhrnet/graph_engine.hpp"
#include "xhrnet/heatmap.hpp"

namespace py = pybind11;
using namespace xhrnet;

namespace {

using DoubleArray = py::array_t<double, py::array::c_style | py::array::forcecast>;

Tensor tensor_from(const DoubleArray& a) {
    std::vector<int> shape;
    for (py::ssize_t d = 0; d < a.ndim(); ++d) {
        shape.push_back(static_cast<int>(a.shape(d)));
    }
    std::vector<double> data(a.data(), a.data() + a.size());
    return Tensor(std::move(shape), std::move(data));
}

py::array_t<double> array_from(const Tensor& t) {
    std::vector<py::ssize_t> shape(t.shape().begin(), t.shape().end());
    py::array_t<double> out(shape);
    std::copy(t.data(), t.data() + t.size(), out.mutable_data());
    return out;
}

NetConfig resolve(const std::string& config) {
    if (!config.empty() && config.front() == '{') return net_config_from_json(config);
    if (config == "x18") return net_config_x18();
    if (config == "x30") return net_config_x30();
    throw ConfigError("config must be 'x18', 'x30' or a JSON object");
}

SusaAxis axis_of(const std::string& s) {
    if (s == "h") return SusaAxis::HWise;
    if (s == "w") return SusaAxis::WWise;
    throw ConfigError("axis must be 'h' or 'w'");
}

FusionMode fusion_of(const std::string& s) {
    if (s == "mul") return FusionMode::Multiply;
    if (s == "add") return FusionMode::Add;
    throw ConfigError("fusion must be 'mul' or 'add'");
}

py::dict dict_from_json(const std::string& text) {
    py::object loads = py::module_::import("json").attr("loads");
    return loads(text);
}

}  // namespace

PYBIND11_MODULE(_xhrnet, m) {
    m.doc() = "Lightweight pose backbone with stripe attention: forwards, complexity audits, "
              "gradient checks and the heatmap codec.";

    py::register_exception<Error>(m, "XhrnetError");

    m.def(
        "susa_apply",
        [](const DoubleArray& x, std::uint64_t seed, const std::string& axis,
           const std::string& fusion) {
            Tensor t = tensor_from(x);
            if (t.rank() != 3) throw DimError("expected a [C,H,W] array");
            SusaParams p = make_susa_params(t.shape()[0], seed);
            return array_from(
                susa_apply(t, p, SusaConfig{axis_of(axis), fusion_of(fusion), t.shape()[0]}));
        },
        py::arg("x"), py::arg("seed") = 0, py::arg("axis") = "h", py::arg("fusion") = "mul",
        "Apply a seeded-parameter SUSA module to a [C,H,W] array.");

    m.def(
        "gc_block",
        [](const DoubleArray& x, std::uint64_t seed, int reduction) {
            Tensor t = tensor_from(x);
            if (t.rank() != 3) throw DimError("expected a [C,H,W] array");
            return array_from(gc_block(t, make_gc_params(t.shape()[0], reduction, seed)));
        },
        py::arg("x"), py::arg("seed") = 0, py::arg("reduction") = 2);

    m.def(
        "count_params", [](const std::string& config) { return count_params(resolve(config)); },
        py::arg("config") = "x18");

    m.def(
        "flops_report",
        [](const std::string& config, int h, int w, const std::string& block_type) {
            NetConfig cfg = resolve(config);
            if (!block_type.empty()) {
                cfg.block_type = block_type_from_string(block_type);
                cfg.variant = "custom";
            }
            return dict_from_json(count_macs(cfg, {h, w}).to_json());
        },
        py::arg("config") = "x18", py::arg("h") = 256, py::arg("w") = 192,
        py::arg("block_type") = "");

    m.def(
        "cost_compare",
        [](int c, int h, int w) { return dict_from_json(cost_compare(c, h, w).to_json()); },
        py::arg("channels"), py::arg("height"), py::arg("width"));

    m.def(
        "gaussian_heatmap",
        [](double cx, double cy, double sigma, int h, int w) {
            GaussianSlice g = gaussian_heatmap(cx, cy, sigma, {h, w});
            return py::make_tuple(array_from(g.values), g.empty_warning);
        },
        py::arg("center_x"), py::arg("center_y"), py::arg("sigma"), py::arg("h") = 64,
        py::arg("w") = 48);

    m.def("project", [](const DoubleArray& slice) {
        HeatVectorPair p = project(tensor_from(slice));
        return py::make_tuple(array_from(p.h_vec), array_from(p.w_vec));
    });

    m.def("reconstruct", [](const DoubleArray& h_vec, const DoubleArray& w_vec) {
        return array_from(reconstruct(HeatVectorPair{tensor_from(h_vec), tensor_from(w_vec)}));
    });

    m.def("decode", [](const DoubleArray& heatmaps) {
        py::list out;
        for (const Keypoint& kp : decode(tensor_from(heatmaps))) {
            py::dict d;
            d["x"] = kp.x;
            d["y"] = kp.y;
            d["score"] = kp.score;
            d["valid"] = kp.valid;
            out.append(d);
        }
        return out;
    });

    m.def(
        "flip_average",
        [](const DoubleArray& hm, const DoubleArray& flipped,
           const std::vector<std::pair<int, int>>& pairs) {
            return array_from(flip_average(tensor_from(hm), tensor_from(flipped), pairs));
        },
        py::arg("heatmaps"), py::arg("flipped_input_heatmaps"), py::arg("pairs"));

    m.def("coco_flip_pairs", &coco_flip_pairs);

    m.def(
        "fusion_toy",
        [](const DoubleArray& a, const DoubleArray& b, const std::string& mode) {
            FusionToyResult r = fusion_toy(tensor_from(a), tensor_from(b), fusion_of(mode));
            py::dict d;
            d["fused"] = array_from(r.fused);
            d["peak"] = py::make_tuple(r.peak_x, r.peak_y);
            d["half_max_area"] = r.half_max_area;
            d["degenerate"] = r.degenerate;
            return d;
        },
        py::arg("a"), py::arg("b"), py::arg("mode") = "mul");

    m.def(
        "grad_check_susa",
        [](std::uint64_t seed, double tol) {
            SusaParams p = make_susa_params(4, seed);
            Tensor x = random_uniform({4, 6, 5}, seed + 1);
            std::vector<Tensor> inputs{x};
            auto flat = flatten_params(p);
            inputs.insert(inputs.end(), flat.begin(), flat.end());
            GradCheckReport r = grad_check_all(
                [&p](Graph& g, const std::vector<Var>& vs) {
                    GraphEngine eng(g);
                    std::size_t at = 1;
                    auto lp = susa_params_from_vars(p, vs, at);
                    return g.sum_all(susa_apply(
                        eng, vs[0], lp, SusaConfig{SusaAxis::HWise, FusionMode::Multiply, 4}));
                },
                inputs, tol);
            py::dict d;
            d["pass"] = r.pass;
            d["max_rel_err"] = r.max_rel_err;
            d["max_abs_err"] = r.max_abs_err;
            d["element_count"] = r.element_count;
            return d;
        },
        py::arg("seed") = 7, py::arg("tol") = 1e-4);

    py::class_<Network>(m, "Network")
        .def_static(
            "build",
            [](const std::string& config, std::uint64_t seed) {
                return Network::build(resolve(config), seed);
            },
            py::arg("config") = "x18", py::arg("seed") = 0)
        .def_static(
            "load",
            [](const std::string& config, const std::string& path) {
                return Network::load(resolve(config), path);
            },
            py::arg("config"), py::arg("path"))
        .def("save", &Network::save, py::arg("path"))
        .def("forward",
             [](const Network& net, const DoubleArray& image) {
                 return array_from(net.forward(tensor_from(image)));
             })
        .def("parameter_count", &Network::parameter_count)
        .def("parameter_names", &Network::parameter_names);

    m.attr("__version__") = "0.1.0";
}
