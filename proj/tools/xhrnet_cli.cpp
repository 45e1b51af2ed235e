// xhrnet: summaries, complexity audits, forwards, gradient checks and the
// heatmap toy experiments, wired to the library modules.

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"
#include "xhrnet/analysis.hpp"
#include "xhrnet/graph_engine.hpp"
#include "xhrnet/heatmap.hpp"

using namespace xhrnet;

namespace {

std::pair<int, int> parse_hw(const std::string& s) {
    const auto x = s.find('x');
    if (x == std::string::npos) {
        throw ConfigError("--input: expected HxW, got '" + s + "'");
    }
    try {
        return {std::stoi(s.substr(0, x)), std::stoi(s.substr(x + 1))};
    } catch (const std::exception&) {
        throw ConfigError("--input: expected HxW, got '" + s + "'");
    }
}

std::pair<double, double> parse_xy(const std::string& s, const char* flag) {
    const auto c = s.find(',');
    if (c == std::string::npos) {
        throw ConfigError(std::string(flag) + ": expected X,Y, got '" + s + "'");
    }
    try {
        return {std::stod(s.substr(0, c)), std::stod(s.substr(c + 1))};
    } catch (const std::exception&) {
        throw ConfigError(std::string(flag) + ": expected X,Y, got '" + s + "'");
    }
}

NetConfig resolve_config(const std::string& variant, const std::string& config_path,
                         const std::string& block_type) {
    NetConfig cfg;
    if (!config_path.empty()) {
        std::ifstream in(config_path);
        if (!in) throw ConfigError("--config: cannot open '" + config_path + "'");
        std::ostringstream buf;
        buf << in.rdbuf();
        cfg = net_config_from_json(buf.str());
    } else if (variant == "x18") {
        cfg = net_config_x18();
    } else if (variant == "x30") {
        cfg = net_config_x30();
    } else {
        throw ConfigError("--variant: unknown value '" + variant + "'");
    }
    if (!block_type.empty()) {
        cfg.block_type = block_type_from_string(block_type);
        cfg.validate();
    }
    return cfg;
}

int cmd_summarize(const NetConfig& cfg) {
    std::printf("variant        %s\n", cfg.variant.c_str());
    std::printf("block type     %s\n", to_string(cfg.block_type));
    std::printf("susa order     %s,%s  fusion %s\n", to_string(cfg.susa_first),
                to_string(cfg.susa_second), to_string(cfg.fusion_mode));
    std::printf("stem channels  %d\n", cfg.stem_channels);
    for (std::size_t s = 0; s < cfg.stages.size(); ++s) {
        std::string chans;
        for (std::size_t b = 0; b < cfg.stages[s].branch_channels.size(); ++b) {
            if (b) chans += ",";
            chans += std::to_string(cfg.stages[s].branch_channels[b]);
        }
        std::printf("stage%zu         channels %-16s modules %d, blocks/module %d\n", s + 1,
                    chans.c_str(), cfg.stages[s].num_modules, cfg.stages[s].blocks_per_module);
    }
    std::printf("joints         %d\n", cfg.num_joints);
    std::printf("total stride   %d\n", cfg.total_stride());
    const FlopsReport report = count_macs(cfg, cfg.input_hw);
    std::printf("params         %lld (%.2fM)\n", report.total_params,
                report.total_params / 1e6);
    std::printf("macs           %lld (%.2fM at %dx%d)\n", report.total_macs,
                report.total_macs / 1e6, cfg.input_hw.first, cfg.input_hw.second);
    return 0;
}

int cmd_flops(const NetConfig& cfg, const std::string& input, bool per_layer,
              const std::string& format) {
    const std::pair<int, int> hw = input.empty() ? cfg.input_hw : parse_hw(input);
    const FlopsReport report = count_macs(cfg, hw);
    if (format == "json") {
        std::cout << report.to_json() << "\n";
    } else {
        std::cout << report.to_text(per_layer);
    }
    return 0;
}

Tensor make_input(const std::string& spec, const NetConfig& cfg) {
    if (spec.rfind("csv:", 0) == 0) {
        Tensor t = read_csv_file(spec.substr(4));
        if (t.rank() != 3 || t.shape()[0] != 3) {
            throw ConfigError("--input csv must hold a [3,H,W] stack (3 blank-line separated "
                              "blocks), got " +
                              shape_str(t.shape()));
        }
        return t;
    }
    std::pair<int, int> hw = cfg.input_hw;
    std::string rest = spec;
    const auto colon = spec.find(":random:");
    if (colon != std::string::npos) {
        hw = parse_hw(spec.substr(0, colon));
        rest = spec.substr(colon + 1);
    }
    if (rest.rfind("random:", 0) != 0) {
        throw ConfigError("--input: expected HxW:random:SEED, random:SEED or csv:PATH, got '" +
                          spec + "'");
    }
    std::uint64_t seed = 0;
    try {
        seed = std::stoull(rest.substr(7));
    } catch (const std::exception&) {
        throw ConfigError("--input: bad seed in '" + spec + "'");
    }
    return random_uniform({3, hw.first, hw.second}, seed);
}

int cmd_forward(const NetConfig& cfg, const std::string& weights, const std::string& input,
                const std::string& out, std::uint64_t seed) {
    Network net = weights.empty() ? Network::build(cfg, seed) : Network::load(cfg, weights);
    Tensor image = make_input(input, cfg);
    Tensor heatmaps = net.forward(image);
    std::printf("output shape %dx%dx%d\n", heatmaps.shape()[0], heatmaps.shape()[1],
                heatmaps.shape()[2]);
    double lo = heatmaps[0], hi = heatmaps[0];
    for (std::size_t i = 0; i < heatmaps.size(); ++i) {
        lo = std::min(lo, heatmaps[i]);
        hi = std::max(hi, heatmaps[i]);
    }
    std::printf("value range [%.6f, %.6f]\n", lo, hi);
    if (!out.empty()) {
        write_csv_file(heatmaps, out);
        std::printf("wrote %s\n", out.c_str());
    }
    return 0;
}

int cmd_gradcheck(const std::string& target, std::uint64_t seed, double tol) {
    GradCheckReport worst;
    worst.pass = true;

    auto fold = [&worst](const GradCheckReport& r) {
        worst.max_abs_err = std::max(worst.max_abs_err, r.max_abs_err);
        worst.max_rel_err = std::max(worst.max_rel_err, r.max_rel_err);
        worst.element_count += r.element_count;
        worst.pass = worst.pass && r.pass;
    };

    if (target == "susa") {
        SusaParams p = make_susa_params(4, seed);
        Tensor x = random_uniform({4, 6, 5}, seed + 1);
        for (SusaAxis axis : {SusaAxis::HWise, SusaAxis::WWise}) {
            for (FusionMode fusion : {FusionMode::Multiply, FusionMode::Add}) {
                std::vector<Tensor> inputs{x};
                auto flat = flatten_params(p);
                inputs.insert(inputs.end(), flat.begin(), flat.end());
                fold(grad_check_all(
                    [&p, axis, fusion](Graph& g, const std::vector<Var>& vs) {
                        GraphEngine eng(g);
                        std::size_t at = 1;
                        auto lp = susa_params_from_vars(p, vs, at);
                        return g.sum_all(
                            susa_apply(eng, vs[0], lp, SusaConfig{axis, fusion, 4}));
                    },
                    inputs, tol));
            }
        }
    } else if (target == "layernorm") {
        Tensor x = random_uniform({5, 6}, seed);
        Tensor gamma = random_uniform({5}, seed + 1, 0.5, 1.5);
        Tensor beta = random_uniform({5}, seed + 2);
        fold(grad_check_all(
            [](Graph& g, const std::vector<Var>& vs) {
                return g.sum_all(g.layer_norm(vs[0], vs[1], vs[2], 1e-5));
            },
            {x, gamma, beta}, tol));
    } else if (target == "conv") {
        ConvSpec spec{4, 6, 3, 3, 2, 2, 1, 1, 2, true};
        fold(grad_check_all(
            [spec](Graph& g, const std::vector<Var>& vs) {
                return g.sum_all(g.conv2d(vs[0], vs[1], vs[2], spec));
            },
            {random_uniform({4, 5, 5}, seed), random_uniform(spec.weight_shape(), seed + 1),
             random_uniform({6}, seed + 2)},
            tol));
    } else if (target == "xblock") {
        std::mt19937_64 rng(seed);
        XShuffleParams p = make_x_shuffle_params(4, rng);
        Tensor x = random_uniform({4, 5, 6}, seed + 1);
        std::vector<Tensor> inputs{x};
        auto flat = flatten_params(p);
        inputs.insert(inputs.end(), flat.begin(), flat.end());
        fold(grad_check_all(
            [&p](Graph& g, const std::vector<Var>& vs) {
                GraphEngine eng(g);
                std::size_t at = 1;
                auto lp = x_shuffle_from_vars(p, vs, at);
                return g.sum_all(x_shuffle_block(eng, vs[0], lp, XShuffleConfig{}));
            },
            inputs, tol));
    } else {
        throw ConfigError("--target: unknown value '" + target + "'");
    }

    std::printf("%s max_rel_err=%.3e max_abs_err=%.3e over %zu elements (tol %.1e)\n",
                worst.pass ? "PASS" : "FAIL", worst.max_rel_err, worst.max_abs_err,
                worst.element_count, tol);
    return worst.pass ? 0 : 1;
}

int cmd_fusion_toy(double sigma, const std::string& offset, const std::string& mode_name,
                   const std::string& size, const std::string& format) {
    const std::pair<int, int> hw = size.empty() ? std::pair<int, int>{64, 48} : parse_hw(size);
    const auto [dx, dy] = parse_xy(offset, "--offset");
    const FusionMode mode = (mode_name == "mul") ? FusionMode::Multiply : FusionMode::Add;
    const double cx = (hw.second - 1) / 2.0, cy = (hw.first - 1) / 2.0;
    Tensor a = gaussian_heatmap(cx, cy, sigma, hw).values;
    Tensor b = gaussian_heatmap(cx + dx, cy + dy, sigma, hw).values;
    FusionToyResult r = fusion_toy(a, b, mode);
    if (format == "json") {
        std::cout << r.to_json(mode) << "\n";
    } else {
        std::printf("mode %s: peak (%d,%d), half-max area %ld%s\n", to_string(mode), r.peak_x,
                    r.peak_y, r.half_max_area, r.degenerate ? ", degenerate" : "");
    }
    return 0;
}

int cmd_heatmap_demo(const std::string& center, double sigma, const std::string& size,
                     const std::string& out) {
    const auto [cx, cy] = parse_xy(center, "--center");
    const std::pair<int, int> hw = parse_hw(size);
    GaussianSlice g = gaussian_heatmap(cx, cy, sigma, hw);
    if (g.empty_warning) std::printf("warning: center lies outside the 3-sigma grid margin\n");
    const Keypoint kp = decode(g.values)[0];
    std::printf("decoded (%.2f, %.2f) score %.4f\n", kp.x, kp.y, kp.score);
    const HeatVectorPair pair = project(g.values);
    std::printf("projection pair: %d + %d bins, reconstruction max err %.2e\n",
                pair.h_vec.shape()[0], pair.w_vec.shape()[0],
                reconstruction_error(g.values));
    if (!out.empty()) {
        write_csv_file(g.values, out);
        std::printf("wrote %s\n", out.c_str());
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"X-HRNet tools: complexity audits, forwards, gradient checks, heatmap demos"};
    app.require_subcommand(1);

    std::string variant = "x18", config_path, block_type;
    auto add_config_flags = [&](CLI::App* cmd) {
        cmd->add_option("--variant", variant, "preset: x18 or x30");
        cmd->add_option("--config", config_path, "JSON network config file");
        cmd->add_option("--block-type", block_type, "x_shuffle, shuffle or bare");
    };

    CLI::App* summarize = app.add_subcommand("summarize", "print the architecture summary");
    add_config_flags(summarize);

    CLI::App* flops = app.add_subcommand("flops", "analytic parameter/MAC audit");
    add_config_flags(flops);
    std::string flops_input, flops_format = "table";
    bool per_layer = false;
    flops->add_option("--input", flops_input, "input size HxW (default: config)");
    flops->add_flag("--per-layer", per_layer, "print one row per layer");
    flops->add_option("--format", flops_format, "table or json")
        ->check(CLI::IsMember({"table", "json"}));

    CLI::App* forward = app.add_subcommand("forward", "run a full forward pass");
    add_config_flags(forward);
    std::string weights, fwd_input = "random:0", fwd_out;
    std::uint64_t fwd_seed = 0;
    forward->add_option("--weights", weights, "weights file (XHW1)");
    forward->add_option("--input", fwd_input, "HxW:random:SEED, random:SEED or csv:PATH");
    forward->add_option("--out", fwd_out, "write output heatmaps as CSV");
    forward->add_option("--seed", fwd_seed, "init seed when no weights are given");

    CLI::App* gradcheck = app.add_subcommand("gradcheck", "verify gradients against finite differences");
    std::string target = "susa";
    std::uint64_t gc_seed = 7;
    double tol = 1e-4;
    gradcheck->add_option("--target", target, "susa, layernorm, conv or xblock")
        ->check(CLI::IsMember({"susa", "layernorm", "conv", "xblock"}));
    gradcheck->add_option("--seed", gc_seed, "fixture seed");
    gradcheck->add_option("--tol", tol, "relative-error tolerance");

    CLI::App* toy = app.add_subcommand("fusion-toy", "add vs multiply fusion experiment");
    double sigma = 2.0;
    std::string offset = "0,0", mode = "mul", toy_size, toy_format = "text";
    toy->add_option("--sigma", sigma, "gaussian sigma");
    toy->add_option("--offset", offset, "DX,DY of the second peak");
    toy->add_option("--mode", mode, "add or mul")->check(CLI::IsMember({"add", "mul"}));
    toy->add_option("--size", toy_size, "grid HxW (default 64x48)");
    toy->add_option("--format", toy_format, "text or json")
        ->check(CLI::IsMember({"text", "json"}));

    CLI::App* demo = app.add_subcommand("heatmap-demo", "generate and decode a gaussian target");
    std::string center = "10,10", demo_size = "64x48", demo_out;
    double demo_sigma = 2.0;
    demo->add_option("--center", center, "X,Y center");
    demo->add_option("--sigma", demo_sigma, "gaussian sigma");
    demo->add_option("--size", demo_size, "grid HxW");
    demo->add_option("--out", demo_out, "write the slice as CSV");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << e.what() << "\n";
        return 2;
    }

    try {
        if (summarize->parsed()) {
            return cmd_summarize(resolve_config(variant, config_path, block_type));
        }
        if (flops->parsed()) {
            return cmd_flops(resolve_config(variant, config_path, block_type), flops_input,
                             per_layer, flops_format);
        }
        if (forward->parsed()) {
            return cmd_forward(resolve_config(variant, config_path, block_type), weights,
                               fwd_input, fwd_out, fwd_seed);
        }
        if (gradcheck->parsed()) return cmd_gradcheck(target, gc_seed, tol);
        if (toy->parsed()) return cmd_fusion_toy(sigma, offset, mode, toy_size, toy_format);
        if (demo->parsed()) return cmd_heatmap_demo(center, demo_sigma, demo_size, demo_out);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
