#include "xhrnet/analysis.hpp"

#include <iomanip>
#include <sstream>

#include "json.hpp"

namespace xhrnet {

namespace {

struct Audit {
    FlopsReport report;

    void conv(const std::string& name, const std::string& kind, int cin, int cout, int k,
              std::pair<int, int> hw_out, int groups = 1, bool bias = false, bool affine = true) {
        const long long out_elems =
            static_cast<long long>(cout) * hw_out.first * hw_out.second;
        FlopsRow row{name, kind, 0, 0};
        row.macs = out_elems * (cin / groups) * k * k;
        row.params = static_cast<long long>(cout) * (cin / groups) * k * k;
        if (bias) {
            row.macs += out_elems;
            row.params += cout;
        }
        if (affine) {
            row.macs += out_elems;
            row.params += 2LL * cout;
        }
        report.rows.push_back(row);
    }

    // Only the two convolution kernels of a SUSA cost MACs: the per-channel
    // grouping 1x1 over the pooled C x L' stripe and the C x C transform over
    // the C x L context. Pooling, softmax, the stripe inner product, LN,
    // sigmoid and the attention fusion carry no multiply-accumulates here.
    void susa(const std::string& name, int c, SusaAxis axis, int h, int w, bool wq_bias = true) {
        const int lp = (axis == SusaAxis::HWise) ? w : h;
        const int l = (axis == SusaAxis::HWise) ? h : w;
        FlopsRow row{name, axis == SusaAxis::HWise ? "susa_h" : "susa_w", 0, 0};
        row.macs = static_cast<long long>(c) * lp + static_cast<long long>(c) * c * l;
        row.params = static_cast<long long>(c) + static_cast<long long>(c) * c + 2LL * c;
        if (wq_bias) {
            row.macs += static_cast<long long>(c) * lp;
            row.params += c;
        }
        report.rows.push_back(row);
    }

    void dw_sep(const std::string& name, int cin, int cout, std::pair<int, int> hw_out) {
        conv(name + ".dw", "dwconv", cin, cin, 3, hw_out, cin);
        conv(name + ".pw", "pwconv", cin, cout, 1, hw_out);
    }
};

std::pair<int, int> half(std::pair<int, int> hw) { return {hw.first / 2, hw.second / 2}; }

void audit_block(Audit& a, const std::string& name, const NetConfig& cfg, int channels,
                 std::pair<int, int> hw) {
    const int c = channels / 2;
    switch (cfg.block_type) {
        case BlockType::XShuffle:
            a.susa(name + ".susa1", c, cfg.susa_first, hw.first, hw.second);
            a.conv(name + ".dw", "dwconv", c, c, 3, hw, c);
            a.susa(name + ".susa2", c, cfg.susa_second, hw.first, hw.second);
            break;
        case BlockType::Shuffle:
            a.conv(name + ".pw1", "pwconv", c, c, 1, hw);
            a.conv(name + ".dw", "dwconv", c, c, 3, hw, c);
            a.conv(name + ".pw2", "pwconv", c, c, 1, hw);
            break;
        case BlockType::Bare:
            a.conv(name + ".dw", "dwconv", c, c, 3, hw, c);
            break;
    }
}

void audit_fuse(Audit& a, const std::string& name, const std::vector<int>& chans,
                const std::vector<std::pair<int, int>>& hws) {
    const std::size_t n = chans.size();
    for (std::size_t dst = 0; dst < n; ++dst) {
        for (std::size_t src = 0; src < n; ++src) {
            if (src == dst) continue;
            const std::string pname =
                name + ".p" + std::to_string(src) + "to" + std::to_string(dst);
            if (src < dst) {
                int ch = chans[src];
                std::pair<int, int> hw = hws[src];
                for (std::size_t k = src; k < dst; ++k) {
                    hw = half(hw);
                    const bool last = (k + 1 == dst);
                    const int out_c = last ? chans[dst] : ch;
                    a.conv(pname + ".s" + std::to_string(k - src) + ".dw", "dwconv", ch, ch, 3,
                           hw, ch);
                    a.conv(pname + ".s" + std::to_string(k - src) + ".pw", "pwconv", ch, out_c,
                           1, hw);
                    ch = out_c;
                }
            } else {
                a.dw_sep(pname, chans[src], chans[dst], hws[src]);
            }
        }
    }
}

Audit run_audit(const NetConfig& cfg, std::pair<int, int> input_hw) {
    cfg.validate();
    const int stride = cfg.total_stride();
    if (input_hw.first % stride != 0 || input_hw.second % stride != 0) {
        throw DimError("input " + std::to_string(input_hw.first) + "x" +
                       std::to_string(input_hw.second) + " must be divisible by stride " +
                       std::to_string(stride));
    }
    Audit a;
    a.report.input_hw = input_hw;

    const std::pair<int, int> hw2{input_hw.first / 2, input_hw.second / 2};
    const std::pair<int, int> hw4 = half(hw2);
    const int sc = cfg.stem_channels;
    a.conv("stem.conv1", "conv", 3, sc, 3, hw2);
    a.conv("stem.block.proj_dw", "dwconv", sc, sc, 3, hw4, sc);
    a.conv("stem.block.proj_pw", "pwconv", sc, sc / 2, 1, hw4);
    a.conv("stem.block.pw1", "pwconv", sc, sc / 2, 1, hw2);
    a.conv("stem.block.dw", "dwconv", sc / 2, sc / 2, 3, hw4, sc / 2);
    a.conv("stem.block.pw2", "pwconv", sc / 2, sc / 2, 1, hw4);

    const auto& first_chans = cfg.stages.front().branch_channels;
    a.dw_sep("transition1.b0", sc, first_chans[0], hw4);
    a.dw_sep("transition1.new", sc, first_chans[1], half(hw4));

    std::vector<std::pair<int, int>> hws{hw4, half(hw4)};
    for (std::size_t s = 0; s < cfg.stages.size(); ++s) {
        const StageSpec& spec = cfg.stages[s];
        const std::string sname = "stage" + std::to_string(s + 1);
        for (int m = 0; m < spec.num_modules; ++m) {
            const std::string mname = sname + ".module" + std::to_string(m);
            for (std::size_t b = 0; b < spec.branch_channels.size(); ++b) {
                for (int k = 0; k < spec.blocks_per_module; ++k) {
                    audit_block(a,
                                mname + ".branch" + std::to_string(b) + ".block" +
                                    std::to_string(k),
                                cfg, spec.branch_channels[b], hws[b]);
                }
            }
            audit_fuse(a, mname + ".fuse", spec.branch_channels, hws);
        }
        if (s + 1 < cfg.stages.size()) {
            const auto& next = cfg.stages[s + 1].branch_channels;
            a.dw_sep("transition" + std::to_string(s + 2) + ".new",
                     spec.branch_channels.back(), next.back(), half(hws.back()));
            hws.push_back(half(hws.back()));
        }
    }

    a.conv("head", "pwconv", cfg.base_channels, cfg.num_joints, 1, hw4, 1, /*bias=*/true,
           /*affine=*/false);

    for (const FlopsRow& row : a.report.rows) {
        a.report.total_params += row.params;
        a.report.total_macs += row.macs;
    }
    return a;
}

}  // namespace

long long count_params(const NetConfig& config) {
    return run_audit(config, {config.total_stride(), config.total_stride()}).report.total_params;
}

long long count_params(const Network& net) {
    long long n = 0;
    for (const auto& name : net.parameter_names()) {
        n += static_cast<long long>(net.parameter(name).size());
    }
    return n;
}

FlopsReport count_macs(const NetConfig& config, std::pair<int, int> input_hw) {
    return run_audit(config, input_hw).report;
}

std::string FlopsReport::to_text(bool per_layer) const {
    std::ostringstream os;
    os << "# complexity audit at input " << input_hw.first << "x" << input_hw.second << "\n";
    os << "# MACs: conv multiply-accumulates; bias and per-channel affine count one MAC per\n";
    os << "# output element; pooling, softmax, LN, sigmoid, resize and reorders are free\n";
    std::size_t name_w = 5;
    for (const FlopsRow& r : rows) name_w = std::max(name_w, r.name.size());
    if (per_layer) {
        os << std::left << std::setw(static_cast<int>(name_w) + 2) << "name" << std::setw(9)
           << "kind" << std::right << std::setw(12) << "params" << std::setw(14) << "macs"
           << "\n";
        for (const FlopsRow& r : rows) {
            os << std::left << std::setw(static_cast<int>(name_w) + 2) << r.name << std::setw(9)
               << r.kind << std::right << std::setw(12) << r.params << std::setw(14) << r.macs
               << "\n";
        }
    }
    os << "total params " << total_params << " (" << std::fixed << std::setprecision(2)
       << total_params / 1e6 << "M), macs " << total_macs << " (" << total_macs / 1e6 << "M)\n";
    return os.str();
}

std::string FlopsReport::to_json() const {
    nlohmann::json j;
    j["input"] = {input_hw.first, input_hw.second};
    j["rows"] = nlohmann::json::array();
    for (const FlopsRow& r : rows) {
        j["rows"].push_back(
            {{"name", r.name}, {"kind", r.kind}, {"params", r.params}, {"macs", r.macs}});
    }
    j["totals"] = {{"params", total_params}, {"macs", total_macs}};
    return j.dump(2);
}

CostComparison cost_compare(int channels, int height, int width) {
    if (channels < 1 || height < 1 || width < 1) {
        throw DimError("cost_compare extents must be >= 1");
    }
    CostComparison c;
    c.channels = channels;
    c.height = height;
    c.width = width;
    const long long chw = static_cast<long long>(channels) * height * width;
    c.standard3x3 = 9 * chw * channels;
    c.dwsep3x3 = 9 * chw + chw * channels;
    c.pointwise = chw * channels;
    c.susa_h = 2LL * channels * width + static_cast<long long>(channels) * channels * height;
    c.susa_w = 2LL * channels * height + static_cast<long long>(channels) * channels * width;
    c.susa_pair = c.susa_h + c.susa_w;
    c.dwsep_reduction = 1.0 - static_cast<double>(c.dwsep3x3) / c.standard3x3;
    c.susa_vs_pointwise_pair = static_cast<double>(c.susa_pair) / (2.0 * c.pointwise);
    return c;
}

std::string CostComparison::to_json() const {
    nlohmann::json j;
    j["shape"] = {channels, height, width};
    j["standard3x3"] = standard3x3;
    j["dwsep3x3"] = dwsep3x3;
    j["pointwise"] = pointwise;
    j["susa_h"] = susa_h;
    j["susa_w"] = susa_w;
    j["susa_pair"] = susa_pair;
    j["dwsep_reduction"] = dwsep_reduction;
    j["susa_vs_pointwise_pair"] = susa_vs_pointwise_pair;
    return j.dump(2);
}

}  // namespace xhrnet
