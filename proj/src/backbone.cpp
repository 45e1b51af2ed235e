#include "xhrnet/backbone.hpp"

#include <cstring>
#include <fstream>
#include <map>
#include <random>

#include "json.hpp"
#include "xhrnet/engine.hpp"

namespace xhrnet {

const char* to_string(BlockType t) {
    switch (t) {
        case BlockType::XShuffle: return "x_shuffle";
        case BlockType::Shuffle: return "shuffle";
        case BlockType::Bare: return "bare";
    }
    return "?";
}

BlockType block_type_from_string(const std::string& s) {
    if (s == "x_shuffle") return BlockType::XShuffle;
    if (s == "shuffle") return BlockType::Shuffle;
    if (s == "bare") return BlockType::Bare;
    throw ConfigError("block_type: unknown value '" + s + "'");
}

void NetConfig::validate() const {
    if (stages.empty()) throw ConfigError("stages: at least one stage is required");
    if (base_channels < 2 || base_channels % 2 != 0) {
        throw ConfigError("base_channels: must be even and >= 2, got " +
                          std::to_string(base_channels));
    }
    if (stem_channels < 2 || stem_channels % 2 != 0) {
        throw ConfigError("stem_channels: must be even and >= 2, got " +
                          std::to_string(stem_channels));
    }
    if (num_joints < 1) throw ConfigError("num_joints: must be >= 1");
    if (susa_first == susa_second) {
        throw ConfigError("susa_order: the two axes must be distinct");
    }
    for (std::size_t s = 0; s < stages.size(); ++s) {
        const StageSpec& st = stages[s];
        const std::string key = "stages[" + std::to_string(s) + "]";
        const std::size_t want_branches = s + 2;
        if (st.branch_channels.size() != want_branches) {
            throw ConfigError(key + ".branch_channels: stage " + std::to_string(s + 1) +
                              " must have " + std::to_string(want_branches) +
                              " branches (one added per stage), got " +
                              std::to_string(st.branch_channels.size()));
        }
        for (std::size_t b = 0; b < st.branch_channels.size(); ++b) {
            const int want = base_channels << b;
            if (st.branch_channels[b] != want) {
                throw ConfigError(key + ".branch_channels[" + std::to_string(b) +
                                  "]: channel doubling requires " + std::to_string(want) +
                                  " (base " + std::to_string(base_channels) + " * 2^" +
                                  std::to_string(b) + "), got " +
                                  std::to_string(st.branch_channels[b]));
            }
        }
        if (st.num_modules < 1) throw ConfigError(key + ".num_modules: must be >= 1");
        if (st.blocks_per_module < 1) {
            throw ConfigError(key + ".blocks_per_module: must be >= 1");
        }
    }
    if (variant == "x18" || variant == "x30") {
        const std::vector<int> want_modules =
            (variant == "x18") ? std::vector<int>{2, 4, 2} : std::vector<int>{3, 8, 3};
        if (stages.size() != 3) {
            throw ConfigError("stages: variant " + variant + " has 3 stages");
        }
        for (std::size_t s = 0; s < 3; ++s) {
            if (stages[s].num_modules != want_modules[s]) {
                throw ConfigError("stages[" + std::to_string(s) + "].num_modules: variant " +
                                  variant + " requires " + std::to_string(want_modules[s]));
            }
            if (stages[s].blocks_per_module != 2) {
                throw ConfigError("stages[" + std::to_string(s) +
                                  "].blocks_per_module: variant " + variant + " requires 2");
            }
        }
    } else if (variant != "custom") {
        throw ConfigError("variant: unknown value '" + variant + "'");
    }
}

int NetConfig::total_stride() const {
    const int branches = static_cast<int>(stages.back().branch_channels.size());
    return 4 << (branches - 1);
}

static NetConfig preset(const std::string& variant, const std::vector<int>& modules) {
    NetConfig c;
    c.variant = variant;
    c.stages.resize(3);
    for (int s = 0; s < 3; ++s) {
        for (int b = 0; b <= s + 1; ++b) c.stages[s].branch_channels.push_back(40 << b);
        c.stages[s].num_modules = modules[static_cast<std::size_t>(s)];
        c.stages[s].blocks_per_module = 2;
    }
    return c;
}

NetConfig net_config_x18() { return preset("x18", {2, 4, 2}); }
NetConfig net_config_x30() { return preset("x30", {3, 8, 3}); }

// ---- JSON config -------------------------------------------------------------

static SusaAxis axis_from_string(const std::string& s) {
    if (s == "h" || s == "h_wise") return SusaAxis::HWise;
    if (s == "w" || s == "w_wise") return SusaAxis::WWise;
    throw ConfigError("susa_order: unknown axis '" + s + "' (expected \"h\" or \"w\")");
}

NetConfig net_config_from_json(const std::string& json_text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(json_text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError(std::string("config parse error: ") + e.what());
    }
    NetConfig c;
    try {
        if (j.contains("variant")) c.variant = j["variant"].get<std::string>();
        if (c.variant == "x18") c = net_config_x18();
        if (c.variant == "x30") c = net_config_x30();
        if (j.contains("base_channels")) c.base_channels = j["base_channels"].get<int>();
        if (j.contains("stem_channels")) c.stem_channels = j["stem_channels"].get<int>();
        if (j.contains("num_joints")) c.num_joints = j["num_joints"].get<int>();
        if (j.contains("block_type")) {
            c.block_type = block_type_from_string(j["block_type"].get<std::string>());
        }
        if (j.contains("fusion_mode")) {
            const auto s = j["fusion_mode"].get<std::string>();
            if (s == "mul" || s == "multiply") {
                c.fusion_mode = FusionMode::Multiply;
            } else if (s == "add") {
                c.fusion_mode = FusionMode::Add;
            } else {
                throw ConfigError("fusion_mode: unknown value '" + s + "'");
            }
        }
        if (j.contains("susa_order")) {
            const auto& o = j["susa_order"];
            if (!o.is_array() || o.size() != 2) {
                throw ConfigError("susa_order: expected an array of two axes");
            }
            c.susa_first = axis_from_string(o[0].get<std::string>());
            c.susa_second = axis_from_string(o[1].get<std::string>());
        }
        if (j.contains("input_hw")) {
            const auto& hw = j["input_hw"];
            if (!hw.is_array() || hw.size() != 2) {
                throw ConfigError("input_hw: expected [height, width]");
            }
            c.input_hw = {hw[0].get<int>(), hw[1].get<int>()};
        }
        if (j.contains("stages")) {
            c.stages.clear();
            for (const auto& js : j["stages"]) {
                StageSpec st;
                st.branch_channels = js.at("branch_channels").get<std::vector<int>>();
                if (js.contains("num_modules")) st.num_modules = js["num_modules"].get<int>();
                if (js.contains("blocks_per_module")) {
                    st.blocks_per_module = js["blocks_per_module"].get<int>();
                }
                c.stages.push_back(std::move(st));
            }
        }
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("config field error: ") + e.what());
    }
    c.validate();
    return c;
}

std::string net_config_to_json(const NetConfig& c) {
    nlohmann::json j;
    j["variant"] = c.variant;
    j["base_channels"] = c.base_channels;
    j["stem_channels"] = c.stem_channels;
    j["block_type"] = to_string(c.block_type);
    j["fusion_mode"] = to_string(c.fusion_mode);
    j["susa_order"] = {to_string(c.susa_first), to_string(c.susa_second)};
    j["num_joints"] = c.num_joints;
    j["input_hw"] = {c.input_hw.first, c.input_hw.second};
    j["stages"] = nlohmann::json::array();
    for (const auto& st : c.stages) {
        j["stages"].push_back({{"branch_channels", st.branch_channels},
                               {"num_modules", st.num_modules},
                               {"blocks_per_module", st.blocks_per_module}});
    }
    return j.dump(2);
}

// ---- construction ---------------------------------------------------------------

namespace {

FuseParams make_fuse_params(const std::vector<int>& chans, std::mt19937_64& rng) {
    const std::size_t n = chans.size();
    FuseParams f;
    f.paths.resize(n);
    for (std::size_t dst = 0; dst < n; ++dst) {
        f.paths[dst].resize(n);
        for (std::size_t src = 0; src < n; ++src) {
            if (src == dst) continue;
            auto& path = f.paths[dst][src];
            if (src < dst) {
                int ch = chans[src];
                for (std::size_t k = src; k < dst; ++k) {
                    const bool last = (k + 1 == dst);
                    const int out_c = last ? chans[dst] : ch;
                    path.down.push_back(make_dw_sep_unit(ch, out_c, 2, rng));
                    ch = out_c;
                }
            } else {
                path.up = make_dw_sep_unit(chans[src], chans[dst], 1, rng);
            }
        }
    }
    return f;
}

}  // namespace

Network Network::build(const NetConfig& config, std::uint64_t seed) {
    config.validate();
    Network net;
    net.config_ = config;
    net.params_ = std::make_unique<Params>();
    Params& p = *net.params_;
    std::mt19937_64 rng(seed);

    p.stem = make_stem_params(config.stem_channels, rng);

    const auto& first_chans = config.stages.front().branch_channels;
    p.entry.existing.push_back(make_dw_sep_unit(config.stem_channels, first_chans[0], 1, rng));
    p.entry.down = make_dw_sep_unit(config.stem_channels, first_chans[1], 2, rng);

    for (std::size_t s = 0; s < config.stages.size(); ++s) {
        const StageSpec& spec = config.stages[s];
        StageParams stage;
        for (int m = 0; m < spec.num_modules; ++m) {
            ModuleParams module;
            module.blocks.resize(spec.branch_channels.size());
            for (std::size_t b = 0; b < spec.branch_channels.size(); ++b) {
                const int ch = spec.branch_channels[b];
                for (int k = 0; k < spec.blocks_per_module; ++k) {
                    switch (config.block_type) {
                        case BlockType::XShuffle:
                            module.blocks[b].push_back(make_x_shuffle_params(ch, rng));
                            break;
                        case BlockType::Shuffle:
                            module.blocks[b].push_back(make_shuffle_block_params(ch, 1, rng));
                            break;
                        case BlockType::Bare:
                            module.blocks[b].push_back(make_bare_block_params(ch, rng));
                            break;
                    }
                }
            }
            module.fuse = make_fuse_params(spec.branch_channels, rng);
            stage.modules.push_back(std::move(module));
        }
        p.stages.push_back(std::move(stage));
        if (s + 1 < config.stages.size()) {
            const auto& next = config.stages[s + 1].branch_channels;
            TransitionParams t;
            t.existing.assign(spec.branch_channels.size(), std::nullopt);
            t.down = make_dw_sep_unit(spec.branch_channels.back(), next.back(), 2, rng);
            p.transitions.push_back(std::move(t));
        }
    }

    p.head = make_conv_unit(
        ConvSpec{config.base_channels, config.num_joints, 1, 1, 1, 1, 0, 0, 1, true}, rng,
        /*affine=*/false);

    net.register_all();
    return net;
}

// ---- registry ---------------------------------------------------------------------

namespace {

using Registry = std::vector<std::pair<std::string, Tensor*>>;

void reg_conv(Registry& r, const std::string& name, ConvUnit& u) {
    r.emplace_back(name + ".weight", &u.weight);
    if (u.bias) r.emplace_back(name + ".bias", &*u.bias);
    if (u.norm) {
        r.emplace_back(name + ".norm.scale", &u.norm->scale);
        r.emplace_back(name + ".norm.shift", &u.norm->shift);
    }
}

void reg_dw_sep(Registry& r, const std::string& name, DwSepUnit& u) {
    reg_conv(r, name + ".dw", u.dw);
    reg_conv(r, name + ".pw", u.pw);
}

void reg_susa(Registry& r, const std::string& name, SusaParams& s) {
    r.emplace_back(name + ".wq.weight", &s.wq_weight);
    if (s.wq_bias) r.emplace_back(name + ".wq.bias", &*s.wq_bias);
    r.emplace_back(name + ".wv.weight", &s.wv_weight);
    if (s.wv_bias) r.emplace_back(name + ".wv.bias", &*s.wv_bias);
    r.emplace_back(name + ".ln.gamma", &s.ln_gamma);
    r.emplace_back(name + ".ln.beta", &s.ln_beta);
}

void reg_shuffle(Registry& r, const std::string& name, ShuffleBlockParams& b) {
    if (b.proj_dw) reg_conv(r, name + ".proj_dw", *b.proj_dw);
    if (b.proj_pw) reg_conv(r, name + ".proj_pw", *b.proj_pw);
    reg_conv(r, name + ".pw1", b.pw1);
    reg_conv(r, name + ".dw", b.dw);
    reg_conv(r, name + ".pw2", b.pw2);
}

void reg_fuse(Registry& r, const std::string& name, FuseParams& f) {
    for (std::size_t dst = 0; dst < f.paths.size(); ++dst) {
        for (std::size_t src = 0; src < f.paths[dst].size(); ++src) {
            if (src == dst) continue;
            auto& path = f.paths[dst][src];
            const std::string pname =
                name + ".p" + std::to_string(src) + "to" + std::to_string(dst);
            for (std::size_t k = 0; k < path.down.size(); ++k) {
                reg_dw_sep(r, pname + ".s" + std::to_string(k), path.down[k]);
            }
            if (path.up) reg_dw_sep(r, pname, *path.up);
        }
    }
}

}  // namespace

void Network::register_all() {
    registry_.clear();
    Params& p = *params_;
    reg_conv(registry_, "stem.conv1", p.stem.conv1);
    reg_shuffle(registry_, "stem.block", p.stem.block);
    reg_dw_sep(registry_, "transition1.b0", *p.entry.existing[0]);
    reg_dw_sep(registry_, "transition1.new", p.entry.down);
    for (std::size_t s = 0; s < p.stages.size(); ++s) {
        const std::string sname = "stage" + std::to_string(s + 1);
        for (std::size_t m = 0; m < p.stages[s].modules.size(); ++m) {
            ModuleParams& mod = p.stages[s].modules[m];
            const std::string mname = sname + ".module" + std::to_string(m);
            for (std::size_t b = 0; b < mod.blocks.size(); ++b) {
                for (std::size_t k = 0; k < mod.blocks[b].size(); ++k) {
                    const std::string bname = mname + ".branch" + std::to_string(b) + ".block" +
                                              std::to_string(k);
                    std::visit(
                        [&](auto& blk) {
                            using T = std::decay_t<decltype(blk)>;
                            if constexpr (std::is_same_v<T, XShuffleParams>) {
                                reg_susa(registry_, bname + ".susa1", blk.susa1);
                                reg_conv(registry_, bname + ".dw", blk.dw);
                                reg_susa(registry_, bname + ".susa2", blk.susa2);
                            } else if constexpr (std::is_same_v<T, ShuffleBlockParams>) {
                                reg_shuffle(registry_, bname, blk);
                            } else {
                                reg_conv(registry_, bname + ".dw", blk.dw);
                            }
                        },
                        mod.blocks[b][k]);
                }
            }
            reg_fuse(registry_, mname + ".fuse", mod.fuse);
        }
        if (s < p.transitions.size()) {
            reg_dw_sep(registry_, "transition" + std::to_string(s + 2) + ".new",
                       p.transitions[s].down);
        }
    }
    reg_conv(registry_, "head", p.head);
}

std::size_t Network::parameter_count() const {
    std::size_t n = 0;
    for (const auto& [name, t] : registry_) n += t->size();
    return n;
}

std::vector<std::string> Network::parameter_names() const {
    std::vector<std::string> names;
    names.reserve(registry_.size());
    for (const auto& [name, t] : registry_) names.push_back(name);
    return names;
}

const Tensor& Network::parameter(const std::string& name) const {
    for (const auto& [n, t] : registry_) {
        if (n == name) return *t;
    }
    throw UsageError("no parameter named '" + name + "'");
}

// ---- forward ------------------------------------------------------------------------

Tensor Network::forward(const Tensor& image) const {
    if (image.rank() != 3 || image.shape()[0] != 3) {
        throw DimError("forward expects a [3,H,W] image, got " + shape_str(image.shape()));
    }
    const int stride = config_.total_stride();
    if (image.shape()[1] % stride != 0 || image.shape()[2] % stride != 0) {
        throw DimError("input extents " + shape_str(image.shape()) +
                       " must be divisible by the total stride " + std::to_string(stride));
    }
    TensorEngine eng;
    const Params& p = *params_;
    Tensor x = stem(eng, image, p.stem);
    std::vector<Tensor> branches = transition(eng, std::vector<Tensor>{std::move(x)}, p.entry);

    const XShuffleConfig xcfg = config_.x_shuffle_config();
    for (std::size_t s = 0; s < p.stages.size(); ++s) {
        for (const ModuleParams& mod : p.stages[s].modules) {
            for (std::size_t b = 0; b < branches.size(); ++b) {
                for (const BlockParams& blk : mod.blocks[b]) {
                    branches[b] = std::visit(
                        [&](const auto& bp) {
                            using T = std::decay_t<decltype(bp)>;
                            if constexpr (std::is_same_v<T, XShuffleParams>) {
                                return x_shuffle_block(eng, branches[b], bp, xcfg);
                            } else if constexpr (std::is_same_v<T, ShuffleBlockParams>) {
                                return shuffle_block(eng, branches[b], bp);
                            } else {
                                return bare_block(eng, branches[b], bp);
                            }
                        },
                        blk);
                }
            }
            branches = fuse_branches(eng, branches, mod.fuse);
        }
        if (s < p.transitions.size()) {
            branches = transition(eng, branches, p.transitions[s]);
        }
    }
    return apply_conv_unit(eng, branches[0], p.head);
}

// ---- weights io -----------------------------------------------------------------------

namespace {

constexpr char kMagic[4] = {'X', 'H', 'W', '1'};
constexpr std::uint32_t kVersion = 1;

template <class T>
void write_raw(std::ostream& os, const T& v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T read_raw(std::istream& is, const char* what) {
    T v;
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!is) throw FormatError(std::string("weights file truncated while reading ") + what);
    return v;
}

}  // namespace

void Network::save(const std::string& path) const {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw FormatError("cannot open '" + path + "' for writing");
    os.write(kMagic, 4);
    write_raw(os, kVersion);
    write_raw(os, static_cast<std::uint32_t>(registry_.size()));
    for (const auto& [name, t] : registry_) {
        write_raw(os, static_cast<std::uint16_t>(name.size()));
        os.write(name.data(), static_cast<std::streamsize>(name.size()));
        write_raw(os, static_cast<std::uint8_t>(t->rank()));
        for (int d = 0; d < t->rank(); ++d) {
            write_raw(os, static_cast<std::uint32_t>(t->shape()[d]));
        }
        for (std::size_t i = 0; i < t->size(); ++i) {
            write_raw(os, static_cast<float>((*t)[i]));
        }
    }
    if (!os) throw FormatError("failed while writing '" + path + "'");
}

Network Network::load(const NetConfig& config, const std::string& path) {
    Network net = build(config, 0);
    std::ifstream is(path, std::ios::binary);
    if (!is) throw FormatError("cannot open '" + path + "'");
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, kMagic, 4) != 0) {
        throw FormatError("'" + path + "' is not a weights file (bad magic)");
    }
    const auto version = read_raw<std::uint32_t>(is, "version");
    if (version != kVersion) {
        throw FormatError("unsupported weights version " + std::to_string(version));
    }
    const auto count = read_raw<std::uint32_t>(is, "tensor count");

    std::map<std::string, Tensor> loaded;
    for (std::uint32_t i = 0; i < count; ++i) {
        const auto name_len = read_raw<std::uint16_t>(is, "name length");
        std::string name(name_len, '\0');
        is.read(name.data(), name_len);
        if (!is) throw FormatError("weights file truncated while reading a name");
        const auto rank = read_raw<std::uint8_t>(is, "rank");
        std::vector<int> shape;
        for (int d = 0; d < rank; ++d) {
            shape.push_back(static_cast<int>(read_raw<std::uint32_t>(is, "extent")));
        }
        std::vector<double> data(shape_numel(shape));
        for (auto& v : data) {
            v = static_cast<double>(read_raw<float>(is, ("data of '" + name + "'").c_str()));
        }
        loaded.emplace(std::move(name), Tensor(std::move(shape), std::move(data)));
    }

    for (auto& [name, slot] : net.registry_) {
        auto it = loaded.find(name);
        if (it == loaded.end()) {
            throw FormatError("weights file is missing tensor '" + name + "'");
        }
        if (it->second.shape() != slot->shape()) {
            throw FormatError("tensor '" + name + "' has shape " +
                              shape_str(it->second.shape()) + ", expected " +
                              shape_str(slot->shape()));
        }
        *slot = std::move(it->second);
        loaded.erase(it);
    }
    if (!loaded.empty()) {
        throw FormatError("weights file has unknown tensor '" + loaded.begin()->first + "'");
    }
    return net;
}

}  // namespace xhrnet
