#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "xhrnet/blocks.hpp"

namespace xhrnet {

enum class BlockType { XShuffle, Shuffle, Bare };

const char* to_string(BlockType t);
BlockType block_type_from_string(const std::string& s);

struct StageSpec {
    std::vector<int> branch_channels;  // base * 2^b
    int num_modules = 1;
    int blocks_per_module = 2;
};

// Declarative description of a network: stem, staged multi-resolution body,
// and a 1x1 head emitting one heatmap per joint from the top branch.
struct NetConfig {
    std::string variant = "custom";  // "x18" | "x30" | "custom"
    int base_channels = 40;
    int stem_channels = 32;
    std::vector<StageSpec> stages;
    BlockType block_type = BlockType::XShuffle;
    SusaAxis susa_first = SusaAxis::WWise;
    SusaAxis susa_second = SusaAxis::HWise;
    FusionMode fusion_mode = FusionMode::Multiply;
    int num_joints = 17;
    std::pair<int, int> input_hw = {256, 192};

    void validate() const;  // throws ConfigError with the offending key
    int total_stride() const;
    XShuffleConfig x_shuffle_config() const {
        return XShuffleConfig{susa_first, susa_second, fusion_mode};
    }
};

NetConfig net_config_x18();
NetConfig net_config_x30();
NetConfig net_config_from_json(const std::string& json_text);
std::string net_config_to_json(const NetConfig& config);

// An instantiated network. Immutable after construction; forward is pure and
// safe to call concurrently.
class Network {
public:
    static Network build(const NetConfig& config, std::uint64_t seed);

    // Binary weights round trip ("XHW1" format, float32 storage).
    void save(const std::string& path) const;
    static Network load(const NetConfig& config, const std::string& path);

    Tensor forward(const Tensor& image) const;

    const NetConfig& config() const { return config_; }
    std::size_t parameter_count() const;

    // Parameter names in deterministic registration order.
    std::vector<std::string> parameter_names() const;
    const Tensor& parameter(const std::string& name) const;

    using BlockParams = std::variant<XShuffleParams, ShuffleBlockParams, BareBlockParams>;

private:
    Network() = default;

    struct ModuleParams {
        std::vector<std::vector<BlockParams>> blocks;  // [branch][block]
        FuseParams fuse;
    };
    struct StageParams {
        std::vector<ModuleParams> modules;
    };
    struct Params {
        StemParams stem;
        TransitionParams entry;                    // stem -> stage 1 branches
        std::vector<StageParams> stages;
        std::vector<TransitionParams> transitions;  // between consecutive stages
        ConvUnit head;
    };

    void register_all();

    NetConfig config_;
    std::unique_ptr<Params> params_;
    std::vector<std::pair<std::string, Tensor*>> registry_;
};

}  // namespace xhrnet
