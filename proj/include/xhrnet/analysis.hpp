#pragma once

#include <string>
#include <utility>
#include <vector>

#include "xhrnet/backbone.hpp"

namespace xhrnet {

// Structural complexity audit. Walks the network configuration without
// touching any tensor data, so reports are exact, deterministic and
// independent of weight values.
//
// Counting convention: one MAC per multiply-accumulate inside convolutions
// and the SUSA kernels; a conv bias and a per-channel affine norm cost one
// MAC per output element. Pooling, softmax, LayerNorm, sigmoid, elementwise
// fusion, resampling and channel reordering are counted free.

struct FlopsRow {
    std::string name;
    std::string kind;
    long long params = 0;
    long long macs = 0;
};

struct FlopsReport {
    std::pair<int, int> input_hw;
    std::vector<FlopsRow> rows;
    long long total_params = 0;
    long long total_macs = 0;

    std::string to_text(bool per_layer = true) const;
    std::string to_json() const;
};

long long count_params(const NetConfig& config);
long long count_params(const Network& net);

FlopsReport count_macs(const NetConfig& config, std::pair<int, int> input_hw);

// Closed-form cost of the primitives at one feature-map shape, plus the
// headline reduction ratios.
struct CostComparison {
    int channels = 0, height = 0, width = 0;
    long long standard3x3 = 0;
    long long dwsep3x3 = 0;
    long long pointwise = 0;
    long long susa_h = 0;
    long long susa_w = 0;
    long long susa_pair = 0;
    double dwsep_reduction = 0.0;        // 1 - dwsep/standard
    double susa_vs_pointwise_pair = 0.0; // susa_pair / (2 * pointwise)

    std::string to_json() const;
};

CostComparison cost_compare(int channels, int height, int width);

}  // namespace xhrnet
