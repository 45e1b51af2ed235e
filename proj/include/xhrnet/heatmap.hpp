#pragma once

#include <string>
#include <utility>
#include <vector>

#include "xhrnet/susa.hpp"
#include "xhrnet/tensor.hpp"

namespace xhrnet {

// Single-peak heatmap codec: Gaussian targets, the 1D projection pair that a
// separable heatmap is exactly reconstructible from, sub-pixel decoding,
// flip-test averaging, and the add-vs-multiply fusion toy experiment.

struct GaussianSlice {
    Tensor values;       // [H,W], peak 1 when the center lies on the grid
    bool empty_warning;  // center further than 3 sigma outside the grid
};

GaussianSlice gaussian_heatmap(double center_x, double center_y, double sigma,
                               std::pair<int, int> hw);

struct HeatVectorPair {
    Tensor h_vec;  // [H], sums to 1
    Tensor w_vec;  // [W], sums to 1
};

// Normalized row/column marginals of a [H,W] slice. Throws DegenerateError on
// an all-zero slice.
HeatVectorPair project(const Tensor& slice);

// Outer product of the pair, rescaled to peak 1. Exact inverse of project on
// separable slices.
Tensor reconstruct(const HeatVectorPair& pair);

// Max-abs difference between a slice and its project->reconstruct round trip
// (both peak-normalized); 0 iff the slice is rank-1.
double reconstruction_error(const Tensor& slice);

struct Keypoint {
    double x = 0.0;
    double y = 0.0;
    double score = 0.0;
    bool valid = false;
};

// Integer argmax plus a quarter-pixel shift toward the strictly larger
// neighbor on each axis (no shift on ties or at borders). One keypoint per
// [K,H,W] channel; a slice without a positive maximum decodes as invalid.
std::vector<Keypoint> decode(const Tensor& heatmaps);

// Mirror the flipped-input heatmaps along W, swap each (left,right) channel
// pair, and average with the original heatmaps.
Tensor flip_average(const Tensor& heatmaps, const Tensor& flipped_input_heatmaps,
                    const std::vector<std::pair<int, int>>& swap_pairs);

// Standard 17-joint ordering: (1,2),(3,4),...,(15,16).
std::vector<std::pair<int, int>> coco_flip_pairs();

struct FusionToyResult {
    Tensor fused;  // max-normalized
    int peak_x = 0;
    int peak_y = 0;
    long half_max_area = 0;  // pixels >= half the peak
    bool degenerate = false;
    std::string to_json(FusionMode mode) const;
};

FusionToyResult fusion_toy(const Tensor& a, const Tensor& b, FusionMode mode);

// Plain CSV grids; multi-channel stacks are blank-line separated blocks.
std::string to_csv(const Tensor& slice_or_stack);
Tensor from_csv(const std::string& text);
void write_csv_file(const Tensor& t, const std::string& path);
Tensor read_csv_file(const std::string& path);

}  // namespace xhrnet
