#include "xhrnet/heatmap.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

namespace xhrnet {

GaussianSlice gaussian_heatmap(double center_x, double center_y, double sigma,
                               std::pair<int, int> hw) {
    if (sigma <= 0.0) throw UsageError("gaussian_heatmap sigma must be positive");
    const auto [h, w] = hw;
    if (h < 1 || w < 1) throw DimError("gaussian_heatmap grid extents must be >= 1");
    Tensor slice({h, w});
    const double inv = 1.0 / (2.0 * sigma * sigma);
    for (int i = 0; i < h; ++i) {
        for (int j = 0; j < w; ++j) {
            const double dx = j - center_x;
            const double dy = i - center_y;
            slice.at({i, j}) = std::exp(-(dx * dx + dy * dy) * inv);
        }
    }
    const bool off_grid = center_x < -3.0 * sigma || center_x > (w - 1) + 3.0 * sigma ||
                          center_y < -3.0 * sigma || center_y > (h - 1) + 3.0 * sigma;
    return {std::move(slice), off_grid};
}

HeatVectorPair project(const Tensor& slice) {
    if (slice.rank() != 2) throw DimError("project expects a [H,W] slice");
    const int h = slice.shape()[0], w = slice.shape()[1];
    const double total = sum_all(slice);
    if (total <= 0.0) throw DegenerateError("project: slice has no positive mass");
    HeatVectorPair pair{Tensor({h}), Tensor({w})};
    for (int i = 0; i < h; ++i) {
        for (int j = 0; j < w; ++j) {
            const double v = slice.at({i, j});
            pair.h_vec[static_cast<std::size_t>(i)] += v;
            pair.w_vec[static_cast<std::size_t>(j)] += v;
        }
    }
    for (std::size_t i = 0; i < pair.h_vec.size(); ++i) pair.h_vec[i] /= total;
    for (std::size_t j = 0; j < pair.w_vec.size(); ++j) pair.w_vec[j] /= total;
    return pair;
}

Tensor reconstruct(const HeatVectorPair& pair) {
    if (pair.h_vec.rank() != 1 || pair.w_vec.rank() != 1) {
        throw DimError("reconstruct expects two vectors");
    }
    const int h = pair.h_vec.shape()[0], w = pair.w_vec.shape()[0];
    Tensor out({h, w});
    double peak = 0.0;
    for (int i = 0; i < h; ++i) {
        for (int j = 0; j < w; ++j) {
            const double v = pair.h_vec[static_cast<std::size_t>(i)] *
                             pair.w_vec[static_cast<std::size_t>(j)];
            out.at({i, j}) = v;
            peak = std::max(peak, v);
        }
    }
    if (peak <= 0.0) throw DegenerateError("reconstruct: vectors carry no positive mass");
    for (std::size_t i = 0; i < out.size(); ++i) out[i] /= peak;
    return out;
}

double reconstruction_error(const Tensor& slice) {
    Tensor rebuilt = reconstruct(project(slice));
    double peak = 0.0;
    for (std::size_t i = 0; i < slice.size(); ++i) peak = std::max(peak, slice[i]);
    if (peak <= 0.0) throw DegenerateError("reconstruction_error: slice has no positive mass");
    double err = 0.0;
    for (std::size_t i = 0; i < slice.size(); ++i) {
        err = std::max(err, std::fabs(slice[i] / peak - rebuilt[i]));
    }
    return err;
}

namespace {

Keypoint decode_slice(const double* d, int h, int w) {
    int py = 0, px = 0;
    double peak = d[0];
    for (int i = 0; i < h; ++i) {
        for (int j = 0; j < w; ++j) {
            if (d[i * w + j] > peak) {
                peak = d[i * w + j];
                py = i;
                px = j;
            }
        }
    }
    if (peak <= 0.0) return Keypoint{0.0, 0.0, 0.0, false};
    Keypoint kp{static_cast<double>(px), static_cast<double>(py), peak, true};
    if (px > 0 && px < w - 1) {
        const double right = d[py * w + px + 1], left = d[py * w + px - 1];
        if (right > left) kp.x += 0.25;
        if (left > right) kp.x -= 0.25;
    }
    if (py > 0 && py < h - 1) {
        const double down = d[(py + 1) * w + px], up = d[(py - 1) * w + px];
        if (down > up) kp.y += 0.25;
        if (up > down) kp.y -= 0.25;
    }
    return kp;
}

}  // namespace

std::vector<Keypoint> decode(const Tensor& heatmaps) {
    if (heatmaps.rank() == 2) {
        return {decode_slice(heatmaps.data(), heatmaps.shape()[0], heatmaps.shape()[1])};
    }
    if (heatmaps.rank() != 3) throw DimError("decode expects [K,H,W] heatmaps");
    const int k = heatmaps.shape()[0], h = heatmaps.shape()[1], w = heatmaps.shape()[2];
    std::vector<Keypoint> out;
    out.reserve(static_cast<std::size_t>(k));
    for (int c = 0; c < k; ++c) {
        out.push_back(decode_slice(heatmaps.data() + static_cast<std::size_t>(c) * h * w, h, w));
    }
    return out;
}

Tensor flip_average(const Tensor& heatmaps, const Tensor& flipped_input_heatmaps,
                    const std::vector<std::pair<int, int>>& swap_pairs) {
    if (heatmaps.rank() != 3 || !heatmaps.same_shape(flipped_input_heatmaps)) {
        throw DimError("flip_average expects two [K,H,W] heatmaps of equal shape");
    }
    const int k = heatmaps.shape()[0], h = heatmaps.shape()[1], w = heatmaps.shape()[2];
    std::set<int> seen;
    for (const auto& [l, r] : swap_pairs) {
        if (l < 0 || l >= k || r < 0 || r >= k) {
            throw ConfigError("flip pair (" + std::to_string(l) + "," + std::to_string(r) +
                              ") out of range for " + std::to_string(k) + " joints");
        }
        if (!seen.insert(l).second || !seen.insert(r).second) {
            throw ConfigError("flip pairs reuse joint index " +
                              std::to_string(seen.count(l) ? l : r));
        }
    }
    // channel source after the left/right swap
    std::vector<int> source(static_cast<std::size_t>(k));
    for (int c = 0; c < k; ++c) source[static_cast<std::size_t>(c)] = c;
    for (const auto& [l, r] : swap_pairs) {
        source[static_cast<std::size_t>(l)] = r;
        source[static_cast<std::size_t>(r)] = l;
    }
    Tensor out({k, h, w});
    for (int c = 0; c < k; ++c) {
        const int src = source[static_cast<std::size_t>(c)];
        for (int i = 0; i < h; ++i) {
            for (int j = 0; j < w; ++j) {
                const double mirrored = flipped_input_heatmaps.at({src, i, w - 1 - j});
                out.at({c, i, j}) = 0.5 * (heatmaps.at({c, i, j}) + mirrored);
            }
        }
    }
    return out;
}

std::vector<std::pair<int, int>> coco_flip_pairs() {
    return {{1, 2}, {3, 4}, {5, 6}, {7, 8}, {9, 10}, {11, 12}, {13, 14}, {15, 16}};
}

FusionToyResult fusion_toy(const Tensor& a, const Tensor& b, FusionMode mode) {
    if (a.rank() != 2 || !a.same_shape(b)) {
        throw DimError("fusion_toy expects two [H,W] slices of equal shape");
    }
    auto has_positive = [](const Tensor& t) {
        for (std::size_t i = 0; i < t.size(); ++i) {
            if (t[i] > 0.0) return true;
        }
        return false;
    };
    if (!has_positive(a) || !has_positive(b)) {
        throw DegenerateError("fusion_toy inputs must be positive somewhere");
    }
    const int h = a.shape()[0], w = a.shape()[1];
    FusionToyResult r;
    r.fused = Tensor({h, w});
    double peak = 0.0;
    for (int i = 0; i < h; ++i) {
        for (int j = 0; j < w; ++j) {
            const double v = (mode == FusionMode::Multiply) ? a.at({i, j}) * b.at({i, j})
                                                            : a.at({i, j}) + b.at({i, j});
            r.fused.at({i, j}) = v;
            if (v > peak) {
                peak = v;
                r.peak_x = j;
                r.peak_y = i;
            }
        }
    }
    if (peak <= 0.0) {
        r.degenerate = true;
        return r;
    }
    for (std::size_t i = 0; i < r.fused.size(); ++i) r.fused[i] /= peak;
    for (std::size_t i = 0; i < r.fused.size(); ++i) {
        if (r.fused[i] >= 0.5) ++r.half_max_area;
    }
    return r;
}

std::string FusionToyResult::to_json(FusionMode mode) const {
    nlohmann::json j;
    j["peak"] = {peak_x, peak_y};
    j["half_max_area"] = half_max_area;
    j["mode"] = to_string(mode);
    j["degenerate"] = degenerate;
    return j.dump();
}

// ---- CSV -------------------------------------------------------------------------

std::string to_csv(const Tensor& t) {
    if (t.rank() != 2 && t.rank() != 3) throw DimError("to_csv expects [H,W] or [K,H,W]");
    const int k = t.rank() == 3 ? t.shape()[0] : 1;
    const int h = t.shape()[t.rank() - 2], w = t.shape()[t.rank() - 1];
    std::ostringstream os;
    os.precision(17);
    for (int c = 0; c < k; ++c) {
        if (c) os << "\n";
        for (int i = 0; i < h; ++i) {
            for (int j = 0; j < w; ++j) {
                if (j) os << ',';
                os << t[(static_cast<std::size_t>(c) * h + i) * w + j];
            }
            os << "\n";
        }
    }
    return os.str();
}

Tensor from_csv(const std::string& text) {
    std::vector<std::vector<std::vector<double>>> blocks(1);
    std::istringstream is(text);
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty() || line == "\r") {
            if (!blocks.back().empty()) blocks.emplace_back();
            continue;
        }
        std::vector<double> row;
        std::istringstream ls(line);
        std::string cell;
        while (std::getline(ls, cell, ',')) {
            try {
                row.push_back(std::stod(cell));
            } catch (const std::exception&) {
                throw FormatError("csv: cannot parse value '" + cell + "'");
            }
        }
        blocks.back().push_back(std::move(row));
    }
    if (!blocks.empty() && blocks.back().empty()) blocks.pop_back();
    if (blocks.empty() || blocks[0].empty()) throw FormatError("csv: no data");
    const std::size_t h = blocks[0].size(), w = blocks[0][0].size();
    std::vector<double> data;
    for (const auto& block : blocks) {
        if (block.size() != h) throw FormatError("csv: blocks must have matching row counts");
        for (const auto& row : block) {
            if (row.size() != w) throw FormatError("csv: ragged rows");
            data.insert(data.end(), row.begin(), row.end());
        }
    }
    if (blocks.size() == 1) {
        return Tensor({static_cast<int>(h), static_cast<int>(w)}, std::move(data));
    }
    return Tensor({static_cast<int>(blocks.size()), static_cast<int>(h), static_cast<int>(w)},
                  std::move(data));
}

void write_csv_file(const Tensor& t, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw FormatError("cannot open '" + path + "' for writing");
    os << to_csv(t);
}

Tensor read_csv_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw FormatError("cannot open '" + path + "'");
    std::ostringstream buf;
    buf << is.rdbuf();
    return from_csv(buf.str());
}

}  // namespace xhrnet
