// Copyright 2026 the hashscd authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include "hashscd/error.hpp"
#include "hashscd/features.hpp"
#include "hashscd/hash_space.hpp"
#include "hashscd/image.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <tuple>
#include <span>
#include <vector>

namespace hashscd {

struct GlobalDecision {
    bool changed = false;
    double distance = 0.0;
};

/// Changed iff the normalized Hamming distance strictly exceeds `threshold`.
inline GlobalDecision detect_global(const BitCode& a, const BitCode& b, double threshold)
{
    detail::require(threshold >= 0.0 && threshold <= 1.0, ErrorCode::invalid_input, "threshold must be in [0, 1]");
    const double d = normalized_hamming(a, b);
    return {d > threshold, d};
}

/// Normalized Hamming distance per cell, row-major.
struct PatchDistanceGrid {
    GridShape grid;
    std::vector<double> values;

    [[nodiscard]] double at(std::size_t i, std::size_t j) const noexcept { return values[i * grid.cols + j]; }
};

inline PatchDistanceGrid localize(std::span<const BitCode> a, std::span<const BitCode> b, GridShape grid)
{
    if (a.size() != grid.cells() || b.size() != grid.cells()) {
        throw Error(ErrorCode::dimension_mismatch, "patch code count does not match the grid");
    }
    PatchDistanceGrid out{grid, std::vector<double>(grid.cells())};
    for (std::size_t p = 0; p < grid.cells(); ++p) {
        if (a[p].size() != b[p].size()) {
            throw Error(ErrorCode::dimension_mismatch, "patch code lengths differ");
        }
        out.values[p] = normalized_hamming(a[p], b[p]);
    }
    return out;
}

/// Per-pixel change score at image resolution.
struct ChangeHeatmap {
    std::size_t height = 0;
    std::size_t width = 0;
    std::vector<double> values;

    [[nodiscard]] double at(std::size_t y, std::size_t x) const noexcept { return values[y * width + x]; }
};

struct ChangeMask {
    std::size_t height = 0;
    std::size_t width = 0;
    std::vector<std::uint8_t> values; ///< 0 or 1

    [[nodiscard]] std::uint8_t at(std::size_t y, std::size_t x) const noexcept { return values[y * width + x]; }
    friend bool operator==(const ChangeMask&, const ChangeMask&) = default;
};

/// Bilinear upsampling; grid value (i, j) sits at the centre of cell (i, j),
/// i.e. pixel coordinate ((i + 0.5) * H_img / H, (j + 0.5) * W_img / W), and
/// samples beyond the outermost centres clamp to the edge values.
inline ChangeHeatmap upsample(const PatchDistanceGrid& g, std::size_t height, std::size_t width)
{
    detail::require(height >= g.grid.rows && width >= g.grid.cols, ErrorCode::invalid_input,
                    "target resolution smaller than the grid");
    ChangeHeatmap out{height, width, std::vector<double>(height * width)};
    const auto axis = [](std::size_t pixel, std::size_t extent, std::size_t cells) {
        double c = (static_cast<double>(pixel) + 0.5) * static_cast<double>(cells) / static_cast<double>(extent) - 0.5;
        c = std::clamp(c, 0.0, static_cast<double>(cells - 1));
        const auto lo = static_cast<std::size_t>(c);
        const std::size_t hi = std::min(lo + 1, cells - 1);
        return std::tuple{lo, hi, c - static_cast<double>(lo)};
    };
    for (std::size_t y = 0; y < height; ++y) {
        const auto [i0, i1, ty] = axis(y, height, g.grid.rows);
        for (std::size_t x = 0; x < width; ++x) {
            const auto [j0, j1, tx] = axis(x, width, g.grid.cols);
            const double top = g.at(i0, j0) * (1.0 - tx) + g.at(i0, j1) * tx;
            const double bottom = g.at(i1, j0) * (1.0 - tx) + g.at(i1, j1) * tx;
            out.values[y * width + x] = top * (1.0 - ty) + bottom * ty;
        }
    }
    return out;
}

/// Pixel changed iff score > threshold.
inline ChangeMask threshold_heatmap(const ChangeHeatmap& hm, double threshold = 0.5)
{
    detail::require(threshold >= 0.0 && threshold <= 1.0, ErrorCode::invalid_input, "threshold must be in [0, 1]");
    ChangeMask out{hm.height, hm.width, std::vector<std::uint8_t>(hm.values.size())};
    for (std::size_t i = 0; i < hm.values.size(); ++i) {
        out.values[i] = hm.values[i] > threshold ? 1 : 0;
    }
    return out;
}

struct Confusion {
    std::size_t tp = 0;
    std::size_t fp = 0;
    std::size_t fn = 0;
    std::size_t tn = 0;
};

inline Confusion confusion(const ChangeMask& pred, const ChangeMask& gt)
{
    if (pred.height != gt.height || pred.width != gt.width) {
        throw Error(ErrorCode::dimension_mismatch, "mask dimensions differ");
    }
    Confusion c;
    for (std::size_t i = 0; i < pred.values.size(); ++i) {
        const bool p = pred.values[i] != 0;
        const bool t = gt.values[i] != 0;
        c.tp += p && t;
        c.fp += p && !t;
        c.fn += !p && t;
        c.tn += !p && !t;
    }
    return c;
}

// Both metrics are 1.0 when neither mask has a positive pixel.
inline double f1(const ChangeMask& pred, const ChangeMask& gt)
{
    const auto c = confusion(pred, gt);
    const std::size_t denom = 2 * c.tp + c.fp + c.fn;
    return denom == 0 ? 1.0 : 2.0 * static_cast<double>(c.tp) / static_cast<double>(denom);
}

inline double iou(const ChangeMask& pred, const ChangeMask& gt)
{
    const auto c = confusion(pred, gt);
    const std::size_t denom = c.tp + c.fp + c.fn;
    return denom == 0 ? 1.0 : static_cast<double>(c.tp) / static_cast<double>(denom);
}

/// Full localization pipeline for two observations of the same grid.
inline ChangeHeatmap change_heatmap(std::span<const BitCode> before, std::span<const BitCode> after, GridShape grid,
                                    std::size_t height, std::size_t width)
{
    return upsample(localize(before, after, grid), height, width);
}

// ---------------------------------------------------------------------------
// Raster conversion
// ---------------------------------------------------------------------------

/// 8-bit grayscale, value = round(255 * score).
inline GrayImage heatmap_to_gray(const ChangeHeatmap& hm)
{
    GrayImage out{hm.height, hm.width, std::vector<std::uint8_t>(hm.values.size())};
    for (std::size_t i = 0; i < hm.values.size(); ++i) {
        out.pixels[i] = static_cast<std::uint8_t>(std::lround(255.0 * std::clamp(hm.values[i], 0.0, 1.0)));
    }
    return out;
}

inline GrayImage mask_to_gray(const ChangeMask& m)
{
    GrayImage out{m.height, m.width, std::vector<std::uint8_t>(m.values.size())};
    for (std::size_t i = 0; i < m.values.size(); ++i) {
        out.pixels[i] = m.values[i] ? 255 : 0;
    }
    return out;
}

/// Any non-zero channel marks a changed pixel.
inline ChangeMask mask_from_image(const Image& img)
{
    ChangeMask out{img.height, img.width, std::vector<std::uint8_t>(img.height * img.width)};
    for (std::size_t i = 0; i < out.values.size(); ++i) {
        out.values[i] = (img.pixels[i * 3] | img.pixels[i * 3 + 1] | img.pixels[i * 3 + 2]) != 0 ? 1 : 0;
    }
    return out;
}

inline void write_heatmap_png(const std::filesystem::path& path, const ChangeHeatmap& hm)
{
    write_png(path, heatmap_to_gray(hm));
}

inline void write_mask_png(const std::filesystem::path& path, const ChangeMask& m)
{
    write_png(path, mask_to_gray(m));
}

inline ChangeMask read_mask_png(const std::filesystem::path& path) { return mask_from_image(read_png(path)); }

} // namespace hashscd
