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

#include "hashscd/binary_io.hpp"
#include "hashscd/error.hpp"
#include "hashscd/image.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <numbers>
#include <span>
#include <string>
#include <vector>

namespace hashscd {

/// Patch grid dimensions; P = rows * cols cells, row-major.
struct GridShape {
    std::size_t rows = 0;
    std::size_t cols = 0;

    [[nodiscard]] constexpr std::size_t cells() const noexcept { return rows * cols; }
    friend constexpr bool operator==(GridShape, GridShape) = default;
};

/// Half-open pixel rectangle [row_begin, row_end) x [col_begin, col_end).
struct CellRect {
    std::size_t row_begin = 0;
    std::size_t row_end = 0;
    std::size_t col_begin = 0;
    std::size_t col_end = 0;

    [[nodiscard]] std::size_t height() const noexcept { return row_end - row_begin; }
    [[nodiscard]] std::size_t width() const noexcept { return col_end - col_begin; }
    friend bool operator==(const CellRect&, const CellRect&) = default;
};

/// Integer-boundary partition: cell (i, j) spans rows floor(i*H/rows) up to
/// floor((i+1)*H/rows), and likewise for columns.
inline std::vector<CellRect> grid_cells(std::size_t height, std::size_t width, GridShape grid)
{
    detail::require(grid.rows >= 1 && grid.cols >= 1, ErrorCode::invalid_input,
                    "grid dimensions must be positive");
    detail::require(grid.rows <= height && grid.cols <= width, ErrorCode::invalid_input,
                    "grid larger than image");
    std::vector<CellRect> cells;
    cells.reserve(grid.cells());
    for (std::size_t i = 0; i < grid.rows; ++i) {
        for (std::size_t j = 0; j < grid.cols; ++j) {
            cells.push_back({i * height / grid.rows, (i + 1) * height / grid.rows,
                             j * width / grid.cols, (j + 1) * width / grid.cols});
        }
    }
    return cells;
}

inline Image crop(const Image& img, const CellRect& r)
{
    Image out(r.height(), r.width());
    for (std::size_t y = 0; y < r.height(); ++y) {
        const auto* src = img.pixels.data() + ((r.row_begin + y) * img.width + r.col_begin) * 3;
        std::copy(src, src + r.width() * 3, out.pixels.data() + y * r.width() * 3);
    }
    return out;
}

inline std::vector<Image> extract_patch_grid(const Image& img, GridShape grid)
{
    std::vector<Image> patches;
    for (const auto& cell : grid_cells(img.height, img.width, grid)) {
        patches.push_back(crop(img, cell));
    }
    return patches;
}

// ---------------------------------------------------------------------------
// Built-in patch descriptor
// ---------------------------------------------------------------------------

inline constexpr std::size_t descriptor_channels = 64;

namespace detail {

inline constexpr std::size_t histogram_bins = 8;
inline constexpr std::size_t orientation_bins = 8;
inline constexpr std::size_t pyramid_side = 5;

inline double luminance(const Image& img, std::size_t y, std::size_t x) noexcept
{
    return 0.299 * img.at(y, x, 0) + 0.587 * img.at(y, x, 1) + 0.114 * img.at(y, x, 2);
}

// Block (a, b) of a side x side layout; blocks that would be empty on tiny
// patches fall back to the nearest pixel.
inline std::pair<std::size_t, std::size_t> block_span(std::size_t a, std::size_t extent, std::size_t side)
{
    std::size_t lo = a * extent / side;
    std::size_t hi = (a + 1) * extent / side;
    if (hi <= lo) {
        lo = std::min(lo, extent - 1);
        hi = lo + 1;
    }
    return {lo, hi};
}

} // namespace detail

/// Deterministic 64-dimensional patch descriptor, L2-normalized.
///
/// Layout:
///   [0, 24)  8-bin intensity histogram per RGB channel, fractions of pixels
///            minus 1/8
///   [24, 32) unsigned gradient-orientation histogram of luminance, weighted
///            by gradient magnitude, scaled by 1 / (pixels * 255)
///   [32, 38) per-channel mean / 255 - 0.5 and standard deviation / 127.5
///   [38, 39) mean luminance / 255 - 0.5 (1x1 pyramid level)
///   [39, 64) 5x5 block-mean luminance / 255 - 0.5
///
/// A vector with norm below 1e-12 is returned unnormalized.
inline std::vector<double> describe_patch(const Image& patch)
{
    detail::require(!patch.empty(), ErrorCode::invalid_input, "empty patch");
    using namespace detail;
    const std::size_t h = patch.height;
    const std::size_t w = patch.width;
    const double n = static_cast<double>(h * w);
    std::vector<double> d(descriptor_channels, 0.0);

    std::array<double, 3> sum{};
    std::array<double, 3> sum_sq{};
    for (std::size_t y = 0; y < h; ++y) {
        for (std::size_t x = 0; x < w; ++x) {
            for (std::size_t c = 0; c < 3; ++c) {
                const auto v = patch.at(y, x, c);
                d[c * histogram_bins + (v >> 5)] += 1.0;
                sum[c] += v;
                sum_sq[c] += static_cast<double>(v) * v;
            }
        }
    }
    // Level-type components are centred so that inverting a region's colours
    // roughly negates them.
    for (std::size_t k = 0; k < 3 * histogram_bins; ++k) {
        d[k] = d[k] / n - 1.0 / static_cast<double>(histogram_bins);
    }

    std::vector<double> lum(h * w);
    for (std::size_t y = 0; y < h; ++y) {
        for (std::size_t x = 0; x < w; ++x) {
            lum[y * w + x] = luminance(patch, y, x);
        }
    }
    const std::size_t orient_off = 3 * histogram_bins;
    for (std::size_t y = 0; y < h; ++y) {
        for (std::size_t x = 0; x < w; ++x) {
            const double gx = lum[y * w + std::min(x + 1, w - 1)] - lum[y * w + (x == 0 ? 0 : x - 1)];
            const double gy = lum[std::min(y + 1, h - 1) * w + x] - lum[(y == 0 ? 0 : y - 1) * w + x];
            const double mag = std::hypot(gx, gy);
            if (mag == 0.0) {
                continue;
            }
            double theta = std::atan2(gy, gx);
            if (theta < 0.0) {
                theta += std::numbers::pi;
            }
            auto bin = static_cast<std::size_t>(theta / (std::numbers::pi / orientation_bins));
            bin = std::min(bin, orientation_bins - 1);
            d[orient_off + bin] += mag;
        }
    }
    for (std::size_t k = 0; k < orientation_bins; ++k) {
        d[orient_off + k] /= n * 255.0;
    }

    const std::size_t stats_off = orient_off + orientation_bins;
    for (std::size_t c = 0; c < 3; ++c) {
        const double mean = sum[c] / n;
        const double var = std::max(0.0, sum_sq[c] / n - mean * mean);
        d[stats_off + c] = mean / 255.0 - 0.5;
        d[stats_off + 3 + c] = std::sqrt(var) / 127.5;
    }

    const std::size_t pyr_off = stats_off + 6;
    double lum_total = 0.0;
    for (double v : lum) {
        lum_total += v;
    }
    d[pyr_off] = lum_total / n / 255.0 - 0.5;
    for (std::size_t a = 0; a < pyramid_side; ++a) {
        const auto [r0, r1] = block_span(a, h, pyramid_side);
        for (std::size_t b = 0; b < pyramid_side; ++b) {
            const auto [c0, c1] = block_span(b, w, pyramid_side);
            double s = 0.0;
            for (std::size_t y = r0; y < r1; ++y) {
                for (std::size_t x = c0; x < c1; ++x) {
                    s += lum[y * w + x];
                }
            }
            d[pyr_off + 1 + a * pyramid_side + b] = s / static_cast<double>((r1 - r0) * (c1 - c0)) / 255.0 - 0.5;
        }
    }

    double norm_sq = 0.0;
    for (double v : d) {
        norm_sq += v * v;
    }
    const double norm = std::sqrt(norm_sq);
    if (norm >= 1e-12) {
        for (double& v : d) {
            v /= norm;
        }
    }
    return d;
}

// ---------------------------------------------------------------------------
// Feature maps
// ---------------------------------------------------------------------------

/// C x H x W real-valued map, channel-major: index ((c * H) + i) * W + j.
struct FeatureMap {
    std::size_t channels = 0;
    std::size_t height = 0;
    std::size_t width = 0;
    std::vector<double> data;

    FeatureMap() = default;
    FeatureMap(std::size_t c, std::size_t h, std::size_t w) : channels(c), height(h), width(w), data(c * h * w, 0.0) {}

    [[nodiscard]] GridShape grid() const noexcept { return {height, width}; }
    [[nodiscard]] std::size_t cells() const noexcept { return height * width; }

    [[nodiscard]] double& at(std::size_t c, std::size_t i, std::size_t j) noexcept
    {
        return data[(c * height + i) * width + j];
    }
    [[nodiscard]] double at(std::size_t c, std::size_t i, std::size_t j) const noexcept
    {
        return data[(c * height + i) * width + j];
    }

    /// Feature vector of cell p in row-major order.
    [[nodiscard]] std::vector<double> cell(std::size_t p) const
    {
        std::vector<double> f(channels);
        for (std::size_t c = 0; c < channels; ++c) {
            f[c] = data[c * height * width + p];
        }
        return f;
    }

    void set_cell(std::size_t p, std::span<const double> f)
    {
        detail::require(f.size() == channels, ErrorCode::dimension_mismatch, "feature length != C");
        for (std::size_t c = 0; c < channels; ++c) {
            data[c * height * width + p] = f[c];
        }
    }

    friend bool operator==(const FeatureMap&, const FeatureMap&) = default;
};

inline FeatureMap compute_feature_map(const Image& img, GridShape grid)
{
    const auto cells = grid_cells(img.height, img.width, grid);
    FeatureMap fm(descriptor_channels, grid.rows, grid.cols);
    for (std::size_t p = 0; p < cells.size(); ++p) {
        fm.set_cell(p, describe_patch(crop(img, cells[p])));
    }
    return fm;
}

// ---------------------------------------------------------------------------
// FeatureMapFile ("HSFM")
// ---------------------------------------------------------------------------

inline constexpr std::uint16_t feature_map_version = 1;

enum class ScalarWidth : std::uint8_t { f32 = 4, f64 = 8 };

inline std::vector<std::uint8_t> encode_feature_map(const FeatureMap& fm, ScalarWidth width = ScalarWidth::f64)
{
    detail::ByteWriter w;
    w.put_magic("HSFM");
    w.put<std::uint16_t>(feature_map_version);
    w.put<std::uint32_t>(static_cast<std::uint32_t>(fm.channels));
    w.put<std::uint32_t>(static_cast<std::uint32_t>(fm.height));
    w.put<std::uint32_t>(static_cast<std::uint32_t>(fm.width));
    w.put<std::uint8_t>(static_cast<std::uint8_t>(width));
    for (double v : fm.data) {
        if (width == ScalarWidth::f32) {
            w.put<float>(static_cast<float>(v));
        } else {
            w.put<double>(v);
        }
    }
    return w.bytes();
}

inline FeatureMap decode_feature_map(std::span<const std::uint8_t> bytes)
{
    detail::ByteReader r(bytes);
    r.expect_magic("HSFM");
    const auto version = r.get<std::uint16_t>();
    if (version != feature_map_version) {
        throw Error(ErrorCode::unsupported_version, "feature map version " + std::to_string(version));
    }
    const auto c = r.get<std::uint32_t>();
    const auto h = r.get<std::uint32_t>();
    const auto w = r.get<std::uint32_t>();
    const auto scalar = r.get<std::uint8_t>();
    detail::require(scalar == 4 || scalar == 8, ErrorCode::invalid_input, "scalar width must be 4 or 8");
    detail::require(c >= 1 && h >= 1 && w >= 1, ErrorCode::invalid_input, "feature map dims must be positive");
    const std::size_t count = std::size_t{c} * h * w;
    if (r.remaining() < count * scalar) {
        throw Error(ErrorCode::truncated_payload, "feature map payload shorter than header dims");
    }
    detail::require(r.remaining() == count * scalar, ErrorCode::invalid_input, "trailing bytes after payload");
    FeatureMap fm(c, h, w);
    for (auto& v : fm.data) {
        v = scalar == 4 ? static_cast<double>(r.get<float>()) : r.get<double>();
        detail::require(std::isfinite(v), ErrorCode::invalid_input, "non-finite feature value");
    }
    return fm;
}

inline void save_feature_map(const FeatureMap& fm, const std::filesystem::path& path,
                             ScalarWidth width = ScalarWidth::f64)
{
    detail::write_file(path, encode_feature_map(fm, width));
}

inline FeatureMap load_feature_map(const std::filesystem::path& path)
{
    return decode_feature_map(detail::read_file(path));
}

} // namespace hashscd
