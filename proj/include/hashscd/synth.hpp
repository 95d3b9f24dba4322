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

#include "hashscd/augment.hpp"
#include "hashscd/change.hpp"
#include "hashscd/error.hpp"
#include "hashscd/features.hpp"
#include "hashscd/image.hpp"
#include "hashscd/random.hpp"

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <vector>

namespace hashscd {

enum class FillStyle { solid_recolor, texture_swap };

struct ChangeRect {
    std::size_t row = 0;
    std::size_t col = 0;
    std::size_t height = 0;
    std::size_t width = 0;
    FillStyle fill = FillStyle::solid_recolor;
};

struct SynthChangeSpec {
    std::size_t height = 128;
    std::size_t width = 128;
    std::vector<ChangeRect> rects;
    double nuisance = 0.0; ///< photometric perturbation of the whole T1 image, in [0, 1]
    std::uint64_t seed = 0;
};

struct SynthPair {
    Image before;
    Image after;
    ChangeMask mask;
};

namespace detail {

using Rgb = std::array<double, 3>;

inline Rgb hsv_to_rgb(double hue_deg, double s, double v) noexcept
{
    const double h = std::fmod(std::fmod(hue_deg, 360.0) + 360.0, 360.0) / 60.0;
    const double c = v * s;
    const double x = c * (1.0 - std::fabs(std::fmod(h, 2.0) - 1.0));
    const double m = v - c;
    Rgb rgb{};
    switch (static_cast<int>(h)) {
    case 0: rgb = {c, x, 0}; break;
    case 1: rgb = {x, c, 0}; break;
    case 2: rgb = {0, c, x}; break;
    case 3: rgb = {0, x, c}; break;
    case 4: rgb = {x, 0, c}; break;
    default: rgb = {c, 0, x}; break;
    }
    for (double& ch : rgb) {
        ch = 255.0 * (ch + m);
    }
    return rgb;
}

inline void put_rgb(Image& img, std::size_t y, std::size_t x, const Rgb& c)
{
    for (std::size_t k = 0; k < 3; ++k) {
        img.at(y, x, k) = clamp_u8(c[k]);
    }
}

// Smooth background, a handful of coloured blobs and fine grain.
inline Image scene(std::size_t height, std::size_t width, Rng& rng)
{
    Image img(height, width);
    const double hue0 = rng.uniform(0.0, 360.0);
    const double hue1 = hue0 + rng.uniform(60.0, 180.0);
    struct Blob {
        double cy, cx, r;
        Rgb color;
    };
    std::vector<Blob> blobs(6);
    for (auto& b : blobs) {
        b.cy = rng.uniform(0.0, static_cast<double>(height));
        b.cx = rng.uniform(0.0, static_cast<double>(width));
        b.r = rng.uniform(0.08, 0.25) * static_cast<double>(std::min(height, width));
        b.color = hsv_to_rgb(rng.uniform(0.0, 360.0), rng.uniform(0.3, 0.9), rng.uniform(0.3, 0.9));
    }
    for (std::size_t y = 0; y < height; ++y) {
        for (std::size_t x = 0; x < width; ++x) {
            const double t = (static_cast<double>(x) + static_cast<double>(y)) / static_cast<double>(height + width);
            Rgb c = hsv_to_rgb(hue0 + (hue1 - hue0) * t, 0.35, 0.35 + 0.3 * t);
            for (const auto& b : blobs) {
                const double dy = static_cast<double>(y) - b.cy;
                const double dx = static_cast<double>(x) - b.cx;
                if (dy * dy + dx * dx < b.r * b.r) {
                    c = b.color;
                }
            }
            for (double& ch : c) {
                ch += 10.0 * rng.normal();
            }
            put_rgb(img, y, x, c);
        }
    }
    return img;
}

} // namespace detail

/// T1 is T0 with every rectangle overwritten; the mask is their exact union.
/// Outside the rectangles T0 and T1 are byte-identical when nuisance is 0.
inline SynthPair gen_pair(const SynthChangeSpec& spec)
{
    detail::require(spec.height >= 1 && spec.width >= 1, ErrorCode::invalid_input, "image dims must be positive");
    detail::require(spec.nuisance >= 0.0 && spec.nuisance <= 1.0, ErrorCode::invalid_input,
                    "nuisance level must be in [0, 1]");
    for (const auto& r : spec.rects) {
        detail::require(r.height >= 1 && r.width >= 1 && r.row + r.height <= spec.height &&
                            r.col + r.width <= spec.width,
                        ErrorCode::invalid_input, "change rectangle out of bounds");
    }
    Rng rng(mix_seed(spec.seed, 0xC4A1));
    SynthPair out;
    out.before = detail::scene(spec.height, spec.width, rng);
    out.after = out.before;
    out.mask = {spec.height, spec.width, std::vector<std::uint8_t>(spec.height * spec.width, 0)};

    for (const auto& r : spec.rects) {
        // Solid fill uses the complement of the region's mean colour.
        detail::Rgb mean{};
        for (std::size_t y = r.row; y < r.row + r.height; ++y) {
            for (std::size_t x = r.col; x < r.col + r.width; ++x) {
                for (std::size_t c = 0; c < 3; ++c) {
                    mean[c] += out.before.at(y, x, c);
                }
            }
        }
        for (double& m : mean) {
            m = 255.0 - m / static_cast<double>(r.height * r.width);
        }
        const auto stripe_a = detail::hsv_to_rgb(rng.uniform(0.0, 360.0), 0.9, 1.0);
        const auto stripe_b = detail::hsv_to_rgb(rng.uniform(0.0, 360.0), 0.9, 0.15);
        const double period = rng.uniform(3.0, 7.0);
        for (std::size_t y = r.row; y < r.row + r.height; ++y) {
            for (std::size_t x = r.col; x < r.col + r.width; ++x) {
                if (r.fill == FillStyle::solid_recolor) {
                    detail::put_rgb(out.after, y, x, mean);
                } else {
                    const bool on = std::fmod(static_cast<double>(x + y), period) < period / 2.0;
                    detail::put_rgb(out.after, y, x, on ? stripe_a : stripe_b);
                }
                out.mask.values[y * spec.width + x] = 1;
            }
        }
    }

    if (spec.nuisance > 0.0) {
        const double gain = 1.0 + 0.2 * spec.nuisance * rng.uniform(-1.0, 1.0);
        for (auto& v : out.after.pixels) {
            v = detail::clamp_u8(v * gain + 8.0 * spec.nuisance * rng.normal());
        }
    }
    return out;
}

/// Single rectangle covering at least `min_cells` x `min_cells` grid cells
/// (and at most half of each axis), placed at random.
inline SynthChangeSpec random_change_spec(std::size_t height, std::size_t width, GridShape grid, std::uint64_t seed,
                                          std::size_t min_cells = 3)
{
    detail::require(grid.rows >= min_cells && grid.cols >= min_cells, ErrorCode::invalid_input,
                    "grid too small for the requested rectangle");
    Rng rng(mix_seed(seed, 0x5EC7));
    const std::size_t cell_h = (height + grid.rows - 1) / grid.rows;
    const std::size_t cell_w = (width + grid.cols - 1) / grid.cols;
    const std::size_t min_h = std::min(height, min_cells * cell_h);
    const std::size_t min_w = std::min(width, min_cells * cell_w);
    const std::size_t max_h = std::max(min_h, height / 2);
    const std::size_t max_w = std::max(min_w, width / 2);
    ChangeRect r;
    r.height = min_h + rng.index(max_h - min_h + 1);
    r.width = min_w + rng.index(max_w - min_w + 1);
    r.row = rng.index(height - r.height + 1);
    r.col = rng.index(width - r.width + 1);
    r.fill = rng.bernoulli(0.5) ? FillStyle::solid_recolor : FillStyle::texture_swap;
    return {height, width, {r}, 0.0, seed};
}

// ---------------------------------------------------------------------------
// Clustered families for retrieval
// ---------------------------------------------------------------------------

struct SynthClusterSpec {
    std::size_t clusters = 4;
    std::size_t items_per_cluster = 8;
    double separation = 1.0; ///< spread of cluster palettes and textures, [0, 1]
    double jitter = 0.1;     ///< per-item variation, [0, 1]
    std::size_t height = 64;
    std::size_t width = 64;
    std::uint64_t seed = 0;
};

struct LabeledImage {
    std::size_t label = 0;
    Image image;
};

/// Cluster c is an oriented stripe texture over a palette whose hue, stripe
/// angle and period are spread by `separation`; items add a brightness
/// offset, stripe phase shift and pixel noise scaled by `jitter`.
inline std::vector<LabeledImage> gen_clusters(const SynthClusterSpec& spec)
{
    detail::require(spec.clusters >= 1 && spec.items_per_cluster >= 1 && spec.height >= 1 && spec.width >= 1,
                    ErrorCode::invalid_input, "cluster spec dims must be positive");
    detail::require(spec.separation >= 0.0 && spec.separation <= 1.0 && spec.jitter >= 0.0 && spec.jitter <= 1.0,
                    ErrorCode::invalid_input, "separation and jitter must be in [0, 1]");
    std::vector<LabeledImage> out;
    out.reserve(spec.clusters * spec.items_per_cluster);
    Rng base_rng(mix_seed(spec.seed, 0xC1));
    const double hue_offset = base_rng.uniform(0.0, 360.0);
    for (std::size_t c = 0; c < spec.clusters; ++c) {
        const double frac = static_cast<double>(c) / static_cast<double>(spec.clusters);
        const double hue = hue_offset + 360.0 * frac * spec.separation;
        const double angle = std::numbers::pi * frac * spec.separation;
        const double period = 6.0 + 10.0 * frac * spec.separation;
        const auto bright = detail::hsv_to_rgb(hue, 0.8, 0.95);
        const auto dark = detail::hsv_to_rgb(hue + 180.0 * spec.separation, 0.6, 0.25 + 0.3 * frac * spec.separation);
        for (std::size_t item = 0; item < spec.items_per_cluster; ++item) {
            Rng rng(mix_seed(spec.seed, 1000 * (c + 1) + item));
            const double shift = spec.jitter * 40.0 * rng.uniform(-1.0, 1.0);
            const double phase = spec.jitter * 2.0 * std::numbers::pi * rng.uniform(-0.25, 0.25);
            Image img(spec.height, spec.width);
            for (std::size_t y = 0; y < spec.height; ++y) {
                for (std::size_t x = 0; x < spec.width; ++x) {
                    const double s = std::sin(2.0 * std::numbers::pi *
                                                  (static_cast<double>(x) * std::cos(angle) +
                                                   static_cast<double>(y) * std::sin(angle)) /
                                                  period +
                                              phase);
                    const double t = (s + 1.0) / 2.0;
                    detail::Rgb px{};
                    for (std::size_t k = 0; k < 3; ++k) {
                        px[k] = dark[k] + (bright[k] - dark[k]) * t + shift;
                        if (spec.jitter > 0.0) {
                            px[k] += spec.jitter * 20.0 * rng.normal();
                        }
                    }
                    detail::put_rgb(img, y, x, px);
                }
            }
            out.push_back({c, std::move(img)});
        }
    }
    return out;
}

} // namespace hashscd
