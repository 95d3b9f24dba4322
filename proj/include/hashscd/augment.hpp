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
#include "hashscd/image.hpp"
#include "hashscd/random.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace hashscd {

/// Photometric and geometric augmentations used to build contrastive views.
/// Every enabled transform is applied on every draw, in the fixed order
/// crop, rotate, color jitter, blur, noise, salt-and-pepper, gray.
struct AugmentationConfig {
    bool rotate = false;
    double max_rotation_deg = 10.0;

    bool resized_crop = false;
    double min_crop_scale = 0.8; ///< smallest kept area fraction

    bool color_jitter = false;
    double brightness = 0.2;
    double contrast = 0.2;
    double saturation = 0.2;

    bool gaussian_noise = false;
    double noise_sigma = 6.0; ///< in 8-bit levels

    bool gaussian_blur = false;
    double max_blur_sigma = 1.0;

    bool salt_and_pepper = false;
    double salt_pepper_rate = 0.005;

    bool to_gray = false;

    std::uint64_t seed = 0;

    [[nodiscard]] bool any() const noexcept
    {
        return rotate || resized_crop || color_jitter || gaussian_noise || gaussian_blur || salt_and_pepper ||
               to_gray;
    }

    void validate() const
    {
        using detail::require;
        require(max_rotation_deg >= 0.0 && max_rotation_deg <= 30.0, ErrorCode::invalid_input,
                "rotation range must be within +-30 degrees");
        require(min_crop_scale > 0.0 && min_crop_scale <= 1.0, ErrorCode::invalid_input,
                "crop scale must be in (0, 1]");
        require(brightness >= 0.0 && brightness < 1.0 && contrast >= 0.0 && contrast < 1.0 && saturation >= 0.0 &&
                    saturation < 1.0,
                ErrorCode::invalid_input, "color jitter strengths must be in [0, 1)");
        require(noise_sigma >= 0.0 && noise_sigma <= 64.0, ErrorCode::invalid_input,
                "noise sigma must be in [0, 64]");
        require(max_blur_sigma >= 0.0 && max_blur_sigma <= 5.0, ErrorCode::invalid_input,
                "blur sigma must be in [0, 5]");
        require(salt_pepper_rate >= 0.0 && salt_pepper_rate <= 0.5, ErrorCode::invalid_input,
                "salt-and-pepper rate must be in [0, 0.5]");
    }

    /// Enables transforms from a comma-separated list such as
    /// "rotate,crop,color-jitter,noise,blur,salt-and-pepper,gray".
    void enable(std::string_view list)
    {
        std::string item;
        std::istringstream in{std::string(list)};
        while (std::getline(in, item, ',')) {
            if (item.empty() || item == "none") {
                continue;
            }
            if (item == "rotate") {
                rotate = true;
            } else if (item == "crop" || item == "random-resized-crop") {
                resized_crop = true;
            } else if (item == "color-jitter") {
                color_jitter = true;
            } else if (item == "noise" || item == "gaussian-noise") {
                gaussian_noise = true;
            } else if (item == "blur" || item == "gaussian-blur") {
                gaussian_blur = true;
            } else if (item == "salt-and-pepper") {
                salt_and_pepper = true;
            } else if (item == "gray" || item == "to-gray") {
                to_gray = true;
            } else {
                throw Error(ErrorCode::invalid_input, "unknown augmentation '" + item + "'");
            }
        }
    }
};

namespace detail {

inline std::uint8_t clamp_u8(double v) noexcept
{
    return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
}

/// Bilinear sample with edge replication.
inline double sample_bilinear(const Image& img, double y, double x, std::size_t c) noexcept
{
    y = std::clamp(y, 0.0, static_cast<double>(img.height - 1));
    x = std::clamp(x, 0.0, static_cast<double>(img.width - 1));
    const auto y0 = static_cast<std::size_t>(y);
    const auto x0 = static_cast<std::size_t>(x);
    const std::size_t y1 = std::min(y0 + 1, img.height - 1);
    const std::size_t x1 = std::min(x0 + 1, img.width - 1);
    const double ty = y - static_cast<double>(y0);
    const double tx = x - static_cast<double>(x0);
    const double top = img.at(y0, x0, c) * (1.0 - tx) + img.at(y0, x1, c) * tx;
    const double bottom = img.at(y1, x0, c) * (1.0 - tx) + img.at(y1, x1, c) * tx;
    return top * (1.0 - ty) + bottom * ty;
}

inline Image rotate_image(const Image& img, double degrees)
{
    Image out(img.height, img.width);
    const double rad = degrees * std::numbers::pi / 180.0;
    const double cs = std::cos(rad);
    const double sn = std::sin(rad);
    const double cy = (static_cast<double>(img.height) - 1.0) / 2.0;
    const double cx = (static_cast<double>(img.width) - 1.0) / 2.0;
    for (std::size_t y = 0; y < img.height; ++y) {
        for (std::size_t x = 0; x < img.width; ++x) {
            const double dy = static_cast<double>(y) - cy;
            const double dx = static_cast<double>(x) - cx;
            const double sy = cy + dy * cs - dx * sn;
            const double sx = cx + dy * sn + dx * cs;
            for (std::size_t c = 0; c < 3; ++c) {
                out.at(y, x, c) = clamp_u8(sample_bilinear(img, sy, sx, c));
            }
        }
    }
    return out;
}

inline Image resized_crop(const Image& img, Rng& rng, double min_scale)
{
    const double area = static_cast<double>(img.height * img.width);
    const double scale = rng.uniform(min_scale, 1.0);
    const double log_ratio = rng.uniform(std::log(3.0 / 4.0), std::log(4.0 / 3.0));
    const double ratio = std::exp(log_ratio); // width / height
    double ch = std::sqrt(scale * area / ratio);
    double cw = ch * ratio;
    ch = std::clamp(ch, 1.0, static_cast<double>(img.height));
    cw = std::clamp(cw, 1.0, static_cast<double>(img.width));
    const double oy = rng.uniform(0.0, static_cast<double>(img.height) - ch);
    const double ox = rng.uniform(0.0, static_cast<double>(img.width) - cw);
    Image out(img.height, img.width);
    for (std::size_t y = 0; y < img.height; ++y) {
        const double sy = oy + (static_cast<double>(y) + 0.5) * ch / static_cast<double>(img.height) - 0.5;
        for (std::size_t x = 0; x < img.width; ++x) {
            const double sx = ox + (static_cast<double>(x) + 0.5) * cw / static_cast<double>(img.width) - 0.5;
            for (std::size_t c = 0; c < 3; ++c) {
                out.at(y, x, c) = clamp_u8(sample_bilinear(img, sy, sx, c));
            }
        }
    }
    return out;
}

inline void color_jitter(Image& img, Rng& rng, double brightness, double contrast, double saturation)
{
    const double b = rng.uniform(1.0 - brightness, 1.0 + brightness);
    const double k = rng.uniform(1.0 - contrast, 1.0 + contrast);
    const double s = rng.uniform(1.0 - saturation, 1.0 + saturation);
    double mean_gray = 0.0;
    const std::size_t n = img.height * img.width;
    for (std::size_t i = 0; i < n; ++i) {
        const auto* px = &img.pixels[i * 3];
        mean_gray += 0.299 * px[0] + 0.587 * px[1] + 0.114 * px[2];
    }
    mean_gray = mean_gray * b / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
        auto* px = &img.pixels[i * 3];
        double rgb[3] = {px[0] * b, px[1] * b, px[2] * b};
        const double gray = 0.299 * rgb[0] + 0.587 * rgb[1] + 0.114 * rgb[2];
        for (double& v : rgb) {
            v = gray + s * (v - gray);
            v = mean_gray + k * (v - mean_gray);
        }
        for (std::size_t c = 0; c < 3; ++c) {
            px[c] = clamp_u8(rgb[c]);
        }
    }
}

inline Image gaussian_blur(const Image& img, double sigma)
{
    const auto radius = static_cast<std::ptrdiff_t>(std::ceil(3.0 * sigma));
    std::vector<double> kernel(static_cast<std::size_t>(2 * radius + 1));
    double total = 0.0;
    for (std::ptrdiff_t i = -radius; i <= radius; ++i) {
        const double w = std::exp(-0.5 * static_cast<double>(i * i) / (sigma * sigma));
        kernel[static_cast<std::size_t>(i + radius)] = w;
        total += w;
    }
    for (double& w : kernel) {
        w /= total;
    }
    const auto h = static_cast<std::ptrdiff_t>(img.height);
    const auto wd = static_cast<std::ptrdiff_t>(img.width);
    std::vector<double> tmp(img.pixels.size());
    for (std::ptrdiff_t y = 0; y < h; ++y) {
        for (std::ptrdiff_t x = 0; x < wd; ++x) {
            for (std::size_t c = 0; c < 3; ++c) {
                double acc = 0.0;
                for (std::ptrdiff_t i = -radius; i <= radius; ++i) {
                    const auto xx = static_cast<std::size_t>(std::clamp(x + i, std::ptrdiff_t{0}, wd - 1));
                    acc += kernel[static_cast<std::size_t>(i + radius)] * img.at(static_cast<std::size_t>(y), xx, c);
                }
                tmp[(static_cast<std::size_t>(y * wd + x)) * 3 + c] = acc;
            }
        }
    }
    Image out(img.height, img.width);
    for (std::ptrdiff_t y = 0; y < h; ++y) {
        for (std::ptrdiff_t x = 0; x < wd; ++x) {
            for (std::size_t c = 0; c < 3; ++c) {
                double acc = 0.0;
                for (std::ptrdiff_t i = -radius; i <= radius; ++i) {
                    const auto yy = std::clamp(y + i, std::ptrdiff_t{0}, h - 1);
                    acc += kernel[static_cast<std::size_t>(i + radius)] * tmp[static_cast<std::size_t>(yy * wd + x) * 3 + c];
                }
                out.at(static_cast<std::size_t>(y), static_cast<std::size_t>(x), c) = clamp_u8(acc);
            }
        }
    }
    return out;
}

} // namespace detail

/// Deterministic in (img, cfg, draw_seed); output keeps the input size.
inline Image augment(const Image& img, const AugmentationConfig& cfg, std::uint64_t draw_seed)
{
    cfg.validate();
    if (!cfg.any() || img.empty()) {
        return img;
    }
    Rng rng(mix_seed(cfg.seed, draw_seed));
    Image out = img;
    if (cfg.resized_crop) {
        out = detail::resized_crop(out, rng, cfg.min_crop_scale);
    }
    if (cfg.rotate) {
        out = detail::rotate_image(out, rng.uniform(-cfg.max_rotation_deg, cfg.max_rotation_deg));
    }
    if (cfg.color_jitter) {
        detail::color_jitter(out, rng, cfg.brightness, cfg.contrast, cfg.saturation);
    }
    if (cfg.gaussian_blur && cfg.max_blur_sigma > 0.0) {
        out = detail::gaussian_blur(out, rng.uniform(0.1, std::max(0.1, cfg.max_blur_sigma)));
    }
    if (cfg.gaussian_noise) {
        for (auto& v : out.pixels) {
            v = detail::clamp_u8(v + cfg.noise_sigma * rng.normal());
        }
    }
    if (cfg.salt_and_pepper) {
        for (std::size_t i = 0; i < out.height * out.width; ++i) {
            if (rng.bernoulli(cfg.salt_pepper_rate)) {
                const std::uint8_t v = rng.bernoulli(0.5) ? 255 : 0;
                out.pixels[i * 3] = out.pixels[i * 3 + 1] = out.pixels[i * 3 + 2] = v;
            }
        }
    }
    if (cfg.to_gray) {
        for (std::size_t i = 0; i < out.height * out.width; ++i) {
            auto* px = &out.pixels[i * 3];
            const auto g = detail::clamp_u8(0.299 * px[0] + 0.587 * px[1] + 0.114 * px[2]);
            px[0] = px[1] = px[2] = g;
        }
    }
    return out;
}

} // namespace hashscd
