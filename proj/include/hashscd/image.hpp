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

#include <png.h>

#include <cstddef>
#include <cstdint>
#include <csetjmp>
#include <cstdio>
#include <filesystem>
#include <memory>
#include <span>
#include <vector>

namespace hashscd {

/// 8-bit RGB image, row-major, channels interleaved.
struct Image {
    std::size_t height = 0;
    std::size_t width = 0;
    std::vector<std::uint8_t> pixels;

    Image() = default;
    Image(std::size_t h, std::size_t w) : height(h), width(w), pixels(h * w * 3, 0) {}

    [[nodiscard]] std::uint8_t& at(std::size_t y, std::size_t x, std::size_t c) noexcept
    {
        return pixels[(y * width + x) * 3 + c];
    }
    [[nodiscard]] std::uint8_t at(std::size_t y, std::size_t x, std::size_t c) const noexcept
    {
        return pixels[(y * width + x) * 3 + c];
    }

    [[nodiscard]] bool empty() const noexcept { return height == 0 || width == 0; }

    friend bool operator==(const Image&, const Image&) = default;
};

/// Single-channel 8-bit raster, used for heatmaps and masks on disk.
struct GrayImage {
    std::size_t height = 0;
    std::size_t width = 0;
    std::vector<std::uint8_t> pixels;

    friend bool operator==(const GrayImage&, const GrayImage&) = default;
};

namespace detail {

struct FileCloser {
    void operator()(std::FILE* f) const noexcept { std::fclose(f); }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

inline FilePtr open_file(const std::filesystem::path& path, const char* mode)
{
    FilePtr f(std::fopen(path.c_str(), mode));
    if (!f) {
        throw Error(ErrorCode::io, "cannot open " + path.string());
    }
    return f;
}

inline void png_warning_handler(png_structp, png_const_charp) {}

// Fixed encoder settings so identical rasters always produce identical files.
inline void write_png(const std::filesystem::path& path, std::size_t height, std::size_t width,
                      int color_type, std::span<const std::uint8_t> data)
{
    const std::size_t channels = color_type == PNG_COLOR_TYPE_RGB ? 3 : 1;
    require(data.size() == height * width * channels && height > 0 && width > 0,
            ErrorCode::invalid_input, "raster size mismatch");
    auto file = open_file(path, "wb");
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr,
                                              png_warning_handler);
    require(png != nullptr, ErrorCode::io, "png_create_write_struct failed");
    png_infop info = png_create_info_struct(png);
    struct Guard {
        png_structp* png;
        png_infop* info;
        ~Guard() { png_destroy_write_struct(png, info); }
    } guard{&png, &info};
    require(info != nullptr, ErrorCode::io, "png_create_info_struct failed");

    // libpng reports errors by longjmp back to this frame.
    if (setjmp(png_jmpbuf(png))) {
        throw Error(ErrorCode::io, "png write failed: " + path.string());
    }
    png_init_io(png, file.get());
    png_set_compression_level(png, 6);
    png_set_filter(png, 0, PNG_FILTER_NONE);
    png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height), 8,
                 color_type, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
                 PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    for (std::size_t y = 0; y < height; ++y) {
        png_write_row(png, const_cast<png_bytep>(data.data() + y * width * channels));
    }
    png_write_end(png, nullptr);
}

} // namespace detail

/// Reads any 8/16-bit PNG and converts it to RGB (alpha is dropped).
inline Image read_png(const std::filesystem::path& path)
{
    auto file = detail::open_file(path, "rb");
    png_byte signature[8] = {};
    if (std::fread(signature, 1, 8, file.get()) != 8 || png_sig_cmp(signature, 0, 8) != 0) {
        throw Error(ErrorCode::bad_magic, "not a PNG file: " + path.string());
    }
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr,
                                             detail::png_warning_handler);
    detail::require(png != nullptr, ErrorCode::io, "png_create_read_struct failed");
    png_infop info = png_create_info_struct(png);
    struct Guard {
        png_structp* png;
        png_infop* info;
        ~Guard() { png_destroy_read_struct(png, info, nullptr); }
    } guard{&png, &info};
    detail::require(info != nullptr, ErrorCode::io, "png_create_info_struct failed");

    std::vector<png_bytep> rows;
    Image img;
    if (setjmp(png_jmpbuf(png))) {
        throw Error(ErrorCode::io, "corrupt PNG: " + path.string());
    }
    png_init_io(png, file.get());
    png_set_sig_bytes(png, 8);
    png_read_info(png, info);

    const auto color_type = png_get_color_type(png, info);
    if (png_get_bit_depth(png, info) == 16) {
        png_set_strip_16(png);
    }
    if (color_type == PNG_COLOR_TYPE_PALETTE) {
        png_set_palette_to_rgb(png);
    }
    if (color_type == PNG_COLOR_TYPE_GRAY && png_get_bit_depth(png, info) < 8) {
        png_set_expand_gray_1_2_4_to_8(png);
    }
    if (color_type == PNG_COLOR_TYPE_GRAY || color_type == PNG_COLOR_TYPE_GRAY_ALPHA) {
        png_set_gray_to_rgb(png);
    }
    if (color_type & PNG_COLOR_MASK_ALPHA) {
        png_set_strip_alpha(png);
    }
    if (png_get_valid(png, info, PNG_INFO_tRNS)) {
        png_set_tRNS_to_alpha(png);
        png_set_strip_alpha(png);
    }
    png_set_interlace_handling(png);
    png_read_update_info(png, info);

    img = Image(png_get_image_height(png, info), png_get_image_width(png, info));
    detail::require(png_get_rowbytes(png, info) == img.width * 3, ErrorCode::io,
                    "unexpected PNG row layout");
    rows.resize(img.height);
    for (std::size_t y = 0; y < img.height; ++y) {
        rows[y] = img.pixels.data() + y * img.width * 3;
    }
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    return img;
}

inline void write_png(const std::filesystem::path& path, const Image& img)
{
    detail::write_png(path, img.height, img.width, PNG_COLOR_TYPE_RGB, img.pixels);
}

inline void write_png(const std::filesystem::path& path, const GrayImage& img)
{
    detail::write_png(path, img.height, img.width, PNG_COLOR_TYPE_GRAY, img.pixels);
}

} // namespace hashscd
