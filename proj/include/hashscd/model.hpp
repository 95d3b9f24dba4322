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
#include "hashscd/features.hpp"
#include "hashscd/hash_space.hpp"
#include "hashscd/random.hpp"

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace hashscd {

/// Linear hash head: l x C projection, row-major, no bias.
struct ModelParams {
    std::size_t bits = 0;
    std::size_t channels = 0;
    std::vector<double> weights;

    ModelParams() = default;
    ModelParams(std::size_t l, std::size_t c) : bits(l), channels(c), weights(l * c, 0.0) {}

    [[nodiscard]] double& at(std::size_t row, std::size_t col) noexcept { return weights[row * channels + col]; }
    [[nodiscard]] double at(std::size_t row, std::size_t col) const noexcept { return weights[row * channels + col]; }

    friend bool operator==(const ModelParams&, const ModelParams&) = default;
};

/// Glorot-uniform in [-a, a], a = sqrt(6 / (C + l)).
inline ModelParams init_params(std::size_t bits, std::size_t channels, std::uint64_t seed)
{
    detail::require(bits >= 1 && channels >= 1, ErrorCode::invalid_input, "l and C must be positive");
    detail::require(bits <= BitCode::max_bits, ErrorCode::invalid_input, "hash length too large");
    ModelParams p(bits, channels);
    const double a = std::sqrt(6.0 / static_cast<double>(channels + bits));
    Rng rng(mix_seed(seed, 0x1417));
    for (auto& w : p.weights) {
        w = rng.uniform(-a, a);
    }
    return p;
}

/// W * f into `out` (length l).
inline void project(const ModelParams& p, std::span<const double> f, std::span<double> out)
{
    detail::require(f.size() == p.channels, ErrorCode::dimension_mismatch, "feature length != C");
    for (std::size_t r = 0; r < p.bits; ++r) {
        const double* row = p.weights.data() + r * p.channels;
        double acc = 0.0;
        for (std::size_t c = 0; c < p.channels; ++c) {
            acc += row[c] * f[c];
        }
        out[r] = acc;
    }
}

struct PatchForward {
    std::vector<double> preactivation;
    SoftCodeSym sym;
    SoftCodeUnit unit;
};

inline PatchForward forward_patch(const ModelParams& p, std::span<const double> f)
{
    PatchForward out;
    out.preactivation.resize(p.bits);
    project(p, f, out.preactivation);
    out.sym.values.resize(p.bits);
    out.unit.values.resize(p.bits);
    for (std::size_t j = 0; j < p.bits; ++j) {
        const double u = std::tanh(out.preactivation[j]);
        out.sym.values[j] = u;
        out.unit.values[j] = (u + 1.0) / 2.0;
    }
    return out;
}

/// Training-time view of an image: relaxed patch codes and their soft aggregate.
struct SoftImageHashes {
    GridShape grid;
    std::vector<SoftCodeSym> patch_sym;
    std::vector<SoftCodeUnit> patch_soft;
    SoftCodeUnit global_soft;
};

/// Inference-time view: binarized patch codes and their XOR.
struct ImageHashes {
    GridShape grid;
    std::vector<BitCode> patch_codes;
    BitCode global_code;

    friend bool operator==(const ImageHashes&, const ImageHashes&) = default;
};

inline SoftImageHashes forward_image(const ModelParams& p, const FeatureMap& fm)
{
    detail::require(fm.channels == p.channels, ErrorCode::dimension_mismatch,
                    "feature map channel depth does not match the hash head");
    SoftImageHashes out;
    out.grid = fm.grid();
    out.patch_sym.reserve(fm.cells());
    out.patch_soft.reserve(fm.cells());
    for (std::size_t i = 0; i < fm.cells(); ++i) {
        auto fwd = forward_patch(p, fm.cell(i));
        out.patch_sym.push_back(std::move(fwd.sym));
        out.patch_soft.push_back(std::move(fwd.unit));
    }
    out.global_soft = soft_aggregate(out.patch_soft);
    return out;
}

/// Binarize each patch first, then XOR the binary codes.
inline ImageHashes hash_image(const ModelParams& p, const FeatureMap& fm)
{
    detail::require(fm.channels == p.channels, ErrorCode::dimension_mismatch,
                    "feature map channel depth does not match the hash head");
    ImageHashes out;
    out.grid = fm.grid();
    out.patch_codes.reserve(fm.cells());
    std::vector<double> v(p.bits);
    for (std::size_t i = 0; i < fm.cells(); ++i) {
        project(p, fm.cell(i), v);
        // sgn(v) and sgn(tanh(v)) agree, so the tanh is skipped here.
        out.patch_codes.push_back(binarize(v));
    }
    out.global_code = binary_aggregate(out.patch_codes);
    return out;
}

/// Bits of code payload per stored observation: (P + 1) * l.
constexpr std::size_t record_payload_bits(std::size_t patches, std::size_t bits) noexcept
{
    return (patches + 1) * bits;
}

// ---------------------------------------------------------------------------
// Parameter file ("HSPW")
// ---------------------------------------------------------------------------

inline constexpr std::uint16_t params_version = 1;

inline std::vector<std::uint8_t> encode_params(const ModelParams& p)
{
    detail::ByteWriter w;
    w.put_magic("HSPW");
    w.put<std::uint16_t>(params_version);
    w.put<std::uint32_t>(static_cast<std::uint32_t>(p.bits));
    w.put<std::uint32_t>(static_cast<std::uint32_t>(p.channels));
    for (double v : p.weights) {
        w.put<double>(v);
    }
    return w.bytes();
}

inline ModelParams decode_params(std::span<const std::uint8_t> bytes)
{
    detail::ByteReader r(bytes);
    r.expect_magic("HSPW");
    const auto version = r.get<std::uint16_t>();
    if (version != params_version) {
        throw Error(ErrorCode::unsupported_version, "parameter file version " + std::to_string(version));
    }
    const auto l = r.get<std::uint32_t>();
    const auto c = r.get<std::uint32_t>();
    detail::require(l >= 1 && c >= 1 && l <= BitCode::max_bits, ErrorCode::invalid_input,
                    "invalid parameter dims");
    if (r.remaining() < std::size_t{l} * c * 8) {
        throw Error(ErrorCode::truncated_payload, "parameter payload shorter than header dims");
    }
    detail::require(r.remaining() == std::size_t{l} * c * 8, ErrorCode::invalid_input,
                    "trailing bytes after parameters");
    ModelParams p(l, c);
    for (auto& w : p.weights) {
        w = r.get<double>();
        detail::require(std::isfinite(w), ErrorCode::invalid_input, "non-finite parameter");
    }
    return p;
}

inline void save_params(const ModelParams& p, const std::filesystem::path& path)
{
    detail::write_file(path, encode_params(p));
}

/// Loads parameters; when expected dims are given they must match.
inline ModelParams load_params(const std::filesystem::path& path,
                               std::optional<std::size_t> expected_bits = std::nullopt,
                               std::optional<std::size_t> expected_channels = std::nullopt)
{
    auto p = decode_params(detail::read_file(path));
    if ((expected_bits && *expected_bits != p.bits) || (expected_channels && *expected_channels != p.channels)) {
        throw Error(ErrorCode::dimension_mismatch,
                    "parameter file is " + std::to_string(p.bits) + "x" + std::to_string(p.channels));
    }
    return p;
}

} // namespace hashscd
