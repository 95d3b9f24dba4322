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

#include <bit>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace hashscd {

/// Packed binary hash code of `size()` bits.
///
/// Bits are packed MSB-first within each byte, bit 0 being the most
/// significant bit of byte 0. Pad bits of the last byte are always zero, so
/// the byte buffer is the canonical on-disk representation as well.
class BitCode {
public:
    static constexpr std::size_t max_bits = 65535;

    BitCode() = default;

    explicit BitCode(std::size_t bits) : bits_(bits), bytes_(byte_count(bits), 0)
    {
        detail::require(bits >= 1 && bits <= max_bits, ErrorCode::invalid_input,
                        "hash length must be in [1, 65535]");
    }

    static BitCode from_bytes(std::size_t bits, std::span<const std::uint8_t> bytes)
    {
        BitCode code(bits);
        detail::require(bytes.size() == code.bytes_.size(), ErrorCode::invalid_input,
                        "byte count does not match hash length");
        std::memcpy(code.bytes_.data(), bytes.data(), bytes.size());
        code.clear_padding();
        return code;
    }

    /// Parses a string of '0'/'1' characters, bit 0 first.
    static BitCode from_string(std::string_view text)
    {
        BitCode code(text.size());
        for (std::size_t i = 0; i < text.size(); ++i) {
            detail::require(text[i] == '0' || text[i] == '1', ErrorCode::invalid_input,
                            "bit string may only contain '0' and '1'");
            code.set(i, text[i] == '1');
        }
        return code;
    }

    static constexpr std::size_t byte_count(std::size_t bits) noexcept { return (bits + 7) / 8; }

    [[nodiscard]] std::size_t size() const noexcept { return bits_; }
    [[nodiscard]] bool empty() const noexcept { return bits_ == 0; }
    [[nodiscard]] std::span<const std::uint8_t> bytes() const noexcept { return bytes_; }

    [[nodiscard]] bool get(std::size_t i) const noexcept
    {
        return (bytes_[i >> 3] >> (7 - (i & 7))) & 1u;
    }

    void set(std::size_t i, bool value) noexcept
    {
        const auto mask = static_cast<std::uint8_t>(0x80u >> (i & 7));
        if (value) {
            bytes_[i >> 3] |= mask;
        } else {
            bytes_[i >> 3] &= static_cast<std::uint8_t>(~mask);
        }
    }

    BitCode& operator^=(const BitCode& other)
    {
        detail::require(bits_ == other.bits_, ErrorCode::invalid_input, "hash length mismatch");
        for (std::size_t i = 0; i < bytes_.size(); ++i) {
            bytes_[i] ^= other.bytes_[i];
        }
        return *this;
    }

    [[nodiscard]] BitCode complement() const
    {
        BitCode out = *this;
        for (auto& b : out.bytes_) {
            b = static_cast<std::uint8_t>(~b);
        }
        out.clear_padding();
        return out;
    }

    [[nodiscard]] std::size_t popcount() const noexcept
    {
        std::size_t n = 0;
        for (auto b : bytes_) {
            n += static_cast<std::size_t>(std::popcount(b));
        }
        return n;
    }

    [[nodiscard]] std::string to_string() const
    {
        std::string s(bits_, '0');
        for (std::size_t i = 0; i < bits_; ++i) {
            if (get(i)) {
                s[i] = '1';
            }
        }
        return s;
    }

    friend bool operator==(const BitCode&, const BitCode&) = default;

private:
    void clear_padding() noexcept
    {
        if (const auto tail = bits_ & 7; tail != 0) {
            bytes_.back() &= static_cast<std::uint8_t>(0xFFu << (8 - tail));
        }
    }

    std::size_t bits_ = 0;
    std::vector<std::uint8_t> bytes_;
};

inline BitCode operator^(BitCode a, const BitCode& b)
{
    a ^= b;
    return a;
}

/// Relaxed code in (-1, 1)^l, the tanh output.
struct SoftCodeSym {
    std::vector<double> values;

    [[nodiscard]] std::size_t size() const noexcept { return values.size(); }
    friend bool operator==(const SoftCodeSym&, const SoftCodeSym&) = default;
};

/// Relaxed code in [0, 1]^l, the phi output and the soft aggregate.
struct SoftCodeUnit {
    std::vector<double> values;

    [[nodiscard]] std::size_t size() const noexcept { return values.size(); }
    friend bool operator==(const SoftCodeUnit&, const SoftCodeUnit&) = default;
};

namespace detail {

inline void require_finite(std::span<const double> v)
{
    for (double x : v) {
        require(std::isfinite(x), ErrorCode::invalid_input, "non-finite component");
    }
}

} // namespace detail

/// Sign binarization; ties at zero map to bit 1.
inline BitCode binarize(std::span<const double> u)
{
    detail::require(!u.empty(), ErrorCode::invalid_input, "empty code");
    detail::require_finite(u);
    BitCode code(u.size());
    for (std::size_t j = 0; j < u.size(); ++j) {
        code.set(j, u[j] >= 0.0);
    }
    return code;
}

inline BitCode binarize(const SoftCodeSym& u) { return binarize(std::span<const double>(u.values)); }

inline double phi(double v) noexcept { return (std::tanh(v) + 1.0) / 2.0; }

inline SoftCodeUnit phi(std::span<const double> v)
{
    detail::require_finite(v);
    SoftCodeUnit out{std::vector<double>(v.size())};
    for (std::size_t j = 0; j < v.size(); ++j) {
        out.values[j] = phi(v[j]);
    }
    return out;
}

/// Left fold acc = |h_k - acc| starting from h_1.
inline SoftCodeUnit soft_aggregate(std::span<const SoftCodeUnit> codes)
{
    detail::require(!codes.empty(), ErrorCode::invalid_input, "cannot aggregate an empty list");
    SoftCodeUnit acc = codes.front();
    for (std::size_t k = 1; k < codes.size(); ++k) {
        detail::require(codes[k].size() == acc.size(), ErrorCode::invalid_input,
                        "mixed code lengths");
        for (std::size_t j = 0; j < acc.values.size(); ++j) {
            acc.values[j] = std::fabs(codes[k].values[j] - acc.values[j]);
        }
    }
    return acc;
}

inline BitCode binary_aggregate(std::span<const BitCode> codes)
{
    detail::require(!codes.empty(), ErrorCode::invalid_input, "cannot aggregate an empty list");
    BitCode acc = codes.front();
    for (std::size_t k = 1; k < codes.size(); ++k) {
        acc ^= codes[k];
    }
    return acc;
}

/// Popcount of XOR, eight bytes at a time.
inline std::size_t hamming(const BitCode& a, const BitCode& b)
{
    detail::require(a.size() == b.size(), ErrorCode::invalid_input, "hash length mismatch");
    const auto x = a.bytes();
    const auto y = b.bytes();
    const std::size_t n = x.size();
    std::size_t distance = 0;
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        std::uint64_t wa = 0;
        std::uint64_t wb = 0;
        std::memcpy(&wa, x.data() + i, 8);
        std::memcpy(&wb, y.data() + i, 8);
        distance += static_cast<std::size_t>(std::popcount(wa ^ wb));
    }
    for (; i < n; ++i) {
        distance += static_cast<std::size_t>(std::popcount(static_cast<std::uint8_t>(x[i] ^ y[i])));
    }
    return distance;
}

inline double normalized_hamming(const BitCode& a, const BitCode& b)
{
    return static_cast<double>(hamming(a, b)) / static_cast<double>(a.size());
}

inline SoftCodeSym to_symmetric(const SoftCodeUnit& r)
{
    SoftCodeSym out{std::vector<double>(r.size())};
    for (std::size_t j = 0; j < r.size(); ++j) {
        out.values[j] = 2.0 * r.values[j] - 1.0;
    }
    return out;
}

} // namespace hashscd
