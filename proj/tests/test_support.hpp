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

#include "hashscd/hashscd.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <string>

namespace hashscd::testing {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    TempDir()
    {
        const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
        std::string name = "hashscd_";
        if (info != nullptr) {
            name += std::string(info->test_suite_name()) + "_" + info->name();
        }
        path_ = std::filesystem::temp_directory_path() / name;
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() { std::filesystem::remove_all(path_); }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    [[nodiscard]] const std::filesystem::path& path() const noexcept { return path_; }
    [[nodiscard]] std::filesystem::path operator/(const std::string& leaf) const { return path_ / leaf; }

private:
    std::filesystem::path path_;
};

inline BitCode random_code(std::size_t bits, Rng& rng)
{
    BitCode c(bits);
    for (std::size_t i = 0; i < bits; ++i) {
        c.set(i, rng.bernoulli(0.5));
    }
    return c;
}

inline Image random_image(std::size_t h, std::size_t w, Rng& rng)
{
    Image img(h, w);
    for (auto& v : img.pixels) {
        v = static_cast<std::uint8_t>(rng.index(256));
    }
    return img;
}

template <class Fn>
ErrorCode error_code_of(Fn&& fn)
{
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    ADD_FAILURE() << "expected hashscd::Error";
    return ErrorCode::invalid_input;
}

} // namespace hashscd::testing
