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

#include "test_support.hpp"

using namespace hashscd;
using hashscd::testing::error_code_of;
using hashscd::testing::random_image;

TEST(Augment, EmptySetIsIdentity)
{
    Rng rng(1);
    const auto img = random_image(20, 30, rng);
    AugmentationConfig cfg;
    cfg.enable("none");
    EXPECT_FALSE(cfg.any());
    EXPECT_EQ(augment(img, cfg, 5).pixels, img.pixels);
}

TEST(Augment, DeterministicPerDrawSeed)
{
    Rng rng(2);
    const auto img = random_image(24, 24, rng);
    AugmentationConfig cfg;
    cfg.enable("rotate,crop,color-jitter,noise,blur,salt-and-pepper");
    cfg.seed = 3;
    const auto a = augment(img, cfg, 11);
    EXPECT_EQ(a.pixels, augment(img, cfg, 11).pixels);
    EXPECT_NE(a.pixels, augment(img, cfg, 12).pixels);
    EXPECT_EQ(a.height, 24u);
    EXPECT_EQ(a.width, 24u);
}

TEST(Augment, EachTransformKeepsSize)
{
    Rng rng(3);
    const auto img = random_image(17, 29, rng);
    for (const char* name : {"rotate", "crop", "color-jitter", "noise", "blur", "salt-and-pepper", "gray"}) {
        AugmentationConfig cfg;
        cfg.enable(name);
        const auto out = augment(img, cfg, 1);
        EXPECT_EQ(out.height, img.height) << name;
        EXPECT_EQ(out.width, img.width) << name;
    }
}

TEST(Augment, GrayHasEqualChannels)
{
    Rng rng(4);
    const auto img = random_image(16, 16, rng);
    AugmentationConfig cfg;
    cfg.enable("color-jitter,gray");
    const auto out = augment(img, cfg, 2);
    for (std::size_t y = 0; y < 16; ++y) {
        for (std::size_t x = 0; x < 16; ++x) {
            EXPECT_EQ(out.at(y, x, 0), out.at(y, x, 1));
            EXPECT_EQ(out.at(y, x, 1), out.at(y, x, 2));
        }
    }
}

TEST(Augment, ConfigValidation)
{
    AugmentationConfig cfg;
    EXPECT_EQ(error_code_of([&] { cfg.enable("rotate,sharpen"); }), ErrorCode::invalid_input);
    cfg.max_rotation_deg = 45.0;
    EXPECT_EQ(error_code_of([&] { cfg.validate(); }), ErrorCode::invalid_input);
    cfg.max_rotation_deg = 10.0;
    cfg.min_crop_scale = 0.0;
    EXPECT_EQ(error_code_of([&] { cfg.validate(); }), ErrorCode::invalid_input);
}

TEST(Augment, ZeroRotationIsExact)
{
    Rng rng(5);
    const auto img = random_image(9, 13, rng);
    EXPECT_EQ(detail::rotate_image(img, 0.0).pixels, img.pixels);
}
