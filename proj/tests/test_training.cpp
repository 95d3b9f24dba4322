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

#include <cmath>
#include <fstream>
#include <sstream>
#include <vector>

using namespace hashscd;
using hashscd::testing::error_code_of;
using hashscd::testing::random_image;
using hashscd::testing::TempDir;

namespace {

SoftCodeSym sym(std::vector<double> v) { return SoftCodeSym{std::move(v)}; }

ContrastiveBatch random_batch(std::size_t n, std::size_t c, GridShape g, Rng& rng)
{
    ContrastiveBatch b;
    for (std::size_t k = 0; k < n; ++k) {
        for (auto* side : {&b.anchors, &b.positives}) {
            FeatureMap fm(c, g.rows, g.cols);
            for (auto& v : fm.data) {
                v = rng.uniform(-1.0, 1.0);
            }
            side->push_back(std::move(fm));
        }
    }
    return b;
}

std::vector<double> numeric_gradient(ModelParams p, const ContrastiveBatch& b, double tau, double step)
{
    std::vector<double> g(p.weights.size());
    for (std::size_t i = 0; i < g.size(); ++i) {
        const double w = p.weights[i];
        p.weights[i] = w + step;
        const double up = total_loss(p, b, tau);
        p.weights[i] = w - step;
        const double down = total_loss(p, b, tau);
        p.weights[i] = w;
        g[i] = (up - down) / (2.0 * step);
    }
    return g;
}

} // namespace

TEST(Batch, NegativeCounts)
{
    Rng rng(1);
    const auto two = random_batch(2, 3, {1, 1}, rng);
    EXPECT_EQ(two.negatives_per_item(), 2u);
    ContrastiveBatch big;
    big.anchors.resize(64);
    big.positives.resize(64);
    EXPECT_EQ(big.negatives_per_item(), 126u);
}

TEST(Batch, IdentityAugmentationGivesEqualViews)
{
    Rng rng(2);
    std::vector<Image> images{random_image(16, 16, rng), random_image(16, 16, rng), random_image(16, 16, rng)};
    AugmentationConfig none;
    const auto b = build_batch(images, none, 9, {2, 2});
    ASSERT_EQ(b.size(), 3u);
    for (std::size_t k = 0; k < 3; ++k) {
        EXPECT_EQ(b.anchors[k], b.positives[k]);
    }
    AugmentationConfig noisy;
    noisy.enable("noise");
    const auto c = build_batch(images, noisy, 9, {2, 2});
    EXPECT_NE(c.anchors[0], c.positives[0]);
}

TEST(Batch, Validation)
{
    Rng rng(3);
    auto one = random_batch(1, 3, {1, 1}, rng);
    EXPECT_EQ(error_code_of([&] { one.validate(); }), ErrorCode::invalid_batch);
    auto mixed = random_batch(2, 3, {1, 1}, rng);
    mixed.positives[1] = FeatureMap(4, 1, 1);
    EXPECT_EQ(error_code_of([&] { mixed.validate(); }), ErrorCode::invalid_batch);
    std::vector<Image> single{random_image(8, 8, rng)};
    EXPECT_EQ(error_code_of([&] { (void)build_batch(single, AugmentationConfig{}, 0, {1, 1}); }),
              ErrorCode::invalid_batch);
}

TEST(ContrastiveLoss, Examples)
{
    const auto ones = sym({1, 1, 1, 1});
    EXPECT_EQ(contrastive_loss(ones, ones, {}, 0.3), 0.0);

    const std::vector<SoftCodeSym> opposite{sym({-1, -1, -1, -1})};
    EXPECT_NEAR(contrastive_loss(ones, ones, opposite, 0.3), std::log1p(std::exp(-8.0 / 0.3)), 1e-24);
    EXPECT_NEAR(contrastive_loss(ones, ones, opposite, 0.3), 2.6e-12, 0.1e-12);

    const auto a = sym({0.2, -0.5, 0.9});
    const auto p = sym({-0.3, 0.4, 0.1});
    const std::vector<SoftCodeSym> same{p};
    EXPECT_NEAR(contrastive_loss(a, p, same, 0.7), std::log(2.0), 1e-15);

    EXPECT_EQ(error_code_of([&] { (void)contrastive_loss(a, p, same, 0.0); }), ErrorCode::invalid_input);
}

TEST(TotalLoss, SinglePatchAveragesTwoTerms)
{
    Rng rng(4);
    const auto b = random_batch(3, 5, {1, 1}, rng);
    const auto p = init_params(6, 5, 4);
    const double tau = 0.5;

    std::vector<SoftImageHashes> fa;
    std::vector<SoftImageHashes> fp;
    for (std::size_t k = 0; k < 3; ++k) {
        fa.push_back(forward_image(p, b.anchors[k]));
        fp.push_back(forward_image(p, b.positives[k]));
    }
    double expect = 0.0;
    for (std::size_t k = 0; k < 3; ++k) {
        std::vector<SoftCodeSym> neg_patch;
        std::vector<SoftCodeSym> neg_global;
        for (std::size_t j = 0; j < 3; ++j) {
            if (j == k) {
                continue;
            }
            neg_patch.push_back(fa[j].patch_sym[0]);
            neg_patch.push_back(fp[j].patch_sym[0]);
            neg_global.push_back(to_symmetric(fa[j].global_soft));
            neg_global.push_back(to_symmetric(fp[j].global_soft));
        }
        const double lp = contrastive_loss(fa[k].patch_sym[0], fp[k].patch_sym[0], neg_patch, tau);
        const double lg =
            contrastive_loss(to_symmetric(fa[k].global_soft), to_symmetric(fp[k].global_soft), neg_global, tau);
        expect += (lp + lg) / 2.0;
    }
    EXPECT_NEAR(total_loss(p, b, tau), expect / 3.0, 1e-14);
}

TEST(TotalLoss, ZeroWeightsGiveUniformSoftmax)
{
    Rng rng(5);
    for (std::size_t n : {2u, 3u, 5u}) {
        const auto b = random_batch(n, 4, {2, 2}, rng);
        const ModelParams zero(8, 4);
        EXPECT_NEAR(total_loss(zero, b, 0.3), std::log(static_cast<double>(2 * n - 1)), 1e-12);
    }
}

TEST(TotalLoss, NonNegative)
{
    Rng rng(6);
    for (int t = 0; t < 30; ++t) {
        const auto b = random_batch(2 + rng.index(3), 4, {1 + rng.index(2), 1 + rng.index(2)}, rng);
        auto p = init_params(6, 4, t);
        for (auto& w : p.weights) {
            w *= 5.0;
        }
        EXPECT_GE(total_loss(p, b, 0.2), 0.0);
    }
}

TEST(Gradient, AnalyticLossMatchesReference)
{
    Rng rng(7);
    const auto b = random_batch(3, 4, {2, 2}, rng);
    const auto p = init_params(5, 4, 7);
    EXPECT_NEAR(grad_total_loss(p, b, 0.3).loss, total_loss(p, b, 0.3), 1e-12);
}

TEST(Gradient, ScalarToyProblem)
{
    Rng rng(8);
    for (int t = 0; t < 10; ++t) {
        const auto b = random_batch(2, 1, {1, 1}, rng);
        ModelParams p(1, 1);
        p.weights[0] = rng.uniform(-2.0, 2.0);
        const auto analytic = grad_total_loss(p, b, 0.3).grad[0];
        const auto numeric = numeric_gradient(p, b, 0.3, 1e-5)[0];
        EXPECT_NEAR(analytic, numeric, 1e-8 * std::max(1.0, std::fabs(numeric)));
    }
}

TEST(Gradient, FiniteAtZeroWeights)
{
    Rng rng(9);
    const auto b = random_batch(3, 4, {1, 1}, rng);
    const ModelParams zero(6, 4);
    const auto g = grad_total_loss(zero, b, 0.3);
    const auto n = numeric_gradient(zero, b, 0.3, 1e-5);
    for (std::size_t i = 0; i < n.size(); ++i) {
        ASSERT_TRUE(std::isfinite(g.grad[i]));
        EXPECT_NEAR(g.grad[i], n[i], 1e-6 * std::max(std::fabs(n[i]), 1e-3)) << i;
    }
}

TEST(Gradient, TemperatureScaling)
{
    Rng rng(10);
    const auto b = random_batch(3, 3, {1, 2}, rng);
    const auto p = init_params(4, 3, 10);
    const auto g1 = grad_total_loss(p, b, 0.3);
    const auto g2 = grad_total_loss(p, b, 0.6);
    const auto n2 = numeric_gradient(p, b, 0.6, 1e-5);
    bool differs = false;
    for (std::size_t i = 0; i < n2.size(); ++i) {
        EXPECT_NEAR(g2.grad[i], n2[i], 1e-6 * std::max(std::fabs(n2[i]), 1e-3));
        differs = differs || std::fabs(g1.grad[i] - g2.grad[i]) > 1e-9;
    }
    EXPECT_TRUE(differs);
}

TEST(Adam, ZeroGradientLeavesParameters)
{
    auto p = init_params(3, 3, 1);
    const auto before = p;
    AdamState state;
    adam_step(p, std::vector<double>(9, 0.0), state, AdamConfig{});
    EXPECT_EQ(p, before);
    EXPECT_EQ(state.step, 1u);
}

TEST(Adam, FirstStepMovesByLearningRate)
{
    auto p = init_params(2, 2, 1);
    const auto before = p;
    const std::vector<double> g{0.5, -2.0, 1e-3, 0.0};
    AdamState state;
    AdamConfig cfg;
    cfg.learning_rate = 0.05;
    adam_step(p, g, state, cfg);
    for (std::size_t i = 0; i < 4; ++i) {
        // m_hat = g, v_hat = g^2 after bias correction.
        const double expect = g[i] == 0.0 ? 0.0 : -cfg.learning_rate * g[i] / (std::fabs(g[i]) + cfg.epsilon);
        EXPECT_NEAR(p.weights[i] - before.weights[i], expect, 1e-15);
    }
    EXPECT_EQ(error_code_of([&] { adam_step(p, std::vector<double>(3), state, cfg); }),
              ErrorCode::dimension_mismatch);
}

TEST(Adam, SameStreamSameTrajectory)
{
    auto a = init_params(4, 4, 2);
    auto b = a;
    AdamState sa;
    AdamState sb;
    Rng ga(3);
    Rng gb(3);
    for (int t = 0; t < 20; ++t) {
        std::vector<double> x(16);
        std::vector<double> y(16);
        for (std::size_t i = 0; i < 16; ++i) {
            x[i] = ga.normal();
            y[i] = gb.normal();
        }
        adam_step(a, x, sa, AdamConfig{});
        adam_step(b, y, sb, AdamConfig{});
    }
    EXPECT_EQ(a, b);
}

TEST(Train, BatchPartition)
{
    const auto b = detail::make_batches({0, 1, 2, 3, 4, 5, 6, 7, 8}, 4);
    ASSERT_EQ(b.size(), 2u);
    EXPECT_EQ(b[0].size(), 4u);
    EXPECT_EQ(b[1].size(), 5u);
    const auto c = detail::make_batches({0, 1, 2, 3, 4, 5}, 4);
    ASSERT_EQ(c.size(), 2u);
    EXPECT_EQ(c[1].size(), 2u);
}

TEST(Train, ZeroEpochsReturnsInitialParameters)
{
    Rng rng(11);
    std::vector<Image> images{random_image(16, 16, rng), random_image(16, 16, rng)};
    TrainConfig cfg;
    cfg.bits = 8;
    cfg.grid = {2, 2};
    cfg.epochs = 0;
    cfg.seed = 5;
    const auto r = train(images, cfg, AugmentationConfig{});
    EXPECT_EQ(r.params, init_params(8, descriptor_channels, 5));
    EXPECT_TRUE(r.loss_history.empty());
}

TEST(Train, LossFallsOnClusteredDataAndIsReproducible)
{
    SynthClusterSpec spec;
    spec.height = 32;
    spec.width = 32;
    std::vector<Image> images;
    for (auto& item : gen_clusters(spec)) {
        images.push_back(std::move(item.image));
    }
    TrainConfig cfg;
    cfg.bits = 16;
    cfg.grid = {2, 2};
    cfg.epochs = 20;
    cfg.seed = 3;
    AugmentationConfig aug;
    aug.enable("color-jitter,noise");
    aug.seed = 4;
    const auto a = train(images, cfg, aug);
    ASSERT_EQ(a.loss_history.size(), 20u);
    EXPECT_LT(a.loss_history.back(), a.loss_history.front());
    const auto b = train(images, cfg, aug);
    EXPECT_EQ(a.loss_history, b.loss_history);
    EXPECT_EQ(a.params, b.params);
}

TEST(Train, OnFeatureMaps)
{
    Rng rng(12);
    std::vector<FeatureMap> maps;
    for (int k = 0; k < 6; ++k) {
        FeatureMap fm(10, 2, 2);
        for (auto& v : fm.data) {
            v = rng.uniform(-1.0, 1.0);
        }
        maps.push_back(std::move(fm));
    }
    TrainConfig cfg;
    cfg.bits = 8;
    cfg.grid = {2, 2};
    cfg.epochs = 10;
    cfg.batch_size = 3;
    const auto r = train_on_features(maps, cfg);
    EXPECT_EQ(r.params.channels, 10u);
    EXPECT_LT(r.loss_history.back(), r.loss_history.front());
}

TEST(Train, ConfigValidation)
{
    TrainConfig cfg;
    cfg.tau = 0.0;
    EXPECT_EQ(error_code_of([&] { cfg.validate(); }), ErrorCode::invalid_input);
    cfg.tau = 0.3;
    cfg.batch_size = 1;
    EXPECT_EQ(error_code_of([&] { cfg.validate(); }), ErrorCode::invalid_input);
}

TEST(Train, LossCsv)
{
    TempDir dir;
    const std::vector<double> h{2.5, 1.25};
    write_loss_csv(dir / "loss.csv", h);
    std::ifstream in(dir / "loss.csv");
    std::stringstream ss;
    ss << in.rdbuf();
    EXPECT_EQ(ss.str(), "epoch,mean_loss\n1,2.5\n2,1.25\n");
}
