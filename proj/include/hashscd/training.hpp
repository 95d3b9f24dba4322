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
#include "hashscd/features.hpp"
#include "hashscd/hash_space.hpp"
#include "hashscd/model.hpp"
#include "hashscd/random.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <limits>
#include <numeric>
#include <span>
#include <vector>

namespace hashscd {

/// Anchor / positive feature maps for N source images. Negatives for item k
/// are implicit: both views of every other item, 2(N - 1) in total.
struct ContrastiveBatch {
    std::vector<FeatureMap> anchors;
    std::vector<FeatureMap> positives;

    [[nodiscard]] std::size_t size() const noexcept { return anchors.size(); }
    [[nodiscard]] std::size_t negatives_per_item() const noexcept { return 2 * (size() - 1); }

    void validate() const
    {
        detail::require(anchors.size() == positives.size(), ErrorCode::invalid_batch,
                        "anchor and positive counts differ");
        detail::require(anchors.size() >= 2, ErrorCode::invalid_batch, "a batch needs at least two items");
        const auto& ref = anchors.front();
        for (std::size_t k = 0; k < size(); ++k) {
            for (const auto* fm : {&anchors[k], &positives[k]}) {
                detail::require(fm->channels == ref.channels && fm->height == ref.height && fm->width == ref.width,
                                ErrorCode::invalid_batch, "feature maps in a batch must share C, H, W");
            }
        }
    }
};

/// Two independent augmented views per source image.
inline ContrastiveBatch build_batch(std::span<const Image> images, const AugmentationConfig& cfg,
                                    std::uint64_t epoch_seed, GridShape grid)
{
    detail::require(images.size() >= 2, ErrorCode::invalid_batch, "a batch needs at least two items");
    ContrastiveBatch batch;
    batch.anchors.reserve(images.size());
    batch.positives.reserve(images.size());
    for (std::size_t k = 0; k < images.size(); ++k) {
        batch.anchors.push_back(compute_feature_map(augment(images[k], cfg, mix_seed(epoch_seed, 2 * k)), grid));
        batch.positives.push_back(
            compute_feature_map(augment(images[k], cfg, mix_seed(epoch_seed, 2 * k + 1)), grid));
    }
    return batch;
}

namespace detail {

inline double dot(std::span<const double> a, std::span<const double> b) noexcept
{
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        s += a[i] * b[i];
    }
    return s;
}

inline double log_sum_exp(std::span<const double> z) noexcept
{
    const double m = *std::max_element(z.begin(), z.end());
    double s = 0.0;
    for (double v : z) {
        s += std::exp(v - m);
    }
    return m + std::log(s);
}

/// log sum_j exp(z_j - z_0), i.e. -log softmax(z)_0, without cancellation
/// when z_0 dominates.
inline double neg_log_softmax_first(std::span<const double> z) noexcept
{
    const double m = *std::max_element(z.begin(), z.end());
    if (m == z.front()) {
        double s = 0.0;
        for (std::size_t j = 1; j < z.size(); ++j) {
            s += std::exp(z[j] - m);
        }
        return std::log1p(s);
    }
    return log_sum_exp(z) - z.front();
}

} // namespace detail

/// -log softmax of the positive logit among {positive, negatives}, with raw
/// inner products as logits scaled by 1 / tau.
inline double contrastive_loss(const SoftCodeSym& anchor, const SoftCodeSym& positive,
                               std::span<const SoftCodeSym> negatives, double tau)
{
    detail::require(tau > 0.0, ErrorCode::invalid_input, "temperature must be positive");
    detail::require(anchor.size() == positive.size(), ErrorCode::invalid_input, "code length mismatch");
    std::vector<double> logits;
    logits.reserve(negatives.size() + 1);
    logits.push_back(detail::dot(anchor.values, positive.values) / tau);
    for (const auto& n : negatives) {
        detail::require(n.size() == anchor.size(), ErrorCode::invalid_input, "code length mismatch");
        logits.push_back(detail::dot(anchor.values, n.values) / tau);
    }
    if (negatives.empty()) {
        return 0.0;
    }
    return detail::neg_log_softmax_first(logits);
}

/// Mean over items of (L_global + sum_i L_patch_i) / (P + 1).
///
/// Patch-level negatives for item k at position i are the position-i codes
/// of both views of every other item. Built from the public forward ops and
/// kept apart from the gradient code so it can serve as its check.
inline double total_loss(const ModelParams& p, const ContrastiveBatch& batch, double tau)
{
    batch.validate();
    const std::size_t n = batch.size();
    std::vector<SoftImageHashes> anchors;
    std::vector<SoftImageHashes> positives;
    std::vector<SoftCodeSym> global_a;
    std::vector<SoftCodeSym> global_p;
    for (std::size_t k = 0; k < n; ++k) {
        anchors.push_back(forward_image(p, batch.anchors[k]));
        positives.push_back(forward_image(p, batch.positives[k]));
        global_a.push_back(to_symmetric(anchors.back().global_soft));
        global_p.push_back(to_symmetric(positives.back().global_soft));
    }
    const std::size_t cells = batch.anchors.front().cells();

    double total = 0.0;
    std::vector<SoftCodeSym> negatives;
    for (std::size_t k = 0; k < n; ++k) {
        double item = 0.0;
        for (std::size_t i = 0; i < cells; ++i) {
            negatives.clear();
            for (std::size_t j = 0; j < n; ++j) {
                if (j != k) {
                    negatives.push_back(anchors[j].patch_sym[i]);
                    negatives.push_back(positives[j].patch_sym[i]);
                }
            }
            item += contrastive_loss(anchors[k].patch_sym[i], positives[k].patch_sym[i], negatives, tau);
        }
        negatives.clear();
        for (std::size_t j = 0; j < n; ++j) {
            if (j != k) {
                negatives.push_back(global_a[j]);
                negatives.push_back(global_p[j]);
            }
        }
        item += contrastive_loss(global_a[k], global_p[k], negatives, tau);
        total += item / static_cast<double>(cells + 1);
    }
    return total / static_cast<double>(n);
}

struct LossGradient {
    double loss = 0.0;
    std::vector<double> grad; ///< l x C, row-major like ModelParams::weights
    std::size_t ties = 0;     ///< exact |.| ties in the aggregation fold (subgradient 0 used)
};

namespace detail {

// Forward state of one view, cached for backpropagation.
struct ViewCache {
    std::vector<std::vector<double>> features; // P x C
    std::vector<std::vector<double>> u;        // P x l, tanh outputs
    std::vector<std::vector<double>> sign;     // P x l, sign(h_k - acc_{k-1}); row 0 unused
    std::vector<double> global_sym;            // 2R - 1
};

inline ViewCache forward_view(const ModelParams& p, const FeatureMap& fm, std::size_t& ties)
{
    const std::size_t cells = fm.cells();
    const std::size_t l = p.bits;
    ViewCache v;
    v.features.reserve(cells);
    v.u.assign(cells, std::vector<double>(l));
    v.sign.assign(cells, std::vector<double>(l, 0.0));
    std::vector<double> pre(l);
    std::vector<double> acc(l);
    for (std::size_t i = 0; i < cells; ++i) {
        v.features.push_back(fm.cell(i));
        project(p, v.features.back(), pre);
        for (std::size_t j = 0; j < l; ++j) {
            const double u = std::tanh(pre[j]);
            const double h = (u + 1.0) / 2.0;
            v.u[i][j] = u;
            if (i == 0) {
                acc[j] = h;
            } else {
                const double d = h - acc[j];
                if (d > 0.0) {
                    v.sign[i][j] = 1.0;
                } else if (d < 0.0) {
                    v.sign[i][j] = -1.0;
                } else {
                    ++ties;
                }
                acc[j] = std::fabs(d);
            }
        }
    }
    v.global_sym.resize(l);
    for (std::size_t j = 0; j < l; ++j) {
        v.global_sym[j] = 2.0 * acc[j] - 1.0;
    }
    return v;
}

// Adds scale * dL/d(anchor, positive, negatives) for one contrastive term and
// returns the term's loss.
inline double contrastive_backward(std::span<const double> a, std::span<const double> pos,
                                   std::span<const std::span<const double>> negs, double tau, double scale,
                                   std::span<double> da, std::span<double> dpos,
                                   std::span<const std::span<double>> dnegs)
{
    std::vector<double> logits(negs.size() + 1);
    logits[0] = dot(a, pos) / tau;
    for (std::size_t j = 0; j < negs.size(); ++j) {
        logits[j + 1] = dot(a, negs[j]) / tau;
    }
    if (negs.empty()) {
        return 0.0;
    }
    const double lse = log_sum_exp(logits);
    const double loss = neg_log_softmax_first(logits);
    std::vector<double> w(logits.size());
    for (std::size_t m = 0; m < logits.size(); ++m) {
        w[m] = std::exp(logits[m] - lse);
    }
    const double c = scale / tau;
    for (std::size_t r = 0; r < a.size(); ++r) {
        double g = (w[0] - 1.0) * pos[r];
        for (std::size_t j = 0; j < negs.size(); ++j) {
            g += w[j + 1] * negs[j][r];
        }
        da[r] += c * g;
        dpos[r] += c * (w[0] - 1.0) * a[r];
        for (std::size_t j = 0; j < negs.size(); ++j) {
            dnegs[j][r] += c * w[j + 1] * a[r];
        }
    }
    return loss;
}

} // namespace detail

/// Analytic dL/dW through tanh, phi, the |.| fold and the softmax.
inline LossGradient grad_total_loss(const ModelParams& p, const ContrastiveBatch& batch, double tau)
{
    detail::require(tau > 0.0, ErrorCode::invalid_input, "temperature must be positive");
    batch.validate();
    detail::require(batch.anchors.front().channels == p.channels, ErrorCode::dimension_mismatch,
                    "feature map channel depth does not match the hash head");
    const std::size_t n = batch.size();
    const std::size_t l = p.bits;
    const std::size_t cells = batch.anchors.front().cells();
    const double scale = 1.0 / (static_cast<double>(cells + 1) * static_cast<double>(n));

    LossGradient out;
    // view index 2k = anchor of item k, 2k + 1 = positive of item k
    std::vector<detail::ViewCache> views;
    views.reserve(2 * n);
    for (std::size_t k = 0; k < n; ++k) {
        views.push_back(detail::forward_view(p, batch.anchors[k], out.ties));
        views.push_back(detail::forward_view(p, batch.positives[k], out.ties));
    }

    std::vector<std::vector<std::vector<double>>> du(2 * n, std::vector<std::vector<double>>(cells, std::vector<double>(l, 0.0)));
    std::vector<std::vector<double>> dglobal(2 * n, std::vector<double>(l, 0.0));

    std::vector<std::span<const double>> negs;
    std::vector<std::span<double>> dnegs;
    for (std::size_t k = 0; k < n; ++k) {
        double item = 0.0;
        for (std::size_t i = 0; i < cells; ++i) {
            negs.clear();
            dnegs.clear();
            for (std::size_t v = 0; v < 2 * n; ++v) {
                if (v / 2 != k) {
                    negs.emplace_back(views[v].u[i]);
                    dnegs.emplace_back(du[v][i]);
                }
            }
            item += detail::contrastive_backward(views[2 * k].u[i], views[2 * k + 1].u[i], negs, tau, scale,
                                                 du[2 * k][i], du[2 * k + 1][i], dnegs);
        }
        negs.clear();
        dnegs.clear();
        for (std::size_t v = 0; v < 2 * n; ++v) {
            if (v / 2 != k) {
                negs.emplace_back(views[v].global_sym);
                dnegs.emplace_back(dglobal[v]);
            }
        }
        item += detail::contrastive_backward(views[2 * k].global_sym, views[2 * k + 1].global_sym, negs, tau, scale,
                                             dglobal[2 * k], dglobal[2 * k + 1], dnegs);
        out.loss += item / static_cast<double>(cells + 1);
    }
    out.loss /= static_cast<double>(n);

    out.grad.assign(l * p.channels, 0.0);
    std::vector<double> dh(l);
    for (std::size_t v = 0; v < 2 * n; ++v) {
        const auto& cache = views[v];
        // g = 2R - 1, then unwind acc_k = |h_k - acc_{k-1}| from the last patch.
        std::vector<double> dacc(l);
        for (std::size_t j = 0; j < l; ++j) {
            dacc[j] = 2.0 * dglobal[v][j];
        }
        for (std::size_t i = cells; i-- > 0;) {
            for (std::size_t j = 0; j < l; ++j) {
                if (i == 0) {
                    dh[j] = dacc[j];
                } else {
                    const double s = cache.sign[i][j];
                    dh[j] = s * dacc[j];
                    dacc[j] = -s * dacc[j];
                }
            }
            const auto& f = cache.features[i];
            for (std::size_t r = 0; r < l; ++r) {
                const double u = cache.u[i][r];
                const double dpre = (du[v][i][r] + 0.5 * dh[r]) * (1.0 - u * u);
                if (dpre == 0.0) {
                    continue;
                }
                double* row = out.grad.data() + r * p.channels;
                for (std::size_t c = 0; c < p.channels; ++c) {
                    row[c] += dpre * f[c];
                }
            }
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Optimizer and training loop
// ---------------------------------------------------------------------------

struct AdamConfig {
    double learning_rate = 1e-2;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

struct AdamState {
    std::vector<double> m;
    std::vector<double> v;
    std::uint64_t step = 0;
};

/// Adam with bias correction.
inline void adam_step(ModelParams& p, std::span<const double> grad, AdamState& state, const AdamConfig& cfg)
{
    detail::require(grad.size() == p.weights.size(), ErrorCode::dimension_mismatch, "gradient size != parameter count");
    if (state.m.empty()) {
        state.m.assign(grad.size(), 0.0);
        state.v.assign(grad.size(), 0.0);
    }
    ++state.step;
    const double t = static_cast<double>(state.step);
    const double c1 = 1.0 - std::pow(cfg.beta1, t);
    const double c2 = 1.0 - std::pow(cfg.beta2, t);
    for (std::size_t i = 0; i < grad.size(); ++i) {
        state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * grad[i];
        state.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * grad[i] * grad[i];
        const double m_hat = state.m[i] / c1;
        const double v_hat = state.v[i] / c2;
        p.weights[i] -= cfg.learning_rate * m_hat / (std::sqrt(v_hat) + cfg.epsilon);
    }
}

struct TrainConfig {
    std::size_t bits = 32;
    GridShape grid{8, 8};
    double tau = 0.3;
    std::size_t epochs = 50;
    std::size_t batch_size = 8;
    AdamConfig adam;
    std::uint64_t seed = 0;

    void validate() const
    {
        detail::require(tau > 0.0, ErrorCode::invalid_input, "temperature must be positive");
        detail::require(batch_size >= 2, ErrorCode::invalid_input, "batch size must be at least 2");
        detail::require(bits >= 1 && bits <= BitCode::max_bits, ErrorCode::invalid_input, "invalid hash length");
        detail::require(grid.rows >= 1 && grid.cols >= 1, ErrorCode::invalid_input, "invalid grid");
        detail::require(adam.learning_rate > 0.0 && adam.beta1 >= 0.0 && adam.beta1 < 1.0 && adam.beta2 >= 0.0 &&
                            adam.beta2 < 1.0 && adam.epsilon > 0.0,
                        ErrorCode::invalid_input, "invalid Adam settings");
    }
};

struct TrainResult {
    ModelParams params;
    std::vector<double> loss_history; ///< mean batch loss per epoch
    std::size_t ties = 0;
};

namespace detail {

// Partitions a shuffled order into batches of `size`; a trailing batch with a
// single item is merged into the previous one.
inline std::vector<std::vector<std::size_t>> make_batches(std::vector<std::size_t> order, std::size_t size)
{
    std::vector<std::vector<std::size_t>> batches;
    for (std::size_t start = 0; start < order.size(); start += size) {
        const std::size_t end = std::min(order.size(), start + size);
        batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                             order.begin() + static_cast<std::ptrdiff_t>(end));
    }
    if (batches.size() > 1 && batches.back().size() < 2) {
        auto last = batches.back();
        batches.pop_back();
        batches.back().insert(batches.back().end(), last.begin(), last.end());
    }
    return batches;
}

using BatchSource = std::function<ContrastiveBatch(std::span<const std::size_t> items, std::uint64_t seed)>;

inline TrainResult train_loop(std::size_t count, std::size_t channels, const TrainConfig& cfg,
                              const BatchSource& source)
{
    cfg.validate();
    detail::require(count >= 2, ErrorCode::invalid_batch, "training needs at least two images");
    TrainResult result;
    result.params = init_params(cfg.bits, channels, cfg.seed);
    AdamState state;
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::vector<std::size_t> order(count);
        std::iota(order.begin(), order.end(), std::size_t{0});
        Rng rng(mix_seed(cfg.seed, 0x5000 + epoch));
        rng.shuffle(order.begin(), order.end());
        const auto batches = make_batches(std::move(order), cfg.batch_size);
        double epoch_loss = 0.0;
        for (std::size_t b = 0; b < batches.size(); ++b) {
            const auto batch = source(batches[b], mix_seed(mix_seed(cfg.seed, epoch), b));
            auto lg = grad_total_loss(result.params, batch, cfg.tau);
            result.ties += lg.ties;
            epoch_loss += lg.loss;
            adam_step(result.params, lg.grad, state, cfg.adam);
        }
        result.loss_history.push_back(epoch_loss / static_cast<double>(batches.size()));
    }
    return result;
}

} // namespace detail

/// Trains the hash head on images with the built-in descriptor.
inline TrainResult train(std::span<const Image> images, const TrainConfig& cfg, const AugmentationConfig& aug)
{
    aug.validate();
    std::vector<Image> subset;
    return detail::train_loop(images.size(), descriptor_channels, cfg,
                              [&](std::span<const std::size_t> items, std::uint64_t seed) {
                                  subset.clear();
                                  for (auto idx : items) {
                                      subset.push_back(images[idx]);
                                  }
                                  return build_batch(subset, aug, seed, cfg.grid);
                              });
}

/// Trains on precomputed (e.g. imported backbone) feature maps. No pixel
/// augmentation is possible here, so anchor and positive are the same map.
inline TrainResult train_on_features(std::span<const FeatureMap> maps, const TrainConfig& cfg)
{
    detail::require(!maps.empty(), ErrorCode::invalid_batch, "training needs at least two feature maps");
    return detail::train_loop(maps.size(), maps.front().channels, cfg,
                              [&](std::span<const std::size_t> items, std::uint64_t) {
                                  ContrastiveBatch batch;
                                  for (auto idx : items) {
                                      batch.anchors.push_back(maps[idx]);
                                      batch.positives.push_back(maps[idx]);
                                  }
                                  return batch;
                              });
}

inline void write_loss_csv(const std::filesystem::path& path, std::span<const double> history)
{
    std::ofstream out(path);
    detail::require(static_cast<bool>(out), ErrorCode::io, "cannot create loss CSV");
    out << "epoch,mean_loss\n" << std::setprecision(17);
    for (std::size_t e = 0; e < history.size(); ++e) {
        out << e + 1 << ',' << history[e] << '\n';
    }
}

} // namespace hashscd
