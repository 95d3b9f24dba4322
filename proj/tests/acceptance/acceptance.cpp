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

// Prints one PASS/FAIL line per acceptance criterion; exits non-zero if any fail.

#include "hashscd/hashscd.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iostream>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace {

using namespace hashscd;
namespace fs = std::filesystem;

struct Outcome {
    bool pass = false;
    std::string detail;
};

class Stopwatch {
public:
    [[nodiscard]] double seconds() const
    {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }

private:
    std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

BitCode random_code(std::size_t bits, Rng& rng)
{
    std::vector<std::uint8_t> bytes(BitCode::byte_count(bits));
    for (auto& b : bytes) {
        b = static_cast<std::uint8_t>(rng.index(256));
    }
    return BitCode::from_bytes(bits, bytes);
}

// Each component moved towards the interior by at most eps.
SoftCodeUnit perturbed_soft(const BitCode& c, double eps, Rng& rng)
{
    SoftCodeUnit u;
    u.values.resize(c.size());
    for (std::size_t i = 0; i < c.size(); ++i) {
        const double d = rng.uniform(0.0, eps);
        u.values[i] = c.get(i) ? 1.0 - d : d;
    }
    return u;
}

std::string fmt(double v)
{
    std::ostringstream os;
    os << v;
    return os.str();
}

Outcome xor_equivalence()
{
    Stopwatch clock;
    Rng rng(101);
    std::size_t mismatches = 0;
    for (std::size_t p = 1; p <= 64; ++p) {
        for (std::size_t l : {8, 16, 64}) {
            // Buffers are refilled in place each trial.
            std::vector<BitCode> codes(p, BitCode(l));
            std::vector<SoftCodeUnit> soft(p, SoftCodeUnit{std::vector<double>(l)});
            for (int t = 0; t < 1000; ++t) {
                for (std::size_t i = 0; i < p; ++i) {
                    for (std::size_t j = 0; j < l; j += 16) {
                        const std::size_t word = rng.index(std::size_t{1} << 16);
                        for (std::size_t k = 0; k < 16 && j + k < l; ++k) {
                            const bool bit = ((word >> k) & 1u) != 0;
                            codes[i].set(j + k, bit);
                            soft[i].values[j + k] = bit ? 1.0 : 0.0;
                        }
                    }
                }
                const auto s = soft_aggregate(soft);
                const auto b = binary_aggregate(codes);
                for (std::size_t j = 0; j < l; ++j) {
                    if (s.values[j] != (b.get(j) ? 1.0 : 0.0)) {
                        ++mismatches;
                        break;
                    }
                }
            }
        }
    }
    const double secs = clock.seconds();
    return {mismatches == 0 && secs < 5.0,
            "192000 trials, " + std::to_string(mismatches) + " mismatches, " + fmt(secs) + " s"};
}

Outcome order_invariance()
{
    Stopwatch clock;
    Rng rng(202);
    std::size_t binary_diffs = 0;
    double worst3 = 0.0; // max difference / eps at P = 3
    double worst = 0.0;  // max difference / (P eps) over all P
    for (double eps : {1e-2, 1e-4}) {
        for (std::size_t p = 2; p <= 64; ++p) {
            for (int t = 0; t < 10; ++t) {
                const std::size_t l = 16;
                std::vector<BitCode> codes;
                std::vector<SoftCodeUnit> soft;
                for (std::size_t i = 0; i < p; ++i) {
                    codes.push_back(random_code(l, rng));
                    soft.push_back(perturbed_soft(codes.back(), eps, rng));
                }
                const auto ref_bits = binary_aggregate(codes);
                const auto ref_soft = soft_aggregate(soft);
                std::vector<std::size_t> order(p);
                std::iota(order.begin(), order.end(), std::size_t{0});
                for (int k = 0; k < 100; ++k) {
                    rng.shuffle(order.begin(), order.end());
                    std::vector<BitCode> pc;
                    std::vector<SoftCodeUnit> ps;
                    for (auto i : order) {
                        pc.push_back(codes[i]);
                        ps.push_back(soft[i]);
                    }
                    binary_diffs += binary_aggregate(pc) == ref_bits ? 0 : 1;
                    const auto s = soft_aggregate(ps);
                    for (std::size_t j = 0; j < l; ++j) {
                        const double d = std::fabs(s.values[j] - ref_soft.values[j]);
                        worst = std::max(worst, d / (static_cast<double>(p) * eps));
                        if (p == 3) {
                            worst3 = std::max(worst3, d / eps);
                        }
                    }
                }
            }
        }
    }
    const double s = clock.seconds();
    const bool ok = binary_diffs == 0 && worst3 <= 6.0 && worst <= 2.0 && s < 10.0;
    return {ok, "binary diffs " + std::to_string(binary_diffs) + ", max diff/eps at P=3 " + fmt(worst3) +
                    " (<= 6), max diff/(P eps) " + fmt(worst) + " (<= 2), " + fmt(s) + " s"};
}

Outcome soft_to_hard_bound()
{
    Rng rng(303);
    std::size_t violations = 0;
    double worst = 0.0;
    const std::size_t lengths[] = {8, 16, 64};
    for (int t = 0; t < 10000; ++t) {
        const std::size_t p = 1 + rng.index(64);
        const std::size_t l = lengths[rng.index(3)];
        const double eps = std::pow(10.0, rng.uniform(-6.0, -1.0));
        std::vector<BitCode> codes;
        std::vector<SoftCodeUnit> soft;
        for (std::size_t i = 0; i < p; ++i) {
            codes.push_back(random_code(l, rng));
            soft.push_back(perturbed_soft(codes.back(), eps, rng));
        }
        const auto hard = binary_aggregate(codes);
        const auto s = soft_aggregate(soft);
        const double bound = static_cast<double>(p) * eps;
        for (std::size_t j = 0; j < l; ++j) {
            const double d = std::fabs(s.values[j] - (hard.get(j) ? 1.0 : 0.0));
            worst = std::max(worst, d / bound);
            violations += d > bound ? 1 : 0;
        }
    }
    return {violations == 0,
            "10000 trials, " + std::to_string(violations) + " violations, max gap/(P eps) " + fmt(worst)};
}

FeatureMap random_map(std::size_t c, GridShape g, Rng& rng)
{
    FeatureMap fm(c, g.rows, g.cols);
    for (auto& v : fm.data) {
        v = rng.normal();
    }
    return fm;
}

Outcome gradient_check()
{
    Stopwatch clock;
    Rng rng(404);
    const double h = 1e-5;
    std::size_t checked = 0;
    std::size_t failures = 0;
    std::size_t ties = 0;
    double worst = 0.0;
    const GridShape grids[] = {{1, 1}, {1, 2}, {2, 1}, {1, 3}, {3, 1}, {2, 2}, {1, 4}, {4, 1}};
    for (int inst = 0; inst < 100; ++inst) {
        const std::size_t l = 1 + rng.index(8);
        const std::size_t c = 1 + rng.index(8);
        const std::size_t n = 2 + rng.index(3);
        const GridShape g = grids[rng.index(8)];
        const double tau = rng.uniform(0.1, 1.0);
        ModelParams p(l, c);
        for (auto& w : p.weights) {
            w = rng.normal();
        }
        ContrastiveBatch b;
        for (std::size_t k = 0; k < n; ++k) {
            b.anchors.push_back(random_map(c, g, rng));
            b.positives.push_back(random_map(c, g, rng));
        }
        const auto analytic = grad_total_loss(p, b, tau);
        ties += analytic.ties;
        for (std::size_t i = 0; i < p.weights.size(); ++i) {
            auto up = p;
            auto down = p;
            up.weights[i] += h;
            down.weights[i] -= h;
            const double numeric = (total_loss(up, b, tau) - total_loss(down, b, tau)) / (2.0 * h);
            if (std::fabs(numeric) <= 1e-8) {
                continue;
            }
            ++checked;
            const double rel = std::fabs(analytic.grad[i] - numeric) / std::fabs(numeric);
            worst = std::max(worst, rel);
            failures += rel > 1e-4 ? 1 : 0;
        }
    }
    const double s = clock.seconds();
    return {failures == 0 && s < 60.0,
            std::to_string(checked) + " components, " + std::to_string(failures) + " above 1e-4, max rel err " +
                fmt(worst) + ", fold ties " + std::to_string(ties) + ", " + fmt(s) + " s"};
}

double brute_force_ap(const RankedList& ranked, const std::set<std::string>& relevant)
{
    double sum = 0.0;
    for (std::size_t k = 0; k < ranked.entries.size(); ++k) {
        if (!relevant.contains(ranked.entries[k].id)) {
            continue;
        }
        std::size_t hits = 0;
        for (std::size_t j = 0; j <= k; ++j) {
            hits += relevant.contains(ranked.entries[j].id) ? 1 : 0;
        }
        sum += static_cast<double>(hits) / static_cast<double>(k + 1);
    }
    return sum / static_cast<double>(relevant.size());
}

Outcome hamming_and_map_oracles()
{
    Rng rng(505);
    std::size_t hamming_mismatches = 0;
    for (int t = 0; t < 10000; ++t) {
        const std::size_t l = 1 + rng.index(300);
        const auto a = random_code(l, rng);
        const auto b = random_code(l, rng);
        std::size_t naive = 0;
        for (std::size_t i = 0; i < l; ++i) {
            naive += a.get(i) != b.get(i) ? 1 : 0;
        }
        hamming_mismatches += hamming(a, b) == naive ? 0 : 1;
    }
    double worst = 0.0;
    for (int inst = 0; inst < 100; ++inst) {
        std::vector<QueryEvaluation> qs;
        double sum = 0.0;
        std::size_t used = 0;
        const std::size_t queries = 1 + rng.index(10);
        for (std::size_t q = 0; q < queries; ++q) {
            const std::size_t n = 1 + rng.index(40);
            RankedList ranked{"q" + std::to_string(q), {}};
            std::set<std::string> relevant;
            for (std::size_t i = 0; i < n; ++i) {
                ranked.entries.push_back({"d" + std::to_string(i), rng.index(64)});
                if (rng.bernoulli(0.3)) {
                    relevant.insert(ranked.entries.back().id);
                }
            }
            rng.shuffle(ranked.entries.begin(), ranked.entries.end());
            if (q == 0 && relevant.empty()) {
                relevant.insert("d0");
            }
            if (!relevant.empty()) {
                sum += brute_force_ap(ranked, relevant);
                ++used;
            }
            qs.push_back({std::move(ranked), std::move(relevant)});
        }
        worst = std::max(worst, std::fabs(mean_average_precision(qs) - sum / static_cast<double>(used)));
    }
    return {hamming_mismatches == 0 && worst <= 1e-12,
            "10000 hamming pairs, " + std::to_string(hamming_mismatches) + " mismatches; 100 mAP instances, max abs err " +
                fmt(worst)};
}

Outcome storage_arithmetic()
{
    const std::uint64_t continuous_bytes = 32ull * 32 * 512 * 4;
    StoreHeader h;
    h.bits = 64;
    h.rows = 32;
    h.cols = 32;
    const std::uint64_t patch_payload = 32ull * 32 * 64 / 8;
    bool ok = continuous_bytes == 2097152 && patch_payload == 8192 && continuous_bytes % patch_payload == 0 &&
              continuous_bytes / patch_payload == 256;
    // Stored payload per record is (P + 1) l bits, and so is what the model emits.
    Rng rng(606);
    for (std::size_t l : {8, 16, 32, 64}) {
        for (GridShape g : {GridShape{1, 1}, GridShape{4, 4}, GridShape{8, 8}, GridShape{32, 32}}) {
            StoreHeader sh;
            sh.bits = static_cast<std::uint16_t>(l);
            sh.rows = static_cast<std::uint16_t>(g.rows);
            sh.cols = static_cast<std::uint16_t>(g.cols);
            ok = ok && sh.payload_bytes() * 8 == (g.cells() + 1) * l;
            if (g.cells() <= 64) {
                const auto params = init_params(l, 4, l);
                FeatureMap fm(4, g.rows, g.cols);
                for (auto& v : fm.data) {
                    v = rng.normal();
                }
                const auto hashes = hash_image(params, fm);
                std::size_t emitted = hashes.global_code.size();
                for (const auto& c : hashes.patch_codes) {
                    emitted += c.size();
                }
                ok = ok && emitted == (g.cells() + 1) * l;
            }
        }
    }
    return {ok, std::to_string(continuous_bytes) + " / " + std::to_string(patch_payload) + " = " +
                    std::to_string(continuous_bytes / patch_payload) + ", 32x32 l=64 record payload " +
                    std::to_string(h.payload_bytes() * 8) + " bits = (1024 + 1) * 64"};
}

Outcome zero_change_identity()
{
    SynthChangeSpec spec;
    spec.height = 128;
    spec.width = 128;
    spec.nuisance = 0.0;
    spec.seed = 7;
    const auto pair = gen_pair(spec);
    const GridShape grid{8, 8};
    const auto params = init_params(32, descriptor_channels, 3);
    const auto a = hash_image(params, compute_feature_map(pair.before, grid));
    const auto b = hash_image(params, compute_feature_map(pair.after, grid));
    const auto hm = change_heatmap(a.patch_codes, b.patch_codes, grid, spec.height, spec.width);
    const bool zero = std::all_of(hm.values.begin(), hm.values.end(), [](double v) { return v == 0.0; });
    const auto mask = threshold_heatmap(hm);
    const double f = f1(mask, pair.mask);
    const double j = iou(mask, pair.mask);
    const bool global_same = hamming(a.global_code, b.global_code) == 0;
    return {zero && global_same && f == 1.0 && j == 1.0,
            std::string("heatmap ") + (zero ? "all zero" : "NON-ZERO") + ", F1 " + fmt(f) + ", IoU " + fmt(j) +
                " (both masks empty)"};
}

Outcome synthetic_change_detection()
{
    Stopwatch clock;
    const std::size_t side = 128;
    const GridShape grid{16, 16};
    std::vector<SynthPair> pairs;
    std::vector<Image> corpus;
    for (std::uint64_t s = 0; s < 20; ++s) {
        pairs.push_back(gen_pair(random_change_spec(side, side, grid, s)));
        corpus.push_back(pairs.back().before);
        corpus.push_back(pairs.back().after);
    }
    TrainConfig cfg;
    cfg.bits = 32;
    cfg.grid = grid;
    cfg.epochs = 50;
    cfg.batch_size = 8;
    cfg.tau = 0.3;
    cfg.adam.learning_rate = 1e-2;
    cfg.seed = 1;
    AugmentationConfig aug;
    aug.enable("color-jitter,noise");
    aug.seed = 2;
    const auto result = train(corpus, cfg, aug);

    const auto cells = grid_cells(side, side, grid);
    std::size_t unchanged_nonzero = 0;
    std::size_t unchanged = 0;
    double iou_sum = 0.0;
    for (const auto& p : pairs) {
        const auto a = hash_image(result.params, compute_feature_map(p.before, grid));
        const auto b = hash_image(result.params, compute_feature_map(p.after, grid));
        const auto dist = localize(a.patch_codes, b.patch_codes, grid);
        for (std::size_t c = 0; c < cells.size(); ++c) {
            bool touched = false;
            for (auto y = cells[c].row_begin; y < cells[c].row_end && !touched; ++y) {
                for (auto x = cells[c].col_begin; x < cells[c].col_end; ++x) {
                    if (p.mask.at(y, x) != 0) {
                        touched = true;
                        break;
                    }
                }
            }
            if (!touched) {
                ++unchanged;
                unchanged_nonzero += dist.values[c] == 0.0 ? 0 : 1;
            }
        }
        iou_sum += iou(threshold_heatmap(upsample(dist, side, side)), p.mask);
    }
    const double mean_iou = iou_sum / static_cast<double>(pairs.size());
    const double s = clock.seconds();
    return {unchanged_nonzero == 0 && mean_iou >= 0.5 && s < 300.0,
            "mean IoU " + fmt(mean_iou) + " (>= 0.5), unchanged cells with non-zero distance " +
                std::to_string(unchanged_nonzero) + "/" + std::to_string(unchanged) + ", " + fmt(s) + " s"};
}

Outcome synthetic_retrieval()
{
    Stopwatch clock;
    SynthClusterSpec spec;
    spec.clusters = 4;
    spec.items_per_cluster = 8;
    spec.jitter = 0.1;
    spec.separation = 1.0;
    spec.seed = 1;
    const auto items = gen_clusters(spec);
    std::vector<Image> images;
    for (const auto& it : items) {
        images.push_back(it.image);
    }
    const GridShape grid{1, 1};
    TrainConfig cfg;
    cfg.bits = 16;
    cfg.grid = grid;
    cfg.epochs = 50;
    cfg.batch_size = 8;
    cfg.seed = 1;
    AugmentationConfig aug;
    aug.enable("color-jitter,noise");
    aug.seed = 2;
    const auto result = train(images, cfg, aug);

    std::vector<Candidate> db;
    for (std::size_t i = 0; i < images.size(); ++i) {
        db.push_back({"item" + std::to_string(100 + i),
                      hash_image(result.params, compute_feature_map(images[i], grid)).global_code});
    }
    std::vector<QueryEvaluation> qs;
    for (std::size_t q = 0; q < db.size(); ++q) {
        std::vector<Candidate> others;
        std::set<std::string> relevant;
        for (std::size_t i = 0; i < db.size(); ++i) {
            if (i == q) {
                continue;
            }
            others.push_back(db[i]);
            if (items[i].label == items[q].label) {
                relevant.insert(db[i].id);
            }
        }
        qs.push_back({rank(db[q].code, others, std::nullopt, db[q].id), std::move(relevant)});
    }
    const double map = mean_average_precision(qs);
    const double first = result.loss_history.front();
    const double last = result.loss_history.back();
    const double s = clock.seconds();
    return {map >= 0.8 && last < first && s < 300.0,
            "mAP " + fmt(map) + " (>= 0.8, chance 0.25), loss " + fmt(first) + " -> " + fmt(last) + ", " + fmt(s) +
                " s"};
}

Outcome store_fuzz()
{
    Rng rng(707);
    const fs::path dir = fs::temp_directory_path() / "hashscd_acceptance_store";
    fs::remove_all(dir);
    fs::create_directories(dir);
    const std::size_t lengths[] = {16, 32, 64};
    std::vector<std::vector<HashRecord>> per_store(3);
    std::vector<std::vector<std::uintmax_t>> boundaries(3);
    std::vector<GridShape> grids;
    for (std::size_t s = 0; s < 3; ++s) {
        grids.push_back({1 + rng.index(6), 1 + rng.index(6)});
        Store::create(dir / ("s" + std::to_string(s) + ".hsdb"), lengths[s], grids[s]);
        boundaries[s].push_back(StoreHeader::encoded_size);
    }
    {
        std::vector<Store> stores;
        for (std::size_t s = 0; s < 3; ++s) {
            stores.push_back(Store::open(dir / ("s" + std::to_string(s) + ".hsdb")));
        }
        for (int i = 0; i < 1000; ++i) {
            const std::size_t s = rng.index(3);
            std::string location(1 + rng.index(40), ' ');
            for (auto& ch : location) {
                ch = static_cast<char>('a' + rng.index(26));
            }
            const auto ts = static_cast<std::int64_t>(rng.index(1u << 30)) - (1 << 29) + i * (1ll << 31);
            HashRecord rec{location, ts, grids[s], random_code(lengths[s], rng), {}};
            for (std::size_t c = 0; c < grids[s].cells(); ++c) {
                rec.patch_codes.push_back(random_code(lengths[s], rng));
            }
            stores[s].put(rec);
            per_store[s].push_back(std::move(rec));
            boundaries[s].push_back(boundaries[s].back() + stores[s].header().record_size(location.size()));
        }
    }
    bool exact = true;
    std::size_t truncations = 0;
    bool recovered = true;
    for (std::size_t s = 0; s < 3; ++s) {
        const auto path = dir / ("s" + std::to_string(s) + ".hsdb");
        exact = exact && Store::open(path).scan() == per_store[s] && fs::file_size(path) == boundaries[s].back();
        const auto full = detail::read_file(path);
        for (std::size_t k = 0; k + 1 < boundaries[s].size(); k += 1 + rng.index(8)) {
            // Exactly at a boundary and part-way into the next record.
            const auto mid = boundaries[s][k] + 1 + rng.index(boundaries[s][k + 1] - boundaries[s][k] - 1);
            for (auto cut : {boundaries[s][k], mid}) {
                const auto cut_path = dir / "cut.hsdb";
                detail::write_file(cut_path, std::vector<std::uint8_t>(full.begin(), full.begin() + static_cast<std::ptrdiff_t>(cut)));
                const auto back = Store::open(cut_path).scan();
                recovered = recovered &&
                            back == std::vector<HashRecord>(per_store[s].begin(), per_store[s].begin() + static_cast<std::ptrdiff_t>(k));
                ++truncations;
            }
        }
    }
    fs::remove_all(dir);
    return {exact && recovered, "1000 records over l = 16/32/64, reopen " + std::string(exact ? "bit-exact" : "MISMATCH") +
                                    ", " + std::to_string(truncations) + " truncations " +
                                    (recovered ? "recovered" : "FAILED")};
}

} // namespace

int main()
{
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
        {"xor-equivalence", xor_equivalence},
        {"order-invariance", order_invariance},
        {"soft-to-hard-bound", soft_to_hard_bound},
        {"gradient-check", gradient_check},
        {"hamming-map-oracles", hamming_and_map_oracles},
        {"storage-arithmetic", storage_arithmetic},
        {"zero-change-identity", zero_change_identity},
        {"synthetic-change-detection", synthetic_change_detection},
        {"synthetic-retrieval", synthetic_retrieval},
        {"store-roundtrip-fuzz", store_fuzz},
    };
    int failures = 0;
    for (const auto& [name, run] : criteria) {
        Outcome o;
        try {
            o = run();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        std::cout << (o.pass ? "PASS " : "FAIL ") << name << ": " << o.detail << std::endl;
        failures += o.pass ? 0 : 1;
    }
    return failures == 0 ? 0 : 1;
}
