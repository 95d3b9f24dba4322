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

// hashscd command-line tool.
//
// Exit codes: 0 ok, 2 configuration error, 3 data error, 4 store conflict,
// 5 geometry mismatch.

#include "hashscd/hashscd.hpp"

#include "CLI11.hpp"

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace hashscd;

namespace {

enum ExitCode : int { exit_ok = 0, exit_config = 2, exit_data = 3, exit_conflict = 4, exit_geometry = 5 };

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

int exit_code_for(const Error& e)
{
    switch (e.code()) {
    case ErrorCode::conflict: return exit_conflict;
    case ErrorCode::dimension_mismatch: return exit_geometry;
    default: return exit_data;
    }
}

// "16x12" -> {16, 12}; "8" -> {8, 8}.
std::pair<std::size_t, std::size_t> parse_dims(const std::string& text, const char* what)
{
    std::size_t a = 0;
    std::size_t b = 0;
    char sep = 0;
    std::istringstream in(text);
    if (!(in >> a)) {
        throw ConfigError(std::string("bad ") + what + ": '" + text + "'");
    }
    if (in >> sep) {
        if ((sep != 'x' && sep != 'X') || !(in >> b)) {
            throw ConfigError(std::string("bad ") + what + ": '" + text + "'");
        }
    } else {
        b = a;
    }
    in >> std::ws;
    if (!in.eof() || a == 0 || b == 0) {
        throw ConfigError(std::string("bad ") + what + ": '" + text + "'");
    }
    return {a, b};
}

GridShape parse_grid(const std::string& text)
{
    const auto [r, c] = parse_dims(text, "grid");
    return {r, c};
}

void check_unit(double v, const char* name)
{
    if (!(v >= 0.0 && v <= 1.0)) {
        throw ConfigError(std::string(name) + " must be in [0, 1]");
    }
}

std::vector<fs::path> list_files(const fs::path& dir, const std::string& ext)
{
    if (!fs::is_directory(dir)) {
        throw Error(ErrorCode::not_found, "not a directory: " + dir.string());
    }
    std::vector<fs::path> out;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (entry.is_regular_file() && entry.path().extension() == ext) {
            out.push_back(entry.path());
        }
    }
    std::sort(out.begin(), out.end());
    return out;
}

// Splices `--config FILE` into the argument list: every key=value in the
// file becomes --key=value unless that option already appears on the command
// line. Unknown keys then fail parsing like unknown flags.
std::vector<std::string> expand_config(std::vector<std::string> args)
{
    std::optional<std::string> file;
    for (std::size_t i = 0; i < args.size(); ++i) {
        if (args[i] == "--config" && i + 1 < args.size()) {
            file = args[i + 1];
            args.erase(args.begin() + static_cast<std::ptrdiff_t>(i), args.begin() + static_cast<std::ptrdiff_t>(i + 2));
            break;
        }
        if (args[i].starts_with("--config=")) {
            file = args[i].substr(9);
            args.erase(args.begin() + static_cast<std::ptrdiff_t>(i));
            break;
        }
    }
    if (!file) {
        return args;
    }
    std::ifstream in(*file);
    if (!in) {
        throw ConfigError("cannot open config file " + *file);
    }
    std::vector<CLI::ConfigItem> items;
    try {
        items = CLI::ConfigTOML().from_config(in);
    } catch (const CLI::ParseError& e) {
        throw ConfigError(std::string("config file: ") + e.what());
    }
    const auto given = [&](const std::string& key) {
        return std::any_of(args.begin(), args.end(), [&](const std::string& a) {
            return a == "--" + key || a.starts_with("--" + key + "=");
        });
    };
    for (const auto& item : items) {
        if (!item.parents.empty()) {
            throw ConfigError("config sections are not supported: " + item.fullname());
        }
        if (item.name == "config" || item.name == "manifest") {
            throw ConfigError("key '" + item.name + "' is not allowed in a config file");
        }
        if (given(item.name)) {
            continue;
        }
        for (const auto& v : item.inputs) {
            if (!v.empty()) {
                args.push_back("--" + item.name + "=" + v);
            }
        }
    }
    return args;
}

void write_manifest(const CLI::App& cmd, const fs::path& path)
{
    std::ofstream out(path);
    if (!out) {
        throw Error(ErrorCode::io, "cannot write manifest " + path.string());
    }
    out << cmd.config_to_str(true, false);
}

Image load_image(const fs::path& path) { return read_png(path); }

HashRecord load_record(const fs::path& path) { return read_record_file(path); }

void require_same_geometry(const HashRecord& a, const HashRecord& b)
{
    if (a.grid.rows != b.grid.rows || a.grid.cols != b.grid.cols || a.global_code.size() != b.global_code.size()) {
        throw Error(ErrorCode::dimension_mismatch, "records differ in grid or hash length");
    }
}

// ---------------------------------------------------------------------------
// Option bundles
// ---------------------------------------------------------------------------

struct Common {
    std::string manifest;
    std::string config; // consumed by expand_config before parsing
};

void add_manifest(CLI::App* cmd, Common& c)
{
    cmd->add_option("--manifest", c.manifest, "resolved-config manifest path")->configurable(false);
    cmd->add_option("--config", c.config, "key=value config file (flags override)")->configurable(false);
}

fs::path manifest_path(const Common& c, const fs::path& primary)
{
    return c.manifest.empty() ? fs::path(primary.string() + ".manifest") : fs::path(c.manifest);
}

struct TrainArgs {
    Common common;
    std::string images;
    std::string features;
    std::string out;
    std::string loss_csv;
    std::size_t bits = 32;
    std::string grid = "8x8";
    double tau = 0.3;
    std::size_t epochs = 50;
    std::size_t batch_size = 8;
    double lr = 1e-2;
    std::uint64_t seed = 0;
    std::string augment = "none";
};

int run_train(const TrainArgs& a, const CLI::App& cmd)
{
    TrainConfig cfg;
    AugmentationConfig aug;
    try {
        cfg.bits = a.bits;
        cfg.grid = parse_grid(a.grid);
        cfg.tau = a.tau;
        cfg.epochs = a.epochs;
        cfg.batch_size = a.batch_size;
        cfg.adam.learning_rate = a.lr;
        cfg.seed = a.seed;
        aug.enable(a.augment);
        aug.seed = mix_seed(a.seed, 0xA06);
        cfg.validate();
        aug.validate();
    } catch (const Error& e) {
        throw ConfigError(e.what());
    }
    if (a.images.empty() == a.features.empty()) {
        throw ConfigError("exactly one of --images or --features is required");
    }

    TrainResult result;
    if (!a.images.empty()) {
        std::vector<Image> images;
        for (const auto& p : list_files(a.images, ".png")) {
            images.push_back(load_image(p));
        }
        if (images.size() < 2) {
            throw Error(ErrorCode::invalid_input, "need at least two PNG images in " + a.images);
        }
        result = train(images, cfg, aug);
    } else {
        std::vector<FeatureMap> maps;
        for (const auto& p : list_files(a.features, ".hsfm")) {
            maps.push_back(load_feature_map(p));
        }
        if (maps.size() < 2) {
            throw Error(ErrorCode::invalid_input, "need at least two feature map files in " + a.features);
        }
        result = train_on_features(maps, cfg);
    }
    save_params(result.params, a.out);
    if (!a.loss_csv.empty()) {
        write_loss_csv(a.loss_csv, result.loss_history);
    }
    write_manifest(cmd, manifest_path(a.common, a.out));
    if (!result.loss_history.empty()) {
        std::cout << "loss " << result.loss_history.front() << " -> " << result.loss_history.back() << '\n';
    }
    return exit_ok;
}

struct HashArgs {
    Common common;
    std::string params;
    std::string image;
    std::string features;
    std::string grid = "8x8";
    std::string store;
    std::string out;
    std::string location;
    std::int64_t timestamp = 0;
};

ImageHashes hash_input(const ModelParams& params, const std::string& image, const std::string& features,
                       GridShape grid)
{
    const FeatureMap fm =
        image.empty() ? load_feature_map(features) : compute_feature_map(load_image(image), grid);
    return hash_image(params, fm);
}

int run_hash(const HashArgs& a, const CLI::App& cmd)
{
    const GridShape grid = parse_grid(a.grid);
    if (a.image.empty() == a.features.empty()) {
        throw ConfigError("exactly one of --image or --features is required");
    }
    if (a.store.empty() == a.out.empty()) {
        throw ConfigError("exactly one of --store or --out is required");
    }
    if (a.location.empty()) {
        throw ConfigError("--location is required");
    }
    const auto params = load_params(a.params);
    const auto record = make_record(a.location, a.timestamp, hash_input(params, a.image, a.features, grid));

    fs::path primary;
    if (!a.store.empty()) {
        auto store = fs::exists(a.store) ? Store::open(a.store) : Store::create(a.store, params.bits, record.grid);
        store.put(record);
        primary = a.store;
    } else {
        write_record_file(a.out, record);
        primary = a.out;
    }
    write_manifest(cmd, manifest_path(a.common, primary));
    std::cout << "location=" << record.location << " timestamp=" << record.timestamp << " grid=" << record.grid.rows
              << 'x' << record.grid.cols << " bits=" << params.bits
              << " payload_bits=" << record_payload_bits(record.grid.cells(), params.bits) << '\n';
    return exit_ok;
}

struct DetectArgs {
    Common common;
    std::string record_a;
    std::string record_b;
    std::string store;
    std::string location;
    std::optional<std::int64_t> timestamp_a;
    std::optional<std::int64_t> timestamp_b;
    std::string image;
    std::string params;
    std::string size;
    double threshold = 0.5;
    double pixel_threshold = 0.5;
    std::string heatmap;
    std::string mask;
    std::string csv;
    std::string gt_mask;
};

int run_detect(const DetectArgs& a, const CLI::App& cmd)
{
    check_unit(a.threshold, "--threshold");
    check_unit(a.pixel_threshold, "--pixel-threshold");
    if (!a.record_b.empty() + !a.image.empty() + a.timestamp_b.has_value() != 1) {
        throw ConfigError("exactly one of --record-b, --image or --timestamp-b is required");
    }
    if (a.record_a.empty() == a.store.empty()) {
        throw ConfigError("exactly one of --record-a or --store is required");
    }
    if (!a.store.empty() && a.location.empty()) {
        throw ConfigError("--store needs --location");
    }
    if (a.timestamp_b && a.store.empty()) {
        throw ConfigError("--timestamp-b needs --store");
    }
    if (!a.image.empty() && a.params.empty()) {
        throw ConfigError("--image needs --params");
    }

    std::optional<Store> store;
    if (!a.store.empty()) {
        store.emplace(Store::open(a.store));
    }
    const HashRecord first = store ? (a.timestamp_a ? store->get(a.location, *a.timestamp_a) : store->latest(a.location))
                                   : load_record(a.record_a);

    std::optional<std::pair<std::size_t, std::size_t>> size;
    if (!a.size.empty()) {
        size = parse_dims(a.size, "size");
    }
    HashRecord second;
    if (!a.image.empty()) {
        // Only the new observation goes through feature extraction.
        const auto params = load_params(a.params);
        if (params.bits != first.global_code.size()) {
            throw Error(ErrorCode::dimension_mismatch, "parameter hash length differs from the stored record");
        }
        const Image img = load_image(a.image);
        if (!size) {
            size = {img.height, img.width};
        }
        second = make_record(first.location, 0, hash_image(params, compute_feature_map(img, first.grid)));
    } else if (a.timestamp_b) {
        second = store->get(a.location, *a.timestamp_b);
    } else {
        second = load_record(a.record_b);
    }
    require_same_geometry(first, second);

    const auto decision = detect_global(first.global_code, second.global_code, a.threshold);
    const bool wants_maps = !a.heatmap.empty() || !a.mask.empty() || !a.gt_mask.empty();
    std::optional<ChangeMask> gt;
    if (!a.gt_mask.empty()) {
        gt = read_mask_png(a.gt_mask);
        if (!size) {
            size = {gt->height, gt->width};
        }
    }
    if (wants_maps && !size) {
        throw ConfigError("heatmap output needs --size when no image is given");
    }

    std::optional<double> f1_score;
    std::optional<double> iou_score;
    if (wants_maps) {
        const auto hm = change_heatmap(first.patch_codes, second.patch_codes, first.grid, size->first, size->second);
        const auto pred = threshold_heatmap(hm, a.pixel_threshold);
        if (!a.heatmap.empty()) {
            write_heatmap_png(a.heatmap, hm);
        }
        if (!a.mask.empty()) {
            write_mask_png(a.mask, pred);
        }
        if (gt) {
            f1_score = f1(pred, *gt);
            iou_score = iou(pred, *gt);
        }
    }

    std::ostringstream row;
    row << std::setprecision(17) << (decision.changed ? 1 : 0) << ',' << decision.distance;
    std::string header = "changed,global_distance";
    if (f1_score) {
        header += ",f1,iou";
        row << ',' << *f1_score << ',' << *iou_score;
    }
    if (!a.csv.empty()) {
        std::ofstream out(a.csv);
        if (!out) {
            throw Error(ErrorCode::io, "cannot write " + a.csv);
        }
        out << header << '\n' << row.str() << '\n';
    }
    std::cout << header << '\n' << row.str() << '\n';

    const std::string primary = !a.csv.empty() ? a.csv : !a.heatmap.empty() ? a.heatmap : a.mask;
    if (!a.common.manifest.empty() || !primary.empty()) {
        write_manifest(cmd, manifest_path(a.common, primary));
    }
    return exit_ok;
}

struct RetrieveArgs {
    Common common;
    std::string store;
    std::string codes;
    std::string query_image;
    std::string query_features;
    std::string query_record;
    std::string query_code;
    std::string params;
    std::string grid;
    std::string query_id = "query";
    std::optional<std::size_t> k;
    std::string out;
};

std::vector<Candidate> read_codes_csv(const fs::path& path)
{
    std::ifstream in(path);
    if (!in) {
        throw Error(ErrorCode::io, "cannot open " + path.string());
    }
    std::vector<Candidate> out;
    std::string line;
    while (std::getline(in, line)) {
        auto f = detail::split_csv_line(line);
        if (f.empty() || (f.size() == 1 && f[0].empty()) || f[0] == "id") {
            continue;
        }
        if (f.size() != 2) {
            throw Error(ErrorCode::invalid_input, "code rows need two fields: " + line);
        }
        out.push_back({f[0], BitCode::from_string(f[1])});
    }
    return out;
}

int run_retrieve(const RetrieveArgs& a, const CLI::App& cmd)
{
    if (a.store.empty() == a.codes.empty()) {
        throw ConfigError("exactly one of --store or --codes is required");
    }
    const int query_sources = !a.query_image.empty() + !a.query_features.empty() + !a.query_record.empty() +
                              !a.query_code.empty();
    if (query_sources != 1) {
        throw ConfigError("exactly one query source is required");
    }
    if ((!a.query_image.empty() || !a.query_features.empty()) && a.params.empty()) {
        throw ConfigError("an image or feature query needs --params");
    }

    std::vector<Candidate> db;
    std::optional<GridShape> db_grid;
    if (!a.store.empty()) {
        auto store = Store::open(a.store);
        db_grid = store.grid();
        for (auto& rec : store.scan()) {
            db.push_back({rec.location + "@" + std::to_string(rec.timestamp), std::move(rec.global_code)});
        }
    } else {
        db = read_codes_csv(a.codes);
    }

    BitCode query(1);
    if (!a.query_code.empty()) {
        query = BitCode::from_string(a.query_code);
    } else if (!a.query_record.empty()) {
        query = load_record(a.query_record).global_code;
    } else {
        const GridShape grid = !a.grid.empty() ? parse_grid(a.grid) : db_grid.value_or(GridShape{8, 8});
        query = hash_input(load_params(a.params), a.query_image, a.query_features, grid).global_code;
    }
    for (const auto& c : db) {
        if (c.code.size() != query.size()) {
            throw Error(ErrorCode::dimension_mismatch, "database code length differs from the query");
        }
    }

    const std::vector<RankedList> lists{rank(query, db, a.k, a.query_id)};
    if (a.out.empty()) {
        write_rankings_csv(std::cout, lists);
    } else {
        std::ofstream out(a.out);
        if (!out) {
            throw Error(ErrorCode::io, "cannot write " + a.out);
        }
        write_rankings_csv(out, lists);
        write_manifest(cmd, manifest_path(a.common, a.out));
    }
    return exit_ok;
}

struct EvalChangeArgs {
    Common common;
    std::string pred;
    std::string gt;
    std::string dataset;
    std::string params;
    std::string grid = "8x8";
    double threshold = 0.5;
    double pixel_threshold = 0.5;
    std::string out;
};

int run_eval_change(const EvalChangeArgs& a, const CLI::App& cmd)
{
    check_unit(a.threshold, "--threshold");
    check_unit(a.pixel_threshold, "--pixel-threshold");
    const bool dataset_mode = !a.dataset.empty();
    if (dataset_mode == (!a.pred.empty() || !a.gt.empty())) {
        throw ConfigError("use either --dataset or --pred with --gt");
    }
    if (dataset_mode && a.params.empty()) {
        throw ConfigError("--dataset needs --params");
    }
    if (!dataset_mode && (a.pred.empty() || a.gt.empty())) {
        throw ConfigError("--pred and --gt are both required");
    }
    const GridShape grid = parse_grid(a.grid);

    std::ofstream out(a.out);
    if (!out) {
        throw Error(ErrorCode::io, "cannot write " + a.out);
    }
    out << std::setprecision(17);
    double sum_f1 = 0.0;
    double sum_iou = 0.0;
    std::size_t rows = 0;

    if (dataset_mode) {
        const fs::path root(a.dataset);
        const auto params = load_params(a.params);
        out << "id,changed,global_distance,f1,iou\n";
        for (const auto& t0 : list_files(root / "t0", ".png")) {
            const auto name = t0.filename();
            const Image before = load_image(t0);
            const Image after = load_image(root / "t1" / name);
            const ChangeMask gt = read_mask_png(root / "mask" / name);
            if (before.height != after.height || before.width != after.width || gt.height != before.height ||
                gt.width != before.width) {
                throw Error(ErrorCode::dimension_mismatch, "image sizes differ for " + name.string());
            }
            const auto ha = hash_image(params, compute_feature_map(before, grid));
            const auto hb = hash_image(params, compute_feature_map(after, grid));
            const auto decision = detect_global(ha.global_code, hb.global_code, a.threshold);
            const auto pred = threshold_heatmap(
                change_heatmap(ha.patch_codes, hb.patch_codes, grid, before.height, before.width), a.pixel_threshold);
            const double f = f1(pred, gt);
            const double j = iou(pred, gt);
            out << t0.stem().string() << ',' << (decision.changed ? 1 : 0) << ',' << decision.distance << ',' << f
                << ',' << j << '\n';
            sum_f1 += f;
            sum_iou += j;
            ++rows;
        }
        if (rows == 0) {
            throw Error(ErrorCode::invalid_input, "no pairs under " + (root / "t0").string());
        }
        out << "mean,,," << sum_f1 / static_cast<double>(rows) << ',' << sum_iou / static_cast<double>(rows) << '\n';
    } else {
        out << "id,f1,iou\n";
        for (const auto& p : list_files(a.pred, ".png")) {
            const auto pred = read_mask_png(p);
            const auto gt = read_mask_png(fs::path(a.gt) / p.filename());
            const double f = f1(pred, gt);
            const double j = iou(pred, gt);
            out << p.stem().string() << ',' << f << ',' << j << '\n';
            sum_f1 += f;
            sum_iou += j;
            ++rows;
        }
        if (rows == 0) {
            throw Error(ErrorCode::invalid_input, "no predicted masks in " + a.pred);
        }
        out << "mean," << sum_f1 / static_cast<double>(rows) << ',' << sum_iou / static_cast<double>(rows) << '\n';
    }
    write_manifest(cmd, manifest_path(a.common, a.out));
    std::cout << "pairs=" << rows << " mean_f1=" << sum_f1 / static_cast<double>(rows)
              << " mean_iou=" << sum_iou / static_cast<double>(rows) << '\n';
    return exit_ok;
}

struct EvalRetrievalArgs {
    Common common;
    std::string rankings;
    std::string relevance;
    std::string out;
};

int run_eval_retrieval(const EvalRetrievalArgs& a, const CLI::App& cmd)
{
    const auto lists = read_rankings_csv(a.rankings);
    const auto judgments = read_relevance_csv(a.relevance);
    std::vector<QueryEvaluation> queries;
    for (const auto& list : lists) {
        auto it = judgments.find(list.query_id);
        queries.push_back({list, it == judgments.end() ? std::set<std::string>{} : it->second});
    }
    const double map = mean_average_precision(queries);

    std::ofstream out(a.out);
    if (!out) {
        throw Error(ErrorCode::io, "cannot write " + a.out);
    }
    out << std::setprecision(17) << "query_id,ap\n";
    for (const auto& q : queries) {
        if (!q.relevant.empty()) {
            out << q.ranked.query_id << ',' << average_precision(q.ranked, q.relevant) << '\n';
        }
    }
    out << "mAP," << map << '\n';
    write_manifest(cmd, manifest_path(a.common, a.out));
    std::cout << "mAP=" << map << '\n';
    return exit_ok;
}

struct SynthChangeArgs {
    Common common;
    std::string out;
    std::size_t count = 20;
    std::string size = "128x128";
    std::string grid = "16x16";
    std::size_t min_cells = 3;
    double nuisance = 0.0;
    std::string fill = "random";
    std::uint64_t seed = 0;
};

int run_synth_change(const SynthChangeArgs& a, const CLI::App& cmd)
{
    const auto [h, w] = parse_dims(a.size, "size");
    const GridShape grid = parse_grid(a.grid);
    check_unit(a.nuisance, "--nuisance");
    if (a.fill != "random" && a.fill != "solid" && a.fill != "texture") {
        throw ConfigError("--fill must be random, solid or texture");
    }
    if (grid.rows < a.min_cells || grid.cols < a.min_cells || grid.rows > h || grid.cols > w) {
        throw ConfigError("grid does not fit the image or the minimum rectangle");
    }
    const fs::path root(a.out);
    for (const char* sub : {"t0", "t1", "mask"}) {
        fs::create_directories(root / sub);
    }
    std::ofstream csv(root / "pairs.csv");
    if (!csv) {
        throw Error(ErrorCode::io, "cannot write pairs.csv");
    }
    csv << "pair_id,row,col,height,width,fill,seed\n";
    for (std::size_t i = 0; i < a.count; ++i) {
        auto spec = random_change_spec(h, w, grid, a.seed + i, a.min_cells);
        spec.nuisance = a.nuisance;
        if (a.fill == "solid") {
            spec.rects.front().fill = FillStyle::solid_recolor;
        } else if (a.fill == "texture") {
            spec.rects.front().fill = FillStyle::texture_swap;
        }
        const auto pair = gen_pair(spec);
        std::ostringstream id;
        id << "pair_" << std::setw(3) << std::setfill('0') << i;
        const auto name = id.str() + ".png";
        write_png(root / "t0" / name, pair.before);
        write_png(root / "t1" / name, pair.after);
        write_mask_png(root / "mask" / name, pair.mask);
        const auto& r = spec.rects.front();
        csv << id.str() << ',' << r.row << ',' << r.col << ',' << r.height << ',' << r.width << ','
            << (r.fill == FillStyle::solid_recolor ? "solid" : "texture") << ',' << spec.seed << '\n';
    }
    write_manifest(cmd, manifest_path(a.common, root / "pairs.csv"));
    return exit_ok;
}

struct SynthClusterArgs {
    Common common;
    std::string out;
    std::size_t clusters = 4;
    std::size_t items = 8;
    double separation = 1.0;
    double jitter = 0.1;
    std::string size = "64x64";
    std::uint64_t seed = 0;
};

int run_synth_clusters(const SynthClusterArgs& a, const CLI::App& cmd)
{
    const auto [h, w] = parse_dims(a.size, "size");
    check_unit(a.separation, "--separation");
    check_unit(a.jitter, "--jitter");
    if (a.clusters == 0 || a.items == 0) {
        throw ConfigError("--clusters and --items must be positive");
    }
    SynthClusterSpec spec;
    spec.clusters = a.clusters;
    spec.items_per_cluster = a.items;
    spec.separation = a.separation;
    spec.jitter = a.jitter;
    spec.height = h;
    spec.width = w;
    spec.seed = a.seed;
    const auto items = gen_clusters(spec);

    const fs::path root(a.out);
    fs::create_directories(root / "images");
    std::ofstream labels(root / "labels.csv");
    std::ofstream relevance(root / "relevance.csv");
    if (!labels || !relevance) {
        throw Error(ErrorCode::io, "cannot write cluster CSVs");
    }
    labels << "image_id,label\n";
    relevance << "query_id,relevant_id\n";
    std::vector<std::string> ids;
    for (std::size_t i = 0; i < items.size(); ++i) {
        std::ostringstream id;
        id << 'c' << std::setw(2) << std::setfill('0') << items[i].label << "_i" << std::setw(3) << i;
        ids.push_back(id.str());
        write_png(root / "images" / (id.str() + ".png"), items[i].image);
        labels << id.str() << ',' << items[i].label << '\n';
    }
    for (std::size_t q = 0; q < items.size(); ++q) {
        for (std::size_t i = 0; i < items.size(); ++i) {
            if (i != q && items[i].label == items[q].label) {
                relevance << ids[q] << ',' << ids[i] << '\n';
            }
        }
    }
    write_manifest(cmd, manifest_path(a.common, root / "labels.csv"));
    return exit_ok;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Hash-based scene change detection and retrieval"};
    app.option_defaults()->always_capture_default();
    app.require_subcommand(1);

    TrainArgs train_args;
    auto* train_cmd = app.add_subcommand("train", "train the hash head on a directory of images");
    add_manifest(train_cmd, train_args.common);
    train_cmd->add_option("--images", train_args.images, "directory of PNG images");
    train_cmd->add_option("--features", train_args.features, "directory of .hsfm feature maps");
    train_cmd->add_option("--out", train_args.out, "output parameter file")->required();
    train_cmd->add_option("--loss-csv", train_args.loss_csv, "per-epoch mean loss");
    train_cmd->add_option("--hash-bits", train_args.bits, "code length l");
    train_cmd->add_option("--grid", train_args.grid, "patch grid, RxC");
    train_cmd->add_option("--tau", train_args.tau, "contrastive temperature");
    train_cmd->add_option("--epochs", train_args.epochs);
    train_cmd->add_option("--batch-size", train_args.batch_size);
    train_cmd->add_option("--lr", train_args.lr, "Adam learning rate");
    train_cmd->add_option("--seed", train_args.seed);
    train_cmd->add_option("--augment", train_args.augment,
                          "comma list of rotate,crop,color-jitter,noise,blur,salt-and-pepper,gray or none");

    HashArgs hash_args;
    auto* hash_cmd = app.add_subcommand("hash", "hash one image into a store or a record file");
    add_manifest(hash_cmd, hash_args.common);
    hash_cmd->add_option("--params", hash_args.params, "parameter file")->required();
    hash_cmd->add_option("--image", hash_args.image, "PNG image");
    hash_cmd->add_option("--features", hash_args.features, ".hsfm feature map (grid from file)");
    hash_cmd->add_option("--grid", hash_args.grid, "patch grid, RxC");
    hash_cmd->add_option("--store", hash_args.store, "store file, created if missing");
    hash_cmd->add_option("--out", hash_args.out, "standalone record file");
    hash_cmd->add_option("--location", hash_args.location);
    hash_cmd->add_option("--timestamp", hash_args.timestamp, "epoch seconds");

    DetectArgs detect_args;
    auto* detect_cmd = app.add_subcommand("detect", "compare two observations and localize change");
    add_manifest(detect_cmd, detect_args.common);
    detect_cmd->add_option("--record-a", detect_args.record_a, "earlier record file");
    detect_cmd->add_option("--record-b", detect_args.record_b, "later record file");
    detect_cmd->add_option("--store", detect_args.store);
    detect_cmd->add_option("--location", detect_args.location);
    detect_cmd->add_option("--timestamp-a", detect_args.timestamp_a, "stored observation (default: latest)");
    detect_cmd->add_option("--timestamp-b", detect_args.timestamp_b, "second stored observation");
    detect_cmd->add_option("--image", detect_args.image, "new PNG observation");
    detect_cmd->add_option("--params", detect_args.params, "parameter file for --image");
    detect_cmd->add_option("--size", detect_args.size, "heatmap size HxW when no image is given");
    detect_cmd->add_option("--threshold", detect_args.threshold, "global normalized-Hamming threshold");
    detect_cmd->add_option("--pixel-threshold", detect_args.pixel_threshold, "heatmap threshold");
    detect_cmd->add_option("--heatmap", detect_args.heatmap, "output heatmap PNG");
    detect_cmd->add_option("--mask", detect_args.mask, "output mask PNG");
    detect_cmd->add_option("--csv", detect_args.csv, "output metrics CSV");
    detect_cmd->add_option("--gt-mask", detect_args.gt_mask, "ground-truth mask PNG");

    RetrieveArgs retrieve_args;
    auto* retrieve_cmd = app.add_subcommand("retrieve", "rank stored codes by Hamming distance");
    add_manifest(retrieve_cmd, retrieve_args.common);
    retrieve_cmd->add_option("--store", retrieve_args.store, "store of global codes");
    retrieve_cmd->add_option("--codes", retrieve_args.codes, "CSV of id,code");
    retrieve_cmd->add_option("--query-image", retrieve_args.query_image);
    retrieve_cmd->add_option("--query-features", retrieve_args.query_features);
    retrieve_cmd->add_option("--query-record", retrieve_args.query_record);
    retrieve_cmd->add_option("--query-code", retrieve_args.query_code, "code as a 0/1 string");
    retrieve_cmd->add_option("--params", retrieve_args.params);
    retrieve_cmd->add_option("--grid", retrieve_args.grid, "patch grid for an image query");
    retrieve_cmd->add_option("--query-id", retrieve_args.query_id);
    retrieve_cmd->add_option("--k", retrieve_args.k, "keep the top k");
    retrieve_cmd->add_option("--out", retrieve_args.out, "rankings CSV (stdout if absent)");

    auto* eval_cmd = app.add_subcommand("eval", "evaluate predictions");
    eval_cmd->require_subcommand(1);
    EvalChangeArgs eval_change_args;
    auto* eval_change_cmd = eval_cmd->add_subcommand("change", "F1 and IoU of change masks");
    add_manifest(eval_change_cmd, eval_change_args.common);
    eval_change_cmd->add_option("--pred", eval_change_args.pred, "directory of predicted masks");
    eval_change_cmd->add_option("--gt", eval_change_args.gt, "directory of ground-truth masks");
    eval_change_cmd->add_option("--dataset", eval_change_args.dataset, "root with t0/, t1/, mask/");
    eval_change_cmd->add_option("--params", eval_change_args.params);
    eval_change_cmd->add_option("--grid", eval_change_args.grid);
    eval_change_cmd->add_option("--threshold", eval_change_args.threshold);
    eval_change_cmd->add_option("--pixel-threshold", eval_change_args.pixel_threshold);
    eval_change_cmd->add_option("--out", eval_change_args.out, "metrics CSV")->required();
    EvalRetrievalArgs eval_retrieval_args;
    auto* eval_retrieval_cmd = eval_cmd->add_subcommand("retrieval", "mAP of ranking CSVs");
    add_manifest(eval_retrieval_cmd, eval_retrieval_args.common);
    eval_retrieval_cmd->add_option("--rankings", eval_retrieval_args.rankings)->required();
    eval_retrieval_cmd->add_option("--relevance", eval_retrieval_args.relevance)->required();
    eval_retrieval_cmd->add_option("--out", eval_retrieval_args.out, "metrics CSV")->required();

    auto* synth_cmd = app.add_subcommand("synth", "generate synthetic data");
    synth_cmd->require_subcommand(1);
    SynthChangeArgs synth_change_args;
    auto* synth_change_cmd = synth_cmd->add_subcommand("change", "image pairs with change masks");
    add_manifest(synth_change_cmd, synth_change_args.common);
    synth_change_cmd->add_option("--out", synth_change_args.out, "output dataset root")->required();
    synth_change_cmd->add_option("--count", synth_change_args.count);
    synth_change_cmd->add_option("--size", synth_change_args.size, "HxW");
    synth_change_cmd->add_option("--grid", synth_change_args.grid, "grid the rectangles are sized against");
    synth_change_cmd->add_option("--min-cells", synth_change_args.min_cells);
    synth_change_cmd->add_option("--nuisance", synth_change_args.nuisance);
    synth_change_cmd->add_option("--fill", synth_change_args.fill, "random, solid or texture");
    synth_change_cmd->add_option("--seed", synth_change_args.seed);
    SynthClusterArgs synth_cluster_args;
    auto* synth_cluster_cmd = synth_cmd->add_subcommand("clusters", "clustered image families");
    add_manifest(synth_cluster_cmd, synth_cluster_args.common);
    synth_cluster_cmd->add_option("--out", synth_cluster_args.out, "output root")->required();
    synth_cluster_cmd->add_option("--clusters", synth_cluster_args.clusters);
    synth_cluster_cmd->add_option("--items", synth_cluster_args.items);
    synth_cluster_cmd->add_option("--separation", synth_cluster_args.separation);
    synth_cluster_cmd->add_option("--jitter", synth_cluster_args.jitter);
    synth_cluster_cmd->add_option("--size", synth_cluster_args.size, "HxW");
    synth_cluster_cmd->add_option("--seed", synth_cluster_args.seed);

    try {
        auto args = expand_config(std::vector<std::string>(argv + 1, argv + argc));
        std::reverse(args.begin(), args.end());
        app.parse(args);

        if (train_cmd->parsed()) {
            return run_train(train_args, *train_cmd);
        }
        if (hash_cmd->parsed()) {
            return run_hash(hash_args, *hash_cmd);
        }
        if (detect_cmd->parsed()) {
            return run_detect(detect_args, *detect_cmd);
        }
        if (retrieve_cmd->parsed()) {
            return run_retrieve(retrieve_args, *retrieve_cmd);
        }
        if (eval_change_cmd->parsed()) {
            return run_eval_change(eval_change_args, *eval_change_cmd);
        }
        if (eval_retrieval_cmd->parsed()) {
            return run_eval_retrieval(eval_retrieval_args, *eval_retrieval_cmd);
        }
        if (synth_change_cmd->parsed()) {
            return run_synth_change(synth_change_args, *synth_change_cmd);
        }
        if (synth_cluster_cmd->parsed()) {
            return run_synth_clusters(synth_cluster_args, *synth_cluster_cmd);
        }
        return exit_config;
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return exit_config;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return exit_config;
    } catch (const Error& e) {
        std::cerr << e.what() << '\n';
        return exit_code_for(e);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_data;
    }
}
