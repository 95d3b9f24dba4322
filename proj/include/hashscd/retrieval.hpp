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
#include "hashscd/hash_space.hpp"

#include <algorithm>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <vector>

namespace hashscd {

struct Candidate {
    std::string id;
    BitCode code;
};

struct RankedEntry {
    std::string id;
    std::size_t distance = 0;

    friend bool operator==(const RankedEntry&, const RankedEntry&) = default;
};

/// Candidates by ascending Hamming distance, ties by ascending id.
struct RankedList {
    std::string query_id;
    std::vector<RankedEntry> entries;
};

/// Linear scan; keeps the top k when `k` is given.
inline RankedList rank(const BitCode& query, std::span<const Candidate> database,
                       std::optional<std::size_t> k = std::nullopt, std::string query_id = {})
{
    RankedList out{std::move(query_id), {}};
    out.entries.reserve(database.size());
    for (const auto& c : database) {
        out.entries.push_back({c.id, hamming(query, c.code)});
    }
    const auto before = [](const RankedEntry& a, const RankedEntry& b) {
        return a.distance != b.distance ? a.distance < b.distance : a.id < b.id;
    };
    if (k && *k < out.entries.size()) {
        std::partial_sort(out.entries.begin(), out.entries.begin() + static_cast<std::ptrdiff_t>(*k),
                          out.entries.end(), before);
        out.entries.resize(*k);
    } else {
        std::sort(out.entries.begin(), out.entries.end(), before);
    }
    return out;
}

/// Full-ranking AP: mean over relevant items of precision at their rank.
/// Relevant items absent from a truncated list contribute zero.
inline double average_precision(const RankedList& ranked, const std::set<std::string>& relevant)
{
    if (relevant.empty()) {
        throw Error(ErrorCode::undefined_metric, "average precision needs a non-empty relevant set");
    }
    std::size_t hits = 0;
    double sum = 0.0;
    for (std::size_t r = 0; r < ranked.entries.size(); ++r) {
        if (relevant.contains(ranked.entries[r].id)) {
            ++hits;
            sum += static_cast<double>(hits) / static_cast<double>(r + 1);
        }
    }
    return sum / static_cast<double>(relevant.size());
}

struct QueryEvaluation {
    RankedList ranked;
    std::set<std::string> relevant;
};

/// Unweighted mean of per-query AP; queries without relevant items are skipped.
inline double mean_average_precision(std::span<const QueryEvaluation> queries)
{
    double sum = 0.0;
    std::size_t evaluated = 0;
    for (const auto& q : queries) {
        if (q.relevant.empty()) {
            continue;
        }
        sum += average_precision(q.ranked, q.relevant);
        ++evaluated;
    }
    if (evaluated == 0) {
        throw Error(ErrorCode::undefined_metric, "no evaluable queries");
    }
    return sum / static_cast<double>(evaluated);
}

// ---------------------------------------------------------------------------
// CSV surfaces
// ---------------------------------------------------------------------------

using RelevanceJudgments = std::map<std::string, std::set<std::string>>;

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line)
{
    std::vector<std::string> fields;
    std::string field;
    std::istringstream in(line);
    while (std::getline(in, field, ',')) {
        while (!field.empty() && (field.back() == '\r' || field.back() == ' ')) {
            field.pop_back();
        }
        fields.push_back(field);
    }
    return fields;
}

} // namespace detail

/// Reads "query_id,relevant_id" rows; a header row starting with
/// "query_id" is skipped.
inline RelevanceJudgments read_relevance_csv(const std::filesystem::path& path)
{
    std::ifstream in(path);
    detail::require(static_cast<bool>(in), ErrorCode::io, "cannot open relevance CSV");
    RelevanceJudgments out;
    std::string line;
    while (std::getline(in, line)) {
        auto f = detail::split_csv_line(line);
        if (f.empty() || (f.size() == 1 && f[0].empty()) || f[0] == "query_id") {
            continue;
        }
        detail::require(f.size() == 2, ErrorCode::invalid_input, "relevance rows need two fields");
        out[f[0]].insert(f[1]);
    }
    return out;
}

/// Rows "query_id,rank,candidate_id,distance", rank starting at 1.
inline void write_rankings_csv(std::ostream& out, std::span<const RankedList> lists)
{
    out << "query_id,rank,candidate_id,distance\n";
    for (const auto& list : lists) {
        for (std::size_t r = 0; r < list.entries.size(); ++r) {
            out << list.query_id << ',' << r + 1 << ',' << list.entries[r].id << ',' << list.entries[r].distance
                << '\n';
        }
    }
}

inline std::vector<RankedList> read_rankings_csv(const std::filesystem::path& path)
{
    std::ifstream in(path);
    detail::require(static_cast<bool>(in), ErrorCode::io, "cannot open rankings CSV");
    std::map<std::string, std::vector<std::pair<std::size_t, RankedEntry>>> rows;
    std::vector<std::string> query_order;
    std::string line;
    while (std::getline(in, line)) {
        auto f = detail::split_csv_line(line);
        if (f.empty() || (f.size() == 1 && f[0].empty()) || f[0] == "query_id") {
            continue;
        }
        detail::require(f.size() == 4, ErrorCode::invalid_input, "ranking rows need four fields");
        if (!rows.contains(f[0])) {
            query_order.push_back(f[0]);
        }
        try {
            rows[f[0]].push_back({std::stoul(f[1]), {f[2], std::stoul(f[3])}});
        } catch (const std::exception&) {
            throw Error(ErrorCode::invalid_input, "malformed ranking row: " + line);
        }
    }
    std::vector<RankedList> out;
    for (const auto& q : query_order) {
        auto& entries = rows[q];
        std::stable_sort(entries.begin(), entries.end(),
                         [](const auto& a, const auto& b) { return a.first < b.first; });
        RankedList list{q, {}};
        for (auto& e : entries) {
            list.entries.push_back(std::move(e.second));
        }
        out.push_back(std::move(list));
    }
    return out;
}

} // namespace hashscd
