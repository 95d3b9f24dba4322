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
#include "hashscd/model.hpp"

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <limits>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace hashscd {

/// One stored observation of a location.
struct HashRecord {
    std::string location;
    std::int64_t timestamp = 0; ///< UTC epoch seconds
    GridShape grid;
    BitCode global_code;
    std::vector<BitCode> patch_codes; ///< row-major, grid.cells() entries

    friend bool operator==(const HashRecord&, const HashRecord&) = default;
};

inline HashRecord make_record(std::string location, std::int64_t timestamp, const ImageHashes& hashes)
{
    return {std::move(location), timestamp, hashes.grid, hashes.global_code, hashes.patch_codes};
}

inline ImageHashes record_hashes(const HashRecord& rec)
{
    return {rec.grid, rec.patch_codes, rec.global_code};
}

struct StoreHeader {
    std::uint16_t version = 1;
    std::uint16_t bits = 0;
    std::uint16_t rows = 0;
    std::uint16_t cols = 0;
    std::uint64_t count = 0;

    static constexpr std::size_t encoded_size = 4 + 2 + 2 + 2 + 2 + 8;

    [[nodiscard]] std::size_t code_bytes() const noexcept { return BitCode::byte_count(bits); }
    [[nodiscard]] std::size_t cells() const noexcept { return std::size_t{rows} * cols; }
    [[nodiscard]] GridShape grid() const noexcept { return {rows, cols}; }

    /// Bytes of code payload per record: ceil(l / 8) * (P + 1).
    [[nodiscard]] std::size_t payload_bytes() const noexcept { return code_bytes() * (cells() + 1); }

    /// Full record size for a location id of `location_bytes` bytes:
    /// u8 length + location + i64 timestamp + code payload.
    [[nodiscard]] std::size_t record_size(std::size_t location_bytes) const noexcept
    {
        return 1 + location_bytes + 8 + payload_bytes();
    }
};

/// Append-only, bit-exact store of HashRecords for a single (l, H, W).
///
/// Layout, little-endian: "HSDB", version u16, l u16, H u16, W u16, count
/// u64; then records of location length u8, location bytes, timestamp i64,
/// global code, P patch codes (each ceil(l / 8) bytes, MSB-first).
///
/// On open the record area is scanned and the key index rebuilt; a trailing
/// partial record (an interrupted append) is dropped and overwritten by the
/// next put. Calls on one handle are serialized internally.
class Store {
public:
    static constexpr std::uint16_t format_version = 1;

    static Store create(const std::filesystem::path& path, std::size_t bits, GridShape grid)
    {
        detail::require(bits >= 1 && bits <= 0xFFFF, ErrorCode::invalid_input, "hash length must fit in u16");
        detail::require(grid.rows >= 1 && grid.cols >= 1 && grid.rows <= 0xFFFF && grid.cols <= 0xFFFF,
                        ErrorCode::invalid_input, "grid dims must fit in u16");
        Store s;
        s.path_ = path;
        s.header_.version = format_version;
        s.header_.bits = static_cast<std::uint16_t>(bits);
        s.header_.rows = static_cast<std::uint16_t>(grid.rows);
        s.header_.cols = static_cast<std::uint16_t>(grid.cols);
        {
            std::ofstream out(path, std::ios::binary | std::ios::trunc);
            detail::require(static_cast<bool>(out), ErrorCode::io, "cannot create store file");
        }
        s.end_offset_ = StoreHeader::encoded_size;
        s.open_stream();
        s.write_header();
        return s;
    }

    static Store open(const std::filesystem::path& path)
    {
        Store s;
        s.path_ = path;
        s.load();
        // Drop a trailing partial record left by an interrupted append.
        if (std::filesystem::file_size(path) != s.end_offset_) {
            std::filesystem::resize_file(path, s.end_offset_);
        }
        s.open_stream();
        return s;
    }

    Store(Store&& other) noexcept { *this = std::move(other); }
    Store& operator=(Store&& other) noexcept
    {
        path_ = std::move(other.path_);
        header_ = other.header_;
        stream_ = std::move(other.stream_);
        index_ = std::move(other.index_);
        order_ = std::move(other.order_);
        end_offset_ = other.end_offset_;
        return *this;
    }

    [[nodiscard]] const StoreHeader& header() const noexcept { return header_; }
    [[nodiscard]] std::size_t bits() const noexcept { return header_.bits; }
    [[nodiscard]] GridShape grid() const noexcept { return header_.grid(); }
    [[nodiscard]] std::size_t size() const noexcept { return order_.size(); }
    [[nodiscard]] const std::filesystem::path& path() const noexcept { return path_; }

    [[nodiscard]] bool contains(const std::string& location, std::int64_t timestamp) const
    {
        return index_.contains({location, timestamp});
    }

    /// Appends and flushes one record; the header count is updated after the
    /// record bytes are written.
    void put(const HashRecord& rec)
    {
        std::lock_guard lock(mutex_);
        validate(rec);
        if (index_.contains({rec.location, rec.timestamp})) {
            throw Error(ErrorCode::conflict,
                        "record exists for " + rec.location + " @ " + std::to_string(rec.timestamp));
        }
        const auto bytes = encode(rec);
        stream_.seekp(static_cast<std::streamoff>(end_offset_));
        stream_.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
        stream_.flush();
        detail::require(static_cast<bool>(stream_), ErrorCode::io, "store append failed");
        index_.emplace(std::make_pair(rec.location, rec.timestamp), end_offset_);
        order_.push_back(end_offset_);
        end_offset_ += bytes.size();
        header_.count = order_.size();
        write_header();
    }

    [[nodiscard]] HashRecord get(const std::string& location, std::int64_t timestamp)
    {
        std::lock_guard lock(mutex_);
        auto it = index_.find({location, timestamp});
        if (it == index_.end()) {
            throw Error(ErrorCode::not_found, "no record for " + location + " @ " + std::to_string(timestamp));
        }
        return read_at(it->second);
    }

    /// Record with the largest timestamp for `location`.
    [[nodiscard]] HashRecord latest(const std::string& location)
    {
        std::lock_guard lock(mutex_);
        auto it = index_.upper_bound({location, std::numeric_limits<std::int64_t>::max()});
        if (it == index_.begin() || std::prev(it)->first.first != location) {
            throw Error(ErrorCode::not_found, "no record for location " + location);
        }
        return read_at(std::prev(it)->second);
    }

    /// All records in insertion order.
    [[nodiscard]] std::vector<HashRecord> scan()
    {
        std::lock_guard lock(mutex_);
        std::vector<HashRecord> out;
        out.reserve(order_.size());
        for (auto off : order_) {
            out.push_back(read_at(off));
        }
        return out;
    }

private:
    Store() = default;

    void open_stream()
    {
        stream_.open(path_, std::ios::binary | std::ios::in | std::ios::out);
        detail::require(stream_.is_open(), ErrorCode::io, "cannot open store file");
    }

    void write_header()
    {
        detail::ByteWriter w;
        w.put_magic("HSDB");
        w.put<std::uint16_t>(header_.version);
        w.put<std::uint16_t>(header_.bits);
        w.put<std::uint16_t>(header_.rows);
        w.put<std::uint16_t>(header_.cols);
        w.put<std::uint64_t>(header_.count);
        stream_.seekp(0);
        stream_.write(reinterpret_cast<const char*>(w.bytes().data()), static_cast<std::streamsize>(w.bytes().size()));
        stream_.flush();
        detail::require(static_cast<bool>(stream_), ErrorCode::io, "store header write failed");
    }

    void validate(const HashRecord& rec) const
    {
        detail::require(rec.location.size() <= 255, ErrorCode::invalid_input, "location id longer than 255 bytes");
        if (rec.grid != header_.grid() || rec.patch_codes.size() != header_.cells() ||
            rec.global_code.size() != header_.bits) {
            throw Error(ErrorCode::dimension_mismatch, "record geometry does not match the store");
        }
        for (const auto& c : rec.patch_codes) {
            if (c.size() != header_.bits) {
                throw Error(ErrorCode::dimension_mismatch, "patch code length does not match the store");
            }
        }
    }

    [[nodiscard]] std::vector<std::uint8_t> encode(const HashRecord& rec) const
    {
        detail::ByteWriter w;
        w.put<std::uint8_t>(static_cast<std::uint8_t>(rec.location.size()));
        w.put_bytes({reinterpret_cast<const std::uint8_t*>(rec.location.data()), rec.location.size()});
        w.put<std::int64_t>(rec.timestamp);
        w.put_bytes(rec.global_code.bytes());
        for (const auto& c : rec.patch_codes) {
            w.put_bytes(c.bytes());
        }
        return w.bytes();
    }

    HashRecord decode(detail::ByteReader& r) const
    {
        HashRecord rec;
        const auto len = r.get<std::uint8_t>();
        const auto loc = r.get_bytes(len);
        rec.location.assign(reinterpret_cast<const char*>(loc.data()), loc.size());
        rec.timestamp = r.get<std::int64_t>();
        rec.grid = header_.grid();
        rec.global_code = BitCode::from_bytes(header_.bits, r.get_bytes(header_.code_bytes()));
        rec.patch_codes.reserve(header_.cells());
        for (std::size_t i = 0; i < header_.cells(); ++i) {
            rec.patch_codes.push_back(BitCode::from_bytes(header_.bits, r.get_bytes(header_.code_bytes())));
        }
        return rec;
    }

    HashRecord read_at(std::uint64_t offset)
    {
        std::vector<std::uint8_t> buf(1);
        stream_.seekg(static_cast<std::streamoff>(offset));
        stream_.read(reinterpret_cast<char*>(buf.data()), 1);
        buf.resize(header_.record_size(buf[0]));
        stream_.read(reinterpret_cast<char*>(buf.data() + 1), static_cast<std::streamsize>(buf.size() - 1));
        detail::require(static_cast<bool>(stream_), ErrorCode::io, "store read failed");
        detail::ByteReader r(buf);
        return decode(r);
    }

    void load()
    {
        const auto bytes = detail::read_file(path_);
        detail::ByteReader r(bytes);
        r.expect_magic("HSDB");
        header_.version = r.get<std::uint16_t>();
        if (header_.version != format_version) {
            throw Error(ErrorCode::unsupported_version, "store version " + std::to_string(header_.version));
        }
        header_.bits = r.get<std::uint16_t>();
        header_.rows = r.get<std::uint16_t>();
        header_.cols = r.get<std::uint16_t>();
        header_.count = r.get<std::uint64_t>();
        detail::require(header_.bits >= 1 && header_.rows >= 1 && header_.cols >= 1, ErrorCode::invalid_input,
                        "store header has zero dims");

        // Scan complete records; the header count is advisory after a crash.
        while (r.remaining() > 0) {
            const std::size_t offset = r.position();
            const std::size_t len = bytes[offset];
            if (r.remaining() < header_.record_size(len)) {
                break;
            }
            auto rec = decode(r);
            if (!index_.emplace(std::make_pair(rec.location, rec.timestamp), offset).second) {
                throw Error(ErrorCode::conflict, "duplicate key in store file");
            }
            order_.push_back(offset);
        }
        end_offset_ = StoreHeader::encoded_size;
        if (!order_.empty()) {
            end_offset_ = order_.back() + header_.record_size(bytes[order_.back()]);
        }
        header_.count = order_.size();
    }

    std::filesystem::path path_;
    StoreHeader header_;
    std::fstream stream_;
    std::map<std::pair<std::string, std::int64_t>, std::uint64_t> index_;
    std::vector<std::uint64_t> order_;
    std::uint64_t end_offset_ = 0;
    std::mutex mutex_;
};

/// Writes a single record as a one-entry store file.
inline void write_record_file(const std::filesystem::path& path, const HashRecord& rec)
{
    auto store = Store::create(path, rec.global_code.size(), rec.grid);
    store.put(rec);
}

/// Reads the single (latest-inserted) record of a standalone record file.
inline HashRecord read_record_file(const std::filesystem::path& path)
{
    auto store = Store::open(path);
    auto all = store.scan();
    detail::require(!all.empty(), ErrorCode::not_found, "record file is empty");
    return all.back();
}

} // namespace hashscd
