/*
 *   Copyright 2026 The ByteFS Authors
 *
 *   Licensed under the Apache License, Version 2.0 (the "License");
 *   you may not use this file except in compliance with the License.
 *   You may obtain a copy of the License at
 *
 *       http://www.apache.org/licenses/LICENSE-2.0
 *
 *   Unless required by applicable law or agreed to in writing, software
 *   distributed under the License is distributed on an "AS IS" BASIS,
 *   WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 *   See the License for the specific language governing permissions and
 *   limitations under the License.
 */
#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <string_view>

namespace bytefs {

inline constexpr std::uint32_t kCachelineSize = 64;
inline constexpr std::uint64_t KiB = 1024;
inline constexpr std::uint64_t MiB = 1024 * KiB;
inline constexpr std::uint64_t GiB = 1024 * MiB;

/// Emulated memory-semantic SSD parameters. Defaults follow the reference
/// emulator setup: 32 GiB, 4 KiB pages, 8 channels, 40/60 us flash R/W,
/// 4.8/0.6 us cacheline R/W, a 256 MiB write log and a 2 MiB TxLog.
struct DeviceConfig {
    std::uint64_t capacity_bytes = 32 * GiB;
    std::uint32_t page_size = 4096;
    std::uint32_t channel_count = 8;
    std::uint64_t flash_read_latency_ns = 40'000;
    std::uint64_t flash_write_latency_ns = 60'000;
    std::uint64_t cacheline_read_latency_ns = 4'800;
    std::uint64_t cacheline_write_latency_ns = 600;
    std::uint64_t log_region_bytes = 256 * MiB;
    std::uint64_t txlog_bytes = 2 * MiB;
    std::uint64_t write_buffer_bytes = 16 * MiB;
    double clean_threshold = 0.85;
    // false: byte writes are applied to flash by read-modify-write (no log).
    bool log_enabled = true;

    std::uint64_t page_count() const { return capacity_bytes / page_size; }
    std::uint32_t lines_per_page() const { return page_size / kCachelineSize; }

    /// Throws Error(invalid_argument) when an invariant is violated.
    void validate() const;
};

/// Caller-supplied attribution for traffic accounting.
enum class Category : std::uint8_t {
    superblock,
    bitmap,
    inode,
    dentry,
    data_pointer,
    data,
    journal,
    untagged,
};

inline constexpr std::size_t kCategoryCount = 8;

std::string_view category_name(Category c) noexcept;

inline constexpr bool is_metadata(Category c) noexcept {
    return c == Category::superblock || c == Category::bitmap || c == Category::inode ||
           c == Category::dentry || c == Category::data_pointer;
}

struct CategoryBytes {
    std::array<std::uint64_t, kCategoryCount> by_category{};

    std::uint64_t& operator[](Category c) { return by_category[static_cast<std::size_t>(c)]; }
    std::uint64_t operator[](Category c) const { return by_category[static_cast<std::size_t>(c)]; }

    std::uint64_t total() const {
        std::uint64_t t = 0;
        for (auto v : by_category) t += v;
        return t;
    }
    std::uint64_t metadata() const {
        std::uint64_t t = 0;
        for (std::size_t i = 0; i < kCategoryCount; ++i)
            if (is_metadata(static_cast<Category>(i))) t += by_category[i];
        return t;
    }
    CategoryBytes operator-(const CategoryBytes& o) const {
        CategoryBytes r;
        for (std::size_t i = 0; i < kCategoryCount; ++i) r.by_category[i] = by_category[i] - o.by_category[i];
        return r;
    }
};

struct TrafficCounters {
    CategoryBytes host_to_ssd;
    CategoryBytes ssd_to_host;
    CategoryBytes flash_read;
    CategoryBytes flash_write;
    // Host-visible command counts.
    std::uint64_t byte_write_ops = 0;
    std::uint64_t byte_read_ops = 0;
    std::uint64_t block_write_ops = 0;
    std::uint64_t block_read_ops = 0;
    std::uint64_t commits = 0;
    std::uint64_t byte_write_bytes = 0; // host->SSD bytes moved over the byte interface

    TrafficCounters operator-(const TrafficCounters& o) const {
        TrafficCounters r;
        r.host_to_ssd = host_to_ssd - o.host_to_ssd;
        r.ssd_to_host = ssd_to_host - o.ssd_to_host;
        r.flash_read = flash_read - o.flash_read;
        r.flash_write = flash_write - o.flash_write;
        r.byte_write_ops = byte_write_ops - o.byte_write_ops;
        r.byte_read_ops = byte_read_ops - o.byte_read_ops;
        r.block_write_ops = block_write_ops - o.block_write_ops;
        r.block_read_ops = block_read_ops - o.block_read_ops;
        r.commits = commits - o.commits;
        r.byte_write_bytes = byte_write_bytes - o.byte_write_bytes;
        return r;
    }
};

} // namespace bytefs
