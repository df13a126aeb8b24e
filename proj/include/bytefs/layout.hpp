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

// On-device layouts: superblock, 128B inodes (lower/upper 64B regions),
// 16B extent leaves, 64B-padded dentries, journal lines.

#include <cstdint>
#include <cstring>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "bytefs/config.hpp"

namespace bytefs {

using Ino = std::uint32_t;

inline constexpr std::uint32_t kSuperMagic = 0x53465942;  // "BYFS"
inline constexpr std::uint32_t kLayoutVersion = 1;
inline constexpr Ino kRootIno = 2;
inline constexpr std::uint32_t kInodeSize = 128;
inline constexpr std::uint32_t kInlineExtents = 3;
inline constexpr std::uint32_t kExtentSize = 16;
inline constexpr std::uint32_t kMaxNameLen = 256;
inline constexpr std::uint32_t kDentryHeader = 8;

enum class FileType : std::uint16_t { none = 0, file = 1, dir = 2 };

// Little-endian field access.
template <typename T>
T get_le(std::span<const std::byte> b, std::size_t off) {
    T v{};
    std::memcpy(&v, b.data() + off, sizeof(T));
    return v;
}
template <typename T>
void put_le(std::span<std::byte> b, std::size_t off, T v) {
    std::memcpy(b.data() + off, &v, sizeof(T));
}

struct Superblock {
    std::uint32_t magic = kSuperMagic;
    std::uint32_t version = kLayoutVersion;
    std::uint32_t block_size = 4096;
    std::uint64_t total_blocks = 0;
    std::uint32_t inode_count = 0;
    std::uint32_t inode_bitmap_start = 0;
    std::uint32_t inode_bitmap_blocks = 0;
    std::uint32_t block_bitmap_start = 0;
    std::uint32_t block_bitmap_blocks = 0;
    std::uint32_t inode_table_start = 0;
    std::uint32_t inode_table_blocks = 0;
    std::uint32_t journal_start = 0;
    std::uint32_t journal_blocks = 0;
    std::uint32_t data_start = 0;
    std::uint32_t mode_flags = 0;
    Ino root_ino = kRootIno;

    void encode(std::span<std::byte> block) const;
    static Superblock decode(std::span<const std::byte> block);
    bool operator==(const Superblock&) const = default;
};

struct MkfsParams {
    std::uint32_t inode_count = 0;     // 0: one inode per four blocks
    std::uint32_t journal_blocks = 0;  // 0: sized from the device
    std::uint32_t mode_flags = 0;
};

/// Computes the region layout for a device; throws invalid_argument when
/// the device cannot hold it.
Superblock plan_layout(std::uint64_t capacity_bytes, std::uint32_t block_size, const MkfsParams& p);

struct Extent {
    std::uint64_t file_block = 0;
    std::uint32_t lba = 0;
    std::uint32_t len = 0;

    bool operator==(const Extent&) const = default;
};

void encode_extent(std::span<std::byte> out, const Extent& e);
Extent decode_extent(std::span<const std::byte> in);

/// 128B inode image. Lower 64B: size, times, mode, links, flags.
/// Upper 64B: ino, type, extent count, inline leaves, extent block.
struct Inode {
    std::uint64_t size = 0;
    std::uint64_t mtime = 0;
    std::uint64_t atime = 0;
    std::uint64_t ctime = 0;
    std::uint32_t mode = 0;
    std::uint32_t links = 0;
    std::uint32_t flags = 0;

    Ino ino = 0;
    FileType type = FileType::none;
    std::uint16_t extent_count = 0;
    Extent inline_extents[kInlineExtents]{};
    std::uint32_t extent_block = 0;

    void encode(std::span<std::byte> out) const;
    static Inode decode(std::span<const std::byte> in);
};

struct Dentry {
    Ino ino = 0;
    FileType type = FileType::none;
    std::string name;

    /// Bytes on device: header + name rounded up to 64.
    std::uint32_t record_bytes() const { return record_bytes_for(name.size()); }
    static std::uint32_t record_bytes_for(std::size_t name_len) {
        return static_cast<std::uint32_t>((kDentryHeader + name_len + kCachelineSize - 1) / kCachelineSize *
                                          kCachelineSize);
    }
    void encode(std::span<std::byte> out) const;
};

/// One parsed record of a directory block.
struct DentrySlot {
    std::uint32_t line = 0;
    std::uint32_t lines = 1;
    Ino ino = 0;            // 0: deleted (or empty line when name is empty)
    FileType type = FileType::none;
    std::string name;
};

/// Walks a directory block. Malformed headers are reported as an error
/// string instead of throwing so fsck can collect them.
std::vector<DentrySlot> parse_dir_block(std::span<const std::byte> block, std::string* error = nullptr);

std::uint64_t name_hash(std::string_view name);

} // namespace bytefs
