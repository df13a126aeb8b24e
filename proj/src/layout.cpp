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
#include "bytefs/layout.hpp"

#include <algorithm>

#include "bytefs/error.hpp"

namespace bytefs {

void Superblock::encode(std::span<std::byte> b) const {
    std::fill(b.begin(), b.end(), std::byte{0});
    put_le(b, 0, magic);
    put_le(b, 4, version);
    put_le(b, 8, block_size);
    put_le(b, 16, total_blocks);
    put_le(b, 24, inode_count);
    put_le(b, 28, inode_bitmap_start);
    put_le(b, 32, inode_bitmap_blocks);
    put_le(b, 36, block_bitmap_start);
    put_le(b, 40, block_bitmap_blocks);
    put_le(b, 44, inode_table_start);
    put_le(b, 48, inode_table_blocks);
    put_le(b, 52, journal_start);
    put_le(b, 56, journal_blocks);
    put_le(b, 60, data_start);
    put_le(b, 64, mode_flags);
    put_le(b, 68, root_ino);
}

Superblock Superblock::decode(std::span<const std::byte> b) {
    Superblock s;
    s.magic = get_le<std::uint32_t>(b, 0);
    s.version = get_le<std::uint32_t>(b, 4);
    s.block_size = get_le<std::uint32_t>(b, 8);
    s.total_blocks = get_le<std::uint64_t>(b, 16);
    s.inode_count = get_le<std::uint32_t>(b, 24);
    s.inode_bitmap_start = get_le<std::uint32_t>(b, 28);
    s.inode_bitmap_blocks = get_le<std::uint32_t>(b, 32);
    s.block_bitmap_start = get_le<std::uint32_t>(b, 36);
    s.block_bitmap_blocks = get_le<std::uint32_t>(b, 40);
    s.inode_table_start = get_le<std::uint32_t>(b, 44);
    s.inode_table_blocks = get_le<std::uint32_t>(b, 48);
    s.journal_start = get_le<std::uint32_t>(b, 52);
    s.journal_blocks = get_le<std::uint32_t>(b, 56);
    s.data_start = get_le<std::uint32_t>(b, 60);
    s.mode_flags = get_le<std::uint32_t>(b, 64);
    s.root_ino = get_le<std::uint32_t>(b, 68);
    return s;
}

Superblock plan_layout(std::uint64_t capacity_bytes, std::uint32_t block_size, const MkfsParams& p) {
    Superblock s;
    s.block_size = block_size;
    s.total_blocks = capacity_bytes / block_size;
    if (s.total_blocks > 0xffffffffull) fail(Errc::invalid_argument, "device too large for 32-bit block numbers");
    const std::uint64_t per_page = block_size / kInodeSize;
    const std::uint64_t bits_per_block = std::uint64_t{block_size} * 8;
    std::uint64_t inodes = p.inode_count ? p.inode_count : s.total_blocks / 4;
    inodes = std::max<std::uint64_t>(inodes, 512);
    inodes = (inodes + 511) / 512 * 512; // whole 64B bitmap groups
    s.inode_count = static_cast<std::uint32_t>(inodes);
    std::uint64_t journal = p.journal_blocks ? p.journal_blocks
                                             : std::clamp<std::uint64_t>(s.total_blocks / 64, 64, 1024);
    s.journal_start = 1;
    s.journal_blocks = static_cast<std::uint32_t>(journal);
    s.inode_bitmap_start = s.journal_start + s.journal_blocks;
    s.inode_bitmap_blocks = static_cast<std::uint32_t>((inodes + bits_per_block - 1) / bits_per_block);
    s.block_bitmap_start = s.inode_bitmap_start + s.inode_bitmap_blocks;
    s.block_bitmap_blocks = static_cast<std::uint32_t>((s.total_blocks + bits_per_block - 1) / bits_per_block);
    s.inode_table_start = s.block_bitmap_start + s.block_bitmap_blocks;
    s.inode_table_blocks = static_cast<std::uint32_t>((inodes + per_page - 1) / per_page);
    s.data_start = s.inode_table_start + s.inode_table_blocks;
    s.mode_flags = p.mode_flags;
    if (s.data_start + 16 > s.total_blocks) fail(Errc::invalid_argument, "device too small for the layout");
    return s;
}

void encode_extent(std::span<std::byte> out, const Extent& e) {
    put_le(out, 0, e.file_block);
    put_le(out, 8, e.lba);
    put_le(out, 12, e.len);
}

Extent decode_extent(std::span<const std::byte> in) {
    return Extent{get_le<std::uint64_t>(in, 0), get_le<std::uint32_t>(in, 8), get_le<std::uint32_t>(in, 12)};
}

void Inode::encode(std::span<std::byte> b) const {
    std::fill(b.begin(), b.begin() + kInodeSize, std::byte{0});
    put_le(b, 0, size);
    put_le(b, 8, mtime);
    put_le(b, 16, atime);
    put_le(b, 24, ctime);
    put_le(b, 32, mode);
    put_le(b, 36, links);
    put_le(b, 40, flags);
    put_le(b, 64, ino);
    put_le(b, 68, static_cast<std::uint16_t>(type));
    put_le(b, 70, extent_count);
    for (std::uint32_t i = 0; i < kInlineExtents; ++i) encode_extent(b.subspan(72 + i * kExtentSize), inline_extents[i]);
    put_le(b, 120, extent_block);
}

Inode Inode::decode(std::span<const std::byte> b) {
    Inode n;
    n.size = get_le<std::uint64_t>(b, 0);
    n.mtime = get_le<std::uint64_t>(b, 8);
    n.atime = get_le<std::uint64_t>(b, 16);
    n.ctime = get_le<std::uint64_t>(b, 24);
    n.mode = get_le<std::uint32_t>(b, 32);
    n.links = get_le<std::uint32_t>(b, 36);
    n.flags = get_le<std::uint32_t>(b, 40);
    n.ino = get_le<std::uint32_t>(b, 64);
    n.type = static_cast<FileType>(get_le<std::uint16_t>(b, 68));
    n.extent_count = get_le<std::uint16_t>(b, 70);
    for (std::uint32_t i = 0; i < kInlineExtents; ++i) n.inline_extents[i] = decode_extent(b.subspan(72 + i * kExtentSize));
    n.extent_block = get_le<std::uint32_t>(b, 120);
    return n;
}

void Dentry::encode(std::span<std::byte> out) const {
    std::fill(out.begin(), out.begin() + record_bytes(), std::byte{0});
    put_le(out, 0, ino);
    put_le(out, 4, static_cast<std::uint16_t>(type));
    put_le(out, 6, static_cast<std::uint16_t>(name.size()));
    std::memcpy(out.data() + kDentryHeader, name.data(), name.size());
}

std::vector<DentrySlot> parse_dir_block(std::span<const std::byte> block, std::string* error) {
    std::vector<DentrySlot> out;
    const auto lines = static_cast<std::uint32_t>(block.size() / kCachelineSize);
    std::uint32_t line = 0;
    while (line < lines) {
        auto rec = block.subspan(std::size_t{line} * kCachelineSize);
        DentrySlot s;
        s.line = line;
        s.ino = get_le<std::uint32_t>(rec, 0);
        s.type = static_cast<FileType>(get_le<std::uint16_t>(rec, 4));
        auto name_len = get_le<std::uint16_t>(rec, 6);
        if (s.ino == 0 && name_len == 0) {
            ++line; // empty line
            continue;
        }
        s.lines = Dentry::record_bytes_for(name_len) / kCachelineSize;
        if (name_len > kMaxNameLen || line + s.lines > lines) {
            if (error) *error = "malformed dentry at line " + std::to_string(line);
            break;
        }
        s.name.assign(reinterpret_cast<const char*>(rec.data() + kDentryHeader), name_len);
        out.push_back(std::move(s));
        line += out.back().lines;
    }
    return out;
}

std::uint64_t name_hash(std::string_view name) {
    // FNV-1a, 64-bit.
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : name) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

} // namespace bytefs
