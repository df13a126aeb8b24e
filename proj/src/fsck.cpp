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
// Offline consistency checker.

#include <deque>
#include <map>
#include <set>

#include "bytefs/error.hpp"
#include "bytefs/fs.hpp"

namespace bytefs {

namespace {

struct Checker {
    Device& dev;
    Superblock sb;
    std::vector<FsckViolation> out;
    std::map<std::uint32_t, PageBuf> cache;

    void report(std::string kind, std::string detail) { out.push_back({std::move(kind), std::move(detail)}); }

    const PageBuf& block(std::uint32_t b, Category cat) {
        auto it = cache.find(b);
        if (it != cache.end()) return it->second;
        return cache.emplace(b, dev.block_read(b, cat)).first->second;
    }

    bool bit(std::uint32_t start, std::uint64_t i) {
        const std::uint64_t per = std::uint64_t{sb.block_size} * 8;
        const auto& b = block(static_cast<std::uint32_t>(start + i / per), Category::bitmap);
        std::uint64_t k = i % per;
        return (std::to_integer<unsigned>(b[k / 8]) >> (k % 8)) & 1u;
    }

    Inode inode(Ino ino) {
        const std::uint32_t per = sb.block_size / kInodeSize;
        const auto& b = block(sb.inode_table_start + ino / per, Category::inode);
        return Inode::decode(std::span<const std::byte>(b).subspan((ino % per) * kInodeSize, kInodeSize));
    }
};

} // namespace

std::vector<FsckViolation> fsck(Device& dev) {
    Checker c{dev, {}, {}, {}};
    const PageBuf sbpage = dev.block_read(0, Category::superblock);
    c.sb = Superblock::decode(sbpage);
    const Superblock& sb = c.sb;
    if (sb.magic != kSuperMagic) {
        c.report("superblock", "bad magic");
        return c.out;
    }
    const std::uint32_t ps = sb.block_size;

    std::map<std::uint32_t, Ino> owner;
    std::map<Ino, std::uint32_t> refs;
    std::map<Ino, std::uint32_t> subdirs;
    std::set<Ino> seen;
    std::deque<Ino> queue{sb.root_ino};
    refs[sb.root_ino] = 1;

    auto claim = [&](std::uint32_t b, Ino ino) {
        if (b < sb.data_start || b >= sb.total_blocks) {
            c.report("bad_block", "inode " + std::to_string(ino) + " references block " + std::to_string(b));
            return false;
        }
        auto [it, fresh] = owner.emplace(b, ino);
        if (!fresh) {
            c.report("double_reference", "block " + std::to_string(b) + " used by inodes " + std::to_string(it->second) +
                                             " and " + std::to_string(ino));
            return false;
        }
        if (!c.bit(sb.block_bitmap_start, b)) c.report("bitmap_block", "block " + std::to_string(b) + " in use but free");
        return true;
    };

    while (!queue.empty()) {
        Ino ino = queue.front();
        queue.pop_front();
        if (!seen.insert(ino).second) continue;
        if (!c.bit(sb.inode_bitmap_start, ino)) c.report("bitmap_inode", "inode " + std::to_string(ino) + " in use but free");
        Inode n = c.inode(ino);
        const std::string who = "inode " + std::to_string(ino);
        if (n.type != FileType::file && n.type != FileType::dir) {
            c.report("bad_inode", who + " has no type");
            continue;
        }
        std::vector<Extent> ext;
        if (n.extent_block) {
            if (claim(n.extent_block, ino)) {
                const auto& eb = c.block(n.extent_block, Category::data_pointer);
                if (std::uint64_t{n.extent_count} * kExtentSize > ps)
                    c.report("bad_inode", who + " extent count too large");
                else
                    for (std::uint32_t i = 0; i < n.extent_count; ++i)
                        ext.push_back(decode_extent(std::span<const std::byte>(eb).subspan(i * kExtentSize)));
            }
        } else {
            if (n.extent_count > kInlineExtents) c.report("bad_inode", who + " inline extent count too large");
            for (std::uint32_t i = 0; i < std::min<std::uint32_t>(n.extent_count, kInlineExtents); ++i)
                ext.push_back(n.inline_extents[i]);
        }
        std::map<std::uint64_t, std::uint32_t> fmap;
        const std::uint64_t limit = (n.size + ps - 1) / ps;
        for (const auto& e : ext) {
            if (e.len == 0) c.report("bad_extent", who + " empty extent");
            for (std::uint32_t i = 0; i < e.len; ++i) {
                std::uint64_t fb = e.file_block + i;
                if (fb >= limit) c.report("extent_beyond_size", who + " maps file block " + std::to_string(fb));
                if (!fmap.emplace(fb, e.lba + i).second) c.report("bad_extent", who + " maps file block twice");
                claim(e.lba + i, ino);
            }
        }
        if (n.type == FileType::file) continue;

        if (n.size % ps != 0 || fmap.size() != n.size / ps) {
            c.report("dir_size", who + " size " + std::to_string(n.size) + " with " + std::to_string(fmap.size()) + " blocks");
        }
        std::set<std::string> names;
        for (const auto& [fb, lba] : fmap) {
            if (lba < sb.data_start || lba >= sb.total_blocks) continue;
            std::string err;
            auto slots = parse_dir_block(c.block(lba, Category::dentry), &err);
            if (!err.empty()) c.report("bad_dentry", who + " block " + std::to_string(fb) + ": " + err);
            for (const auto& s : slots) {
                if (s.ino == 0) continue;
                std::string at = who + " entry '" + s.name + "'";
                if (s.name.empty() || s.name.find('/') != std::string::npos) c.report("bad_dentry", at + " bad name");
                if (!names.insert(s.name).second) c.report("bad_dentry", at + " duplicated");
                if (s.ino <= 1 || s.ino >= sb.inode_count || s.ino == sb.root_ino) {
                    c.report("dangling_dentry", at + " points to inode " + std::to_string(s.ino));
                    continue;
                }
                Inode child = c.inode(s.ino);
                if (child.type != s.type || !c.bit(sb.inode_bitmap_start, s.ino)) {
                    c.report("dangling_dentry", at + " points to a free or mismatched inode");
                    continue;
                }
                if (s.type == FileType::dir) {
                    ++subdirs[ino];
                    if (refs[s.ino]++ > 0) c.report("double_reference", "directory " + std::to_string(s.ino) + " linked twice");
                } else {
                    ++refs[s.ino];
                }
                queue.push_back(s.ino);
            }
        }
    }

    for (Ino ino : seen) {
        Inode n = c.inode(ino);
        std::uint32_t want = n.type == FileType::dir ? 2 + subdirs[ino] : refs[ino];
        if (n.type != FileType::none && n.links != want)
            c.report("link_count", "inode " + std::to_string(ino) + " links " + std::to_string(n.links) + " expected " +
                                       std::to_string(want));
    }
    for (std::uint64_t i = 0; i < sb.inode_count; ++i) {
        bool used = c.bit(sb.inode_bitmap_start, i);
        if (i <= 1) {
            if (!used) c.report("bitmap_inode", "reserved inode " + std::to_string(i) + " free");
            continue;
        }
        if (used && !seen.count(static_cast<Ino>(i))) c.report("leaked_inode", "inode " + std::to_string(i));
    }
    for (std::uint64_t b = 0; b < sb.total_blocks; ++b) {
        bool used = c.bit(sb.block_bitmap_start, b);
        if (b < sb.data_start) {
            if (!used) c.report("bitmap_block", "metadata block " + std::to_string(b) + " free");
        } else if (used && !owner.count(static_cast<std::uint32_t>(b))) {
            c.report("leaked_block", "block " + std::to_string(b));
        }
    }
    return c.out;
}

} // namespace bytefs
