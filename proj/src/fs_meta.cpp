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
// Metadata cache, allocators, extents, directories and commit paths.

#include <algorithm>
#include <cstring>

#include "bytefs/error.hpp"
#include "bytefs/fs.hpp"

namespace bytefs {

namespace {

constexpr std::uint32_t kMaxExtents = 256;

} // namespace

FileSystem::MetaBlock& FileSystem::meta(std::uint32_t block, Category cat, bool fresh) {
    auto it = meta_.find(block);
    if (it != meta_.end()) {
        if (fresh) {
            std::fill(it->second.data.begin(), it->second.data.end(), std::byte{0});
            it->second.cat = cat;
        }
        return it->second;
    }
    MetaBlock m;
    m.cat = cat;
    m.data = fresh ? PageBuf(sb_.block_size) : dev_.block_read(block, cat);
    return meta_.emplace(block, std::move(m)).first->second;
}

void FileSystem::mark(Tx& tx, std::uint64_t addr, std::uint32_t len, Category cat) {
    for (std::uint64_t l = addr / kCachelineSize; l <= (addr + len - 1) / kCachelineSize; ++l)
        tx.lines[l * kCachelineSize] = cat;
}

bool FileSystem::test_bit(std::uint32_t start, std::uint64_t bit) {
    const std::uint64_t per_block = std::uint64_t{sb_.block_size} * 8;
    auto& m = meta(static_cast<std::uint32_t>(start + bit / per_block), Category::bitmap);
    std::uint64_t b = bit % per_block;
    return (std::to_integer<unsigned>(m.data[b / 8]) >> (b % 8)) & 1u;
}

void FileSystem::set_bit(Tx& tx, std::uint32_t start, std::uint64_t bit, bool value) {
    const std::uint64_t per_block = std::uint64_t{sb_.block_size} * 8;
    auto block = static_cast<std::uint32_t>(start + bit / per_block);
    auto& m = meta(block, Category::bitmap);
    std::uint64_t b = bit % per_block;
    auto mask = static_cast<std::byte>(1u << (b % 8));
    if (value)
        m.data[b / 8] |= mask;
    else
        m.data[b / 8] &= ~mask;
    mark(tx, std::uint64_t{block} * sb_.block_size + b / 8, 1, Category::bitmap);
}

void FileSystem::require_blocks(std::uint64_t n) const {
    if (free_blocks_ < n) fail(Errc::space_exhausted, "not enough free blocks");
}

std::uint32_t FileSystem::alloc_block(Tx& tx, std::uint32_t hint) {
    if (free_blocks_ == 0) fail(Errc::space_exhausted, "no free block");
    const std::uint64_t lo = sb_.data_start, hi = sb_.total_blocks;
    std::uint64_t pick = hi;
    if (hint >= lo && hint < hi && !test_bit(sb_.block_bitmap_start, hint)) {
        pick = hint;
    } else {
        std::uint64_t b = std::clamp<std::uint64_t>(block_cursor_, lo, hi - 1);
        for (std::uint64_t n = 0; n < hi - lo; ++n) {
            // Skip whole bytes of allocated blocks.
            if (b % 8 == 0 && b + 8 <= hi) {
                const std::uint64_t per_block = std::uint64_t{sb_.block_size} * 8;
                auto& m = meta(static_cast<std::uint32_t>(sb_.block_bitmap_start + b / per_block), Category::bitmap);
                if (m.data[(b % per_block) / 8] == std::byte{0xff}) {
                    n += 7;
                    b += 8;
                    if (b >= hi) b = lo;
                    continue;
                }
            }
            if (!test_bit(sb_.block_bitmap_start, b)) {
                pick = b;
                break;
            }
            if (++b >= hi) b = lo;
        }
    }
    if (pick == hi) fail(Errc::space_exhausted, "no free block");
    set_bit(tx, sb_.block_bitmap_start, pick, true);
    --free_blocks_;
    block_cursor_ = pick + 1;
    // Unwritten parts of a fresh block must read as zero.
    dev_.discard(static_cast<Lpa>(pick));
    return static_cast<std::uint32_t>(pick);
}

void FileSystem::free_block(Tx& tx, std::uint32_t block) {
    if (!test_bit(sb_.block_bitmap_start, block)) fail(Errc::state_error, "double free of block " + std::to_string(block));
    set_bit(tx, sb_.block_bitmap_start, block, false);
    ++free_blocks_;
    meta_.erase(block);
}

Ino FileSystem::alloc_inode(Tx& tx) {
    if (free_inodes_ == 0) fail(Errc::space_exhausted, "no free inode");
    for (std::uint64_t n = 0; n < sb_.inode_count; ++n) {
        std::uint64_t i = (inode_cursor_ + n) % sb_.inode_count;
        if (!test_bit(sb_.inode_bitmap_start, i)) {
            set_bit(tx, sb_.inode_bitmap_start, i, true);
            --free_inodes_;
            inode_cursor_ = i + 1;
            return static_cast<Ino>(i);
        }
    }
    fail(Errc::space_exhausted, "no free inode");
}

void FileSystem::free_inode(Tx& tx, Ino ino) {
    set_bit(tx, sb_.inode_bitmap_start, ino, false);
    ++free_inodes_;
    inodes_.erase(ino);
    dirs_.erase(ino);
}

FileSystem::InodeInfo& FileSystem::inode(Ino ino) {
    auto it = inodes_.find(ino);
    if (it != inodes_.end()) return it->second;
    if (ino == 0 || ino >= sb_.inode_count) fail(Errc::not_found, "inode " + std::to_string(ino) + " out of range");
    const std::uint32_t per_page = sb_.block_size / kInodeSize;
    auto& m = meta(sb_.inode_table_start + ino / per_page, Category::inode);
    InodeInfo info;
    info.disk = Inode::decode(std::span<const std::byte>(m.data).subspan((ino % per_page) * kInodeSize, kInodeSize));
    if (info.disk.extent_block) {
        auto& eb = meta(info.disk.extent_block, Category::data_pointer);
        for (std::uint32_t i = 0; i < info.disk.extent_count; ++i)
            info.extents.push_back(decode_extent(std::span<const std::byte>(eb.data).subspan(i * kExtentSize)));
    } else {
        for (std::uint32_t i = 0; i < std::min<std::uint32_t>(info.disk.extent_count, kInlineExtents); ++i)
            info.extents.push_back(info.disk.inline_extents[i]);
    }
    info.mem_size = info.disk.size;
    info.mem_mtime = info.disk.mtime;
    return inodes_.emplace(ino, std::move(info)).first->second;
}

void FileSystem::store_inode(Tx& tx, Ino ino, bool lower, bool upper, Category upper_cat) {
    InodeInfo& info = inode(ino);
    info.disk.extent_count = static_cast<std::uint16_t>(info.extents.size());
    for (std::uint32_t i = 0; i < kInlineExtents; ++i)
        info.disk.inline_extents[i] = (!info.disk.extent_block && i < info.extents.size()) ? info.extents[i] : Extent{};
    const std::uint32_t per_page = sb_.block_size / kInodeSize;
    std::uint32_t block = sb_.inode_table_start + ino / per_page;
    auto& m = meta(block, Category::inode);
    std::uint32_t off = (ino % per_page) * kInodeSize;
    info.disk.encode(std::span<std::byte>(m.data).subspan(off, kInodeSize));
    std::uint64_t base = std::uint64_t{block} * sb_.block_size + off;
    if (lower) mark(tx, base, 64, Category::inode);
    if (upper) mark(tx, base + 64, 64, upper_cat);
}

std::optional<std::uint32_t> FileSystem::map_block(const InodeInfo& info, std::uint64_t fb) const {
    auto it = std::upper_bound(info.extents.begin(), info.extents.end(), fb,
                               [](std::uint64_t v, const Extent& e) { return v < e.file_block; });
    if (it == info.extents.begin()) return std::nullopt;
    --it;
    if (fb >= it->file_block + it->len) return std::nullopt;
    return static_cast<std::uint32_t>(it->lba + (fb - it->file_block));
}

void FileSystem::add_mapping(Tx& tx, Ino ino, std::uint64_t fb, std::uint32_t lba) {
    InodeInfo& info = inode(ino);
    auto& ex = info.extents;
    auto pos = std::upper_bound(ex.begin(), ex.end(), fb, [](std::uint64_t v, const Extent& e) { return v < e.file_block; });
    std::size_t changed;
    if (pos != ex.begin() && std::prev(pos)->file_block + std::prev(pos)->len == fb &&
        std::prev(pos)->lba + std::prev(pos)->len == lba) {
        auto prev = std::prev(pos);
        ++prev->len;
        changed = static_cast<std::size_t>(prev - ex.begin());
    } else {
        if (ex.size() >= kMaxExtents) fail(Errc::space_exhausted, "extent limit reached");
        changed = static_cast<std::size_t>(pos - ex.begin());
        ex.insert(pos, Extent{fb, lba, 1});
    }
    bool count_changed = info.disk.extent_count != ex.size();
    if (!info.disk.extent_block && ex.size() > kInlineExtents) {
        // Spill every leaf into a dedicated extent block.
        std::uint32_t eb = alloc_block(tx, 0);
        info.disk.extent_block = eb;
        auto& m = meta(eb, Category::data_pointer, true);
        for (std::size_t i = 0; i < ex.size(); ++i) encode_extent(std::span<std::byte>(m.data).subspan(i * kExtentSize), ex[i]);
        mark(tx, std::uint64_t{eb} * sb_.block_size, static_cast<std::uint32_t>(ex.size() * kExtentSize), Category::data_pointer);
        store_inode(tx, ino, false, true, Category::data_pointer);
    } else if (info.disk.extent_block) {
        auto& m = meta(info.disk.extent_block, Category::data_pointer);
        for (std::size_t i = changed; i < ex.size(); ++i)
            encode_extent(std::span<std::byte>(m.data).subspan(i * kExtentSize), ex[i]);
        mark(tx, std::uint64_t{info.disk.extent_block} * sb_.block_size + changed * kExtentSize,
             static_cast<std::uint32_t>((ex.size() - changed) * kExtentSize), Category::data_pointer);
        if (count_changed) store_inode(tx, ino, false, true, Category::data_pointer);
    } else {
        store_inode(tx, ino, false, true, Category::data_pointer);
    }
}

void FileSystem::release_blocks(Tx& tx, Ino ino) {
    InodeInfo& info = inode(ino);
    for (const auto& e : info.extents)
        for (std::uint32_t i = 0; i < e.len; ++i) free_block(tx, e.lba + i);
    if (info.disk.extent_block) free_block(tx, info.disk.extent_block);
    info.extents.clear();
    info.disk.extent_block = 0;
}

FileSystem::DirInfo& FileSystem::dir(Ino ino) {
    auto it = dirs_.find(ino);
    if (it != dirs_.end()) return it->second;
    InodeInfo& info = inode(ino);
    if (info.disk.type != FileType::dir) fail(Errc::not_a_directory, "inode " + std::to_string(ino));
    DirInfo d;
    const std::uint32_t lines = sb_.block_size / kCachelineSize;
    const std::uint64_t nblocks = info.disk.size / sb_.block_size;
    for (std::uint64_t bi = 0; bi < nblocks; ++bi) {
        auto lba = map_block(info, bi);
        if (!lba) fail(Errc::state_error, "directory " + std::to_string(ino) + " has a hole");
        auto& m = meta(*lba, Category::dentry);
        std::vector<LineState> st(lines, LineState::empty);
        for (const auto& s : parse_dir_block(m.data)) {
            if (s.ino == 0) {
                st[s.line] = LineState::dead_head;
                for (std::uint32_t k = 1; k < s.lines; ++k) st[s.line + k] = LineState::dead_body;
                d.dead_spans[{static_cast<std::uint32_t>(bi), s.line}] = s.lines;
                continue;
            }
            for (std::uint32_t k = 0; k < s.lines; ++k) st[s.line + k] = LineState::used;
            d.by_hash[name_hash(s.name)].push_back(
                DirRef{s.name, s.ino, s.type, static_cast<std::uint32_t>(bi), s.line, s.lines});
            ++d.live;
        }
        d.lines.push_back(std::move(st));
    }
    return dirs_.emplace(ino, std::move(d)).first->second;
}

const FileSystem::DirRef* FileSystem::dir_find(DirInfo& d, std::string_view name) {
    auto it = d.by_hash.find(name_hash(name));
    if (it == d.by_hash.end()) return nullptr;
    for (const auto& r : it->second)
        if (r.name == name) return &r;
    return nullptr;
}

void FileSystem::dir_insert(Tx& tx, Ino dir_ino, const std::string& name, Ino child, FileType type) {
    DirInfo& d = dir(dir_ino);
    const std::uint32_t need = Dentry::record_bytes_for(name.size()) / kCachelineSize;
    const std::uint32_t lines = sb_.block_size / kCachelineSize;
    std::optional<std::uint32_t> found_block;
    std::uint32_t at = 0, rem = 0;
    for (std::uint32_t bi = 0; bi < d.lines.size() && !found_block; ++bi) {
        const auto& st = d.lines[bi];
        for (std::uint32_t l = 0; l + need <= lines; ++l) {
            if (st[l] != LineState::empty && st[l] != LineState::dead_head) continue;
            bool ok = true;
            std::uint32_t span_end = l + need;
            for (std::uint32_t k = l; k < l + need; ++k) {
                if (st[k] == LineState::used) {
                    ok = false;
                    break;
                }
                if (st[k] == LineState::dead_head) span_end = std::max(span_end, k + d.dead_spans.at({bi, k}));
            }
            if (!ok) continue;
            std::uint32_t r = span_end - (l + need);
            // Keep every dentry update within five lines.
            if (r > 0 && need + 1 > 5) continue;
            found_block = bi;
            at = l;
            rem = r;
            break;
        }
    }
    if (!found_block) {
        require_blocks(2);
        InodeInfo& info = inode(dir_ino);
        auto bi = static_cast<std::uint32_t>(info.disk.size / sb_.block_size);
        std::uint32_t hint = 0;
        if (!info.extents.empty()) hint = info.extents.back().lba + info.extents.back().len;
        std::uint32_t lba = alloc_block(tx, hint);
        meta(lba, Category::dentry, true);
        add_mapping(tx, dir_ino, bi, lba);
        info.disk.size += sb_.block_size;
        store_inode(tx, dir_ino, true, false);
        d.lines.emplace_back(lines, LineState::empty);
        found_block = bi;
        at = 0;
        rem = 0;
    }
    const std::uint32_t bi = *found_block;
    auto lba = *map_block(inode(dir_ino), bi);
    auto& m = meta(lba, Category::dentry);
    std::span<std::byte> blk(m.data);
    Dentry{child, type, name}.encode(blk.subspan(at * kCachelineSize));
    auto& st = d.lines[bi];
    for (std::uint32_t k = at; k < at + need + rem; ++k) {
        if (st[k] == LineState::dead_head) d.dead_spans.erase({bi, k});
        st[k] = k < at + need ? LineState::used : LineState::dead_body;
    }
    if (rem) {
        // Leftover of a reused dead record becomes a smaller dead record.
        auto tail = blk.subspan((at + need) * kCachelineSize, kCachelineSize);
        std::fill(tail.begin(), tail.end(), std::byte{0});
        put_le(tail, 6, static_cast<std::uint16_t>(rem * kCachelineSize - kDentryHeader));
        st[at + need] = LineState::dead_head;
        d.dead_spans[{bi, at + need}] = rem;
    }
    mark(tx, std::uint64_t{lba} * sb_.block_size + at * kCachelineSize, (need + (rem ? 1 : 0)) * kCachelineSize,
         Category::dentry);
    d.by_hash[name_hash(name)].push_back(DirRef{name, child, type, bi, at, need});
    ++d.live;
}

void FileSystem::dir_remove(Tx& tx, Ino dir_ino, std::string_view name) {
    DirInfo& d = dir(dir_ino);
    auto it = d.by_hash.find(name_hash(name));
    if (it == d.by_hash.end()) fail(Errc::not_found, std::string(name));
    auto& v = it->second;
    auto r = std::find_if(v.begin(), v.end(), [&](const DirRef& x) { return x.name == name; });
    if (r == v.end()) fail(Errc::not_found, std::string(name));
    auto lba = *map_block(inode(dir_ino), r->block_index);
    auto& m = meta(lba, Category::dentry);
    put_le(std::span<std::byte>(m.data), std::size_t{r->line} * kCachelineSize, std::uint32_t{0});
    mark(tx, std::uint64_t{lba} * sb_.block_size + r->line * kCachelineSize, kCachelineSize, Category::dentry);
    auto& st = d.lines[r->block_index];
    st[r->line] = LineState::dead_head;
    for (std::uint32_t k = 1; k < r->lines; ++k) st[r->line + k] = LineState::dead_body;
    d.dead_spans[{r->block_index, r->line}] = r->lines;
    v.erase(r);
    if (v.empty()) d.by_hash.erase(it);
    --d.live;
}

std::uint64_t FileSystem::journal_capacity() const { return std::uint64_t{sb_.journal_blocks - 1} * sb_.block_size; }

void FileSystem::write_journal_sb(std::uint64_t seq) {
    const std::uint64_t addr = std::uint64_t{sb_.journal_start} * sb_.block_size;
    if (opts_.mode == FsMode::block_only) {
        PageBuf page(sb_.block_size);
        encode_journal_sb(page, seq);
        dev_.block_write(sb_.journal_start, page, Category::journal);
        return;
    }
    std::vector<std::byte> line(kCachelineSize);
    encode_journal_sb(line, seq);
    if (opts_.mode == FsMode::dual) {
        dev_.byte_write(addr, line, kNoTx, Category::journal);
        return;
    }
    TxId t = tm_->begin();
    tm_->write(t, addr, line, Category::journal);
    tm_->commit(t);
}

void FileSystem::write_journal(const JournalRecord& rec, TxId txid) {
    const std::uint32_t ps = sb_.block_size;
    JournalImage img = encode_journal(rec, ps);
    if (img.bytes.size() > journal_capacity()) fail(Errc::space_exhausted, "journal record larger than the journal");
    const std::uint32_t first = sb_.journal_start + 1;
    const std::uint64_t base = std::uint64_t{first} * ps;
    std::vector<Lpa> lpas;
    std::vector<PageBuf> pages;
    auto page_of = [&](std::uint32_t i) {
        PageBuf p(ps);
        std::uint64_t off = std::uint64_t{i} * ps;
        std::memcpy(p.data(), img.bytes.data() + off, std::min<std::uint64_t>(ps, img.bytes.size() - off));
        return p;
    };
    const auto commit_page = static_cast<std::uint32_t>(img.commit_offset / ps);
    if (opts_.mode == FsMode::block_only) {
        for (std::uint32_t i = 0; i < commit_page; ++i) {
            lpas.push_back(first + i);
            pages.push_back(page_of(i));
        }
        if (!lpas.empty()) dev_.block_write_batch(lpas, pages, Category::journal);
        dev_.block_write(first + commit_page, page_of(commit_page), Category::journal);
        ++stats_.journal_records;
        return;
    }
    // Byte-granular record: header, descriptors and byte payloads go over
    // the byte interface, whole-page payloads over the block interface.
    auto byte_put = [&](std::uint64_t off, std::uint64_t len) {
        std::span<const std::byte> src(img.bytes.data() + off, len);
        if (txid != kNoTx) {
            tm_->write(txid, base + off, src, Category::journal);
            return;
        }
        std::uint64_t done = 0;
        while (done < len) {
            std::uint64_t a = base + off + done;
            std::uint64_t n = std::min<std::uint64_t>(len - done, ps - a % ps);
            dev_.byte_write(a, src.subspan(done, n), kNoTx, Category::journal);
            done += n;
        }
    };
    byte_put(0, img.byte_region_len);
    for (auto bp : img.block_pages) {
        lpas.push_back(first + bp);
        pages.push_back(page_of(bp));
    }
    if (!lpas.empty()) dev_.block_write_batch(lpas, pages, Category::journal);
    byte_put(img.commit_offset, kCachelineSize);
    ++stats_.journal_records;
}

void FileSystem::checkpoint(const JournalRecord& rec) {
    std::map<Category, std::pair<std::vector<Lpa>, std::vector<PageBuf>>> blocks;
    for (const auto& it : rec.items) {
        if (it.block) {
            auto& b = blocks[it.category];
            b.first.push_back(static_cast<Lpa>(it.home_addr / sb_.block_size));
            b.second.push_back(PageBuf(it.data.begin(), it.data.end()));
        } else {
            dev_.byte_write(it.home_addr, it.data, kNoTx, it.category);
        }
    }
    for (auto& [cat, b] : blocks) dev_.block_write_batch(b.first, b.second, cat);
}

void FileSystem::commit_journaled(Tx& tx, bool byte_journal) {
    const std::uint32_t ps = sb_.block_size;
    JournalRecord meta_rec;
    if (byte_journal) {
        // Runs of contiguous dirty lines within a page, split on tag change.
        for (auto it = tx.lines.begin(); it != tx.lines.end();) {
            std::uint64_t start = it->first;
            Category cat = it->second;
            std::uint64_t end = start + kCachelineSize;
            ++it;
            while (it != tx.lines.end() && it->first == end && end % ps != 0 && it->second == cat) {
                end += kCachelineSize;
                ++it;
            }
            auto& m = meta(static_cast<std::uint32_t>(start / ps), cat);
            JournalItem j;
            j.home_addr = start;
            j.category = cat;
            j.data.assign(m.data.begin() + static_cast<long>(start % ps), m.data.begin() + static_cast<long>(start % ps + (end - start)));
            meta_rec.items.push_back(std::move(j));
        }
    } else {
        std::map<std::uint32_t, Category> blocks;
        for (const auto& [addr, cat] : tx.lines) blocks.emplace(static_cast<std::uint32_t>(addr / ps), cat);
        for (const auto& [b, cat] : blocks) {
            JournalItem j;
            j.home_addr = std::uint64_t{b} * ps;
            j.category = meta_.at(b).cat;
            j.block = true;
            j.data = meta_.at(b).data;
            meta_rec.items.push_back(std::move(j));
        }
    }
    std::vector<JournalItem> data_items;
    if (opts_.journal == JournalMode::data) {
        for (auto& [lpa, buf] : tx.data_blocks) {
            JournalItem j;
            j.home_addr = std::uint64_t{lpa} * ps;
            j.category = Category::data;
            j.block = true;
            j.data = std::move(buf);
            data_items.push_back(std::move(j));
        }
    } else if (!tx.data_blocks.empty()) {
        std::vector<Lpa> lpas;
        std::vector<PageBuf> pages;
        for (auto& [lpa, buf] : tx.data_blocks) {
            lpas.push_back(lpa);
            pages.push_back(std::move(buf));
        }
        dev_.block_write_batch(lpas, pages, Category::data);
    }
    for (const auto& [addr, bytes] : tx.data_bytes) {
        JournalItem j;
        j.home_addr = addr;
        j.category = Category::data;
        j.data = bytes;
        meta_rec.items.push_back(std::move(j));
    }
    // Data that does not fit next to the metadata goes in data-only records first.
    while (!data_items.empty()) {
        JournalRecord all = meta_rec;
        all.items.insert(all.items.end(), data_items.begin(), data_items.end());
        if (journal_footprint(all.items, ps) <= journal_capacity()) {
            meta_rec = std::move(all);
            data_items.clear();
            break;
        }
        JournalRecord chunk;
        chunk.seq = journal_seq_++;
        while (!data_items.empty()) {
            chunk.items.push_back(std::move(data_items.back()));
            data_items.pop_back();
            if (journal_footprint(chunk.items, ps) > journal_capacity()) {
                data_items.push_back(std::move(chunk.items.back()));
                chunk.items.pop_back();
                break;
            }
        }
        write_journal(chunk, kNoTx);
        checkpoint(chunk);
    }
    if (meta_rec.items.empty()) return;
    meta_rec.seq = journal_seq_++;
    write_journal(meta_rec, kNoTx);
    checkpoint(meta_rec);
}

void FileSystem::commit(Tx& tx) {
    if (tx.empty()) return;
    ++stats_.transactions;
    const std::uint32_t ps = sb_.block_size;
    if (opts_.mode == FsMode::block_only || opts_.mode == FsMode::dual) {
        commit_journaled(tx, opts_.mode == FsMode::dual);
        return;
    }
    TxId t = tm_->begin();
    JournalRecord data_rec;
    if (!tx.data_blocks.empty()) {
        std::vector<JournalItem> items;
        if (opts_.journal == JournalMode::data) {
            for (auto& [lpa, buf] : tx.data_blocks) {
                JournalItem j;
                j.home_addr = std::uint64_t{lpa} * ps;
                j.category = Category::data;
                j.block = true;
                j.data = buf;
                items.push_back(std::move(j));
            }
        }
        if (!items.empty() && journal_footprint(items, ps) <= journal_capacity()) {
            data_rec.seq = journal_seq_++;
            data_rec.txid = t;
            data_rec.items = std::move(items);
            write_journal(data_rec, t);
        } else {
            // Ordered: data reaches its home before the commit.
            std::vector<Lpa> lpas;
            std::vector<PageBuf> pages;
            for (auto& [lpa, buf] : tx.data_blocks) {
                lpas.push_back(lpa);
                pages.push_back(std::move(buf));
            }
            dev_.block_write_batch(lpas, pages, Category::data);
        }
    }
    for (const auto& [addr, bytes] : tx.data_bytes) tm_->write(t, addr, bytes, Category::data);
    for (auto it = tx.lines.begin(); it != tx.lines.end();) {
        std::uint64_t start = it->first;
        Category cat = it->second;
        std::uint64_t end = start + kCachelineSize;
        ++it;
        while (it != tx.lines.end() && it->first == end && end % ps != 0 && it->second == cat) {
            end += kCachelineSize;
            ++it;
        }
        auto& m = meta(static_cast<std::uint32_t>(start / ps), cat);
        tm_->write(t, start, std::span<const std::byte>(m.data).subspan(start % ps, end - start), cat);
    }
    tm_->commit(t);
    if (!data_rec.items.empty()) {
        checkpoint(data_rec);
        // Retire the record so a later crash cannot replay stale blocks.
        write_journal_sb(journal_seq_);
    }
}

} // namespace bytefs
