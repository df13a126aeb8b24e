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
// Page cache, writeback interface selection and direct I/O.

#include <algorithm>
#include <cstring>

#include "bytefs/error.hpp"
#include "bytefs/fs.hpp"

namespace bytefs {

WritebackDecision choose_writeback(std::span<const std::byte> current, std::span<const std::byte> original) {
    if (current.size() != original.size() || current.size() % kCachelineSize != 0)
        fail(Errc::invalid_argument, "page images differ in size");
    WritebackDecision d;
    const auto lines = static_cast<std::uint32_t>(current.size() / kCachelineSize);
    for (std::uint32_t l = 0; l < lines; ++l)
        if (std::memcmp(current.data() + l * kCachelineSize, original.data() + l * kCachelineSize, kCachelineSize) != 0)
            d.dirty_lines.push_back(l);
    if (d.dirty_lines.empty())
        d.iface = WriteInterface::none;
    else if (d.dirty_lines.size() * 8 < lines)
        d.iface = WriteInterface::byte;
    else
        d.iface = WriteInterface::block;
    return d;
}

FileSystem::OpenFile& FileSystem::handle(Fd fd) {
    auto it = fds_.find(fd);
    if (it == fds_.end()) fail(Errc::invalid_argument, "bad file descriptor " + std::to_string(fd));
    return it->second;
}

Fd FileSystem::open(std::string_view path, OpenFlags flags) {
    std::lock_guard lk(mu_);
    check_mounted();
    auto parts = split_path(path);
    Ino ino = 0;
    try {
        ino = walk(parts, parts.size());
    } catch (const Error& e) {
        if (e.code() != Errc::not_found || !flags.create) throw;
        ino = make_node(path, FileType::file);
    }
    if (inode(ino).disk.type == FileType::dir) fail(Errc::is_a_directory, std::string(path));
    Fd fd = next_fd_++;
    fds_[fd] = OpenFile{ino, flags.direct};
    enforce_limits();
    return fd;
}

void FileSystem::close(Fd fd) {
    std::lock_guard lk(mu_);
    check_mounted();
    handle(fd);
    fds_.erase(fd);
}

void FileSystem::touch(CachedPage& p, const PageKey& key) {
    if (p.lru != lru_.begin()) lru_.splice(lru_.begin(), lru_, p.lru);
    (void)key;
}

FileSystem::CachedPage& FileSystem::page(Ino ino, std::uint64_t idx, bool will_overwrite) {
    PageKey key{ino, idx};
    auto it = pages_.find(key);
    if (it != pages_.end()) {
        touch(it->second, key);
        return it->second;
    }
    InodeInfo& n = inode(ino);
    CachedPage p;
    auto lba = map_block(n, idx);
    if (lba && !will_overwrite)
        p.data = dev_.block_read(*lba, Category::data);
    else
        p.data = PageBuf(sb_.block_size);
    lru_.push_front(key);
    p.lru = lru_.begin();
    n.cached.insert(idx);
    return pages_.emplace(key, std::move(p)).first->second;
}

void FileSystem::release_dup(CachedPage& p) {
    if (p.dup) {
        p.dup.reset();
        --dup_count_;
    }
}

void FileSystem::drop_pages(Ino ino) {
    auto iit = inodes_.find(ino);
    if (iit == inodes_.end()) return;
    for (auto idx : iit->second.cached) {
        auto it = pages_.find(PageKey{ino, idx});
        if (it == pages_.end()) continue;
        release_dup(it->second);
        lru_.erase(it->second.lru);
        pages_.erase(it);
    }
    iit->second.cached.clear();
    iit->second.dirty_pages.clear();
}

std::vector<std::byte> FileSystem::read(Fd fd, std::uint64_t offset, std::uint64_t len) {
    std::lock_guard lk(mu_);
    check_mounted();
    OpenFile f = handle(fd);
    if (f.direct) return direct_read(f.ino, offset, len);
    InodeInfo& n = inode(f.ino);
    std::vector<std::byte> out;
    if (offset >= n.mem_size) return out;
    len = std::min(len, n.mem_size - offset);
    out.resize(len);
    const std::uint32_t ps = sb_.block_size;
    std::uint64_t done = 0;
    while (done < len) {
        std::uint64_t pos = offset + done;
        std::uint64_t in = pos % ps;
        std::uint64_t n_bytes = std::min<std::uint64_t>(len - done, ps - in);
        CachedPage& p = page(f.ino, pos / ps, false);
        std::memcpy(out.data() + done, p.data.data() + in, n_bytes);
        done += n_bytes;
    }
    enforce_limits();
    return out;
}

void FileSystem::write(Fd fd, std::uint64_t offset, std::span<const std::byte> data) {
    std::lock_guard lk(mu_);
    check_mounted();
    OpenFile f = handle(fd);
    if (data.empty()) return;
    if (f.direct) {
        direct_write(f.ino, offset, data);
        enforce_limits();
        return;
    }
    const std::uint32_t ps = sb_.block_size;
    std::uint64_t done = 0;
    while (done < data.size()) {
        std::uint64_t pos = offset + done;
        std::uint64_t idx = pos / ps, in = pos % ps;
        std::uint64_t n_bytes = std::min<std::uint64_t>(data.size() - done, ps - in);
        InodeInfo& n = inode(f.ino);
        bool whole = in == 0 && n_bytes == ps;
        // A page past EOF holds nothing worth reading.
        bool beyond = idx * ps >= n.mem_size;
        CachedPage& p = page(f.ino, idx, whole || beyond);
        if (!p.dirty) {
            if (map_block(n, idx))
                p.dup = p.data;
            else
                p.dup = PageBuf(ps);
            ++dup_count_;
            dup_fifo_.push_back(PageKey{f.ino, idx});
            stats_.dup_pages_peak = std::max<std::uint64_t>(stats_.dup_pages_peak, dup_count_);
            p.dirty = true;
            n.dirty_pages.insert(idx);
        }
        std::memcpy(p.data.data() + in, data.data() + done, n_bytes);
        done += n_bytes;
    }
    InodeInfo& n = inode(f.ino);
    n.mem_size = std::max<std::uint64_t>(n.mem_size, offset + data.size());
    n.mem_mtime = now();
    enforce_limits();
}

void FileSystem::flush_chunk(Ino ino, const std::vector<std::uint64_t>& idxs, std::uint64_t size, bool last,
                             bool datasync) {
    const std::uint32_t ps = sb_.block_size;
    InodeInfo& n = inode(ino);
    std::uint64_t unmapped = 0;
    for (auto idx : idxs)
        if (!map_block(n, idx)) ++unmapped;
    if (unmapped) require_blocks(unmapped + 1);

    Tx tx;
    std::vector<CachedPage*> flushed;
    std::uint32_t hint = 0;
    for (auto idx : idxs) {
        CachedPage& p = pages_.at(PageKey{ino, idx});
        WriteInterface iface = WriteInterface::block;
        std::vector<std::uint32_t> lines;
        if (opts_.mode == FsMode::full) {
            auto d = choose_writeback(p.data, p.dup ? std::span<const std::byte>(*p.dup) : std::span<const std::byte>(p.data));
            iface = d.iface;
            lines = std::move(d.dirty_lines);
        }
        flushed.push_back(&p);
        last_writeback_ = iface;
        if (iface == WriteInterface::none) {
            ++stats_.clean_writebacks;
            continue;
        }
        auto lba = map_block(n, idx);
        if (!lba) {
            if (!hint && !n.extents.empty()) hint = n.extents.back().lba + n.extents.back().len;
            lba = alloc_block(tx, hint);
            add_mapping(tx, ino, idx, *lba);
        }
        hint = *lba + 1;
        if (iface == WriteInterface::block) {
            ++stats_.block_writebacks;
            tx.data_blocks.emplace_back(*lba, p.data);
            continue;
        }
        ++stats_.byte_writebacks;
        for (std::size_t i = 0; i < lines.size();) {
            std::size_t j = i + 1;
            while (j < lines.size() && lines[j] == lines[j - 1] + 1) ++j;
            std::uint64_t off = std::uint64_t{lines[i]} * kCachelineSize;
            std::uint64_t len = (j - i) * kCachelineSize;
            tx.data_bytes.emplace_back(std::uint64_t{*lba} * ps + off,
                                       std::vector<std::byte>(p.data.begin() + static_cast<long>(off),
                                                              p.data.begin() + static_cast<long>(off + len)));
            i = j;
        }
    }
    bool inode_dirty = false;
    if (size > n.disk.size) {
        n.disk.size = size;
        inode_dirty = true;
    }
    if (last && n.mem_mtime != n.disk.mtime && (!datasync || inode_dirty)) {
        n.disk.mtime = n.mem_mtime;
        inode_dirty = true;
    }
    if (inode_dirty) store_inode(tx, ino, true, false);
    commit(tx);
    for (auto* p : flushed) {
        p->dirty = false;
        release_dup(*p);
    }
    for (auto idx : idxs) n.dirty_pages.erase(idx);
}

void FileSystem::flush_inode(Ino ino, bool datasync) {
    auto iit = inodes_.find(ino);
    if (iit == inodes_.end()) return;
    InodeInfo& n = iit->second;
    const bool size_dirty = n.mem_size != n.disk.size;
    const bool mtime_dirty = n.mem_mtime != n.disk.mtime;
    if (n.dirty_pages.empty() && !size_dirty && (datasync || !mtime_dirty)) return;
    const std::uint32_t ps = sb_.block_size;
    std::vector<std::uint64_t> idxs(n.dirty_pages.begin(), n.dirty_pages.end());

    std::uint64_t budget = UINT64_MAX;
    if (mode_uses_log(opts_.mode)) budget = std::max<std::uint64_t>(dev_.log_free_bytes() / 2, 4 * ps);
    // Worst case every page goes over the byte path.
    auto cost = [&](std::size_t pages) { return pages * (ps / 8 + 2 * kCachelineSize) + 8 * kCachelineSize; };
    if (cost(idxs.size()) <= budget) {
        flush_chunk(ino, idxs, n.mem_size, true, datasync);
        return;
    }
    ++stats_.split_flushes;
    std::size_t per = 1;
    while (cost(per * 2) <= budget && per * 2 < idxs.size()) per *= 2;
    for (std::size_t i = 0; i < idxs.size(); i += per) {
        std::vector<std::uint64_t> chunk(idxs.begin() + static_cast<long>(i),
                                         idxs.begin() + static_cast<long>(std::min(idxs.size(), i + per)));
        bool last = i + per >= idxs.size();
        std::uint64_t size = last ? n.mem_size : std::min(n.mem_size, (chunk.back() + 1) * ps);
        flush_chunk(ino, chunk, size, last, datasync);
    }
}

void FileSystem::fsync(Fd fd) {
    std::lock_guard lk(mu_);
    check_mounted();
    flush_inode(handle(fd).ino, false);
}

void FileSystem::fdatasync(Fd fd) {
    std::lock_guard lk(mu_);
    check_mounted();
    flush_inode(handle(fd).ino, true);
}

void FileSystem::sync() {
    std::lock_guard lk(mu_);
    check_mounted();
    std::vector<Ino> inos;
    for (const auto& [ino, n] : inodes_)
        if (!n.dirty_pages.empty() || n.mem_size != n.disk.size || n.mem_mtime != n.disk.mtime) inos.push_back(ino);
    std::sort(inos.begin(), inos.end());
    for (Ino ino : inos) flush_inode(ino, false);
}

void FileSystem::enforce_limits() {
    const std::size_t dup_cap = std::max<std::size_t>(1, cache_pages_ / 4);
    while (dup_count_ > dup_cap && !dup_fifo_.empty()) {
        PageKey k = dup_fifo_.front();
        dup_fifo_.pop_front();
        auto it = pages_.find(k);
        if (it == pages_.end() || !it->second.dup) continue;
        ++stats_.forced_dup_writebacks;
        flush_inode(k.ino, false);
    }
    if (dup_fifo_.size() > 4 * (dup_count_ + 16)) {
        std::list<PageKey> keep;
        for (const auto& k : dup_fifo_) {
            auto it = pages_.find(k);
            if (it != pages_.end() && it->second.dup) keep.push_back(k);
        }
        dup_fifo_.swap(keep);
    }
    while (pages_.size() > cache_pages_ && !lru_.empty()) {
        PageKey k = lru_.back();
        auto it = pages_.find(k);
        if (it->second.dirty) flush_inode(k.ino, false);
        it = pages_.find(k);
        if (it == pages_.end()) continue;
        release_dup(it->second);
        lru_.erase(it->second.lru);
        pages_.erase(it);
        inode(k.ino).cached.erase(k.page);
        ++stats_.evictions;
    }
}

std::vector<std::byte> FileSystem::direct_read(Ino ino, std::uint64_t offset, std::uint64_t len) {
    flush_inode(ino, true);
    InodeInfo& n = inode(ino);
    std::vector<std::byte> out;
    if (offset >= n.disk.size) return out;
    len = std::min(len, n.disk.size - offset);
    out.resize(len);
    const std::uint32_t ps = sb_.block_size;
    std::uint64_t done = 0;
    while (done < len) {
        std::uint64_t pos = offset + done;
        std::uint64_t in = pos % ps;
        std::uint64_t n_bytes = std::min<std::uint64_t>(len - done, ps - in);
        if (auto lba = map_block(n, pos / ps)) {
            PageBuf pg = dev_.block_read(*lba, Category::data);
            std::memcpy(out.data() + done, pg.data() + in, n_bytes);
        }
        done += n_bytes;
    }
    return out;
}

void FileSystem::direct_write(Ino ino, std::uint64_t offset, std::span<const std::byte> data) {
    flush_inode(ino, false);
    const std::uint32_t ps = sb_.block_size;
    const std::uint64_t first = offset / ps, last = (offset + data.size() - 1) / ps;
    {
        InodeInfo& n = inode(ino);
        for (auto it = n.cached.lower_bound(first); it != n.cached.end() && *it <= last;) {
            auto pit = pages_.find(PageKey{ino, *it});
            release_dup(pit->second);
            lru_.erase(pit->second.lru);
            pages_.erase(pit);
            it = n.cached.erase(it);
        }
    }
    InodeInfo& n = inode(ino);
    std::uint64_t unmapped = 0;
    for (std::uint64_t i = first; i <= last; ++i)
        if (!map_block(n, i)) ++unmapped;
    if (unmapped) require_blocks(unmapped + 1);
    const bool byte_path = opts_.mode == FsMode::full && data.size() <= kDirectByteLimit;

    Tx tx;
    std::uint32_t hint = n.extents.empty() ? 0 : n.extents.back().lba + n.extents.back().len;
    std::uint64_t done = 0;
    while (done < data.size()) {
        std::uint64_t pos = offset + done;
        std::uint64_t idx = pos / ps, in = pos % ps;
        std::uint64_t n_bytes = std::min<std::uint64_t>(data.size() - done, ps - in);
        auto lba = map_block(n, idx);
        bool fresh = !lba;
        if (!lba) {
            lba = alloc_block(tx, hint);
            add_mapping(tx, ino, idx, *lba);
        }
        hint = *lba + 1;
        auto src = data.subspan(done, n_bytes);
        if (byte_path) {
            tx.data_bytes.emplace_back(std::uint64_t{*lba} * ps + in, std::vector<std::byte>(src.begin(), src.end()));
        } else {
            PageBuf pg = (n_bytes == ps || fresh) ? PageBuf(ps) : dev_.block_read(*lba, Category::data);
            std::memcpy(pg.data() + in, src.data(), n_bytes);
            tx.data_blocks.emplace_back(*lba, std::move(pg));
        }
        done += n_bytes;
    }
    if (offset + data.size() > n.disk.size) n.disk.size = offset + data.size();
    n.mem_size = n.disk.size;
    n.disk.mtime = n.mem_mtime = now();
    store_inode(tx, ino, true, false);
    commit(tx);
    if (byte_path)
        ++stats_.direct_byte_ops;
    else
        ++stats_.direct_block_ops;
    last_direct_ = byte_path ? WriteInterface::byte : WriteInterface::block;
}

} // namespace bytefs
