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
// Format, mount and namespace operations.

#include <algorithm>
#include <bit>

#include "bytefs/error.hpp"
#include "bytefs/fs.hpp"

namespace bytefs {

const char* mode_name(FsMode m) noexcept {
    switch (m) {
    case FsMode::block_only: return "block_only";
    case FsMode::dual: return "dual";
    case FsMode::dual_log: return "dual_log";
    case FsMode::full: return "full";
    }
    return "?";
}

std::optional<FsMode> parse_mode(std::string_view s) noexcept {
    for (FsMode m : {FsMode::block_only, FsMode::dual, FsMode::dual_log, FsMode::full})
        if (s == mode_name(m)) return m;
    return std::nullopt;
}

bool mode_uses_log(FsMode m) noexcept { return m == FsMode::dual_log || m == FsMode::full; }

FileSystem::FileSystem(Device& dev, MountOptions opts) : dev_(dev), opts_(opts) {}

FileSystem::~FileSystem() = default;

void FileSystem::set_mode(FsMode m) {
    std::lock_guard lk(mu_);
    if (mounted_) fail(Errc::state_error, "mode is fixed while mounted");
    opts_.mode = m;
}

std::uint32_t FileSystem::mode_flags() const {
    return static_cast<std::uint32_t>(opts_.mode) | (opts_.journal == JournalMode::data ? 0x10u : 0u);
}

std::uint64_t FileSystem::now() { return dev_.now_ns(); }

void FileSystem::check_mounted() const {
    if (!mounted_) fail(Errc::state_error, "file system is not mounted");
}

Superblock FileSystem::mkfs(const MkfsParams& params) {
    std::lock_guard lk(mu_);
    if (mounted_) fail(Errc::state_error, "cannot format a mounted file system");
    const auto& cfg = dev_.config();
    MkfsParams p = params;
    p.mode_flags = mode_flags();
    Superblock sb = plan_layout(cfg.capacity_bytes, cfg.page_size, p);
    const std::uint32_t ps = sb.block_size;

    PageBuf page(ps);
    sb.encode(page);
    dev_.block_write(0, page, Category::superblock);

    std::fill(page.begin(), page.end(), std::byte{0});
    encode_journal_sb(page, 1);
    dev_.block_write(sb.journal_start, page, Category::journal);

    const std::uint32_t root_block = sb.data_start;
    auto set = [](PageBuf& pg, std::uint64_t bit) { pg[bit / 8] |= static_cast<std::byte>(1u << (bit % 8)); };
    for (std::uint32_t b = 0; b < sb.inode_bitmap_blocks; ++b) {
        PageBuf bm(ps);
        if (b == 0)
            for (std::uint64_t i = 0; i <= kRootIno; ++i) set(bm, i);
        dev_.block_write(sb.inode_bitmap_start + b, bm, Category::bitmap);
    }
    const std::uint64_t bits_per_block = std::uint64_t{ps} * 8;
    for (std::uint32_t b = 0; b < sb.block_bitmap_blocks; ++b) {
        PageBuf bm(ps);
        std::uint64_t lo = b * bits_per_block, hi = lo + bits_per_block;
        for (std::uint64_t i = lo; i < std::min<std::uint64_t>(hi, std::uint64_t{root_block} + 1); ++i) set(bm, i - lo);
        dev_.block_write(sb.block_bitmap_start + b, bm, Category::bitmap);
    }

    PageBuf itable(ps);
    Inode root;
    root.ino = kRootIno;
    root.type = FileType::dir;
    root.size = ps;
    root.links = 2;
    root.extent_count = 1;
    root.inline_extents[0] = Extent{0, root_block, 1};
    root.encode(std::span<std::byte>(itable).subspan(kRootIno * kInodeSize, kInodeSize));
    dev_.block_write(sb.inode_table_start, itable, Category::inode);
    dev_.discard(root_block);
    sb_ = sb;
    return sb;
}

void FileSystem::load_after_mount() {
    for (std::uint32_t b = 0; b < sb_.inode_bitmap_blocks; ++b) meta(sb_.inode_bitmap_start + b, Category::bitmap);
    for (std::uint32_t b = 0; b < sb_.block_bitmap_blocks; ++b) meta(sb_.block_bitmap_start + b, Category::bitmap);
    inode(kRootIno);
    auto count_set = [&](std::uint32_t start, std::uint64_t nbits) {
        std::uint64_t set = 0;
        const std::uint64_t per_block = std::uint64_t{sb_.block_size} * 8;
        for (std::uint64_t i = 0; i < nbits; i += 8) {
            const auto& m = meta_.at(static_cast<std::uint32_t>(start + i / per_block));
            auto v = std::to_integer<unsigned>(m.data[(i % per_block) / 8]);
            if (nbits - i < 8) v &= (1u << (nbits - i)) - 1;
            set += static_cast<std::uint64_t>(std::popcount(v));
        }
        return set;
    };
    free_inodes_ = sb_.inode_count - count_set(sb_.inode_bitmap_start, sb_.inode_count);
    free_blocks_ = sb_.total_blocks - count_set(sb_.block_bitmap_start, sb_.total_blocks);
    block_cursor_ = sb_.data_start;
    cache_pages_ = std::max<std::size_t>(16, opts_.cache_bytes / sb_.block_size);
    inode_cursor_ = kRootIno + 1;
}

FsRecoveryReport FileSystem::mount_common(bool replay, const RecoveryReport* dev_report) {
    std::lock_guard lk(mu_);
    if (mounted_) fail(Errc::state_error, "already mounted");
    PageBuf sbpage = dev_.block_read(0, Category::superblock);
    Superblock sb = Superblock::decode(sbpage);
    if (sb.magic != kSuperMagic) fail(Errc::invalid_argument, "no file system on device");
    if (mode_uses_log(opts_.mode) != dev_.log_enabled())
        fail(Errc::invalid_argument, std::string("mode ") + mode_name(opts_.mode) + " does not match the device log setting");
    sb_ = sb;
    meta_.clear();
    inodes_.clear();
    dirs_.clear();
    tm_.reset();
    if (mode_uses_log(opts_.mode)) {
        TxOptions to;
        to.granularity = opts_.conflict_granularity;
        tm_ = std::make_unique<TxManager>(dev_, to, dev_.highest_txid() + 1);
    }

    const std::uint32_t ps = sb_.block_size;
    PageBuf j0 = dev_.block_read(sb_.journal_start, Category::journal);
    PageBuf j1 = dev_.block_read(sb_.journal_start + 1, Category::journal);
    std::uint64_t sb_seq = decode_journal_sb(std::span<const std::byte>(j0).first(kCachelineSize)).value_or(1);
    journal_seq_ = sb_seq;
    if (get_le<std::uint32_t>(j1, 0) == kJournalHeadMagic)
        journal_seq_ = std::max(journal_seq_, get_le<std::uint64_t>(j1, 8) + 1);

    FsRecoveryReport rep;
    if (replay) {
        auto len = journal_image_length(j1, ps);
        if (len && *len <= journal_capacity()) {
            std::vector<std::byte> image(j1.begin(), j1.end());
            auto npages = static_cast<std::uint32_t>((*len + ps - 1) / ps);
            if (npages > 1) {
                std::vector<Lpa> lpas;
                for (std::uint32_t i = 1; i < npages; ++i) lpas.push_back(sb_.journal_start + 1 + i);
                for (auto& pg : dev_.block_read_batch(lpas, Category::journal)) image.insert(image.end(), pg.begin(), pg.end());
            }
            auto rec = decode_journal(image, sb_seq, ps);
            bool ok = rec.has_value();
            if (ok && dev_report && mode_uses_log(opts_.mode) && rec->txid != kNoTx)
                ok = std::find(dev_report->committed.begin(), dev_report->committed.end(), rec->txid) !=
                     dev_report->committed.end();
            if (ok) {
                checkpoint(*rec);
                rep.journal_replayed = true;
                rep.items_replayed = rec->items.size();
                rep.record_seq = rec->seq;
                ++stats_.journal_replays;
                journal_seq_ = std::max(journal_seq_, rec->seq + 1);
                write_journal_sb(journal_seq_);
            }
        }
    }
    load_after_mount();
    mounted_ = true;
    return rep;
}

void FileSystem::mount() { mount_common(false, nullptr); }

FsRecoveryReport FileSystem::mount_recover(const RecoveryReport* dev_report) { return mount_common(true, dev_report); }

void FileSystem::unmount() {
    std::lock_guard lk(mu_);
    check_mounted();
    sync();
    fds_.clear();
    pages_.clear();
    lru_.clear();
    dup_fifo_.clear();
    dup_count_ = 0;
    meta_.clear();
    inodes_.clear();
    dirs_.clear();
    tm_.reset();
    mounted_ = false;
}

std::vector<std::string> FileSystem::split_path(std::string_view path) const {
    if (path.empty() || path.front() != '/') fail(Errc::invalid_argument, "path must be absolute: " + std::string(path));
    std::vector<std::string> parts;
    std::size_t i = 1;
    while (i <= path.size()) {
        std::size_t j = path.find('/', i);
        if (j == std::string_view::npos) j = path.size();
        std::string_view c = path.substr(i, j - i);
        if (c.empty()) {
            if (j != path.size()) fail(Errc::invalid_argument, "empty path component: " + std::string(path));
        } else {
            if (c == "." || c == "..") fail(Errc::invalid_argument, "relative component in " + std::string(path));
            if (c.size() > kMaxNameLen) fail(Errc::invalid_argument, "name too long");
            parts.emplace_back(c);
        }
        i = j + 1;
    }
    return parts;
}

Ino FileSystem::walk(const std::vector<std::string>& parts, std::size_t count) {
    Ino cur = kRootIno;
    for (std::size_t i = 0; i < count; ++i) {
        if (inode(cur).disk.type != FileType::dir) fail(Errc::not_a_directory, parts[i - 1]);
        const DirRef* r = dir_find(dir(cur), parts[i]);
        if (!r) fail(Errc::not_found, parts[i]);
        cur = r->ino;
    }
    return cur;
}

Ino FileSystem::make_node(std::string_view path, FileType type) {
    auto parts = split_path(path);
    if (parts.empty()) fail(Errc::already_exists, "/");
    Ino parent = walk(parts, parts.size() - 1);
    DirInfo& d = dir(parent);
    if (dir_find(d, parts.back())) fail(Errc::already_exists, std::string(path));
    if (free_inodes_ == 0) fail(Errc::space_exhausted, "no free inode");
    require_blocks(type == FileType::dir ? 3 : 2);

    Tx tx;
    Ino ino = alloc_inode(tx);
    InodeInfo info;
    std::uint64_t t = now();
    info.disk.ino = ino;
    info.disk.type = type;
    info.disk.links = type == FileType::dir ? 2 : 1;
    info.disk.mtime = info.disk.ctime = info.disk.atime = t;
    inodes_[ino] = std::move(info);
    InodeInfo& n = inodes_[ino];
    if (type == FileType::dir) {
        std::uint32_t b = alloc_block(tx, 0);
        meta(b, Category::dentry, true);
        n.extents.push_back(Extent{0, b, 1});
        n.disk.size = sb_.block_size;
        DirInfo nd;
        nd.lines.emplace_back(sb_.block_size / kCachelineSize, LineState::empty);
        dirs_[ino] = std::move(nd);
    }
    n.mem_size = n.disk.size;
    n.mem_mtime = n.disk.mtime;
    store_inode(tx, ino, true, true);
    dir_insert(tx, parent, parts.back(), ino, type);
    InodeInfo& p = inode(parent);
    if (type == FileType::dir) ++p.disk.links;
    p.disk.mtime = p.mem_mtime = t;
    p.mem_size = p.disk.size;
    store_inode(tx, parent, true, false);
    commit(tx);
    return ino;
}

void FileSystem::destroy_inode(Tx& tx, Ino ino) {
    InodeInfo& n = inode(ino);
    if (n.disk.type == FileType::file && n.disk.links > 1) {
        --n.disk.links;
        store_inode(tx, ino, true, false);
        return;
    }
    drop_pages(ino);
    for (auto it = fds_.begin(); it != fds_.end();) {
        if (it->second.ino == ino)
            it = fds_.erase(it);
        else
            ++it;
    }
    release_blocks(tx, ino);
    n.disk = Inode{};
    n.mem_size = 0;
    store_inode(tx, ino, true, true);
    free_inode(tx, ino);
}

void FileSystem::remove_node(std::string_view path, FileType type) {
    auto parts = split_path(path);
    if (parts.empty()) fail(Errc::invalid_argument, "cannot remove the root");
    Ino parent = walk(parts, parts.size() - 1);
    DirInfo& d = dir(parent);
    const DirRef* r = dir_find(d, parts.back());
    if (!r) fail(Errc::not_found, std::string(path));
    Ino ino = r->ino;
    FileType actual = inode(ino).disk.type;
    if (type == FileType::file && actual == FileType::dir) fail(Errc::is_a_directory, std::string(path));
    if (type == FileType::dir && actual != FileType::dir) fail(Errc::not_a_directory, std::string(path));
    if (actual == FileType::dir && dir(ino).live != 0) fail(Errc::not_empty, std::string(path));

    Tx tx;
    dir_remove(tx, parent, parts.back());
    destroy_inode(tx, ino);
    InodeInfo& p = inode(parent);
    if (actual == FileType::dir) --p.disk.links;
    p.disk.mtime = p.mem_mtime = now();
    store_inode(tx, parent, true, false);
    commit(tx);
}

bool FileSystem::is_ancestor(Ino maybe_ancestor, const std::vector<std::string>& parts) {
    Ino cur = kRootIno;
    if (cur == maybe_ancestor) return true;
    for (const auto& c : parts) {
        if (inode(cur).disk.type != FileType::dir) return false;
        const DirRef* r = dir_find(dir(cur), c);
        if (!r) return false;
        cur = r->ino;
        if (cur == maybe_ancestor) return true;
    }
    return false;
}

Ino FileSystem::create(std::string_view path) {
    std::lock_guard lk(mu_);
    check_mounted();
    Ino ino = make_node(path, FileType::file);
    enforce_limits();
    return ino;
}

Ino FileSystem::mkdir(std::string_view path) {
    std::lock_guard lk(mu_);
    check_mounted();
    Ino ino = make_node(path, FileType::dir);
    enforce_limits();
    return ino;
}

void FileSystem::unlink(std::string_view path) {
    std::lock_guard lk(mu_);
    check_mounted();
    remove_node(path, FileType::file);
    enforce_limits();
}

void FileSystem::rmdir(std::string_view path) {
    std::lock_guard lk(mu_);
    check_mounted();
    remove_node(path, FileType::dir);
    enforce_limits();
}

void FileSystem::rename(std::string_view from, std::string_view to) {
    std::lock_guard lk(mu_);
    check_mounted();
    auto src = split_path(from);
    auto dst = split_path(to);
    if (src.empty() || dst.empty()) fail(Errc::invalid_argument, "cannot rename the root");
    Ino sp = walk(src, src.size() - 1);
    const DirRef* sr = dir_find(dir(sp), src.back());
    if (!sr) fail(Errc::not_found, std::string(from));
    const Ino ino = sr->ino;
    const FileType type = sr->type;
    Ino dp = walk(dst, dst.size() - 1);
    if (inode(dp).disk.type != FileType::dir) fail(Errc::not_a_directory, std::string(to));
    if (type == FileType::dir && is_ancestor(ino, std::vector<std::string>(dst.begin(), dst.end() - 1)))
        fail(Errc::invalid_argument, "cannot move a directory into itself");
    const DirRef* dr = dir_find(dir(dp), dst.back());
    if (dr && dr->ino == ino) return;
    std::optional<Ino> victim;
    if (dr) {
        FileType vt = dr->type;
        if (type == FileType::dir && vt != FileType::dir) fail(Errc::not_a_directory, std::string(to));
        if (type != FileType::dir && vt == FileType::dir) fail(Errc::is_a_directory, std::string(to));
        if (vt == FileType::dir && dir(dr->ino).live != 0) fail(Errc::not_empty, std::string(to));
        victim = dr->ino;
    }
    require_blocks(2);

    Tx tx;
    std::uint64_t t = now();
    if (victim) {
        dir_remove(tx, dp, dst.back());
        if (inode(*victim).disk.type == FileType::dir) --inode(dp).disk.links;
        destroy_inode(tx, *victim);
    }
    dir_remove(tx, sp, src.back());
    dir_insert(tx, dp, dst.back(), ino, type);
    if (type == FileType::dir && sp != dp) {
        --inode(sp).disk.links;
        ++inode(dp).disk.links;
    }
    for (Ino p : {sp, dp}) {
        InodeInfo& pi = inode(p);
        pi.disk.mtime = pi.mem_mtime = t;
        pi.mem_size = pi.disk.size;
        store_inode(tx, p, true, false);
    }
    commit(tx);
    enforce_limits();
}

Ino FileSystem::lookup(std::string_view path) {
    std::lock_guard lk(mu_);
    check_mounted();
    auto parts = split_path(path);
    Ino ino = walk(parts, parts.size());
    inode(ino);
    return ino;
}

Stat FileSystem::stat(std::string_view path) {
    std::lock_guard lk(mu_);
    check_mounted();
    auto parts = split_path(path);
    Ino ino = walk(parts, parts.size());
    InodeInfo& n = inode(ino);
    return Stat{ino, n.disk.type, n.mem_size, n.disk.links, n.mem_mtime};
}

std::vector<std::pair<std::string, FileType>> FileSystem::readdir(std::string_view path) {
    std::lock_guard lk(mu_);
    check_mounted();
    auto parts = split_path(path);
    Ino ino = walk(parts, parts.size());
    if (inode(ino).disk.type != FileType::dir) fail(Errc::not_a_directory, std::string(path));
    std::vector<std::pair<std::string, FileType>> out;
    for (const auto& [h, refs] : dir(ino).by_hash)
        for (const auto& r : refs) out.emplace_back(r.name, r.type);
    std::sort(out.begin(), out.end());
    return out;
}

} // namespace bytefs
