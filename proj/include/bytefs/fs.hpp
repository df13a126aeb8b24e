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

// ByteFS: metadata on the byte interface, data through a host page cache
// with per-page interface selection, crash consistency through device
// transactions or a journal depending on the mode.

#include <cstdint>
#include <list>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "bytefs/device.hpp"
#include "bytefs/journal.hpp"
#include "bytefs/layout.hpp"
#include "bytefs/txn.hpp"

namespace bytefs {

/// block_only: ext4-like baseline. dual: byte-path metadata over a
/// log-less device. dual_log: dual plus firmware log. full: dual_log
/// plus byte/block selection for file data.
enum class FsMode { block_only, dual, dual_log, full };
enum class JournalMode { ordered, data };

const char* mode_name(FsMode m) noexcept;
std::optional<FsMode> parse_mode(std::string_view s) noexcept;
/// Whether the mode expects the device write log.
bool mode_uses_log(FsMode m) noexcept;

struct MountOptions {
    FsMode mode = FsMode::full;
    JournalMode journal = JournalMode::ordered;
    std::uint64_t cache_bytes = 8 * GiB;
    LockGranularity conflict_granularity = LockGranularity::cacheline;
};

struct OpenFlags {
    bool create = false;
    bool direct = false;
};

using Fd = int;

struct Stat {
    Ino ino = 0;
    FileType type = FileType::none;
    std::uint64_t size = 0;
    std::uint32_t links = 0;
    std::uint64_t mtime = 0;
};

enum class WriteInterface { none, byte, block };

struct WritebackDecision {
    WriteInterface iface = WriteInterface::none;
    std::vector<std::uint32_t> dirty_lines;
};

/// XOR of the cached page against its duplicate at 64B granularity;
/// byte path iff fewer than 1/8 of the lines changed.
WritebackDecision choose_writeback(std::span<const std::byte> current, std::span<const std::byte> original);

/// Direct I/O of at most this many bytes uses the byte interface.
inline constexpr std::uint64_t kDirectByteLimit = 512;

struct FsStats {
    std::uint64_t transactions = 0;
    std::uint64_t journal_records = 0;
    std::uint64_t byte_writebacks = 0;
    std::uint64_t block_writebacks = 0;
    std::uint64_t clean_writebacks = 0; // dirty flag set but no line changed
    std::uint64_t direct_byte_ops = 0;
    std::uint64_t direct_block_ops = 0;
    std::uint64_t evictions = 0;
    std::uint64_t forced_dup_writebacks = 0;
    std::uint64_t dup_pages_peak = 0;
    std::uint64_t split_flushes = 0;
    std::uint64_t journal_replays = 0;
};

struct FsRecoveryReport {
    bool journal_replayed = false;
    std::uint64_t items_replayed = 0;
    std::uint64_t record_seq = 0;
};

struct FsckViolation {
    std::string kind;
    std::string detail;
};

/// Offline consistency check of the durable image (reads through the
/// device, bypassing any mounted cache).
std::vector<FsckViolation> fsck(Device& dev);

class FileSystem {
public:
    explicit FileSystem(Device& dev, MountOptions opts = {});
    ~FileSystem();
    FileSystem(const FileSystem&) = delete;
    FileSystem& operator=(const FileSystem&) = delete;

    void set_mode(FsMode m);
    FsMode mode() const { return opts_.mode; }
    const MountOptions& options() const { return opts_; }

    Superblock mkfs(const MkfsParams& p = {});
    void mount();
    /// Mount after a crash: replays a committed journal record. `dev_report`
    /// is the device recovery result (log modes check TxIDs against it).
    FsRecoveryReport mount_recover(const RecoveryReport* dev_report = nullptr);
    /// Writes back everything and drops host state.
    void unmount();
    bool mounted() const { return mounted_; }

    Ino create(std::string_view path);
    Ino mkdir(std::string_view path);
    void unlink(std::string_view path);
    void rmdir(std::string_view path);
    void rename(std::string_view from, std::string_view to);
    Ino lookup(std::string_view path);
    Stat stat(std::string_view path);
    std::vector<std::pair<std::string, FileType>> readdir(std::string_view path);

    Fd open(std::string_view path, OpenFlags flags = {});
    void close(Fd fd);
    std::vector<std::byte> read(Fd fd, std::uint64_t offset, std::uint64_t len);
    void write(Fd fd, std::uint64_t offset, std::span<const std::byte> data);
    void fsync(Fd fd);
    void fdatasync(Fd fd);
    void sync();

    const FsStats& stats() const { return stats_; }
    const Superblock& superblock() const { return sb_; }
    Device& device() { return dev_; }
    WriteInterface last_writeback() const { return last_writeback_; }
    WriteInterface last_direct() const { return last_direct_; }
    std::size_t cached_pages() const { return pages_.size(); }
    std::size_t dup_pages() const { return dup_count_; }

private:
    struct MetaBlock {
        PageBuf data;
        Category cat = Category::untagged;
    };
    struct Tx {
        std::map<std::uint64_t, Category> lines; // device line address -> tag
        std::vector<std::pair<Lpa, PageBuf>> data_blocks;
        std::vector<std::pair<std::uint64_t, std::vector<std::byte>>> data_bytes;
        bool empty() const { return lines.empty() && data_blocks.empty() && data_bytes.empty(); }
    };
    struct InodeInfo {
        Inode disk;
        std::vector<Extent> extents;
        std::uint64_t mem_size = 0;
        std::uint64_t mem_mtime = 0;
        std::set<std::uint64_t> dirty_pages;
        std::set<std::uint64_t> cached;
    };
    struct DirRef {
        std::string name;
        Ino ino = 0;
        FileType type = FileType::none;
        std::uint32_t block_index = 0;
        std::uint32_t line = 0;
        std::uint32_t lines = 1;
    };
    enum class LineState : std::uint8_t { empty, used, dead_head, dead_body };
    struct DirInfo {
        std::unordered_map<std::uint64_t, std::vector<DirRef>> by_hash;
        std::vector<std::vector<LineState>> lines; // per directory block
        std::map<std::pair<std::uint32_t, std::uint32_t>, std::uint32_t> dead_spans; // (block, line) -> lines
        std::uint64_t live = 0;
    };
    struct PageKey {
        Ino ino;
        std::uint64_t page;
        bool operator==(const PageKey&) const = default;
    };
    struct PageKeyHash {
        std::size_t operator()(const PageKey& k) const noexcept {
            return std::hash<std::uint64_t>()((std::uint64_t{k.ino} << 40) ^ k.page);
        }
    };
    struct CachedPage {
        PageBuf data;
        std::optional<PageBuf> dup;
        bool dirty = false;
        std::list<PageKey>::iterator lru;
    };
    struct OpenFile {
        Ino ino = 0;
        bool direct = false;
    };

    // Metadata cache and allocation (fs_meta.cpp).
    /// Cached metadata block; `fresh` installs a zero page without a read.
    MetaBlock& meta(std::uint32_t block, Category cat, bool fresh = false);
    void mark(Tx& tx, std::uint64_t addr, std::uint32_t len, Category cat);
    std::uint32_t alloc_block(Tx& tx, std::uint32_t hint);
    void free_block(Tx& tx, std::uint32_t block);
    Ino alloc_inode(Tx& tx);
    void free_inode(Tx& tx, Ino ino);
    void set_bit(Tx& tx, std::uint32_t bitmap_start, std::uint64_t bit, bool value);
    bool test_bit(std::uint32_t bitmap_start, std::uint64_t bit);
    void require_blocks(std::uint64_t n) const;

    InodeInfo& inode(Ino ino);
    void store_inode(Tx& tx, Ino ino, bool lower, bool upper, Category upper_cat = Category::inode);
    std::optional<std::uint32_t> map_block(const InodeInfo& info, std::uint64_t file_block) const;
    void add_mapping(Tx& tx, Ino ino, std::uint64_t file_block, std::uint32_t lba);
    void release_blocks(Tx& tx, Ino ino);

    DirInfo& dir(Ino ino);
    const DirRef* dir_find(DirInfo& d, std::string_view name);
    void dir_insert(Tx& tx, Ino dir_ino, const std::string& name, Ino child, FileType type);
    void dir_remove(Tx& tx, Ino dir_ino, std::string_view name);

    void commit(Tx& tx);
    void commit_journaled(Tx& tx, bool byte_journal);
    void write_journal(const JournalRecord& rec, TxId txid);
    void checkpoint(const JournalRecord& rec);
    void write_journal_sb(std::uint64_t seq);
    std::uint64_t journal_capacity() const;

    // Namespace helpers (fs_ns.cpp).
    std::vector<std::string> split_path(std::string_view path) const;
    Ino walk(const std::vector<std::string>& parts, std::size_t count);
    Ino make_node(std::string_view path, FileType type);
    void remove_node(std::string_view path, FileType type);
    /// Drops one link; frees blocks and the inode when none remain.
    void destroy_inode(Tx& tx, Ino ino);
    std::uint32_t mode_flags() const;
    bool is_ancestor(Ino maybe_ancestor, const std::vector<std::string>& parts);
    void load_after_mount();
    FsRecoveryReport mount_common(bool replay, const RecoveryReport* dev_report);

    // Data path (fs_data.cpp).
    OpenFile& handle(Fd fd);
    CachedPage& page(Ino ino, std::uint64_t idx, bool will_overwrite);
    void touch(CachedPage& p, const PageKey& key);
    void flush_inode(Ino ino, bool datasync);
    void flush_chunk(Ino ino, const std::vector<std::uint64_t>& idxs, std::uint64_t size, bool last, bool datasync);
    void release_dup(CachedPage& p);
    void drop_pages(Ino ino);
    void enforce_limits();
    void direct_write(Ino ino, std::uint64_t offset, std::span<const std::byte> data);
    std::vector<std::byte> direct_read(Ino ino, std::uint64_t offset, std::uint64_t len);
    std::uint64_t now();
    void check_mounted() const;

    Device& dev_;
    MountOptions opts_;
    std::recursive_mutex mu_;
    bool mounted_ = false;
    Superblock sb_;
    std::unique_ptr<TxManager> tm_;
    std::unordered_map<std::uint32_t, MetaBlock> meta_;
    std::unordered_map<Ino, InodeInfo> inodes_;
    std::unordered_map<Ino, DirInfo> dirs_;
    std::uint64_t free_blocks_ = 0;
    std::uint64_t free_inodes_ = 0;
    std::uint64_t block_cursor_ = 0;
    std::uint64_t inode_cursor_ = 0;
    std::uint64_t journal_seq_ = 1;

    std::unordered_map<PageKey, CachedPage, PageKeyHash> pages_;
    std::list<PageKey> lru_;
    std::list<PageKey> dup_fifo_;
    std::size_t dup_count_ = 0;
    std::size_t cache_pages_ = 0;

    std::unordered_map<Fd, OpenFile> fds_;
    Fd next_fd_ = 3;

    FsStats stats_;
    WriteInterface last_writeback_ = WriteInterface::none;
    WriteInterface last_direct_ = WriteInterface::none;
};

} // namespace bytefs
