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

// Firmware write log: a circular 64B-slot region in device DRAM indexed by a
// three-layer structure (partition table -> per-partition skip list keyed
// by LPA -> ordered chunk list per page).

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "bytefs/flash.hpp"
#include "bytefs/skiplist.hpp"
#include "bytefs/txlog.hpp"

namespace bytefs {

inline constexpr std::uint64_t kPartitionBytes = 16 * MiB;

/// Per-slot record kept beside the 64B payload array.
struct SlotSidecar {
    std::uint32_t lpa = 0;
    std::uint8_t block_offset = 0; // cacheline index within the page
    std::uint8_t length = 0;       // payload bytes, 1..64
    std::uint8_t flags = 0;
    std::uint8_t line_offset = 0;  // first byte within the cacheline
    std::uint32_t txid = 0;
    std::uint32_t generation = 0;

    static constexpr std::uint8_t kLive = 0x1;
    // No transaction: `txid` holds the low 32 bits of the commit counter at
    // write time, which places the write between commits during recovery.
    static constexpr std::uint8_t kEpoch = 0x2;
};
static_assert(sizeof(SlotSidecar) == 16);

/// Index record returned by lookups.
struct ChunkEntry {
    std::uint8_t block_offset = 0;
    std::uint32_t log_offset = 0;
    std::uint32_t length = 0;
    std::uint8_t line_offset = 0;
    TxId txid = kNoTx;

    bool operator==(const ChunkEntry&) const = default;
};

struct CleanReport {
    std::uint64_t pages_flushed = 0;
    std::uint64_t entries_flushed = 0;
    std::uint64_t entries_migrated = 0;
    std::uint64_t entries_dropped = 0; // aborted transactions
    std::uint64_t flash_reads = 0;
    std::uint64_t flash_writes = 0;
    std::uint64_t elapsed_ns = 0;
};

struct RecoveryReport {
    std::uint64_t entries_scanned = 0;
    std::uint64_t entries_discarded = 0;
    std::uint64_t entries_flushed = 0;
    std::uint64_t pages_flushed = 0;
    std::uint64_t elapsed_sim_ns = 0;
    std::vector<TxId> committed; // TxLog contents at crash time, in commit order
};

struct LogStats {
    std::uint64_t cleans = 0;
    std::uint64_t pages_flushed = 0;
    std::uint64_t entries_migrated = 0;
    std::uint64_t flash_reads = 0;
    std::uint64_t flash_writes = 0;
    std::uint64_t stall_ns = 0; // foreground time spent waiting on the cleaner
    std::uint64_t background_ns = 0;
};

class WriteLog {
public:
    struct Version {
        std::uint32_t slot = 0;
        std::uint8_t line_offset = 0;
        std::uint8_t length = 0;
        TxId txid = kNoTx;
        std::uint64_t seq = 0;
        std::uint64_t epoch = 0; // commit counter at write time (txid 0 ordering)
        Category category = Category::untagged;
    };
    struct Chunk {
        std::uint8_t block_offset = 0;
        std::vector<Version> versions; // append order
    };
    struct PageNode {
        std::vector<Chunk> chunks; // sorted by block_offset
    };
    using PartitionList = SkipList<Lpa, PageNode>;

    WriteLog(FlashSubstrate& sub, TxLog& txlog);

    void byte_write(std::uint64_t addr, std::span<const std::byte> data, TxId txid, Category cat);
    std::vector<std::byte> byte_read(std::uint64_t addr, std::uint32_t len, Category cat);
    PageBuf block_read(Lpa lpa, Category cat);
    void block_write(Lpa lpa, std::span<const std::byte> data, Category cat);
    /// Batched forms: one channel-parallel flash batch for the whole set.
    std::vector<PageBuf> block_read_batch(std::span<const Lpa> lpas, Category cat);
    void block_write_batch(std::span<const Lpa> lpas, std::span<const PageBuf> pages, Category cat);
    /// Drops every index entry of the page and marks its slots dead.
    void invalidate(Lpa lpa);

    std::vector<ChunkEntry> index_lookup(Lpa lpa, std::optional<std::pair<std::uint8_t, std::uint8_t>> lines = {});
    /// Lookup over an LPA range; split into one lookup per partition.
    std::vector<std::pair<Lpa, std::vector<ChunkEntry>>> index_lookup_range(Lpa first, Lpa last);

    double utilization() const;
    std::uint64_t occupied_bytes() const { return tail_ - head_; }
    std::uint64_t capacity_bytes() const { return capacity_; }
    std::uint64_t free_bytes() const { return capacity_ - occupied_bytes(); }
    std::uint32_t generation() const { return generation_; }
    std::uint64_t head() const { return head_; }
    std::uint64_t tail() const { return tail_; }

    /// Runs one cleaning pass; its flash time is charged to the background
    /// timeline (foreground only waits for a still-running previous pass).
    CleanReport clean();
    /// Full scan of the log after power loss; replays committed entries.
    RecoveryReport recover();
    /// Drops the volatile index (host crash keeps the DRAM log itself).
    void drop_index();

    std::uint64_t background_busy_until() const { return bg_busy_until_; }
    void set_background_busy_until(std::uint64_t t) { bg_busy_until_ = t; }
    const LogStats& stats() const { return stats_; }

    std::uint64_t live_entries() const;
    std::uint64_t index_memory_bytes() const;
    /// Empty when every index entry dereferences to a matching live slot.
    std::vector<std::string> verify_index() const;

    // Persistence helpers for the device image.
    const SlotSidecar& sidecar(std::uint32_t slot) const { return sidecars_[slot]; }
    std::span<const std::byte> slot_payload(std::uint32_t slot) const;
    struct IndexRecord {
        Lpa lpa;
        std::uint8_t block_offset;
        Version v;
    };
    std::vector<IndexRecord> export_index() const;
    void restore(std::uint64_t head, std::uint64_t tail, std::uint32_t generation, std::uint64_t next_seq,
                 const std::vector<std::pair<std::uint32_t, std::pair<SlotSidecar, std::vector<std::byte>>>>& slots,
                 const std::vector<IndexRecord>& index);
    std::uint64_t next_seq() const { return next_seq_; }

private:
    PartitionList& partition(Lpa lpa);
    PartitionList* partition_if(Lpa lpa) const;
    PageNode* find_node(Lpa lpa);
    std::uint32_t append_slot(const SlotSidecar& sc, std::span<const std::byte> payload);
    bool version_live(const Version& v) const;
    bool version_committed(const Version& v) const;
    std::pair<std::uint64_t, std::uint64_t> commit_key(const Version& v) const;
    void overlay(Lpa lpa, const PageNode& node, std::span<std::byte> page, std::uint32_t from, std::uint32_t to) const;
    void ensure_space(std::uint64_t bytes);
    void maybe_trigger_clean();

    FlashSubstrate& sub_;
    TxLog& txlog_;
    std::uint64_t capacity_;
    std::uint32_t page_size_;
    std::vector<std::byte> region_;
    std::vector<SlotSidecar> sidecars_;
    std::uint64_t head_ = 0; // virtual offsets; physical = v % capacity
    std::uint64_t tail_ = 0;
    std::uint32_t generation_ = 0;
    std::uint64_t next_seq_ = 0;
    std::vector<std::unique_ptr<PartitionList>> partitions_;
    std::uint64_t bg_busy_until_ = 0;
    LogStats stats_;
};

} // namespace bytefs
