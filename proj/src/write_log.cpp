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
#include "bytefs/write_log.hpp"

#include <algorithm>
#include <cstring>
#include <map>

#include "bytefs/error.hpp"

namespace bytefs {

namespace {

constexpr std::uint64_t kUncommittedKey = ~0ull;

} // namespace

WriteLog::WriteLog(FlashSubstrate& sub, TxLog& txlog)
    : sub_(sub),
      txlog_(txlog),
      capacity_(sub.config().log_region_bytes),
      page_size_(sub.config().page_size),
      region_(sub.config().log_region_bytes),
      sidecars_(sub.config().log_region_bytes / kCachelineSize) {
    std::uint64_t space = sub.config().capacity_bytes;
    partitions_.resize((space + kPartitionBytes - 1) / kPartitionBytes);
}

WriteLog::PartitionList& WriteLog::partition(Lpa lpa) {
    auto idx = static_cast<std::size_t>(std::uint64_t{lpa} * page_size_ / kPartitionBytes);
    auto& p = partitions_.at(idx);
    if (!p) p = std::make_unique<PartitionList>(0x5bd1e995ull + idx);
    return *p;
}

WriteLog::PartitionList* WriteLog::partition_if(Lpa lpa) const {
    auto idx = static_cast<std::size_t>(std::uint64_t{lpa} * page_size_ / kPartitionBytes);
    if (idx >= partitions_.size()) return nullptr;
    return partitions_[idx].get();
}

WriteLog::PageNode* WriteLog::find_node(Lpa lpa) {
    auto* p = partition_if(lpa);
    return p ? p->find(lpa) : nullptr;
}

std::span<const std::byte> WriteLog::slot_payload(std::uint32_t slot) const {
    return {region_.data() + std::uint64_t{slot} * kCachelineSize, kCachelineSize};
}

std::uint32_t WriteLog::append_slot(const SlotSidecar& sc, std::span<const std::byte> payload) {
    std::uint64_t phys = tail_ % capacity_;
    auto slot = static_cast<std::uint32_t>(phys / kCachelineSize);
    std::byte* dst = region_.data() + phys;
    std::memset(dst, 0, kCachelineSize);
    std::memcpy(dst, payload.data(), payload.size());
    sidecars_[slot] = sc;
    tail_ += kCachelineSize;
    return slot;
}

double WriteLog::utilization() const {
    return static_cast<double>(occupied_bytes()) / static_cast<double>(capacity_);
}

bool WriteLog::version_live(const Version& v) const { return v.txid == kNoTx || !txlog_.aborted(v.txid); }

bool WriteLog::version_committed(const Version& v) const { return v.txid == kNoTx || txlog_.contains(v.txid); }

// Read-view order: committed versions in commit order (a txid-0 write sits
// between the commits that surround it), then uncommitted ones in append
// order. This equals the flash image produced by cleaning plus the
// migrated entries, so reads are stable across a clean.
std::pair<std::uint64_t, std::uint64_t> WriteLog::commit_key(const Version& v) const {
    if (v.txid == kNoTx) return {v.epoch, v.seq};
    if (auto s = txlog_.commit_seq(v.txid)) return {2 * *s + 1, v.seq};
    return {kUncommittedKey, v.seq};
}

void WriteLog::overlay(Lpa, const PageNode& node, std::span<std::byte> page, std::uint32_t from,
                       std::uint32_t to) const {
    std::vector<std::pair<std::pair<std::uint64_t, std::uint64_t>, const Version*>> vs;
    vs.reserve(node.chunks.size());
    for (const auto& c : node.chunks) {
        std::uint32_t base = std::uint32_t{c.block_offset} * kCachelineSize;
        if (base >= to || base + kCachelineSize <= from) continue;
        for (const auto& v : c.versions) {
            if (!version_live(v)) continue;
            vs.emplace_back(commit_key(v), &v);
        }
    }
    std::sort(vs.begin(), vs.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    for (const auto& [key, v] : vs) {
        const auto& sc = sidecars_[v->slot];
        std::uint32_t start = std::uint32_t{sc.block_offset} * kCachelineSize + v->line_offset;
        std::memcpy(page.data() + start, region_.data() + std::uint64_t{v->slot} * kCachelineSize, v->length);
    }
}

void WriteLog::ensure_space(std::uint64_t bytes) {
    if (bytes > capacity_) fail(Errc::back_pressure, "write larger than the log region");
    if (free_bytes() >= bytes) return;
    clean();
    // The freed region is reusable only once the flush has finished.
    auto& clk = sub_.clock();
    if (bg_busy_until_ > clk.now()) {
        stats_.stall_ns += bg_busy_until_ - clk.now();
        clk.advance_to(bg_busy_until_);
    }
    if (free_bytes() < bytes) fail(Errc::back_pressure, "log full of uncommitted entries");
}

void WriteLog::maybe_trigger_clean() {
    if (utilization() > sub_.config().clean_threshold) clean();
}

void WriteLog::byte_write(std::uint64_t addr, std::span<const std::byte> data, TxId txid, Category cat) {
    if (data.empty()) fail(Errc::invalid_argument, "empty byte write");
    auto lpa = static_cast<Lpa>(addr / page_size_);
    if (addr / page_size_ >= sub_.config().page_count()) fail(Errc::address_fault, "byte write beyond capacity");
    auto off = static_cast<std::uint32_t>(addr % page_size_);
    if (off + data.size() > page_size_) fail(Errc::invalid_argument, "byte write crosses a page boundary");

    std::uint32_t pieces = 0;
    for (std::uint32_t o = off; o < off + data.size(); o = (o / kCachelineSize + 1) * kCachelineSize) ++pieces;
    ensure_space(std::uint64_t{pieces} * kCachelineSize);

    PageNode& node = *partition(lpa).insert(lpa, PageNode{}).first;
    std::uint32_t o = off;
    std::size_t consumed = 0;
    while (consumed < data.size()) {
        auto line = static_cast<std::uint8_t>(o / kCachelineSize);
        auto lo = static_cast<std::uint8_t>(o % kCachelineSize);
        auto n = static_cast<std::uint32_t>(std::min<std::size_t>(kCachelineSize - lo, data.size() - consumed));
        SlotSidecar sc{lpa, line, static_cast<std::uint8_t>(n), SlotSidecar::kLive, lo, txid, generation_};
        if (txid == kNoTx) {
            sc.flags |= SlotSidecar::kEpoch;
            sc.txid = static_cast<std::uint32_t>(txlog_.commit_counter());
        }
        std::uint32_t slot = append_slot(sc, data.subspan(consumed, n));
        Version v{slot, lo, static_cast<std::uint8_t>(n), txid, next_seq_++, 2 * txlog_.commit_counter(), cat};
        auto it = std::lower_bound(node.chunks.begin(), node.chunks.end(), line,
                                   [](const Chunk& c, std::uint8_t l) { return c.block_offset < l; });
        if (it == node.chunks.end() || it->block_offset != line) it = node.chunks.insert(it, Chunk{line, {}});
        it->versions.push_back(v);
        consumed += n;
        o += n;
    }

    auto& ctr = sub_.counters();
    sub_.clock().advance(std::uint64_t{pieces} * sub_.config().cacheline_write_latency_ns);
    ctr.host_to_ssd[cat] += std::uint64_t{pieces} * kCachelineSize;
    ctr.byte_write_bytes += std::uint64_t{pieces} * kCachelineSize;
    ++ctr.byte_write_ops;
    maybe_trigger_clean();
}

std::vector<std::byte> WriteLog::byte_read(std::uint64_t addr, std::uint32_t len, Category cat) {
    if (len == 0) fail(Errc::invalid_argument, "empty byte read");
    if (addr / page_size_ >= sub_.config().page_count()) fail(Errc::address_fault, "byte read beyond capacity");
    auto lpa = static_cast<Lpa>(addr / page_size_);
    auto off = static_cast<std::uint32_t>(addr % page_size_);
    if (off + len > page_size_) fail(Errc::address_fault, "byte read crosses a page boundary");
    std::uint32_t lines = (off + len - 1) / kCachelineSize - off / kCachelineSize + 1;

    PageBuf page(page_size_, std::byte{0});
    bool covered = false;
    PageNode* node = find_node(lpa);
    if (node) {
        std::vector<bool> cov(len, false);
        for (const auto& c : node->chunks)
            for (const auto& v : c.versions) {
                if (!version_live(v)) continue;
                std::uint32_t s = std::uint32_t{c.block_offset} * kCachelineSize + v.line_offset;
                for (std::uint32_t b = std::max(s, off); b < std::min(s + v.length, off + len); ++b) cov[b - off] = true;
            }
        covered = std::all_of(cov.begin(), cov.end(), [](bool b) { return b; });
    }
    auto& clk = sub_.clock();
    if (!covered) {
        std::vector<PageBuf> out;
        FlashRequest req{lpa, cat};
        clk.advance(sub_.read_batch({&req, 1}, out));
        page = std::move(out[0]);
    } else {
        clk.advance(std::uint64_t{lines} * sub_.config().cacheline_read_latency_ns);
    }
    if (node) overlay(lpa, *node, page, off, off + len);
    auto& ctr = sub_.counters();
    ctr.ssd_to_host[cat] += std::uint64_t{lines} * kCachelineSize;
    ++ctr.byte_read_ops;
    return {page.begin() + off, page.begin() + off + len};
}

PageBuf WriteLog::block_read(Lpa lpa, Category cat) { return std::move(block_read_batch({&lpa, 1}, cat)[0]); }

std::vector<PageBuf> WriteLog::block_read_batch(std::span<const Lpa> lpas, Category cat) {
    std::vector<FlashRequest> reqs;
    for (Lpa lpa : lpas) {
        sub_.check_lpa(lpa);
        reqs.push_back({lpa, cat});
    }
    std::vector<PageBuf> out;
    sub_.clock().advance(sub_.read_batch(reqs, out));
    for (std::size_t i = 0; i < lpas.size(); ++i)
        if (PageNode* node = find_node(lpas[i])) overlay(lpas[i], *node, out[i], 0, page_size_);
    auto& ctr = sub_.counters();
    ctr.ssd_to_host[cat] += std::uint64_t{page_size_} * lpas.size();
    ctr.block_read_ops += lpas.size();
    return out;
}

void WriteLog::invalidate(Lpa lpa) {
    auto* p = partition_if(lpa);
    if (!p) return;
    PageNode* node = p->find(lpa);
    if (!node) return;
    for (const auto& c : node->chunks)
        for (const auto& v : c.versions) sidecars_[v.slot].flags &= static_cast<std::uint8_t>(~SlotSidecar::kLive);
    p->erase(lpa);
}

void WriteLog::block_write(Lpa lpa, std::span<const std::byte> data, Category cat) {
    if (data.size() != page_size_) fail(Errc::invalid_argument, "block write must be exactly one page");
    PageBuf buf(data.begin(), data.end());
    block_write_batch({&lpa, 1}, {&buf, 1}, cat);
}

void WriteLog::block_write_batch(std::span<const Lpa> lpas, std::span<const PageBuf> pages, Category cat) {
    if (lpas.size() != pages.size()) fail(Errc::invalid_argument, "block batch size mismatch");
    std::vector<FlashRequest> reqs;
    for (std::size_t i = 0; i < lpas.size(); ++i) {
        if (pages[i].size() != page_size_) fail(Errc::invalid_argument, "block write must be exactly one page");
        sub_.check_lpa(lpas[i]);
        reqs.push_back({lpas[i], cat});
    }
    for (Lpa lpa : lpas) invalidate(lpa);
    sub_.clock().advance(sub_.write_batch(reqs, pages));
    auto& ctr = sub_.counters();
    ctr.host_to_ssd[cat] += std::uint64_t{page_size_} * lpas.size();
    ctr.block_write_ops += lpas.size();
}

std::vector<ChunkEntry> WriteLog::index_lookup(Lpa lpa, std::optional<std::pair<std::uint8_t, std::uint8_t>> lines) {
    std::vector<ChunkEntry> out;
    PageNode* node = find_node(lpa);
    if (!node) return out;
    for (const auto& c : node->chunks) {
        if (lines && (c.block_offset < lines->first || c.block_offset > lines->second)) continue;
        for (const auto& v : c.versions) {
            if (!version_live(v)) continue;
            out.push_back(ChunkEntry{c.block_offset, v.slot * kCachelineSize, v.length, v.line_offset, v.txid});
        }
    }
    return out;
}

std::vector<std::pair<Lpa, std::vector<ChunkEntry>>> WriteLog::index_lookup_range(Lpa first, Lpa last) {
    std::vector<std::pair<Lpa, std::vector<ChunkEntry>>> out;
    if (first > last) return out;
    std::uint64_t lpas_per_partition = kPartitionBytes / page_size_;
    for (std::uint64_t p = first / lpas_per_partition; p <= last / lpas_per_partition && p < partitions_.size(); ++p) {
        auto* list = partitions_[p].get();
        if (!list) continue;
        for (auto it = list->lower_bound(first); it != list->end() && it.key() <= last; ++it) {
            auto entries = index_lookup(it.key());
            if (!entries.empty()) out.emplace_back(it.key(), std::move(entries));
        }
    }
    return out;
}

CleanReport WriteLog::clean() {
    CleanReport r;
    auto& clk = sub_.clock();
    if (bg_busy_until_ > clk.now()) {
        // Double buffering holds one draining generation at a time.
        stats_.stall_ns += bg_busy_until_ - clk.now();
        clk.advance_to(bg_busy_until_);
    }
    if (occupied_bytes() == 0) return r;

    std::uint64_t to_migrate = 0;
    for (const auto& p : partitions_) {
        if (!p) continue;
        for (auto it = p->begin(); it != p->end(); ++it)
            for (const auto& c : it.value().chunks)
                for (const auto& v : c.versions)
                    if (version_live(v) && !version_committed(v)) ++to_migrate;
    }
    if (to_migrate * kCachelineSize > free_bytes())
        fail(Errc::back_pressure, "no room to migrate uncommitted entries");

    const std::uint64_t old_tail = tail_;
    ++generation_;
    const std::size_t wb_slots = std::max<std::uint64_t>(1, sub_.config().write_buffer_bytes / page_size_);

    struct Pending {
        Lpa lpa;
        std::vector<Version> committed;
        bool partial;
        Category cat;
    };
    std::vector<Pending> pending;
    std::uint64_t cost = 0;

    auto buffer_write = [&] {
        if (pending.empty()) return;
        std::vector<FlashRequest> rreq;
        for (const auto& pg : pending)
            if (pg.partial) rreq.push_back({pg.lpa, pg.cat});
        std::vector<PageBuf> loaded;
        if (!rreq.empty()) cost += sub_.read_batch(rreq, loaded);
        r.flash_reads += rreq.size();
        std::vector<FlashRequest> wreq;
        std::vector<PageBuf> bufs;
        std::size_t li = 0;
        for (const auto& pg : pending) {
            PageBuf buf = pg.partial ? std::move(loaded[li++]) : PageBuf(page_size_, std::byte{0});
            for (const auto& v : pg.committed) {
                const auto& sc = sidecars_[v.slot];
                std::uint32_t start = std::uint32_t{sc.block_offset} * kCachelineSize + v.line_offset;
                std::memcpy(buf.data() + start, region_.data() + std::uint64_t{v.slot} * kCachelineSize, v.length);
                ++r.entries_flushed;
            }
            wreq.push_back({pg.lpa, pg.cat});
            bufs.push_back(std::move(buf));
        }
        cost += sub_.write_batch(wreq, bufs);
        r.flash_writes += wreq.size();
        r.pages_flushed += wreq.size();
        pending.clear();
    };

    std::vector<Lpa> emptied;
    for (auto& p : partitions_) {
        if (!p) continue;
        for (auto it = p->begin(); it != p->end(); ++it) {
            Lpa lpa = it.key();
            PageNode& node = it.value();
            Pending pg{lpa, {}, false, Category::untagged};
            for (auto& c : node.chunks) {
                std::vector<Version> keep;
                for (auto& v : c.versions) {
                    if (!version_live(v)) {
                        ++r.entries_dropped;
                    } else if (version_committed(v)) {
                        pg.committed.push_back(v);
                    } else {
                        SlotSidecar sc = sidecars_[v.slot];
                        sc.generation = generation_;
                        sidecars_[v.slot].flags &= static_cast<std::uint8_t>(~SlotSidecar::kLive);
                        Version moved = v;
                        moved.slot = append_slot(sc, slot_payload(v.slot).first(v.length));
                        keep.push_back(moved);
                        ++r.entries_migrated;
                    }
                }
                c.versions = std::move(keep);
            }
            std::erase_if(node.chunks, [](const Chunk& c) { return c.versions.empty(); });
            if (node.chunks.empty()) emptied.push_back(lpa);
            if (pg.committed.empty()) continue;
            std::sort(pg.committed.begin(), pg.committed.end(),
                      [&](const Version& a, const Version& b) { return commit_key(a) < commit_key(b); });
            std::vector<bool> cov(page_size_, false);
            for (const auto& v : pg.committed) {
                std::uint32_t s = std::uint32_t{sidecars_[v.slot].block_offset} * kCachelineSize + v.line_offset;
                std::fill(cov.begin() + s, cov.begin() + s + v.length, true);
            }
            pg.partial = !std::all_of(cov.begin(), cov.end(), [](bool b) { return b; });
            pg.cat = pg.committed.back().category;
            pending.push_back(std::move(pg));
            if (pending.size() >= wb_slots) buffer_write();
        }
    }
    buffer_write();
    for (Lpa lpa : emptied) partition(lpa).erase(lpa);

    head_ = old_tail;
    txlog_.clear();
    txlog_.clear_aborted();

    r.elapsed_ns = cost;
    bg_busy_until_ = clk.now() + cost;
    ++stats_.cleans;
    stats_.pages_flushed += r.pages_flushed;
    stats_.entries_migrated += r.entries_migrated;
    stats_.flash_reads += r.flash_reads;
    stats_.flash_writes += r.flash_writes;
    stats_.background_ns += cost;
    return r;
}

RecoveryReport WriteLog::recover() {
    RecoveryReport r;
    r.committed = txlog_.entries();
    auto& clk = sub_.clock();
    const std::uint64_t start = clk.now();

    struct Item {
        std::uint64_t rank;
        std::uint64_t pos;
        std::uint32_t slot;
    };
    std::map<Lpa, std::vector<Item>> pages;
    for (std::uint64_t v = head_; v < tail_; v += kCachelineSize) {
        auto slot = static_cast<std::uint32_t>((v % capacity_) / kCachelineSize);
        const SlotSidecar& sc = sidecars_[slot];
        if (!(sc.flags & SlotSidecar::kLive)) continue;
        ++r.entries_scanned;
        // Same order as the read view: plain writes at 2 * epoch, committed
        // transactions at 2 * commit_seq + 1.
        std::uint64_t rank = 0;
        if (sc.flags & SlotSidecar::kEpoch) {
            const std::uint64_t cc = txlog_.commit_counter();
            rank = 2 * (cc - static_cast<std::uint32_t>(static_cast<std::uint32_t>(cc) - sc.txid));
        } else {
            auto seq = txlog_.commit_seq(sc.txid);
            if (!seq) {
                ++r.entries_discarded;
                continue;
            }
            rank = 2 * *seq + 1;
        }
        pages[sc.lpa].push_back(Item{rank, v, slot});
    }

    const std::size_t wb_slots = std::max<std::uint64_t>(1, sub_.config().write_buffer_bytes / page_size_);
    std::uint64_t cost = 0;
    std::vector<std::pair<Lpa, std::vector<Item>*>> batch;
    auto flush = [&] {
        if (batch.empty()) return;
        std::vector<FlashRequest> rreq;
        std::vector<bool> partial(batch.size());
        for (std::size_t i = 0; i < batch.size(); ++i) {
            std::vector<bool> cov(page_size_, false);
            for (const auto& it : *batch[i].second) {
                const auto& sc = sidecars_[it.slot];
                std::uint32_t s = std::uint32_t{sc.block_offset} * kCachelineSize + sc.line_offset;
                std::fill(cov.begin() + s, cov.begin() + s + sc.length, true);
            }
            partial[i] = !std::all_of(cov.begin(), cov.end(), [](bool b) { return b; });
            if (partial[i]) rreq.push_back({batch[i].first, Category::untagged});
        }
        std::vector<PageBuf> loaded;
        if (!rreq.empty()) cost += sub_.read_batch(rreq, loaded);
        std::vector<FlashRequest> wreq;
        std::vector<PageBuf> bufs;
        std::size_t li = 0;
        for (std::size_t i = 0; i < batch.size(); ++i) {
            PageBuf buf = partial[i] ? std::move(loaded[li++]) : PageBuf(page_size_, std::byte{0});
            for (const auto& it : *batch[i].second) {
                const auto& sc = sidecars_[it.slot];
                std::uint32_t s = std::uint32_t{sc.block_offset} * kCachelineSize + sc.line_offset;
                std::memcpy(buf.data() + s, region_.data() + std::uint64_t{it.slot} * kCachelineSize, sc.length);
                ++r.entries_flushed;
            }
            wreq.push_back({batch[i].first, Category::untagged});
            bufs.push_back(std::move(buf));
        }
        cost += sub_.write_batch(wreq, bufs);
        r.pages_flushed += wreq.size();
        batch.clear();
    };
    for (auto& [lpa, items] : pages) {
        std::sort(items.begin(), items.end(),
                  [](const Item& a, const Item& b) { return a.rank != b.rank ? a.rank < b.rank : a.pos < b.pos; });
        batch.emplace_back(lpa, &items);
        if (batch.size() >= wb_slots) flush();
    }
    flush();

    clk.advance(cost);
    head_ = tail_;
    drop_index();
    txlog_.clear();
    txlog_.clear_aborted();
    r.elapsed_sim_ns = clk.now() - start;
    return r;
}

void WriteLog::drop_index() {
    for (auto& p : partitions_) p.reset();
}

std::uint64_t WriteLog::live_entries() const {
    std::uint64_t n = 0;
    for (const auto& p : partitions_) {
        if (!p) continue;
        for (auto it = p->begin(); it != p->end(); ++it)
            for (const auto& c : it.value().chunks) n += c.versions.size();
    }
    return n;
}

std::uint64_t WriteLog::index_memory_bytes() const {
    std::uint64_t bytes = partitions_.size() * sizeof(void*);
    for (const auto& p : partitions_) {
        if (!p) continue;
        bytes += p->memory_bytes();
        for (auto it = p->begin(); it != p->end(); ++it)
            for (const auto& c : it.value().chunks) bytes += sizeof(Chunk) + c.versions.size() * sizeof(Version);
    }
    return bytes;
}

std::vector<std::string> WriteLog::verify_index() const {
    std::vector<std::string> bad;
    for (const auto& p : partitions_) {
        if (!p) continue;
        for (auto it = p->begin(); it != p->end(); ++it) {
            std::uint8_t prev = 0;
            bool first = true;
            for (const auto& c : it.value().chunks) {
                if (!first && c.block_offset <= prev) bad.push_back("chunk list unsorted at lpa " + std::to_string(it.key()));
                prev = c.block_offset;
                first = false;
                for (const auto& v : c.versions) {
                    const auto& sc = sidecars_[v.slot];
                    std::uint64_t phys = std::uint64_t{v.slot} * kCachelineSize;
                    std::uint64_t rel = (phys + capacity_ - head_ % capacity_) % capacity_;
                    if (sc.lpa != it.key() || sc.block_offset != c.block_offset || !(sc.flags & SlotSidecar::kLive) ||
                        rel >= occupied_bytes())
                        bad.push_back("stale chunk entry at lpa " + std::to_string(it.key()) + " slot " +
                                      std::to_string(v.slot));
                }
            }
        }
    }
    return bad;
}

std::vector<WriteLog::IndexRecord> WriteLog::export_index() const {
    std::vector<IndexRecord> out;
    for (const auto& p : partitions_) {
        if (!p) continue;
        for (auto it = p->begin(); it != p->end(); ++it)
            for (const auto& c : it.value().chunks)
                for (const auto& v : c.versions) out.push_back(IndexRecord{it.key(), c.block_offset, v});
    }
    return out;
}

void WriteLog::restore(std::uint64_t head, std::uint64_t tail, std::uint32_t generation, std::uint64_t next_seq,
                       const std::vector<std::pair<std::uint32_t, std::pair<SlotSidecar, std::vector<std::byte>>>>& slots,
                       const std::vector<IndexRecord>& index) {
    if (tail < head || tail - head > capacity_) fail(Errc::recovery_failed, "log head/tail inconsistent");
    std::fill(region_.begin(), region_.end(), std::byte{0});
    std::fill(sidecars_.begin(), sidecars_.end(), SlotSidecar{});
    head_ = head;
    tail_ = tail;
    generation_ = generation;
    next_seq_ = next_seq;
    for (const auto& [slot, rec] : slots) {
        if (slot >= sidecars_.size() || rec.second.size() != kCachelineSize)
            fail(Errc::recovery_failed, "log slot out of range");
        sidecars_[slot] = rec.first;
        std::memcpy(region_.data() + std::uint64_t{slot} * kCachelineSize, rec.second.data(), kCachelineSize);
    }
    drop_index();
    for (const auto& rec : index) {
        PageNode& node = *partition(rec.lpa).insert(rec.lpa, PageNode{}).first;
        auto it = std::lower_bound(node.chunks.begin(), node.chunks.end(), rec.block_offset,
                                   [](const Chunk& c, std::uint8_t l) { return c.block_offset < l; });
        if (it == node.chunks.end() || it->block_offset != rec.block_offset)
            it = node.chunks.insert(it, Chunk{rec.block_offset, {}});
        it->versions.push_back(rec.v);
    }
}

} // namespace bytefs
