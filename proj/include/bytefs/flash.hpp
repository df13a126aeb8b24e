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

// Flash substrate of the emulated M-SSD: page-granular flash array, a
// page-level FTL, the simulated clock and traffic counters.

#include <cstdint>
#include <optional>
#include <span>
#include <unordered_map>
#include <utility>
#include <vector>

#include "bytefs/config.hpp"

namespace bytefs {

using Lpa = std::uint32_t;
using Ppa = std::uint32_t;
using PageBuf = std::vector<std::byte>;

class SimClock {
public:
    std::uint64_t now() const { return now_ns_; }
    void advance(std::uint64_t ns) { now_ns_ += ns; }
    void advance_to(std::uint64_t t) {
        if (t > now_ns_) now_ns_ = t;
    }

private:
    std::uint64_t now_ns_ = 0;
};

/// Sparse page store; pages never written (or erased) read as zero.
class FlashArray {
public:
    FlashArray(std::uint32_t page_size, std::uint64_t page_count, std::uint32_t channel_count)
        : page_size_(page_size), page_count_(page_count), channels_(channel_count) {}

    std::uint32_t page_size() const { return page_size_; }
    std::uint64_t page_count() const { return page_count_; }
    std::uint32_t channel_of(Ppa ppa) const { return ppa % channels_; }

    PageBuf read(Ppa ppa) const;
    void read_into(Ppa ppa, std::span<std::byte> out) const;
    void write(Ppa ppa, std::span<const std::byte> data);
    void erase(Ppa ppa);

    const std::unordered_map<Ppa, PageBuf>& stored() const { return pages_; }
    void clear() { pages_.clear(); }

private:
    void check(Ppa ppa) const;

    std::uint32_t page_size_;
    std::uint64_t page_count_;
    std::uint32_t channels_;
    std::unordered_map<Ppa, PageBuf> pages_;
};

/// Page-level LPA->PPA map. Mappings are stable once installed; physical
/// capacity carries 1/16 over-provisioning.
class Ftl {
public:
    static constexpr Ppa kUnmapped = 0xffffffffu;

    Ftl(std::uint64_t logical_pages, std::uint64_t physical_pages);

    Ppa translate(Lpa lpa);
    std::optional<Ppa> lookup(Lpa lpa) const;
    std::optional<Ppa> unmap(Lpa lpa);

    std::uint64_t logical_pages() const { return map_.size(); }
    std::uint64_t physical_pages() const { return physical_pages_; }
    std::uint64_t mapped_count() const { return mapped_; }
    /// Nominal DRAM footprint of the table (4 bytes per logical page).
    std::uint64_t table_bytes() const { return map_.size() * sizeof(Ppa); }

    std::vector<std::pair<Lpa, Ppa>> mappings() const;
    const std::vector<Ppa>& free_list() const { return free_; }
    Ppa next_fresh() const { return next_fresh_; }
    void restore(const std::vector<std::pair<Lpa, Ppa>>& maps, std::vector<Ppa> free_list, Ppa next_fresh);

private:
    std::vector<Ppa> map_;
    std::vector<Ppa> free_;
    Ppa next_fresh_ = 0;
    std::uint64_t physical_pages_;
    std::uint64_t mapped_ = 0;
};

struct FlashRequest {
    Lpa lpa;
    Category category;
};

/// Flash array + FTL + clock + counters. Batched requests to distinct
/// channels overlap: a batch costs the max over channels of the per-channel
/// serial latency sum.
class FlashSubstrate {
public:
    explicit FlashSubstrate(const DeviceConfig& cfg);

    const DeviceConfig& config() const { return cfg_; }
    SimClock& clock() { return clock_; }
    const SimClock& clock() const { return clock_; }
    TrafficCounters& counters() { return counters_; }
    const TrafficCounters& counters() const { return counters_; }
    FlashArray& flash() { return flash_; }
    const FlashArray& flash() const { return flash_; }
    Ftl& ftl() { return ftl_; }
    const Ftl& ftl() const { return ftl_; }

    Ppa ftl_translate(Lpa lpa);

    PageBuf flash_read_page(Ppa ppa, Category cat);
    void flash_write_page(Ppa ppa, std::span<const std::byte> data, Category cat);

    /// Untimed batch primitives; they return the batch latency and leave
    /// the clock alone so callers can charge foreground or background time.
    std::uint64_t read_batch(std::span<const FlashRequest> reqs, std::vector<PageBuf>& out);
    std::uint64_t write_batch(std::span<const FlashRequest> reqs, std::span<const PageBuf> pages);

    std::uint64_t batch_latency(std::span<const Ppa> ppas, std::uint64_t per_op_ns) const;

    /// Unmaps the LPA and erases its physical page.
    void discard(Lpa lpa);

    void check_lpa(Lpa lpa) const;

private:
    DeviceConfig cfg_;
    FlashArray flash_;
    Ftl ftl_;
    SimClock clock_;
    TrafficCounters counters_;
};

} // namespace bytefs
