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
#include "bytefs/flash.hpp"

#include <algorithm>
#include <cstring>

#include "bytefs/error.hpp"

namespace bytefs {

const char* errc_name(Errc e) noexcept {
    switch (e) {
    case Errc::address_fault: return "address-fault";
    case Errc::invalid_argument: return "invalid-argument";
    case Errc::space_exhausted: return "space-exhausted";
    case Errc::back_pressure: return "back-pressure";
    case Errc::state_error: return "state-error";
    case Errc::aborted: return "aborted";
    case Errc::not_found: return "not-found";
    case Errc::already_exists: return "already-exists";
    case Errc::not_empty: return "directory-not-empty";
    case Errc::not_a_directory: return "not-a-directory";
    case Errc::is_a_directory: return "is-a-directory";
    case Errc::recovery_failed: return "recovery-failed";
    case Errc::parse_error: return "parse-error";
    }
    return "unknown";
}

std::string_view category_name(Category c) noexcept {
    switch (c) {
    case Category::superblock: return "superblock";
    case Category::bitmap: return "bitmap";
    case Category::inode: return "inode";
    case Category::dentry: return "dentry";
    case Category::data_pointer: return "data_pointer";
    case Category::data: return "data";
    case Category::journal: return "journal";
    case Category::untagged: return "untagged";
    }
    return "untagged";
}

void DeviceConfig::validate() const {
    if (page_size == 0 || page_size % kCachelineSize != 0)
        fail(Errc::invalid_argument, "page_size must be a positive multiple of 64");
    if (page_size / kCachelineSize > 256)
        fail(Errc::invalid_argument, "page_size must hold at most 256 cachelines");
    if (capacity_bytes == 0 || capacity_bytes % page_size != 0)
        fail(Errc::invalid_argument, "capacity_bytes must be a positive multiple of page_size");
    if (capacity_bytes / page_size > 0xfffffff0ull)
        fail(Errc::invalid_argument, "capacity exceeds 32-bit page addressing");
    if (log_region_bytes == 0 || log_region_bytes % kCachelineSize != 0)
        fail(Errc::invalid_argument, "log_region_bytes must be a positive multiple of 64");
    if (log_region_bytes / kCachelineSize > 0xffffffffull)
        fail(Errc::invalid_argument, "log region too large for 4-byte log offsets");
    if (txlog_bytes < 4) fail(Errc::invalid_argument, "txlog_bytes must hold at least one entry");
    if (write_buffer_bytes < page_size) fail(Errc::invalid_argument, "write buffer smaller than a page");
    if (channel_count == 0) fail(Errc::invalid_argument, "channel_count must be positive");
    if (!(clean_threshold > 0.0 && clean_threshold <= 1.0))
        fail(Errc::invalid_argument, "clean_threshold must lie in (0,1]");
}

void FlashArray::check(Ppa ppa) const {
    if (ppa >= page_count_) fail(Errc::address_fault, "ppa " + std::to_string(ppa) + " out of range");
}

PageBuf FlashArray::read(Ppa ppa) const {
    PageBuf out(page_size_);
    read_into(ppa, out);
    return out;
}

void FlashArray::read_into(Ppa ppa, std::span<std::byte> out) const {
    check(ppa);
    auto it = pages_.find(ppa);
    if (it == pages_.end())
        std::fill(out.begin(), out.end(), std::byte{0});
    else
        std::memcpy(out.data(), it->second.data(), page_size_);
}

void FlashArray::write(Ppa ppa, std::span<const std::byte> data) {
    check(ppa);
    if (data.size() != page_size_) fail(Errc::invalid_argument, "flash write must be exactly one page");
    auto& page = pages_[ppa];
    page.assign(data.begin(), data.end());
}

void FlashArray::erase(Ppa ppa) {
    check(ppa);
    pages_.erase(ppa);
}

Ftl::Ftl(std::uint64_t logical_pages, std::uint64_t physical_pages)
    : map_(logical_pages, kUnmapped), physical_pages_(physical_pages) {}

Ppa Ftl::translate(Lpa lpa) {
    if (lpa >= map_.size()) fail(Errc::address_fault, "lpa " + std::to_string(lpa) + " out of range");
    Ppa& slot = map_[lpa];
    if (slot != kUnmapped) return slot;
    if (!free_.empty()) {
        slot = free_.back();
        free_.pop_back();
    } else if (next_fresh_ < physical_pages_) {
        slot = next_fresh_++;
    } else {
        fail(Errc::space_exhausted, "no free physical page");
    }
    ++mapped_;
    return slot;
}

std::optional<Ppa> Ftl::lookup(Lpa lpa) const {
    if (lpa >= map_.size()) fail(Errc::address_fault, "lpa " + std::to_string(lpa) + " out of range");
    if (map_[lpa] == kUnmapped) return std::nullopt;
    return map_[lpa];
}

std::optional<Ppa> Ftl::unmap(Lpa lpa) {
    auto ppa = lookup(lpa);
    if (ppa) {
        map_[lpa] = kUnmapped;
        free_.push_back(*ppa);
        --mapped_;
    }
    return ppa;
}

std::vector<std::pair<Lpa, Ppa>> Ftl::mappings() const {
    std::vector<std::pair<Lpa, Ppa>> out;
    out.reserve(mapped_);
    for (Lpa l = 0; l < map_.size(); ++l)
        if (map_[l] != kUnmapped) out.emplace_back(l, map_[l]);
    return out;
}

void Ftl::restore(const std::vector<std::pair<Lpa, Ppa>>& maps, std::vector<Ppa> free_list, Ppa next_fresh) {
    std::fill(map_.begin(), map_.end(), kUnmapped);
    mapped_ = 0;
    for (auto [l, p] : maps) {
        if (l >= map_.size() || p >= physical_pages_) fail(Errc::recovery_failed, "ftl mapping out of range");
        map_[l] = p;
        ++mapped_;
    }
    free_ = std::move(free_list);
    next_fresh_ = next_fresh;
}

FlashSubstrate::FlashSubstrate(const DeviceConfig& cfg)
    : cfg_((cfg.validate(), cfg)),
      flash_(cfg.page_size, cfg.page_count() + cfg.page_count() / 16, cfg.channel_count),
      ftl_(cfg.page_count(), cfg.page_count() + cfg.page_count() / 16) {}

void FlashSubstrate::check_lpa(Lpa lpa) const {
    if (lpa >= cfg_.page_count()) fail(Errc::address_fault, "lpa " + std::to_string(lpa) + " out of range");
}

Ppa FlashSubstrate::ftl_translate(Lpa lpa) { return ftl_.translate(lpa); }

PageBuf FlashSubstrate::flash_read_page(Ppa ppa, Category cat) {
    PageBuf out = flash_.read(ppa);
    clock_.advance(cfg_.flash_read_latency_ns);
    counters_.flash_read[cat] += cfg_.page_size;
    return out;
}

void FlashSubstrate::flash_write_page(Ppa ppa, std::span<const std::byte> data, Category cat) {
    if (data.size() != cfg_.page_size) fail(Errc::invalid_argument, "flash write must be exactly one page");
    flash_.write(ppa, data);
    clock_.advance(cfg_.flash_write_latency_ns);
    counters_.flash_write[cat] += cfg_.page_size;
}

std::uint64_t FlashSubstrate::batch_latency(std::span<const Ppa> ppas, std::uint64_t per_op_ns) const {
    std::vector<std::uint64_t> per_channel(cfg_.channel_count, 0);
    for (Ppa p : ppas) per_channel[flash_.channel_of(p)] += per_op_ns;
    return per_channel.empty() ? 0 : *std::max_element(per_channel.begin(), per_channel.end());
}

std::uint64_t FlashSubstrate::read_batch(std::span<const FlashRequest> reqs, std::vector<PageBuf>& out) {
    std::vector<Ppa> ppas;
    ppas.reserve(reqs.size());
    out.clear();
    out.reserve(reqs.size());
    for (const auto& r : reqs) {
        check_lpa(r.lpa);
        // Reading an unmapped page returns the erased state without
        // installing a mapping; it still costs a flash access.
        auto mapped = ftl_.lookup(r.lpa);
        Ppa ppa = mapped ? *mapped : static_cast<Ppa>(r.lpa % flash_.page_count());
        ppas.push_back(ppa);
        if (mapped)
            out.push_back(flash_.read(ppa));
        else
            out.emplace_back(cfg_.page_size, std::byte{0});
        counters_.flash_read[r.category] += cfg_.page_size;
    }
    return batch_latency(ppas, cfg_.flash_read_latency_ns);
}

std::uint64_t FlashSubstrate::write_batch(std::span<const FlashRequest> reqs, std::span<const PageBuf> pages) {
    std::vector<Ppa> ppas;
    ppas.reserve(reqs.size());
    for (std::size_t i = 0; i < reqs.size(); ++i) {
        check_lpa(reqs[i].lpa);
        if (pages[i].size() != cfg_.page_size) fail(Errc::invalid_argument, "flash write must be exactly one page");
        Ppa ppa = ftl_.translate(reqs[i].lpa);
        flash_.write(ppa, pages[i]);
        ppas.push_back(ppa);
        counters_.flash_write[reqs[i].category] += cfg_.page_size;
    }
    return batch_latency(ppas, cfg_.flash_write_latency_ns);
}

void FlashSubstrate::discard(Lpa lpa) {
    check_lpa(lpa);
    if (auto ppa = ftl_.unmap(lpa)) flash_.erase(*ppa);
}

} // namespace bytefs
