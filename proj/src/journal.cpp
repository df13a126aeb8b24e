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
#include "bytefs/journal.hpp"

#include <zlib.h>

#include <cstring>

#include "bytefs/error.hpp"
#include "bytefs/layout.hpp"

namespace bytefs {

namespace {

constexpr std::uint64_t kDescSize = 16;

std::uint64_t round_up(std::uint64_t v, std::uint64_t a) { return (v + a - 1) / a * a; }

struct Plan {
    std::uint64_t desc_end;
    std::uint64_t byte_region_len;
    std::vector<std::uint64_t> offsets; // per item
    std::uint64_t commit_offset;
    std::uint64_t first_block_page;
};

Plan plan(const std::vector<JournalItem>& items, std::uint32_t page_size) {
    Plan p;
    p.desc_end = round_up(kCachelineSize + items.size() * kDescSize, kCachelineSize);
    std::uint64_t off = p.desc_end;
    p.offsets.resize(items.size());
    for (std::size_t i = 0; i < items.size(); ++i) {
        if (items[i].block) continue;
        p.offsets[i] = off;
        off += round_up(items[i].data.size(), kCachelineSize);
    }
    p.byte_region_len = off;
    std::uint64_t page = round_up(off, page_size) / page_size;
    p.first_block_page = page;
    bool any_block = false;
    for (std::size_t i = 0; i < items.size(); ++i) {
        if (!items[i].block) continue;
        p.offsets[i] = page * page_size;
        ++page;
        any_block = true;
    }
    p.commit_offset = any_block ? page * page_size : off;
    return p;
}

std::uint32_t record_crc(std::span<const std::byte> img, std::uint64_t byte_len, std::uint64_t first_block_page,
                         std::uint64_t block_pages, std::uint32_t page_size) {
    uLong c = ::crc32(0L, Z_NULL, 0);
    c = ::crc32(c, reinterpret_cast<const Bytef*>(img.data()), static_cast<uInt>(byte_len));
    for (std::uint64_t i = 0; i < block_pages; ++i)
        c = ::crc32(c, reinterpret_cast<const Bytef*>(img.data() + (first_block_page + i) * page_size), page_size);
    return static_cast<std::uint32_t>(c);
}

} // namespace

std::uint64_t journal_footprint(const std::vector<JournalItem>& items, std::uint32_t page_size) {
    return plan(items, page_size).commit_offset + kCachelineSize;
}

JournalImage encode_journal(const JournalRecord& rec, std::uint32_t page_size) {
    Plan p = plan(rec.items, page_size);
    JournalImage img;
    img.bytes.assign(p.commit_offset + kCachelineSize, std::byte{0});
    img.byte_region_len = p.byte_region_len;
    img.commit_offset = p.commit_offset;
    std::span<std::byte> b(img.bytes);
    std::uint32_t nblocks = 0;
    for (const auto& it : rec.items) nblocks += it.block ? 1 : 0;
    put_le(b, 0, kJournalHeadMagic);
    put_le(b, 8, rec.seq);
    put_le(b, 16, rec.txid);
    put_le(b, 20, static_cast<std::uint32_t>(rec.items.size()));
    put_le(b, 24, static_cast<std::uint32_t>(p.byte_region_len));
    put_le(b, 28, nblocks);
    put_le(b, 32, p.commit_offset);
    for (std::size_t i = 0; i < rec.items.size(); ++i) {
        const auto& it = rec.items[i];
        if (it.block && it.data.size() != page_size) fail(Errc::invalid_argument, "journal block item must be one page");
        if (!it.block && (it.data.empty() || it.data.size() > page_size))
            fail(Errc::invalid_argument, "journal byte item size out of range");
        auto d = b.subspan(kCachelineSize + i * kDescSize);
        put_le(d, 0, it.home_addr);
        std::uint32_t len = static_cast<std::uint32_t>(it.data.size()) | (static_cast<std::uint32_t>(it.category) << 24);
        if (it.block) len |= 0x80000000u;
        put_le(d, 8, len);
        put_le(d, 12, static_cast<std::uint32_t>(p.offsets[i]));
        std::memcpy(b.data() + p.offsets[i], it.data.data(), it.data.size());
        if (it.block) img.block_pages.push_back(static_cast<std::uint32_t>(p.offsets[i] / page_size));
    }
    auto c = b.subspan(p.commit_offset);
    put_le(c, 0, kJournalCommitMagic);
    put_le(c, 8, rec.seq);
    put_le(c, 16, rec.txid);
    put_le(c, 20, static_cast<std::uint32_t>(rec.items.size()));
    put_le(c, 24, record_crc(b, p.byte_region_len, p.first_block_page, nblocks, page_size));
    return img;
}

void encode_journal_sb(std::span<std::byte> line, std::uint64_t seq) {
    std::fill(line.begin(), line.begin() + kCachelineSize, std::byte{0});
    put_le(line, 0, kJournalSbMagic);
    put_le(line, 8, seq);
}

std::optional<std::uint64_t> decode_journal_sb(std::span<const std::byte> line) {
    if (get_le<std::uint32_t>(line, 0) != kJournalSbMagic) return std::nullopt;
    return get_le<std::uint64_t>(line, 8);
}

std::optional<std::uint64_t> journal_image_length(std::span<const std::byte> head, std::uint32_t page_size) {
    if (head.size() < kCachelineSize || get_le<std::uint32_t>(head, 0) != kJournalHeadMagic) return std::nullopt;
    std::uint64_t commit = get_le<std::uint64_t>(head, 32);
    if (commit % kCachelineSize != 0 || commit > (std::uint64_t{1} << 32)) return std::nullopt;
    (void)page_size;
    return commit + kCachelineSize;
}

std::optional<JournalRecord> decode_journal(std::span<const std::byte> b, std::uint64_t min_seq,
                                            std::uint32_t page_size) {
    auto len = journal_image_length(b, page_size);
    if (!len || *len > b.size()) return std::nullopt;
    JournalRecord rec;
    rec.seq = get_le<std::uint64_t>(b, 8);
    rec.txid = get_le<std::uint32_t>(b, 16);
    std::uint32_t count = get_le<std::uint32_t>(b, 20);
    std::uint64_t byte_len = get_le<std::uint32_t>(b, 24);
    std::uint32_t nblocks = get_le<std::uint32_t>(b, 28);
    std::uint64_t commit = get_le<std::uint64_t>(b, 32);
    if (rec.seq < min_seq) return std::nullopt;
    if (kCachelineSize + std::uint64_t{count} * kDescSize > byte_len || byte_len > commit) return std::nullopt;
    auto c = b.subspan(commit);
    if (get_le<std::uint32_t>(c, 0) != kJournalCommitMagic || get_le<std::uint64_t>(c, 8) != rec.seq ||
        get_le<std::uint32_t>(c, 16) != rec.txid || get_le<std::uint32_t>(c, 20) != count)
        return std::nullopt;
    std::uint64_t first_block_page = (byte_len + page_size - 1) / page_size;
    if (nblocks && (first_block_page + nblocks) * page_size != commit) return std::nullopt;
    if (record_crc(b, byte_len, first_block_page, nblocks, page_size) != get_le<std::uint32_t>(c, 24))
        return std::nullopt;
    for (std::uint32_t i = 0; i < count; ++i) {
        auto d = b.subspan(kCachelineSize + i * kDescSize);
        JournalItem it;
        it.home_addr = get_le<std::uint64_t>(d, 0);
        std::uint32_t l = get_le<std::uint32_t>(d, 8);
        it.block = (l & 0x80000000u) != 0;
        it.category = static_cast<Category>((l >> 24) & 0x7f);
        std::uint32_t n = l & 0xffffff;
        std::uint32_t off = get_le<std::uint32_t>(d, 12);
        if (off + std::uint64_t{n} > commit) return std::nullopt;
        it.data.assign(b.begin() + off, b.begin() + off + n);
        rec.items.push_back(std::move(it));
    }
    return rec;
}

} // namespace bytefs
