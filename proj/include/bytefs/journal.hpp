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

// Journal record codec. The area starts with a journal superblock line
// (magic, seq) in its first block; a single record follows from the
// second block on: header line, 16B descriptors, byte payloads packed at
// 64B granularity, page-aligned block payloads, then a commit line.

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "bytefs/config.hpp"
#include "bytefs/txlog.hpp"

namespace bytefs {

inline constexpr std::uint32_t kJournalSbMagic = 0x42534a42;     // "BJSB"
inline constexpr std::uint32_t kJournalHeadMagic = 0x48524a42;   // "BJRH"
inline constexpr std::uint32_t kJournalCommitMagic = 0x43524a42; // "BJRC"

struct JournalItem {
    std::uint64_t home_addr = 0; // device byte address
    Category category = Category::untagged;
    bool block = false;          // page-aligned whole-page payload
    std::vector<std::byte> data;
};

struct JournalRecord {
    std::uint64_t seq = 0;
    TxId txid = kNoTx;
    std::vector<JournalItem> items;
};

/// Record image relative to the start of the record area.
struct JournalImage {
    std::vector<std::byte> bytes;         // header .. commit line
    std::uint64_t byte_region_len = 0;    // header + descriptors + byte payloads
    std::vector<std::uint32_t> block_pages; // record-relative page indexes
    std::uint64_t commit_offset = 0;
};

JournalImage encode_journal(const JournalRecord& rec, std::uint32_t page_size);
/// Bytes of the record area the record would need.
std::uint64_t journal_footprint(const std::vector<JournalItem>& items, std::uint32_t page_size);

void encode_journal_sb(std::span<std::byte> line, std::uint64_t seq);
/// nullopt when the line carries no journal superblock.
std::optional<std::uint64_t> decode_journal_sb(std::span<const std::byte> line);

/// Parses the header of a record area prefix; returns the total image
/// length needed to validate it, or nullopt if no header is present.
std::optional<std::uint64_t> journal_image_length(std::span<const std::byte> head, std::uint32_t page_size);
/// Validates magic, sequence (>= min_seq) and CRC; nullopt when the
/// record must not be replayed.
std::optional<JournalRecord> decode_journal(std::span<const std::byte> image, std::uint64_t min_seq,
                                            std::uint32_t page_size);

} // namespace bytefs
