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

#include <cstdint>
#include <optional>
#include <unordered_map>
#include <unordered_set>
#include <vector>

namespace bytefs {

using TxId = std::uint32_t;
inline constexpr TxId kNoTx = 0;

/// Firmware commit log: an append-only list of 4-byte TxIDs whose order is
/// the durable commit order. Cleared only after log cleaning or recovery.
class TxLog {
public:
    explicit TxLog(std::uint64_t capacity_bytes) : capacity_entries_(capacity_bytes / 4) {}

    bool full() const { return entries_.size() >= capacity_entries_; }
    std::uint64_t size_bytes() const { return entries_.size() * 4; }
    std::uint64_t capacity_entries() const { return capacity_entries_; }

    /// Appends a commit entry. Returns false when the log is full.
    bool append(TxId id);
    bool contains(TxId id) const { return position_.contains(id); }
    std::optional<std::uint64_t> position(TxId id) const;
    /// Global commit sequence number assigned at append; never reset.
    std::optional<std::uint64_t> commit_seq(TxId id) const;
    std::uint64_t commit_counter() const { return commit_counter_; }

    void abort(TxId id) { aborted_.insert(id); }
    bool aborted(TxId id) const { return aborted_.contains(id); }

    const std::vector<TxId>& entries() const { return entries_; }
    void clear();
    void clear_aborted() { aborted_.clear(); }

    void restore(std::vector<TxId> entries, std::uint64_t commit_counter);

private:
    std::uint64_t capacity_entries_;
    std::vector<TxId> entries_;
    std::unordered_map<TxId, std::uint64_t> position_;
    std::unordered_map<TxId, std::uint64_t> seq_;
    std::unordered_set<TxId> aborted_;
    std::uint64_t commit_counter_ = 0;
};

} // namespace bytefs
