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

// Host-side transaction table: TxID allocation, conflict locks and the
// begin/write/commit/abort surface over the device.

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <mutex>
#include <span>
#include <unordered_map>
#include <vector>

#include "bytefs/device.hpp"

namespace bytefs {

enum class LockGranularity { cacheline, page };
enum class LockPolicy { block, fail };

struct TxOptions {
    LockGranularity granularity = LockGranularity::cacheline;
    LockPolicy policy = LockPolicy::block;
    std::chrono::milliseconds lock_timeout{2000};
};

enum class TxState { active, committed, aborted };

class TxManager {
public:
    /// `first_id` lets a remount skip ids still referenced by the device.
    explicit TxManager(Device& dev, TxOptions opts = {}, TxId first_id = 1);

    TxId begin();
    /// Byte-interface write tagged with the transaction; page-crossing
    /// writes are split. Blocks (or fails) on a conflicting lock.
    void write(TxId id, std::uint64_t addr, std::span<const std::byte> data, Category cat);
    void commit(TxId id);
    void abort(TxId id);

    TxState state(TxId id) const;
    std::size_t active_count() const;
    std::uint64_t pending_bytes(TxId id) const;
    const TxOptions& options() const { return opts_; }
    Device& device() { return dev_; }

private:
    struct Entry {
        TxState state = TxState::active;
        std::vector<std::uint64_t> locks;
        std::uint64_t pending = 0;
    };

    Entry& active_entry(TxId id);
    void acquire(std::unique_lock<std::mutex>& lk, TxId id, std::uint64_t first, std::uint64_t last);
    void release(Entry& e);

    Device& dev_;
    TxOptions opts_;
    mutable std::mutex mu_;
    std::condition_variable cv_;
    TxId next_;
    std::unordered_map<TxId, Entry> table_;
    std::unordered_map<std::uint64_t, TxId> owners_;
};

} // namespace bytefs
