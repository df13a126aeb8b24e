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
#include "bytefs/txn.hpp"

#include <algorithm>

#include "bytefs/error.hpp"

namespace bytefs {

TxManager::TxManager(Device& dev, TxOptions opts, TxId first_id)
    : dev_(dev), opts_(opts), next_(first_id == kNoTx ? 1 : first_id) {}

TxId TxManager::begin() {
    std::lock_guard lk(mu_);
    if (next_ == 0) fail(Errc::state_error, "TxID space exhausted");
    TxId id = next_++;
    table_.emplace(id, Entry{});
    return id;
}

TxManager::Entry& TxManager::active_entry(TxId id) {
    auto it = table_.find(id);
    if (it == table_.end()) fail(Errc::state_error, "unknown transaction " + std::to_string(id));
    if (it->second.state != TxState::active)
        fail(Errc::state_error, "transaction " + std::to_string(id) + " is not active");
    return it->second;
}

void TxManager::release(Entry& e) {
    for (auto k : e.locks) owners_.erase(k);
    e.locks.clear();
    cv_.notify_all();
}

void TxManager::acquire(std::unique_lock<std::mutex>& lk, TxId id, std::uint64_t first, std::uint64_t last) {
    auto conflict = [&]() -> bool {
        for (auto k = first; k <= last; ++k) {
            auto it = owners_.find(k);
            if (it != owners_.end() && it->second != id) return true;
        }
        return false;
    };
    if (conflict()) {
        if (opts_.policy == LockPolicy::fail) fail(Errc::aborted, "lock conflict for transaction " + std::to_string(id));
        if (!cv_.wait_for(lk, opts_.lock_timeout, [&] { return !conflict(); })) {
            // Timed out: the waiter gives up and is aborted.
            Entry& e = table_.at(id);
            e.state = TxState::aborted;
            release(e);
            lk.unlock();
            dev_.abort(id);
            fail(Errc::aborted, "lock wait timed out for transaction " + std::to_string(id));
        }
        // The wait released the mutex; the entry may have been aborted meanwhile.
        active_entry(id);
    }
    Entry& e = table_.at(id);
    for (auto k = first; k <= last; ++k)
        if (owners_.emplace(k, id).second) e.locks.push_back(k);
}

void TxManager::write(TxId id, std::uint64_t addr, std::span<const std::byte> data, Category cat) {
    if (data.empty()) return;
    const std::uint64_t page = dev_.config().page_size;
    const std::uint64_t unit = opts_.granularity == LockGranularity::cacheline ? kCachelineSize : page;
    {
        std::unique_lock lk(mu_);
        active_entry(id);
        acquire(lk, id, addr / unit, (addr + data.size() - 1) / unit);
    }
    std::uint64_t done = 0;
    while (done < data.size()) {
        std::uint64_t a = addr + done;
        std::uint64_t n = std::min<std::uint64_t>(data.size() - done, page - a % page);
        dev_.byte_write(a, data.subspan(done, n), id, cat);
        done += n;
    }
    std::lock_guard lk(mu_);
    table_.at(id).pending += data.size();
}

void TxManager::commit(TxId id) {
    {
        std::lock_guard lk(mu_);
        active_entry(id);
    }
    dev_.commit(id);
    std::lock_guard lk(mu_);
    Entry& e = table_.at(id);
    e.state = TxState::committed;
    release(e);
}

void TxManager::abort(TxId id) {
    {
        std::lock_guard lk(mu_);
        active_entry(id);
    }
    dev_.abort(id);
    std::lock_guard lk(mu_);
    Entry& e = table_.at(id);
    e.state = TxState::aborted;
    release(e);
}

TxState TxManager::state(TxId id) const {
    std::lock_guard lk(mu_);
    auto it = table_.find(id);
    if (it == table_.end()) fail(Errc::state_error, "unknown transaction " + std::to_string(id));
    return it->second.state;
}

std::size_t TxManager::active_count() const {
    std::lock_guard lk(mu_);
    return static_cast<std::size_t>(
        std::count_if(table_.begin(), table_.end(), [](const auto& kv) { return kv.second.state == TxState::active; }));
}

std::uint64_t TxManager::pending_bytes(TxId id) const {
    std::lock_guard lk(mu_);
    auto it = table_.find(id);
    return it == table_.end() ? 0 : it->second.pending;
}

} // namespace bytefs
