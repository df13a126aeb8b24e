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
#include "bytefs/txlog.hpp"

#include "bytefs/error.hpp"

namespace bytefs {

bool TxLog::append(TxId id) {
    if (id == kNoTx) fail(Errc::state_error, "txid 0 is reserved");
    if (position_.contains(id)) fail(Errc::state_error, "txid " + std::to_string(id) + " already committed");
    if (full()) return false;
    position_.emplace(id, entries_.size());
    seq_.emplace(id, commit_counter_++);
    entries_.push_back(id);
    return true;
}

std::optional<std::uint64_t> TxLog::position(TxId id) const {
    auto it = position_.find(id);
    if (it == position_.end()) return std::nullopt;
    return it->second;
}

std::optional<std::uint64_t> TxLog::commit_seq(TxId id) const {
    auto it = seq_.find(id);
    if (it == seq_.end()) return std::nullopt;
    return it->second;
}

void TxLog::clear() {
    entries_.clear();
    position_.clear();
    seq_.clear();
}

void TxLog::restore(std::vector<TxId> entries, std::uint64_t commit_counter) {
    clear();
    std::uint64_t base = commit_counter >= entries.size() ? commit_counter - entries.size() : 0;
    for (std::size_t i = 0; i < entries.size(); ++i) {
        position_.emplace(entries[i], i);
        seq_.emplace(entries[i], base + i);
    }
    entries_ = std::move(entries);
    commit_counter_ = commit_counter;
}

} // namespace bytefs
