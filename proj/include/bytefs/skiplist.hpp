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

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iterator>
#include <utility>
#include <vector>

namespace bytefs {

/// Ordered map implemented as a probabilistic skip list (p = 1/4).
/// Level draws come from a seeded xorshift generator so structure (and
/// therefore comparison counts) is reproducible.
template <typename Key, typename Value, typename Compare = std::less<Key>>
class SkipList {
    static constexpr int kMaxLevel = 16;

    struct Node {
        Key key;
        Value value;
        std::vector<Node*> next;

        Node(Key k, Value v, int level) : key(std::move(k)), value(std::move(v)), next(level, nullptr) {}
    };

public:
    class iterator {
    public:
        using iterator_category = std::forward_iterator_tag;
        using value_type = std::pair<const Key&, Value&>;
        using difference_type = std::ptrdiff_t;

        iterator() = default;
        explicit iterator(Node* n) : node_(n) {}

        const Key& key() const { return node_->key; }
        Value& value() const { return node_->value; }
        value_type operator*() const { return {node_->key, node_->value}; }
        iterator& operator++() {
            node_ = node_->next[0];
            return *this;
        }
        iterator operator++(int) {
            iterator t = *this;
            ++*this;
            return t;
        }
        bool operator==(const iterator& o) const { return node_ == o.node_; }

    private:
        Node* node_ = nullptr;
    };

    explicit SkipList(std::uint64_t seed = 0x9e3779b97f4a7c15ull)
        : head_(new Node(Key{}, Value{}, kMaxLevel)), rng_(seed ? seed : 1) {}

    ~SkipList() { clear_nodes(); delete head_; }

    SkipList(const SkipList&) = delete;
    SkipList& operator=(const SkipList&) = delete;

    SkipList(SkipList&& o) noexcept
        : head_(std::exchange(o.head_, nullptr)), level_(o.level_), size_(o.size_), rng_(o.rng_),
          comparisons_(o.comparisons_), cmp_(o.cmp_) {
        o.head_ = new Node(Key{}, Value{}, kMaxLevel);
        o.level_ = 1;
        o.size_ = 0;
    }

    std::size_t size() const { return size_; }
    bool empty() const { return size_ == 0; }

    iterator begin() const { return iterator(head_->next[0]); }
    iterator end() const { return iterator(nullptr); }

    /// Key comparisons performed by find/insert/erase/lower_bound since the
    /// last reset.
    std::uint64_t comparisons() const { return comparisons_; }
    void reset_comparisons() { comparisons_ = 0; }

    Value* find(const Key& key) {
        Node* x = descend(key, nullptr);
        x = x->next[0];
        if (x && equal(x->key, key)) return &x->value;
        return nullptr;
    }

    iterator lower_bound(const Key& key) {
        Node* x = descend(key, nullptr);
        return iterator(x->next[0]);
    }

    /// Inserts `key` if absent; returns the stored value and whether it was inserted.
    std::pair<Value*, bool> insert(const Key& key, Value value) {
        Node* update[kMaxLevel];
        Node* x = descend(key, update);
        x = x->next[0];
        if (x && equal(x->key, key)) return {&x->value, false};
        int lvl = random_level();
        if (lvl > level_) {
            for (int i = level_; i < lvl; ++i) update[i] = head_;
            level_ = lvl;
        }
        Node* n = new Node(key, std::move(value), lvl);
        for (int i = 0; i < lvl; ++i) {
            n->next[i] = update[i]->next[i];
            update[i]->next[i] = n;
        }
        ++size_;
        return {&n->value, true};
    }

    bool erase(const Key& key) {
        Node* update[kMaxLevel];
        Node* x = descend(key, update);
        x = x->next[0];
        if (!x || !equal(x->key, key)) return false;
        for (int i = 0; i < level_; ++i) {
            if (update[i]->next[i] != x) break;
            update[i]->next[i] = x->next[i];
        }
        delete x;
        while (level_ > 1 && head_->next[level_ - 1] == nullptr) --level_;
        --size_;
        return true;
    }

    void clear() {
        clear_nodes();
        for (auto& p : head_->next) p = nullptr;
        level_ = 1;
        size_ = 0;
    }

    /// Approximate heap footprint in bytes (nodes plus forward pointers).
    std::size_t memory_bytes() const {
        std::size_t bytes = sizeof(*this);
        for (Node* n = head_->next[0]; n; n = n->next[0]) bytes += sizeof(Node) + n->next.size() * sizeof(Node*);
        return bytes;
    }

private:
    bool less(const Key& a, const Key& b) {
        ++comparisons_;
        return cmp_(a, b);
    }
    bool equal(const Key& a, const Key& b) const { return !cmp_(a, b) && !cmp_(b, a); }

    Node* descend(const Key& key, Node** update) {
        Node* x = head_;
        for (int i = level_ - 1; i >= 0; --i) {
            while (x->next[i] && less(x->next[i]->key, key)) x = x->next[i];
            if (update) update[i] = x;
        }
        return x;
    }

    int random_level() {
        int lvl = 1;
        while (lvl < kMaxLevel && (next_random() & 3u) == 0) ++lvl;
        return lvl;
    }

    std::uint64_t next_random() {
        rng_ ^= rng_ << 13;
        rng_ ^= rng_ >> 7;
        rng_ ^= rng_ << 17;
        return rng_;
    }

    void clear_nodes() {
        if (!head_) return;
        Node* x = head_->next[0];
        while (x) {
            Node* n = x->next[0];
            delete x;
            x = n;
        }
    }

    Node* head_;
    int level_ = 1;
    std::size_t size_ = 0;
    std::uint64_t rng_;
    std::uint64_t comparisons_ = 0;
    [[no_unique_address]] Compare cmp_{};
};

} // namespace bytefs
