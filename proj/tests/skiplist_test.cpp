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
#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <random>

#include "bytefs/skiplist.hpp"

using bytefs::SkipList;

namespace {

double mean_lookup_comparisons(std::uint32_t n, std::uint64_t seed) {
    SkipList<std::uint32_t, int> s(seed);
    std::mt19937_64 rng(seed);
    std::vector<std::uint32_t> keys;
    while (s.size() < n) {
        auto k = static_cast<std::uint32_t>(rng());
        if (s.insert(k, 0).second) keys.push_back(k);
    }
    s.reset_comparisons();
    const int probes = 4096;
    for (int i = 0; i < probes; ++i) s.find(keys[rng() % keys.size()]);
    return static_cast<double>(s.comparisons()) / probes;
}

} // namespace

TEST(SkipList, EmptyFindsNothing) {
    SkipList<int, int> s;
    EXPECT_EQ(s.find(3), nullptr);
    EXPECT_EQ(s.begin(), s.end());
    EXPECT_FALSE(s.erase(3));
}

TEST(SkipList, IteratesInKeyOrder) {
    SkipList<int, char> s;
    for (int k : {5, 1, 3}) s.insert(k, 'x');
    std::vector<int> got;
    for (auto it = s.begin(); it != s.end(); ++it) got.push_back(it.key());
    EXPECT_EQ(got, (std::vector<int>{1, 3, 5}));
    EXPECT_EQ(s.lower_bound(2).key(), 3);
    EXPECT_EQ(s.lower_bound(6), s.end());
}

TEST(SkipList, InsertExistingKeepsValue) {
    SkipList<int, int> s;
    s.insert(1, 10);
    auto [v, inserted] = s.insert(1, 20);
    EXPECT_FALSE(inserted);
    EXPECT_EQ(*v, 10);
}

// Random insert/erase/find/lower_bound against std::map, checked at every step.
TEST(SkipList, MatchesSortedMapOracle) {
    SkipList<std::uint32_t, std::uint64_t> s(7);
    std::map<std::uint32_t, std::uint64_t> m;
    std::mt19937_64 rng(42);
    for (int step = 0; step < 20000; ++step) {
        std::uint32_t k = rng() % 2048;
        switch (rng() % 4) {
        case 0: {
            std::uint64_t v = rng();
            bool ins = s.insert(k, v).second;
            EXPECT_EQ(ins, m.emplace(k, v).second);
            break;
        }
        case 1:
            EXPECT_EQ(s.erase(k), m.erase(k) == 1);
            break;
        case 2: {
            auto* v = s.find(k);
            auto it = m.find(k);
            ASSERT_EQ(v != nullptr, it != m.end());
            if (v) EXPECT_EQ(*v, it->second);
            break;
        }
        default: {
            auto a = s.lower_bound(k);
            auto b = m.lower_bound(k);
            ASSERT_EQ(a == s.end(), b == m.end());
            if (b != m.end()) EXPECT_EQ(a.key(), b->first);
        }
        }
        ASSERT_EQ(s.size(), m.size());
    }
    auto it = s.begin();
    for (const auto& [k, v] : m) {
        ASSERT_NE(it, s.end());
        EXPECT_EQ(it.key(), k);
        EXPECT_EQ(it.value(), v);
        ++it;
    }
}

TEST(SkipList, ComparisonsGrowLogarithmically) {
    double c8 = mean_lookup_comparisons(1u << 8, 1);
    double c12 = mean_lookup_comparisons(1u << 12, 2);
    double c16 = mean_lookup_comparisons(1u << 16, 3);
    // Expected ~ (log4 n)/p levels; bounded by a constant times log2 n.
    EXPECT_LE(c8, 4.0 * 8);
    EXPECT_LE(c12, 4.0 * 12);
    EXPECT_LE(c16, 4.0 * 16);
    EXPECT_LE(c16, 2.0 * c8 * 2.0);
    EXPECT_LT(c8, c16);
}

TEST(SkipList, MemoryIsLinearInSize) {
    SkipList<std::uint32_t, int> a(1), b(1);
    for (std::uint32_t i = 0; i < 1000; ++i) a.insert(i, 0);
    for (std::uint32_t i = 0; i < 4000; ++i) b.insert(i, 0);
    double ra = static_cast<double>(a.memory_bytes()) / 1000;
    double rb = static_cast<double>(b.memory_bytes()) / 4000;
    EXPECT_NEAR(ra, rb, 0.25 * ra);
}
