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

#include <atomic>
#include <mutex>
#include <set>
#include <thread>

#include "bytefs/error.hpp"
#include "bytefs/txn.hpp"
#include "test_util.hpp"

using namespace bytefs;
using bytefs::testing::pattern;
using bytefs::testing::small_config;

TEST(TxManager, FirstIdIsOneAndIncreasing) {
    Device d(small_config());
    TxManager tm(d);
    TxId a = tm.begin();
    TxId b = tm.begin();
    EXPECT_EQ(a, 1u);
    EXPECT_GT(b, a);
}

TEST(TxManager, ConcurrentBeginsAreUnique) {
    Device d(small_config());
    TxManager tm(d);
    std::mutex m;
    std::set<TxId> ids;
    std::vector<std::thread> ts;
    for (int t = 0; t < 4; ++t)
        ts.emplace_back([&] {
            for (int i = 0; i < 250; ++i) {
                TxId id = tm.begin();
                std::lock_guard lk(m);
                ids.insert(id);
            }
        });
    for (auto& t : ts) t.join();
    EXPECT_EQ(ids.size(), 1000u);
}

TEST(TxManager, CommitAppendsFourBytes) {
    Device d(small_config());
    TxManager tm(d);
    TxId t = tm.begin();
    tm.write(t, 0, pattern(64, 1), Category::inode);
    tm.commit(t);
    EXPECT_EQ(d.txlog_bytes(), 4u);
    EXPECT_EQ(tm.state(t), TxState::committed);
}

TEST(TxManager, EmptyCommitIsLogged) {
    Device d(small_config());
    TxManager tm(d);
    TxId t = tm.begin();
    tm.commit(t);
    EXPECT_EQ(d.txlog().entries(), std::vector<TxId>{t});
}

TEST(TxManager, UnknownOrFinishedIsStateError) {
    Device d(small_config());
    TxManager tm(d);
    auto code = [&](auto f) {
        try {
            f();
        } catch (const Error& e) {
            return e.code();
        }
        return Errc::parse_error;
    };
    EXPECT_EQ(code([&] { tm.commit(77); }), Errc::state_error);
    TxId t = tm.begin();
    tm.commit(t);
    EXPECT_EQ(code([&] { tm.write(t, 0, pattern(8, 1), Category::data); }), Errc::state_error);
    EXPECT_EQ(code([&] { tm.commit(t); }), Errc::state_error);
}

TEST(TxManager, WriteSplitsAtPageBoundary) {
    Device d(small_config());
    TxManager tm(d);
    TxId t = tm.begin();
    tm.write(t, 4096 - 10, pattern(20, 1), Category::data);
    tm.commit(t);
    auto a = d.byte_read(4096 - 10, 10, Category::data);
    auto b = d.byte_read(4096, 10, Category::data);
    a.insert(a.end(), b.begin(), b.end());
    EXPECT_EQ(a, pattern(20, 1));
}

TEST(TxManager, DisjointLinesDoNotBlock) {
    Device d(small_config());
    TxOptions o;
    o.policy = LockPolicy::fail;
    TxManager tm(d, o);
    TxId a = tm.begin(), b = tm.begin();
    tm.write(a, 0, pattern(64, 1), Category::data);
    EXPECT_NO_THROW(tm.write(b, 64, pattern(64, 2), Category::data));
}

TEST(TxManager, PageGranularityConflictsWithinPage) {
    Device d(small_config());
    TxOptions o;
    o.policy = LockPolicy::fail;
    o.granularity = LockGranularity::page;
    TxManager tm(d, o);
    TxId a = tm.begin(), b = tm.begin();
    tm.write(a, 0, pattern(64, 1), Category::data);
    EXPECT_THROW(tm.write(b, 64, pattern(64, 2), Category::data), Error);
}

TEST(TxManager, SameLineBlocksUntilCommit) {
    Device d(small_config());
    TxManager tm(d);
    TxId a = tm.begin(), b = tm.begin();
    tm.write(a, 0, pattern(64, 1), Category::data);
    std::atomic<bool> done{false};
    std::thread t([&] {
        tm.write(b, 32, pattern(8, 2), Category::data);
        done = true;
    });
    std::this_thread::sleep_for(std::chrono::milliseconds(50));
    EXPECT_FALSE(done.load());
    tm.commit(a);
    t.join();
    EXPECT_TRUE(done.load());
    tm.commit(b);
    auto got = d.byte_read(32, 8, Category::data);
    EXPECT_EQ(got, pattern(8, 2));
}

TEST(TxManager, LockTimeoutAbortsWaiter) {
    Device d(small_config());
    TxOptions o;
    o.lock_timeout = std::chrono::milliseconds(20);
    TxManager tm(d, o);
    TxId a = tm.begin(), b = tm.begin();
    tm.write(a, 0, pattern(64, 1), Category::data);
    try {
        tm.write(b, 0, pattern(64, 2), Category::data);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::aborted);
    }
    EXPECT_EQ(tm.state(b), TxState::aborted);
    EXPECT_EQ(tm.state(a), TxState::active);
}

TEST(TxManager, CrashBeforeCommitLosesWrites) {
    Device d(small_config());
    TxManager tm(d);
    TxId a = tm.begin();
    tm.write(a, 0, pattern(64, 1), Category::data);
    d.simulate_power_loss();
    d.recover();
    EXPECT_EQ(d.byte_read(0, 64, Category::data), std::vector<std::byte>(64));
}

TEST(TxManager, FullTxLogCleansAndRetries) {
    auto cfg = small_config();
    cfg.txlog_bytes = 16; // four entries
    Device d(cfg);
    TxManager tm(d);
    for (int i = 0; i < 10; ++i) {
        TxId t = tm.begin();
        tm.write(t, std::uint64_t(i) * 64, pattern(64, i), Category::data);
        tm.commit(t);
    }
    EXPECT_GE(d.log_stats().cleans, 2u);
    for (int i = 0; i < 10; ++i) EXPECT_EQ(d.byte_read(std::uint64_t(i) * 64, 64, Category::data), pattern(64, i));
}

TEST(TxManager, HighestTxIdSeenSurvivesRemount) {
    Device d(small_config());
    {
        TxManager tm(d);
        TxId a = tm.begin();
        TxId b = tm.begin();
        tm.write(b, 0, pattern(8, 1), Category::data);
        tm.commit(a);
    }
    EXPECT_EQ(d.highest_txid(), 2u);
}
