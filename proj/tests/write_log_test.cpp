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

#include <map>
#include <random>
#include <set>

#include "bytefs/device.hpp"
#include "bytefs/error.hpp"
#include "test_util.hpp"

using namespace bytefs;
using bytefs::testing::pattern;
using bytefs::testing::ShadowDevice;
using bytefs::testing::small_config;

namespace {

PageBuf flash_page(Device& d, Lpa lpa) {
    auto& s = d.substrate();
    auto ppa = s.ftl().lookup(lpa);
    if (!ppa) return PageBuf(s.config().page_size);
    return s.flash().read(*ppa);
}

} // namespace

TEST(WriteLog, SixtyFourByteWriteTakesOneSlot) {
    Device d(small_config());
    d.byte_write(4096, pattern(64, 1), kNoTx, Category::data);
    EXPECT_EQ(d.log().tail(), 64u);
    EXPECT_EQ(d.now_ns(), 600u);
}

TEST(WriteLog, OneByteWriteConsumesFullSlot) {
    Device d(small_config());
    d.byte_write(10, pattern(1, 1), kNoTx, Category::data);
    EXPECT_EQ(d.log().occupied_bytes(), 64u);
    auto e = d.index_lookup(0);
    ASSERT_EQ(e.size(), 1u);
    EXPECT_EQ(e[0].length, 1u);
    EXPECT_EQ(e[0].line_offset, 10u);
}

TEST(WriteLog, UnalignedWriteSplitsPerCacheline) {
    Device d(small_config());
    d.byte_write(60, pattern(10, 1), kNoTx, Category::data);
    EXPECT_EQ(d.log().occupied_bytes(), 128u);
    EXPECT_EQ(d.byte_read(60, 10, Category::data), pattern(10, 1));
}

TEST(WriteLog, PageCrossingWriteIsInvalid) {
    Device d(small_config());
    try {
        d.byte_write(4090, pattern(10, 1), kNoTx, Category::data);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::invalid_argument);
    }
}

TEST(WriteLog, ReadBackFromLogCostsCachelineLatency) {
    Device d(small_config());
    d.byte_write(128, pattern(64, 2), kNoTx, Category::data);
    auto t0 = d.now_ns();
    EXPECT_EQ(d.byte_read(128, 64, Category::data), pattern(64, 2));
    EXPECT_EQ(d.now_ns() - t0, 4'800u);
    EXPECT_EQ(d.traffic_snapshot().flash_read.total(), 0u);
}

TEST(WriteLog, UnwrittenReadIsZeroFromFlash) {
    Device d(small_config());
    EXPECT_EQ(d.byte_read(0, 64, Category::data), std::vector<std::byte>(64));
    EXPECT_EQ(d.traffic_snapshot().flash_read.total(), 4096u);
    EXPECT_EQ(d.now_ns(), 40'000u);
}

TEST(WriteLog, HalfCoveredReadMerges) {
    Device d(small_config());
    d.block_write(2, pattern(4096, 7), Category::data);
    d.byte_write(2 * 4096 + 32, pattern(32, 8), kNoTx, Category::data);
    ShadowDevice o(4096);
    o.write(2 * 4096, pattern(4096, 7));
    o.write(2 * 4096 + 32, pattern(32, 8));
    EXPECT_EQ(d.byte_read(2 * 4096, 128, Category::data), o.read(2 * 4096, 128));
}

TEST(WriteLog, BlockReadOverlaysDirtyLines) {
    Device d(small_config());
    d.block_write(0, pattern(4096, 1), Category::data);
    ShadowDevice o(4096);
    o.write(0, pattern(4096, 1));
    for (std::uint64_t off : {0u, 64u, 1024u}) {
        d.byte_write(off, pattern(64, off + 2), kNoTx, Category::data);
        o.write(off, pattern(64, off + 2));
    }
    EXPECT_EQ(d.block_read(0, Category::data), o.read(0, 4096));
}

TEST(WriteLog, NewestVersionWins) {
    Device d(small_config());
    d.byte_write(0, pattern(64, 1), kNoTx, Category::data);
    d.byte_write(0, pattern(64, 2), kNoTx, Category::data);
    auto page = d.block_read(0, Category::data);
    EXPECT_TRUE(std::equal(page.begin(), page.begin() + 64, pattern(64, 2).begin()));
}

TEST(WriteLog, BlockWriteInvalidatesLogEntries) {
    Device d(small_config());
    d.byte_write(0, pattern(64, 1), kNoTx, Category::data);
    d.block_write(0, pattern(4096, 9), Category::data);
    EXPECT_TRUE(d.index_lookup(0).empty());
    EXPECT_EQ(d.block_read(0, Category::data), pattern(4096, 9));
    auto r = d.clean();
    EXPECT_EQ(r.pages_flushed, 0u);
}

TEST(WriteLog, IndexLookupSortedByOffset) {
    Device d(small_config());
    EXPECT_TRUE(d.index_lookup(0).empty());
    for (int line : {5, 1, 3}) d.byte_write(line * 64, pattern(64, line), kNoTx, Category::data);
    auto e = d.index_lookup(0);
    ASSERT_EQ(e.size(), 3u);
    EXPECT_EQ(e[0].block_offset, 1);
    EXPECT_EQ(e[1].block_offset, 3);
    EXPECT_EQ(e[2].block_offset, 5);
    auto r = d.index_lookup(0, std::pair<std::uint8_t, std::uint8_t>{2, 5});
    EXPECT_EQ(r.size(), 2u);
}

TEST(WriteLog, RangeLookupSpansPartitions) {
    Device d(small_config());
    const Lpa per_part = static_cast<Lpa>(kPartitionBytes / 4096);
    d.byte_write(std::uint64_t{per_part - 1} * 4096, pattern(8, 1), kNoTx, Category::data);
    d.byte_write(std::uint64_t{per_part} * 4096, pattern(8, 2), kNoTx, Category::data);
    d.byte_write(std::uint64_t{per_part + 5} * 4096, pattern(8, 3), kNoTx, Category::data);
    auto r = d.log().index_lookup_range(per_part - 1, per_part + 1);
    ASSERT_EQ(r.size(), 2u);
    EXPECT_EQ(r[0].first, per_part - 1);
    EXPECT_EQ(r[1].first, per_part);
}

// Random mutations of one page against a per-line sorted-map oracle.
TEST(WriteLog, IndexMatchesOracleUnderRandomOps) {
    auto cfg = small_config();
    cfg.clean_threshold = 1.0;
    cfg.log_region_bytes = 4 * MiB;
    Device d(cfg);
    std::mt19937_64 rng(11);
    std::map<Lpa, std::map<std::uint8_t, std::size_t>> oracle; // lpa -> line -> version count
    for (int i = 0; i < 10000; ++i) {
        Lpa lpa = rng() % 16;
        if (rng() % 10 == 0) {
            d.block_write(lpa, pattern(4096, i), Category::data);
            oracle.erase(lpa);
        } else {
            auto line = static_cast<std::uint8_t>(rng() % 64);
            d.byte_write(std::uint64_t{lpa} * 4096 + line * 64u, pattern(64, i), kNoTx, Category::data);
            ++oracle[lpa][line];
        }
        Lpa probe = rng() % 16;
        auto got = d.index_lookup(probe);
        std::vector<std::uint8_t> want;
        for (auto [line, n] : oracle[probe])
            for (std::size_t k = 0; k < n; ++k) want.push_back(line);
        std::vector<std::uint8_t> have;
        for (const auto& e : got) have.push_back(e.block_offset);
        ASSERT_EQ(have, want) << "step " << i;
    }
    EXPECT_TRUE(d.log().verify_index().empty());
}

TEST(WriteLog, UtilizationArmsAtThreshold) {
    auto cfg = small_config();
    cfg.log_region_bytes = 64 * 100;
    Device d(cfg);
    EXPECT_EQ(d.log_utilization(), 0.0);
    d.byte_write(0, pattern(64, 0), 1, Category::data);
    for (int i = 1; i < 85; ++i) d.byte_write(std::uint64_t(i) * 64, pattern(64, i), kNoTx, Category::data);
    EXPECT_DOUBLE_EQ(d.log_utilization(), 0.85);
    EXPECT_EQ(d.log_stats().cleans, 0u);
    d.byte_write(85 * 64, pattern(64, 85), kNoTx, Category::data);
    EXPECT_EQ(d.log_stats().cleans, 1u);
    // Only the uncommitted slot of Tx 1 remains.
    EXPECT_DOUBLE_EQ(d.log_utilization(), 0.01);
}

TEST(WriteLog, CleanOfSingleCommittedEntryReadsAndWrites) {
    Device d(small_config());
    d.block_write(3, pattern(4096, 1), Category::data);
    d.byte_write(3 * 4096 + 64, pattern(64, 2), kNoTx, Category::data);
    auto r = d.clean();
    EXPECT_EQ(r.flash_reads, 1u);
    EXPECT_EQ(r.flash_writes, 1u);
    ShadowDevice o(4096);
    o.write(3 * 4096, pattern(4096, 1));
    o.write(3 * 4096 + 64, pattern(64, 2));
    EXPECT_EQ(flash_page(d, 3), o.read(3 * 4096, 4096));
    EXPECT_EQ(d.log_utilization(), 0.0);
}

TEST(WriteLog, CleanOfFullyCoveredPageSkipsRead) {
    Device d(small_config());
    for (int line = 0; line < 64; ++line) d.byte_write(line * 64u, pattern(64, line), kNoTx, Category::data);
    auto r = d.clean();
    EXPECT_EQ(r.flash_reads, 0u);
    EXPECT_EQ(r.flash_writes, 1u);
}

TEST(WriteLog, UncommittedSurvivesCleanInNewGeneration) {
    Device d(small_config());
    d.byte_write(0, pattern(64, 1), 9, Category::data);
    d.byte_write(64, pattern(64, 2), 3, Category::data);
    d.commit(3);
    auto gen = d.log().generation();
    auto r = d.clean();
    EXPECT_EQ(r.entries_migrated, 1u);
    EXPECT_EQ(d.log().generation(), gen + 1);
    auto e = d.index_lookup(0);
    ASSERT_EQ(e.size(), 1u);
    EXPECT_EQ(e[0].txid, 9u);
    EXPECT_EQ(d.log().sidecar(e[0].log_offset / 64).generation, gen + 1);
    EXPECT_TRUE(d.log().verify_index().empty());
    // Flash has only the committed line.
    auto page = flash_page(d, 0);
    EXPECT_TRUE(std::all_of(page.begin(), page.begin() + 64, [](std::byte b) { return b == std::byte{0}; }));
    EXPECT_TRUE(std::equal(page.begin() + 64, page.begin() + 128, pattern(64, 2).begin()));
    // Reads still see the uncommitted bytes.
    EXPECT_EQ(d.byte_read(0, 64, Category::data), pattern(64, 1));
}

TEST(WriteLog, CleanFollowsCommitOrder) {
    Device d(small_config());
    // Tx 5 writes after Tx 3 but commits first: Tx 3 must win on flash.
    d.byte_write(0, pattern(64, 3), 3, Category::data);
    d.byte_write(0, pattern(64, 5), 5, Category::data);
    d.commit(5);
    d.commit(3);
    EXPECT_EQ(d.byte_read(0, 64, Category::data), pattern(64, 3));
    d.clean();
    auto page = flash_page(d, 0);
    EXPECT_TRUE(std::equal(page.begin(), page.begin() + 64, pattern(64, 3).begin()));
}

TEST(WriteLog, AbortedEntriesDroppedAtClean) {
    Device d(small_config());
    d.byte_write(0, pattern(64, 1), kNoTx, Category::data);
    d.byte_write(0, pattern(64, 2), 4, Category::data);
    d.abort(4);
    EXPECT_EQ(d.byte_read(0, 64, Category::data), pattern(64, 1));
    auto r = d.clean();
    EXPECT_EQ(r.entries_dropped, 1u);
    EXPECT_EQ(r.entries_migrated, 0u);
    EXPECT_EQ(d.byte_read(0, 64, Category::data), pattern(64, 1));
}

TEST(WriteLog, CleanTimeIsBackground) {
    Device d(small_config());
    for (Lpa l = 0; l < 8; ++l) d.byte_write(std::uint64_t{l} * 4096, pattern(64, l), kNoTx, Category::data);
    auto t0 = d.now_ns();
    auto r = d.clean();
    EXPECT_EQ(d.now_ns(), t0);
    // 8 partial pages on 8 channels: one read round and one write round.
    EXPECT_EQ(r.elapsed_ns, 40'000u + 60'000u);
    EXPECT_EQ(d.log().background_busy_until(), t0 + r.elapsed_ns);
    // A second clean waits for the first to drain.
    d.byte_write(0, pattern(64, 9), kNoTx, Category::data);
    d.clean();
    EXPECT_GE(d.now_ns(), t0 + r.elapsed_ns);
}

TEST(WriteLog, BackPressureWhenUncommittedFillsLog) {
    auto cfg = small_config();
    cfg.log_region_bytes = 64 * 16;
    cfg.clean_threshold = 1.0;
    Device d(cfg);
    for (int i = 0; i < 16; ++i) d.byte_write(i * 64u, pattern(64, i), 1, Category::data);
    try {
        d.byte_write(2048, pattern(64, 99), 2, Category::data);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::back_pressure);
    }
}

TEST(WriteLog, ReadsStableAcrossClean) {
    // Mixed committed, uncommitted, txid-0 and block writes on a few pages.
    Device d(small_config());
    ShadowDevice visible(4096);
    std::mt19937_64 rng(5);
    TxId next = 1;
    std::vector<TxId> open;
    for (int i = 0; i < 3000; ++i) {
        Lpa lpa = rng() % 4;
        int kind = static_cast<int>(rng() % 10);
        if (kind == 0) {
            d.block_write(lpa, pattern(4096, i), Category::data);
        } else if (kind < 7) {
            auto off = rng() % 4096;
            auto len = 1 + rng() % std::min<std::uint64_t>(200, 4096 - off);
            TxId t = kNoTx;
            if (rng() % 2) {
                if (open.empty() || rng() % 4 == 0) open.push_back(next++);
                t = open[rng() % open.size()];
            }
            d.byte_write(lpa * 4096ull + off, pattern(len, i), t, Category::data);
        } else if (kind < 9 && !open.empty()) {
            auto k = rng() % open.size();
            d.commit(open[k]);
            open.erase(open.begin() + static_cast<long>(k));
        } else {
            auto before = std::vector<PageBuf>{};
            for (Lpa l = 0; l < 4; ++l) before.push_back(d.block_read(l, Category::data));
            d.clean();
            for (Lpa l = 0; l < 4; ++l) ASSERT_EQ(d.block_read(l, Category::data), before[l]) << "step " << i;
            ASSERT_TRUE(d.log().verify_index().empty());
        }
    }
}

TEST(Recovery, CommittedPresentUncommittedAbsent) {
    Device d(small_config());
    d.byte_write(0, pattern(64, 1), 1, Category::data);
    d.byte_write(64, pattern(64, 2), 2, Category::data);
    d.commit(1);
    auto img = d.serialize();
    auto e = Device::deserialize(img);
    e->simulate_power_loss();
    auto r = e->recover();
    EXPECT_EQ(r.entries_scanned, 2u);
    EXPECT_EQ(r.entries_discarded, 1u);
    EXPECT_EQ(r.entries_flushed, 1u);
    EXPECT_EQ(r.committed, std::vector<TxId>{1});
    auto page = flash_page(*e, 0);
    EXPECT_TRUE(std::equal(page.begin(), page.begin() + 64, pattern(64, 1).begin()));
    EXPECT_TRUE(std::all_of(page.begin() + 64, page.begin() + 128, [](std::byte b) { return b == std::byte{0}; }));
    EXPECT_EQ(e->log_utilization(), 0.0);
    EXPECT_TRUE(e->txlog().entries().empty());
}

TEST(Recovery, EmptyLogIsNoop) {
    Device d(small_config());
    d.block_write(1, pattern(4096, 1), Category::data);
    auto before = d.serialize();
    auto r = d.recover();
    EXPECT_EQ(r.entries_scanned, 0u);
    EXPECT_EQ(r.entries_discarded, 0u);
    EXPECT_EQ(r.entries_flushed, 0u);
    EXPECT_EQ(r.elapsed_sim_ns, 0u);
    EXPECT_EQ(d.serialize(), before);
}

TEST(Recovery, FollowsTxLogOrder) {
    Device d(small_config());
    d.byte_write(0, pattern(64, 3), 3, Category::data);
    d.byte_write(0, pattern(64, 5), 5, Category::data);
    d.commit(5);
    d.commit(3);
    d.simulate_power_loss();
    d.recover();
    auto page = flash_page(d, 0);
    EXPECT_TRUE(std::equal(page.begin(), page.begin() + 64, pattern(64, 3).begin()));
}

// A plain write lands between the commits around it, as in the read view.
TEST(Recovery, PlainWriteOrderedAgainstCommits) {
    Device d(small_config());
    d.byte_write(0, pattern(64, 1), 1, Category::data);
    d.commit(1);
    d.byte_write(0, pattern(64, 2), kNoTx, Category::data);
    d.byte_write(64, pattern(64, 3), 2, Category::data);
    d.byte_write(64, pattern(64, 4), kNoTx, Category::data);
    d.commit(2);
    auto before = d.block_read(0, Category::data);
    d.simulate_power_loss();
    d.recover();
    auto page = flash_page(d, 0);
    EXPECT_EQ(page, before);
    EXPECT_TRUE(std::equal(page.begin(), page.begin() + 64, pattern(64, 2).begin()));
    EXPECT_TRUE(std::equal(page.begin() + 64, page.begin() + 128, pattern(64, 3).begin()));
}

TEST(Recovery, PlainWritesDoNotRaiseHighestTxId) {
    Device d(small_config());
    for (TxId t = 1; t <= 50; ++t) {
        d.byte_write(0, pattern(64, t), t, Category::data);
        d.commit(t);
    }
    d.clean();
    d.byte_write(64, pattern(64, 2), kNoTx, Category::data);
    EXPECT_EQ(d.highest_txid(), kNoTx);
}

TEST(Recovery, BlockWriteNotResurrected) {
    Device d(small_config());
    d.byte_write(0, pattern(64, 1), 1, Category::data);
    d.commit(1);
    d.block_write(0, pattern(4096, 2), Category::data);
    d.simulate_power_loss();
    d.recover();
    EXPECT_EQ(flash_page(d, 0), pattern(4096, 2));
}

TEST(Recovery, Idempotent) {
    Device d(small_config());
    d.byte_write(0, pattern(64, 1), 1, Category::data);
    d.byte_write(4096, pattern(64, 2), 2, Category::data);
    d.commit(1);
    d.simulate_power_loss();
    d.recover();
    auto once = d.block_read(0, Category::data);
    auto once1 = d.block_read(1, Category::data);
    d.recover();
    EXPECT_EQ(d.block_read(0, Category::data), once);
    EXPECT_EQ(d.block_read(1, Category::data), once1);
}

// Atomicity sweep: crash after every command of a scripted transactional
// sequence; recovered flash must equal the oracle for the committed prefix.
TEST(Recovery, EveryCrashPointIsAtomic) {
    struct Op {
        TxId tx;
        std::uint64_t addr;
        std::size_t len;
        bool commit;
    };
    std::vector<Op> script;
    std::mt19937_64 rng(3);
    for (TxId t = 1; t <= 30; ++t) {
        int n = 1 + static_cast<int>(rng() % 4);
        for (int k = 0; k < n; ++k) {
            auto off = rng() % 4000;
            script.push_back({t, (rng() % 3) * 4096 + off, 1 + rng() % std::min<std::uint64_t>(96, 4096 - off), false});
        }
        script.push_back({t, 0, 0, true});
    }
    auto run = [&](Device& d) {
        for (std::size_t i = 0; i < script.size(); ++i) {
            const auto& op = script[i];
            if (op.commit)
                d.commit(op.tx);
            else
                d.byte_write(op.addr, pattern(op.len, i), op.tx, Category::data);
        }
    };
    auto cfg = small_config();
    cfg.log_region_bytes = 64 * 64; // forces cleans mid-script
    for (std::uint64_t k = 0; k <= script.size(); ++k) {
        Device d(cfg);
        d.arm_crash(k);
        try {
            run(d);
        } catch (const CrashInjected&) {
        }
        auto img = Device::deserialize(d.serialize());
        img->simulate_power_loss();
        img->recover();
        ShadowDevice o(4096);
        std::map<TxId, std::vector<std::size_t>> pending;
        for (std::size_t i = 0; i < script.size() && i < k; ++i) {
            const auto& op = script[i];
            if (!op.commit) {
                pending[op.tx].push_back(i);
                continue;
            }
            for (auto j : pending[op.tx]) o.write(script[j].addr, pattern(script[j].len, j));
        }
        for (Lpa l = 0; l < 3; ++l) ASSERT_EQ(img->block_read(l, Category::data), o.read(l * 4096ull, 4096)) << "k " << k;
    }
}
