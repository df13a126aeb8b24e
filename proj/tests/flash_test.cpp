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

#include <algorithm>
#include <cstdio>
#include <set>

#include "bytefs/device.hpp"
#include "bytefs/error.hpp"
#include "test_util.hpp"

using namespace bytefs;
using bytefs::testing::pattern;
using bytefs::testing::small_config;

TEST(Config, DefaultLatenciesAndSizes) {
    DeviceConfig c;
    EXPECT_EQ(c.capacity_bytes, 32 * GiB);
    EXPECT_EQ(c.page_size, 4096u);
    EXPECT_EQ(c.channel_count, 8u);
    EXPECT_EQ(c.flash_read_latency_ns, 40'000u);
    EXPECT_EQ(c.flash_write_latency_ns, 60'000u);
    EXPECT_EQ(c.cacheline_read_latency_ns, 4'800u);
    EXPECT_EQ(c.cacheline_write_latency_ns, 600u);
    EXPECT_EQ(c.log_region_bytes, 256 * MiB);
    EXPECT_EQ(c.txlog_bytes, 2 * MiB);
    EXPECT_EQ(c.write_buffer_bytes, 16 * MiB);
    EXPECT_DOUBLE_EQ(c.clean_threshold, 0.85);
    EXPECT_NO_THROW(c.validate());
}

TEST(Config, RejectsBrokenInvariants) {
    auto bad = [](auto mutate) {
        DeviceConfig c = small_config();
        mutate(c);
        try {
            c.validate();
        } catch (const Error& e) {
            return e.code() == Errc::invalid_argument;
        }
        return false;
    };
    EXPECT_TRUE(bad([](DeviceConfig& c) { c.capacity_bytes += 100; }));
    EXPECT_TRUE(bad([](DeviceConfig& c) { c.page_size = 4000; }));
    EXPECT_TRUE(bad([](DeviceConfig& c) { c.log_region_bytes = 1000; }));
    EXPECT_TRUE(bad([](DeviceConfig& c) { c.clean_threshold = 0.0; }));
    EXPECT_TRUE(bad([](DeviceConfig& c) { c.clean_threshold = 1.5; }));
}

TEST(Flash, ReadAdvancesClockByReadLatency) {
    FlashSubstrate s(small_config());
    auto page = s.flash_read_page(0, Category::data);
    EXPECT_EQ(s.clock().now(), 40'000u);
    EXPECT_TRUE(std::all_of(page.begin(), page.end(), [](std::byte b) { return b == std::byte{0}; }));
    EXPECT_EQ(s.counters().flash_read[Category::data], 4096u);
}

TEST(Flash, WriteThenReadRoundTrips) {
    FlashSubstrate s(small_config());
    auto data = pattern(4096, 1);
    s.flash_write_page(7, data, Category::data);
    EXPECT_EQ(s.clock().now(), 60'000u);
    EXPECT_EQ(s.flash_read_page(7, Category::data), data);
    EXPECT_EQ(s.counters().flash_write[Category::data], 4096u);
}

TEST(Flash, WrongSizeWriteIsInvalid) {
    FlashSubstrate s(small_config());
    std::vector<std::byte> small(100);
    try {
        s.flash_write_page(0, small, Category::data);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::invalid_argument);
    }
}

TEST(Flash, OutOfRangePpaFaults) {
    FlashSubstrate s(small_config());
    Ppa past = static_cast<Ppa>(s.flash().page_count());
    try {
        s.flash_read_page(past, Category::data);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::address_fault);
    }
}

TEST(Flash, BatchOnDistinctChannelsOverlaps) {
    FlashSubstrate s(small_config());
    std::vector<FlashRequest> two{{0, Category::data}, {1, Category::data}};
    std::vector<PageBuf> pages(2, PageBuf(4096));
    // Fresh device: LPA i lands on PPA i, so channel i % 8.
    EXPECT_EQ(s.write_batch(two, pages), 60'000u);
    std::vector<PageBuf> out;
    EXPECT_EQ(s.read_batch(two, out), 40'000u);

    std::vector<FlashRequest> eight;
    for (Lpa l = 2; l < 10; ++l) eight.push_back({l, Category::data});
    std::vector<PageBuf> eight_pages(8, PageBuf(4096));
    EXPECT_EQ(s.write_batch(eight, eight_pages), 60'000u);
}

TEST(Flash, BatchOnOneChannelSerializes) {
    FlashSubstrate s(small_config());
    std::vector<Ppa> same{0, 8, 16};
    EXPECT_EQ(s.batch_latency(same, 60'000), 180'000u);
    std::vector<Ppa> mixed{0, 8, 1};
    EXPECT_EQ(s.batch_latency(mixed, 60'000), 120'000u);
}

TEST(Ftl, TranslateIsStable) {
    Ftl f(100, 106);
    Ppa a = f.translate(5);
    EXPECT_EQ(f.translate(5), a);
    EXPECT_EQ(f.mapped_count(), 1u);
}

TEST(Ftl, MapsEveryLpaToDistinctPpa) {
    // Scaled version of the 32 GiB / 4 KiB arithmetic: the table is one
    // slot per logical page and mapping is injective.
    DeviceConfig c;
    EXPECT_EQ(c.page_count(), 8'388'608u);
    Ftl f(4096, 4096 + 256);
    std::set<Ppa> seen;
    for (Lpa l = 0; l < 4096; ++l) seen.insert(f.translate(l));
    EXPECT_EQ(seen.size(), 4096u);
}

TEST(Ftl, OutOfRangeFaultsAndFullDeviceExhausts) {
    Ftl f(4, 4);
    try {
        f.translate(4);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::address_fault);
    }
    Ftl tight(8, 4);
    for (Lpa l = 0; l < 4; ++l) tight.translate(l);
    try {
        tight.translate(4);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::space_exhausted);
    }
    tight.unmap(0);
    EXPECT_NO_THROW(tight.translate(4));
}

TEST(Traffic, BlockWriteTaggedData) {
    Device d(small_config());
    auto before = d.traffic_snapshot();
    EXPECT_EQ(before.host_to_ssd[Category::data], 0u);
    d.block_write(3, pattern(4096, 3), Category::data);
    auto after = d.traffic_snapshot();
    EXPECT_EQ(after.host_to_ssd[Category::data], 4096u);
    EXPECT_EQ(after.flash_write.total(), 4096u);
}

TEST(Traffic, ByteWriteCountsOneSlot) {
    Device d(small_config());
    d.byte_write(100, pattern(10, 1), kNoTx, Category::inode);
    EXPECT_EQ(d.traffic_snapshot().host_to_ssd.total(), 64u);
    // Straddling a cacheline boundary costs two slots.
    d.byte_write(4096 + 60, pattern(8, 2), kNoTx, Category::inode);
    EXPECT_EQ(d.traffic_snapshot().host_to_ssd.total(), 192u);
}

TEST(Traffic, SnapshotDoesNotReset) {
    Device d(small_config());
    d.block_write(0, pattern(4096, 0), Category::data);
    EXPECT_EQ(d.traffic_snapshot().host_to_ssd.total(), d.traffic_snapshot().host_to_ssd.total());
}

TEST(Device, PassthroughByteWriteIsReadModifyWrite) {
    auto cfg = small_config();
    cfg.log_enabled = false;
    Device d(cfg);
    d.byte_write(64, pattern(64, 1), kNoTx, Category::inode);
    auto t = d.traffic_snapshot();
    EXPECT_EQ(t.flash_read.total(), 4096u);
    EXPECT_EQ(t.flash_write.total(), 4096u);
    EXPECT_EQ(d.now_ns(), 600u + 40'000u + 60'000u);
    EXPECT_EQ(d.byte_read(64, 64, Category::inode), pattern(64, 1));
}

TEST(Device, ImageRoundTripPreservesEverything) {
    Device d(small_config());
    d.block_write(1, pattern(4096, 1), Category::data);
    d.byte_write(4096 + 128, pattern(64, 2), 5, Category::inode);
    d.byte_write(8192, pattern(30, 3), 6, Category::dentry);
    d.commit(6);
    auto img = d.serialize();
    auto e = Device::deserialize(img);
    EXPECT_EQ(e->serialize(), img);
    EXPECT_EQ(e->now_ns(), d.now_ns());
    EXPECT_EQ(e->block_read(1, Category::data), d.block_read(1, Category::data));
    EXPECT_EQ(e->byte_read(4096 + 128, 64, Category::inode), pattern(64, 2));
    EXPECT_EQ(e->index_lookup(1).size(), 1u);
    EXPECT_EQ(e->txlog().entries(), std::vector<TxId>{6});
}

TEST(Device, ImageFileRoundTrip) {
    Device d(small_config());
    d.block_write(9, pattern(4096, 9), Category::data);
    std::string path = ::testing::TempDir() + "bytefs_image_test.bfsm";
    d.save_image(path);
    auto e = Device::load_image(path);
    EXPECT_EQ(e->block_read(9, Category::data), pattern(4096, 9));
    std::remove(path.c_str());
}

TEST(Device, CorruptSectionNamesSection) {
    Device d(small_config());
    d.block_write(0, pattern(4096, 4), Category::data);
    auto img = d.serialize();
    // Header is 8 + 12*8 bytes; the flash section header follows, then
    // its body. Flip a payload byte inside the flash section.
    img[8 + 96 + 16 + 20] ^= std::byte{0xff};
    try {
        Device::deserialize(img);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::recovery_failed);
        EXPECT_NE(std::string(e.what()).find("section 1"), std::string::npos);
    }
}

TEST(Device, CrashInjectionStopsAtCommand) {
    Device d(small_config());
    d.arm_crash(2);
    d.byte_write(0, pattern(64, 1), 1, Category::data);
    d.byte_write(64, pattern(64, 2), 1, Category::data);
    EXPECT_THROW(d.commit(1), CrashInjected);
    EXPECT_TRUE(d.crashed());
    EXPECT_THROW(d.byte_write(128, pattern(64, 3), 2, Category::data), CrashInjected);
    EXPECT_TRUE(d.txlog().entries().empty());
}

TEST(Device, CrashInsideBatchLandsPrefix) {
    Device d(small_config());
    d.arm_crash(2);
    std::vector<Lpa> lpas{10, 11, 12};
    std::vector<PageBuf> pages{pattern(4096, 10), pattern(4096, 11), pattern(4096, 12)};
    EXPECT_THROW(d.block_write_batch(lpas, pages, Category::data), CrashInjected);
    auto e = Device::deserialize(d.serialize());
    EXPECT_EQ(e->block_read(11, Category::data), pattern(4096, 11));
    EXPECT_EQ(e->block_read(12, Category::data), PageBuf(4096));
}

TEST(Device, DiscardReadsAsZero) {
    Device d(small_config());
    d.block_write(4, pattern(4096, 4), Category::data);
    d.byte_write(4 * 4096, pattern(64, 5), kNoTx, Category::data);
    auto clock = d.now_ns();
    d.discard(4);
    EXPECT_EQ(d.now_ns(), clock);
    EXPECT_EQ(d.block_read(4, Category::data), PageBuf(4096));
}
