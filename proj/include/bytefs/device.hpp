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

// Device facade: flash substrate + write log + TxLog behind one command
// queue. Also owns crash injection and the BFSM image format.

#include <cstdint>
#include <exception>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "bytefs/flash.hpp"
#include "bytefs/txlog.hpp"
#include "bytefs/write_log.hpp"

namespace bytefs {

/// Thrown instead of executing the command at the armed crash point.
class CrashInjected : public std::exception {
public:
    const char* what() const noexcept override { return "injected power loss"; }
};

inline constexpr std::uint32_t kImageVersion = 1;

enum class ImageSection : std::uint32_t {
    flash_pages = 1,
    ftl_map = 2,
    log_region = 3,
    log_index = 4,
    txlog = 5,
    clock = 6,
};

class Device {
public:
    explicit Device(const DeviceConfig& cfg);

    const DeviceConfig& config() const { return sub_.config(); }
    bool log_enabled() const { return sub_.config().log_enabled; }

    void byte_write(std::uint64_t addr, std::span<const std::byte> data, TxId txid, Category cat);
    std::vector<std::byte> byte_read(std::uint64_t addr, std::uint32_t len, Category cat);
    PageBuf block_read(Lpa lpa, Category cat);
    void block_write(Lpa lpa, std::span<const std::byte> data, Category cat);
    std::vector<PageBuf> block_read_batch(std::span<const Lpa> lpas, Category cat);
    void block_write_batch(std::span<const Lpa> lpas, std::span<const PageBuf> pages, Category cat);
    /// Trim: the page reads as zero afterwards. Free of time and traffic.
    void discard(Lpa lpa);

    /// Appends the TxID to the TxLog; a full TxLog is cleaned first.
    void commit(TxId txid);
    /// Marks the transaction's log entries for discard at the next clean.
    void abort(TxId txid);

    CleanReport clean();
    RecoveryReport recover();
    /// Power loss: host-side and volatile firmware state (the index) are
    /// lost; flash, log region and TxLog survive.
    void simulate_power_loss();

    TrafficCounters traffic_snapshot() const;
    std::uint64_t now_ns() const;
    LogStats log_stats() const;
    double log_utilization() const;
    std::uint64_t log_free_bytes() const;
    std::uint64_t txlog_bytes() const;
    /// Largest TxID referenced by the log region or the TxLog.
    TxId highest_txid() const;
    std::uint64_t index_memory_bytes() const;
    std::uint64_t ftl_table_bytes() const;
    std::vector<ChunkEntry> index_lookup(Lpa lpa, std::optional<std::pair<std::uint8_t, std::uint8_t>> lines = {});

    // Crash injection: the k-th mutating command (0-based) and everything
    // after it throws CrashInjected without taking effect.
    void arm_crash(std::optional<std::uint64_t> at_command);
    std::uint64_t command_count() const;
    bool crashed() const;

    std::vector<std::byte> serialize() const;
    static std::unique_ptr<Device> deserialize(std::span<const std::byte> image);
    void save_image(const std::string& path) const;
    static std::unique_ptr<Device> load_image(const std::string& path);

    // Unsynchronized access for tests and tools.
    FlashSubstrate& substrate() { return sub_; }
    WriteLog& log() { return log_; }
    TxLog& txlog() { return txlog_; }

private:
    // Number of the next n commands allowed to run before the crash point.
    std::uint64_t allowance(std::uint64_t n);
    void tick();
    void passthrough_write(std::uint64_t addr, std::span<const std::byte> data, Category cat);

    mutable std::mutex mu_;
    FlashSubstrate sub_;
    TxLog txlog_;
    WriteLog log_;
    std::uint64_t commands_ = 0;
    std::optional<std::uint64_t> crash_at_;
    bool crashed_ = false;
};

} // namespace bytefs
