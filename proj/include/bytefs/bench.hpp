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

// Workload generation, run harness and reporting for bytefs-bench.

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "bytefs/config.hpp"
#include "bytefs/device.hpp"
#include "bytefs/fs.hpp"

namespace bytefs::bench {

enum class Profile { create, remove, mkdir, rmdir, varmail, fileserver, webproxy, webserver, oltp, kvstore };

const char* profile_name(Profile p) noexcept;
std::optional<Profile> parse_profile(std::string_view s) noexcept;

struct WorkloadSpec {
    Profile profile = Profile::create;
    std::uint64_t file_count = 0;  // prepared fileset size
    std::uint64_t file_size = 0;   // bytes per prepared or created file
    std::uint32_t thread_count = 1;
    std::uint64_t op_count = 0;    // measured file-system operations
    std::uint64_t seed = 1;
};

/// Scaled-down defaults: file and op counts are the usual Filebench
/// fileset sizes divided by 100 (oltp file size additionally divided by 10).
WorkloadSpec default_spec(Profile p);

enum class OpKind : std::uint8_t { create, mkdir, unlink, rmdir, rename, write, append, read, stat, fsync, fdatasync };
enum class SyncKind : std::uint8_t { none, fsync, fdatasync };

struct Op {
    OpKind kind = OpKind::create;
    std::string path;
    std::string path2;          // rename target
    std::uint64_t offset = 0;
    std::uint64_t size = 0;
    SyncKind sync = SyncKind::none;
    bool direct = false;
    std::uint32_t thread = 0;
    std::uint64_t data_seed = 0;
};

const char* op_name(OpKind k) noexcept;

struct Workload {
    std::vector<Op> prepare;  // run before measurement, followed by sync
    std::vector<Op> measured;
};

/// Deterministic given the spec (threads are interleaved round-robin).
Workload generate(const WorkloadSpec& spec);

struct BenchConfig {
    DeviceConfig device;
    FsMode mode = FsMode::full;
    JournalMode journal = JournalMode::ordered;
    std::uint64_t cache_bytes = 8 * GiB;
    WorkloadSpec workload = default_spec(Profile::create);
    bool drain_log = true; // flush the device log at the end of the measured phase
    std::string image_path; // if set, the device image is saved here (crash: as of power failure)
};

/// Bench-scale device: 4 GiB, 16 MiB log.
DeviceConfig bench_device();
BenchConfig default_config();

/// Parses `key = value` lines over `base`; `#` starts a comment. Unknown
/// keys and malformed values raise parse_error naming the line.
BenchConfig parse_config(std::string_view text, BenchConfig base = default_config());
BenchConfig load_config(const std::string& path, BenchConfig base = default_config());
/// Rejects inconsistent settings (invalid_argument) before any work.
void validate(const BenchConfig& cfg);

struct RunReport {
    std::string profile;
    FsMode mode = FsMode::full;
    std::uint64_t seed = 0;
    std::uint64_t ops = 0;
    std::uint64_t sim_elapsed_ns = 0;
    double ops_per_sec = 0;
    std::uint64_t app_read_bytes = 0;
    std::uint64_t app_write_bytes = 0;
    TrafficCounters traffic;
    LogStats log;
    FsStats fs;
    double write_amplification = 0; // host write bytes / application write bytes
    double read_amplification = 0;
    double flash_write_amplification = 0;
};

/// Human-readable table.
std::string format_table(const RunReport& r);
/// One `section.key value` line per datum.
std::string format_machine(const RunReport& r);

/// Fresh device + mkfs, prepare phase, measured phase.
RunReport run(const BenchConfig& cfg);

/// Parses a trace (`op path [offset size] [fsync|fdatasync]`, `rename a b`).
std::vector<Op> parse_trace(std::string_view text);
RunReport replay(std::string_view trace, const BenchConfig& cfg);

struct CrashVerdict {
    bool pass = false;
    std::uint64_t crash_command = 0;   // device command index within the measured phase
    std::uint64_t total_commands = 0;  // commands of a crash-free measured phase
    std::uint64_t op_index = 0;        // op in flight when power failed
    bool crashed = false;
    bool journal_replayed = false;
    RecoveryReport device_recovery;
    std::vector<std::string> diagnostics;
};

/// Runs until device command `crash_at` (or a seed-chosen one), drops
/// power, recovers and checks the committed-prefix oracle plus fsck.
CrashVerdict crash_run(const BenchConfig& cfg, std::optional<std::uint64_t> crash_at);
std::string format_verdict(const CrashVerdict& v);

enum class SweepParam { flash_latency, log_region_bytes, cacheline_latency };
std::optional<SweepParam> parse_sweep_param(std::string_view s) noexcept;
const char* sweep_param_name(SweepParam p) noexcept;

struct SweepRow {
    std::uint64_t value = 0;
    RunReport report;
};

std::vector<SweepRow> sweep(const BenchConfig& cfg, SweepParam param, const std::vector<std::uint64_t>& values);
std::string format_sweep(SweepParam param, const std::vector<SweepRow>& rows);

/// Applies one op to a mounted file system. Returns bytes read or written.
std::uint64_t execute(FileSystem& fs, const Op& op);

} // namespace bytefs::bench
