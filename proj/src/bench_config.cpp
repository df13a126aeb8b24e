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
// Bench configuration files and report formatting.

#include <charconv>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>

#include "bytefs/bench.hpp"
#include "bytefs/error.hpp"

namespace bytefs::bench {

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

std::uint64_t parse_size(std::string_view v) {
    std::uint64_t n = 0;
    auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), n);
    if (ec != std::errc{}) throw std::invalid_argument("not a number");
    std::string_view unit = trim(v.substr(static_cast<std::size_t>(p - v.data())));
    std::uint64_t mul = 1;
    if (unit.empty())
        mul = 1;
    else if (unit == "KiB" || unit == "K")
        mul = KiB;
    else if (unit == "MiB" || unit == "M")
        mul = MiB;
    else if (unit == "GiB" || unit == "G")
        mul = GiB;
    else
        throw std::invalid_argument("unknown unit");
    return n * mul;
}

double parse_double(std::string_view v) {
    std::size_t used = 0;
    std::string s(v);
    double d = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument("trailing characters");
    return d;
}

bool parse_bool(std::string_view v) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw std::invalid_argument("not a boolean");
}

void set_key(BenchConfig& c, std::string_view key, std::string_view v) {
    auto& d = c.device;
    auto& w = c.workload;
    if (key == "device.capacity_bytes") d.capacity_bytes = parse_size(v);
    else if (key == "device.page_size") d.page_size = static_cast<std::uint32_t>(parse_size(v));
    else if (key == "device.channel_count") d.channel_count = static_cast<std::uint32_t>(parse_size(v));
    else if (key == "device.flash_read_latency_ns") d.flash_read_latency_ns = parse_size(v);
    else if (key == "device.flash_write_latency_ns") d.flash_write_latency_ns = parse_size(v);
    else if (key == "device.cacheline_read_latency_ns") d.cacheline_read_latency_ns = parse_size(v);
    else if (key == "device.cacheline_write_latency_ns") d.cacheline_write_latency_ns = parse_size(v);
    else if (key == "device.log_region_bytes") d.log_region_bytes = parse_size(v);
    else if (key == "device.txlog_bytes") d.txlog_bytes = parse_size(v);
    else if (key == "device.write_buffer_bytes") d.write_buffer_bytes = parse_size(v);
    else if (key == "device.clean_threshold") d.clean_threshold = parse_double(v);
    else if (key == "fs.mode") {
        auto m = parse_mode(v);
        if (!m) throw std::invalid_argument("unknown mode");
        c.mode = *m;
    } else if (key == "fs.journal") {
        if (v == "ordered") c.journal = JournalMode::ordered;
        else if (v == "data") c.journal = JournalMode::data;
        else throw std::invalid_argument("journal must be ordered or data");
    } else if (key == "fs.cache_bytes") c.cache_bytes = parse_size(v);
    else if (key == "workload.profile") {
        auto p = parse_profile(v);
        if (!p) throw std::invalid_argument("unknown profile");
        WorkloadSpec fresh = default_spec(*p);
        fresh.seed = w.seed;
        w = fresh;
    } else if (key == "workload.file_count") w.file_count = parse_size(v);
    else if (key == "workload.file_size") w.file_size = parse_size(v);
    else if (key == "workload.thread_count") w.thread_count = static_cast<std::uint32_t>(parse_size(v));
    else if (key == "workload.op_count") w.op_count = parse_size(v);
    else if (key == "workload.seed") w.seed = parse_size(v);
    else if (key == "run.drain_log") c.drain_log = parse_bool(v);
    else throw std::out_of_range("unknown key");
}

const char* kCategoryOrder[] = {"superblock", "bitmap", "inode", "dentry", "data_pointer", "data", "journal", "untagged"};

void emit_bytes(std::ostringstream& o, const std::string& section, const CategoryBytes& b) {
    for (std::size_t i = 0; i < kCategoryCount; ++i) o << section << '.' << kCategoryOrder[i] << ' ' << b.by_category[i] << '\n';
    o << section << ".metadata " << b.metadata() << '\n';
    o << section << ".total " << b.total() << '\n';
}

} // namespace

DeviceConfig bench_device() {
    DeviceConfig d;
    d.capacity_bytes = 4 * GiB;
    d.log_region_bytes = 16 * MiB;
    d.txlog_bytes = 256 * KiB;
    d.write_buffer_bytes = 2 * MiB;
    return d;
}

BenchConfig default_config() {
    BenchConfig c;
    c.device = bench_device();
    return c;
}

BenchConfig parse_config(std::string_view text, BenchConfig base) {
    // The profile line resets workload defaults, so it applies before the
    // other keys wherever it appears.
    for (int pass = 0; pass < 2; ++pass) {
        std::string_view rest = text;
        std::size_t lineno = 0;
        while (!rest.empty()) {
            std::size_t nl = rest.find('\n');
            std::string_view line = rest.substr(0, nl);
            rest = nl == std::string_view::npos ? std::string_view{} : rest.substr(nl + 1);
            ++lineno;
            if (auto h = line.find('#'); h != std::string_view::npos) line = line.substr(0, h);
            line = trim(line);
            if (line.empty()) continue;
            auto eq = line.find('=');
            if (eq == std::string_view::npos)
                fail(Errc::parse_error, "config line " + std::to_string(lineno) + ": expected key = value");
            std::string_view key = trim(line.substr(0, eq)), value = trim(line.substr(eq + 1));
            if ((key == "workload.profile") != (pass == 0)) continue;
            try {
                set_key(base, key, value);
            } catch (const std::out_of_range&) {
                fail(Errc::parse_error, "config line " + std::to_string(lineno) + ": unknown key '" + std::string(key) + "'");
            } catch (const std::exception& e) {
                fail(Errc::parse_error, "config line " + std::to_string(lineno) + ": bad value for " + std::string(key) +
                                            " (" + e.what() + ")");
            }
        }
    }
    return base;
}

BenchConfig load_config(const std::string& path, BenchConfig base) {
    std::ifstream in(path);
    if (!in) fail(Errc::not_found, "cannot open config " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str(), base);
}

void validate(const BenchConfig& cfg) {
    DeviceConfig d = cfg.device;
    d.log_enabled = mode_uses_log(cfg.mode);
    d.validate();
    const auto& w = cfg.workload;
    if (w.thread_count == 0) fail(Errc::invalid_argument, "workload.thread_count must be positive");
    if (cfg.cache_bytes < d.page_size) fail(Errc::invalid_argument, "fs.cache_bytes smaller than a page");
    if (d.capacity_bytes < 64 * d.page_size) fail(Errc::invalid_argument, "device too small for a file system");
    // The prepared fileset must fit comfortably.
    std::uint64_t footprint = w.file_count * ((w.file_size + d.page_size - 1) / d.page_size + 1) * d.page_size;
    if (w.profile == Profile::kvstore || w.profile == Profile::fileserver) footprint *= 2;
    if (footprint > d.capacity_bytes / 2)
        fail(Errc::invalid_argument, "fileset of " + std::to_string(w.file_count) + " x " + std::to_string(w.file_size) +
                                         " bytes does not fit the device");
    if (w.profile == Profile::oltp && w.file_size < 256)
        fail(Errc::invalid_argument, "oltp needs files of at least 256 bytes");
    if (d.log_enabled && d.log_region_bytes < 16 * d.page_size)
        fail(Errc::invalid_argument, "log region too small for file-system transactions");
}

std::string format_machine(const RunReport& r) {
    std::ostringstream o;
    o << "run.profile " << r.profile << '\n';
    o << "run.mode " << mode_name(r.mode) << '\n';
    o << "run.seed " << r.seed << '\n';
    o << "run.ops " << r.ops << '\n';
    o << "time.sim_elapsed_ns " << r.sim_elapsed_ns << '\n';
    o << "time.ops_per_sec " << std::fixed << std::setprecision(1) << r.ops_per_sec << '\n';
    o << "app.read_bytes " << r.app_read_bytes << '\n';
    o << "app.write_bytes " << r.app_write_bytes << '\n';
    emit_bytes(o, "host_write", r.traffic.host_to_ssd);
    emit_bytes(o, "host_read", r.traffic.ssd_to_host);
    emit_bytes(o, "flash_write", r.traffic.flash_write);
    emit_bytes(o, "flash_read", r.traffic.flash_read);
    o << "cmd.byte_write_ops " << r.traffic.byte_write_ops << '\n';
    o << "cmd.byte_read_ops " << r.traffic.byte_read_ops << '\n';
    o << "cmd.block_write_ops " << r.traffic.block_write_ops << '\n';
    o << "cmd.block_read_ops " << r.traffic.block_read_ops << '\n';
    o << "cmd.commits " << r.traffic.commits << '\n';
    o << "cmd.byte_write_bytes " << r.traffic.byte_write_bytes << '\n';
    o << std::setprecision(4);
    o << "amp.write " << r.write_amplification << '\n';
    o << "amp.read " << r.read_amplification << '\n';
    o << "amp.flash_write " << r.flash_write_amplification << '\n';
    o << "log.cleans " << r.log.cleans << '\n';
    o << "log.pages_flushed " << r.log.pages_flushed << '\n';
    o << "log.entries_migrated " << r.log.entries_migrated << '\n';
    o << "log.stall_ns " << r.log.stall_ns << '\n';
    o << "log.background_ns " << r.log.background_ns << '\n';
    o << "fs.transactions " << r.fs.transactions << '\n';
    o << "fs.journal_records " << r.fs.journal_records << '\n';
    o << "fs.byte_writebacks " << r.fs.byte_writebacks << '\n';
    o << "fs.block_writebacks " << r.fs.block_writebacks << '\n';
    o << "fs.clean_writebacks " << r.fs.clean_writebacks << '\n';
    o << "fs.direct_byte_ops " << r.fs.direct_byte_ops << '\n';
    o << "fs.direct_block_ops " << r.fs.direct_block_ops << '\n';
    o << "fs.evictions " << r.fs.evictions << '\n';
    o << "fs.forced_dup_writebacks " << r.fs.forced_dup_writebacks << '\n';
    o << "fs.dup_pages_peak " << r.fs.dup_pages_peak << '\n';
    o << "fs.split_flushes " << r.fs.split_flushes << '\n';
    return o.str();
}

std::string format_table(const RunReport& r) {
    std::ostringstream o;
    o << "profile " << r.profile << "  mode " << mode_name(r.mode) << "  seed " << r.seed << '\n';
    o << "ops " << r.ops << "  simulated " << std::fixed << std::setprecision(3) << r.sim_elapsed_ns / 1e6 << " ms  "
      << std::setprecision(1) << r.ops_per_sec << " ops/s\n";
    o << "application: read " << r.app_read_bytes << " B, write " << r.app_write_bytes << " B\n\n";
    o << std::left << std::setw(14) << "category" << std::right << std::setw(14) << "host write" << std::setw(14)
      << "host read" << std::setw(14) << "flash write" << std::setw(14) << "flash read" << '\n';
    const auto& t = r.traffic;
    for (std::size_t i = 0; i < kCategoryCount; ++i) {
        o << std::left << std::setw(14) << kCategoryOrder[i] << std::right << std::setw(14) << t.host_to_ssd.by_category[i]
          << std::setw(14) << t.ssd_to_host.by_category[i] << std::setw(14) << t.flash_write.by_category[i] << std::setw(14)
          << t.flash_read.by_category[i] << '\n';
    }
    o << std::left << std::setw(14) << "total" << std::right << std::setw(14) << t.host_to_ssd.total() << std::setw(14)
      << t.ssd_to_host.total() << std::setw(14) << t.flash_write.total() << std::setw(14) << t.flash_read.total() << "\n\n";
    o << std::setprecision(3) << "amplification: write " << r.write_amplification << "  read " << r.read_amplification
      << "  flash write " << r.flash_write_amplification << '\n';
    o << "commands: byte write " << t.byte_write_ops << ", byte read " << t.byte_read_ops << ", block write "
      << t.block_write_ops << ", block read " << t.block_read_ops << ", commits " << t.commits << '\n';
    o << "log: cleans " << r.log.cleans << ", pages flushed " << r.log.pages_flushed << ", migrated "
      << r.log.entries_migrated << ", stall " << r.log.stall_ns << " ns\n";
    o << "fs: transactions " << r.fs.transactions << ", journal records " << r.fs.journal_records << ", byte/block writebacks "
      << r.fs.byte_writebacks << '/' << r.fs.block_writebacks << '\n';
    return o.str();
}

std::string format_verdict(const CrashVerdict& v) {
    std::ostringstream o;
    o << "crash.verdict " << (v.pass ? "pass" : "fail") << '\n';
    o << "crash.command " << v.crash_command << '\n';
    o << "crash.total_commands " << v.total_commands << '\n';
    o << "crash.crashed " << (v.crashed ? 1 : 0) << '\n';
    o << "crash.op_index " << v.op_index << '\n';
    o << "recovery.entries_scanned " << v.device_recovery.entries_scanned << '\n';
    o << "recovery.entries_discarded " << v.device_recovery.entries_discarded << '\n';
    o << "recovery.entries_flushed " << v.device_recovery.entries_flushed << '\n';
    o << "recovery.pages_flushed " << v.device_recovery.pages_flushed << '\n';
    o << "recovery.committed_txs " << v.device_recovery.committed.size() << '\n';
    o << "recovery.sim_elapsed_ns " << v.device_recovery.elapsed_sim_ns << '\n';
    o << "recovery.journal_replayed " << (v.journal_replayed ? 1 : 0) << '\n';
    for (const auto& d : v.diagnostics) o << "diag " << d << '\n';
    return o.str();
}

std::optional<SweepParam> parse_sweep_param(std::string_view s) noexcept {
    for (SweepParam p : {SweepParam::flash_latency, SweepParam::log_region_bytes, SweepParam::cacheline_latency})
        if (s == sweep_param_name(p)) return p;
    return std::nullopt;
}

const char* sweep_param_name(SweepParam p) noexcept {
    switch (p) {
    case SweepParam::flash_latency: return "flash_latency";
    case SweepParam::log_region_bytes: return "log_region_bytes";
    case SweepParam::cacheline_latency: return "cacheline_latency";
    }
    return "?";
}

std::string format_sweep(SweepParam param, const std::vector<SweepRow>& rows) {
    std::ostringstream o;
    o << std::left << std::setw(20) << sweep_param_name(param) << std::right << std::setw(18) << "sim elapsed ns"
      << std::setw(14) << "ops/s" << std::setw(16) << "host write" << std::setw(16) << "flash write" << std::setw(8)
      << "cleans" << '\n';
    for (const auto& r : rows) {
        o << std::left << std::setw(20) << r.value << std::right << std::setw(18) << r.report.sim_elapsed_ns << std::setw(14)
          << std::fixed << std::setprecision(1) << r.report.ops_per_sec << std::setw(16) << r.report.traffic.host_to_ssd.total()
          << std::setw(16) << r.report.traffic.flash_write.total() << std::setw(8) << r.report.log.cleans << '\n';
    }
    for (const auto& r : rows)
        o << "sweep." << sweep_param_name(param) << '.' << r.value << ".sim_elapsed_ns " << r.report.sim_elapsed_ns << '\n';
    return o.str();
}

} // namespace bytefs::bench
