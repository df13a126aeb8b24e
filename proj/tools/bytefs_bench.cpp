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
// bytefs-bench: workload runs, trace replay, crash checks, parameter
// sweeps and offline image tools.

#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "bytefs/bench.hpp"
#include "bytefs/error.hpp"

using namespace bytefs;
using namespace bytefs::bench;

namespace {

struct Args {
    std::string config;
    std::string mode;
    std::string profile;
    std::optional<std::uint64_t> seed;
    std::string out;
    std::optional<std::uint64_t> crash_at;
    std::string image;
    std::string trace;
    std::string param = "flash_latency";
    std::string values;
    bool machine = false;
};

std::uint64_t parse_value(const std::string& s) {
    // Reuse the config parser for unit suffixes.
    BenchConfig c = parse_config("device.capacity_bytes = " + s);
    return c.device.capacity_bytes;
}

BenchConfig build_config(const Args& a) {
    // Profile defaults first, then the config file, then the other flags.
    BenchConfig c = default_config();
    std::optional<Profile> prof;
    if (!a.profile.empty()) {
        prof = parse_profile(a.profile);
        if (!prof) fail(Errc::invalid_argument, "unknown profile '" + a.profile + "'");
        c.workload = default_spec(*prof);
    }
    if (!a.config.empty()) c = load_config(a.config, c);
    if (prof && *prof != c.workload.profile) {
        std::uint64_t seed = c.workload.seed;
        c.workload = default_spec(*prof);
        c.workload.seed = seed;
    }
    if (!a.mode.empty()) {
        auto m = parse_mode(a.mode);
        if (!m) fail(Errc::invalid_argument, "unknown mode '" + a.mode + "'");
        c.mode = *m;
    }
    if (a.seed) c.workload.seed = *a.seed;
    c.image_path = a.image;
    validate(c);
    return c;
}

void emit(const Args& a, const std::string& human, const std::string& machine) {
    std::cout << (a.machine ? machine : human);
    if (!a.out.empty()) {
        std::ofstream f(a.out);
        if (!f) fail(Errc::invalid_argument, "cannot write " + a.out);
        f << machine;
    }
}

std::string read_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail(Errc::not_found, "cannot open " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

int cmd_run(const Args& a) {
    RunReport r = run(build_config(a));
    emit(a, format_table(r), format_machine(r));
    return 0;
}

int cmd_replay(const Args& a) {
    RunReport r = replay(read_file(a.trace), build_config(a));
    emit(a, format_table(r), format_machine(r));
    return 0;
}

int cmd_crash(const Args& a) {
    CrashVerdict v = crash_run(build_config(a), a.crash_at);
    std::string text = format_verdict(v);
    emit(a, text, text);
    return v.pass ? 0 : 1;
}

int cmd_sweep(const Args& a) {
    auto param = parse_sweep_param(a.param);
    if (!param) fail(Errc::invalid_argument, "unknown sweep parameter '" + a.param + "'");
    std::vector<std::uint64_t> values;
    std::string spec = a.values;
    if (spec.empty()) {
        switch (*param) {
        case SweepParam::flash_latency: spec = "30000,60000,120000,240000"; break;
        case SweepParam::log_region_bytes: spec = "4MiB,8MiB,16MiB,32MiB,64MiB"; break;
        case SweepParam::cacheline_latency: spec = "300,600,1200,2400"; break;
        }
    }
    std::stringstream ss(spec);
    for (std::string item; std::getline(ss, item, ',');)
        if (!item.empty()) values.push_back(parse_value(item));
    BenchConfig cfg = build_config(a);
    cfg.image_path.clear();
    auto rows = sweep(cfg, *param, values);
    std::string text = format_sweep(*param, rows);
    emit(a, text, text);
    return 0;
}

int cmd_fsck(const Args& a) {
    if (a.image.empty()) fail(Errc::invalid_argument, "fsck needs --image");
    auto dev = Device::load_image(a.image);
    auto found = fsck(*dev);
    std::ostringstream o;
    for (const auto& v : found) o << "fsck." << v.kind << ' ' << v.detail << '\n';
    o << "fsck.violations " << found.size() << '\n';
    emit(a, o.str(), o.str());
    return found.empty() ? 0 : 1;
}

int cmd_recover(const Args& a) {
    if (a.image.empty()) fail(Errc::invalid_argument, "recover needs --image");
    auto dev = Device::load_image(a.image);
    MountOptions o;
    if (!a.mode.empty()) {
        auto m = parse_mode(a.mode);
        if (!m) fail(Errc::invalid_argument, "unknown mode '" + a.mode + "'");
        o.mode = *m;
    } else {
        // mkfs records the mode it was made for.
        Superblock sb = Superblock::decode(dev->block_read(0, Category::superblock));
        o.mode = static_cast<FsMode>(sb.mode_flags & 0x3);
        if (sb.mode_flags & 0x10) o.journal = JournalMode::data;
    }
    dev->simulate_power_loss();
    RecoveryReport r;
    if (dev->log_enabled()) r = dev->recover();
    FileSystem fs(*dev, o);
    FsRecoveryReport fr = fs.mount_recover(dev->log_enabled() ? &r : nullptr);
    fs.unmount();
    auto found = fsck(*dev);
    std::ostringstream out;
    out << "recovery.mode " << mode_name(o.mode) << '\n';
    out << "recovery.entries_scanned " << r.entries_scanned << '\n';
    out << "recovery.entries_discarded " << r.entries_discarded << '\n';
    out << "recovery.entries_flushed " << r.entries_flushed << '\n';
    out << "recovery.pages_flushed " << r.pages_flushed << '\n';
    out << "recovery.committed_txs " << r.committed.size() << '\n';
    out << "recovery.sim_elapsed_ns " << r.elapsed_sim_ns << '\n';
    out << "recovery.journal_replayed " << (fr.journal_replayed ? 1 : 0) << '\n';
    out << "recovery.journal_items " << fr.items_replayed << '\n';
    out << "fsck.violations " << found.size() << '\n';
    std::cout << out.str();
    dev->save_image(a.out.empty() ? a.image : a.out);
    return found.empty() ? 0 : 1;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"ByteFS benchmark and recovery tool"};
    app.require_subcommand(1);
    Args a;

    auto common = [&](CLI::App* sub) {
        sub->add_option("--config", a.config, "key = value configuration file");
        sub->add_option("--mode", a.mode, "block_only | dual | dual_log | full");
        sub->add_option("--seed", a.seed, "workload seed");
        sub->add_option("--profile", a.profile, "workload profile");
        sub->add_option("--out", a.out, "write the machine-readable report here");
        sub->add_option("--image", a.image, "save the device image here");
        sub->add_flag("--machine", a.machine, "print section.key value lines");
    };
    auto* run_cmd = app.add_subcommand("run", "run a workload profile on a fresh image");
    common(run_cmd);
    auto* replay_cmd = app.add_subcommand("replay", "replay a text trace");
    common(replay_cmd);
    replay_cmd->add_option("trace", a.trace, "trace file")->required();
    auto* crash_cmd = app.add_subcommand("crash", "inject power loss and check recovery");
    common(crash_cmd);
    crash_cmd->add_option("--crash-at", a.crash_at, "device command index within the measured phase");
    auto* sweep_cmd = app.add_subcommand("sweep", "run a profile across device parameter values");
    common(sweep_cmd);
    sweep_cmd->add_option("--param", a.param, "flash_latency | log_region_bytes | cacheline_latency");
    sweep_cmd->add_option("--values", a.values, "comma-separated values (KiB/MiB/GiB suffixes allowed)");
    auto* fsck_cmd = app.add_subcommand("fsck", "check a saved image");
    fsck_cmd->add_option("--image", a.image, "device image")->required();
    fsck_cmd->add_option("--out", a.out, "write the report here");
    auto* recover_cmd = app.add_subcommand("recover", "power-cycle a saved image and recover it");
    recover_cmd->add_option("--image", a.image, "device image")->required();
    recover_cmd->add_option("--mode", a.mode, "mount mode (default: recorded at mkfs)");
    recover_cmd->add_option("--out", a.out, "save the recovered image here instead of in place");

    CLI11_PARSE(app, argc, argv);
    try {
        if (run_cmd->parsed()) return cmd_run(a);
        if (replay_cmd->parsed()) return cmd_replay(a);
        if (crash_cmd->parsed()) return cmd_crash(a);
        if (sweep_cmd->parsed()) return cmd_sweep(a);
        if (fsck_cmd->parsed()) return cmd_fsck(a);
        if (recover_cmd->parsed()) return cmd_recover(a);
    } catch (const Error& e) {
        std::cerr << "bytefs-bench: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "bytefs-bench: " << e.what() << '\n';
        return 3;
    }
    return 2;
}
