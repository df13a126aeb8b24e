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
// Run harness: executes a workload against a fresh image, replays traces
// and checks crash points against a durable-state model.

#include <algorithm>
#include <functional>
#include <map>
#include <cctype>
#include <charconv>
#include <set>

#include "bytefs/bench.hpp"
#include "bytefs/error.hpp"

namespace bytefs::bench {

namespace {

std::uint64_t splitmix(std::uint64_t& s) {
    std::uint64_t z = (s += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

std::vector<std::byte> pattern(std::uint64_t seed, std::uint64_t size) {
    std::vector<std::byte> out(size);
    std::uint64_t s = seed;
    for (std::size_t i = 0; i < size; i += 8) {
        std::uint64_t v = splitmix(s);
        for (std::size_t j = 0; j < 8 && i + j < size; ++j) out[i + j] = std::byte(v >> (8 * j));
    }
    return out;
}

struct Stack {
    std::unique_ptr<Device> dev;
    std::unique_ptr<FileSystem> fs;
};

MountOptions mount_options(const BenchConfig& cfg) {
    MountOptions o;
    o.mode = cfg.mode;
    o.journal = cfg.journal;
    o.cache_bytes = cfg.cache_bytes;
    return o;
}

Stack fresh_stack(const BenchConfig& cfg) {
    validate(cfg);
    DeviceConfig d = cfg.device;
    d.log_enabled = mode_uses_log(cfg.mode);
    Stack s;
    s.dev = std::make_unique<Device>(d);
    s.fs = std::make_unique<FileSystem>(*s.dev, mount_options(cfg));
    s.fs->mkfs();
    s.fs->mount();
    return s;
}

// Pushes committed log contents home; the second call waits out the
// background pass so its time is charged.
void drain(Device& dev) {
    if (!dev.log_enabled()) return;
    dev.clean();
    dev.clean();
}

LogStats log_delta(const LogStats& a, const LogStats& b) {
    LogStats d;
    d.cleans = a.cleans - b.cleans;
    d.pages_flushed = a.pages_flushed - b.pages_flushed;
    d.entries_migrated = a.entries_migrated - b.entries_migrated;
    d.flash_reads = a.flash_reads - b.flash_reads;
    d.flash_writes = a.flash_writes - b.flash_writes;
    d.stall_ns = a.stall_ns - b.stall_ns;
    d.background_ns = a.background_ns - b.background_ns;
    return d;
}

FsStats fs_delta(const FsStats& a, const FsStats& b) {
    FsStats d = a;
    d.transactions -= b.transactions;
    d.journal_records -= b.journal_records;
    d.byte_writebacks -= b.byte_writebacks;
    d.block_writebacks -= b.block_writebacks;
    d.clean_writebacks -= b.clean_writebacks;
    d.direct_byte_ops -= b.direct_byte_ops;
    d.direct_block_ops -= b.direct_block_ops;
    d.evictions -= b.evictions;
    d.forced_dup_writebacks -= b.forced_dup_writebacks;
    d.split_flushes -= b.split_flushes;
    d.journal_replays -= b.journal_replays;
    return d;
}

double ratio(std::uint64_t a, std::uint64_t b) { return b ? static_cast<double>(a) / static_cast<double>(b) : 0.0; }

RunReport run_workload(const BenchConfig& cfg, const Workload& w, const std::string& profile) {
    Stack s = fresh_stack(cfg);
    for (const auto& op : w.prepare) execute(*s.fs, op);
    s.fs->sync();
    drain(*s.dev);

    const TrafficCounters t0 = s.dev->traffic_snapshot();
    const LogStats l0 = s.dev->log_stats();
    const FsStats f0 = s.fs->stats();
    const std::uint64_t start = s.dev->now_ns();

    RunReport r;
    r.profile = profile;
    r.mode = cfg.mode;
    r.seed = cfg.workload.seed;
    r.ops = w.measured.size();
    for (const auto& op : w.measured) {
        std::uint64_t n = execute(*s.fs, op);
        if (op.kind == OpKind::read) r.app_read_bytes += n;
        if (op.kind == OpKind::write || op.kind == OpKind::append) r.app_write_bytes += n;
    }
    s.fs->sync();
    if (cfg.drain_log) drain(*s.dev);

    r.sim_elapsed_ns = s.dev->now_ns() - start;
    r.ops_per_sec = r.sim_elapsed_ns ? static_cast<double>(r.ops) * 1e9 / static_cast<double>(r.sim_elapsed_ns) : 0.0;
    r.traffic = s.dev->traffic_snapshot() - t0;
    r.log = log_delta(s.dev->log_stats(), l0);
    r.fs = fs_delta(s.fs->stats(), f0);
    r.write_amplification = ratio(r.traffic.host_to_ssd.total(), r.app_write_bytes);
    r.read_amplification = ratio(r.traffic.ssd_to_host.total(), r.app_read_bytes);
    r.flash_write_amplification = ratio(r.traffic.flash_write.total(), r.app_write_bytes);
    s.fs->unmount();
    if (!cfg.image_path.empty()) s.dev->save_image(cfg.image_path);
    return r;
}

std::string parent_of(const std::string& p) {
    auto slash = p.rfind('/');
    return slash == 0 ? "/" : p.substr(0, slash);
}

// Data ops on paths the trace never created get the file (and its parent
// directories) made during preparation.
Workload with_precreate(std::vector<Op> ops) {
    Workload w;
    w.measured = std::move(ops);
    std::set<std::string> exists{"/"};
    std::set<std::string> made;
    auto ensure = [&](const std::string& path, bool dir) {
        std::vector<std::string> chain;
        for (std::string p = path; !exists.count(p); p = parent_of(p)) chain.push_back(p);
        for (auto it = chain.rbegin(); it != chain.rend(); ++it) {
            Op o;
            o.kind = (*it == path && !dir) ? OpKind::create : OpKind::mkdir;
            o.path = *it;
            w.prepare.push_back(o);
            exists.insert(*it);
        }
    };
    for (const auto& op : w.measured) {
        switch (op.kind) {
        case OpKind::create:
        case OpKind::mkdir:
            ensure(parent_of(op.path), true);
            exists.insert(op.path);
            break;
        case OpKind::unlink:
        case OpKind::rmdir:
            exists.erase(op.path);
            break;
        case OpKind::rename:
            exists.erase(op.path);
            ensure(parent_of(op.path2), true);
            exists.insert(op.path2);
            break;
        default:
            ensure(op.path, false);
            break;
        }
    }
    return w;
}

// Durable-state model for the crash oracle.
struct Node {
    bool dir = false;
    std::vector<std::byte> data;
};
using Tree = std::map<std::string, Node>;

struct Sig {
    bool dir = false;
    std::uint64_t size = 0;
    std::vector<std::uint64_t> pages;
    bool operator==(const Sig&) const = default;
};
using SigTree = std::map<std::string, Sig>;

std::uint64_t hash_bytes(const std::byte* p, std::size_t n) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (std::size_t i = 0; i < n; ++i) h = (h ^ std::to_integer<std::uint64_t>(p[i])) * 0x100000001b3ull;
    return h;
}

Sig sign(const Node& n, std::size_t ps) {
    Sig s;
    s.dir = n.dir;
    s.size = n.data.size();
    for (std::size_t off = 0; off < n.data.size(); off += ps)
        s.pages.push_back(hash_bytes(n.data.data() + off, std::min<std::size_t>(ps, n.data.size() - off)));
    return s;
}

SigTree sign(const Tree& t, std::size_t ps) {
    SigTree out;
    for (const auto& [p, n] : t) out[p] = sign(n, ps);
    return out;
}

SigTree observe(FileSystem& fs, std::size_t ps) {
    SigTree out;
    std::function<void(const std::string&)> visit = [&](const std::string& dir) {
        for (const auto& [name, type] : fs.readdir(dir.empty() ? "/" : dir)) {
            std::string p = dir + "/" + name;
            Node n;
            if (type == FileType::dir) {
                n.dir = true;
                out[p] = sign(n, ps);
                visit(p);
                continue;
            }
            Fd fd = fs.open(p);
            n.data = fs.read(fd, 0, fs.stat(p).size);
            fs.close(fd);
            out[p] = sign(n, ps);
        }
    };
    visit("");
    return out;
}

class Model {
public:
    const Tree& durable() const { return durable_; }

    void settle() { durable_ = live_; }

    void apply(const Op& op) {
        switch (op.kind) {
        case OpKind::create:
            live_[op.path] = Node{};
            durable_[op.path] = Node{};
            break;
        case OpKind::mkdir:
            live_[op.path] = Node{true, {}};
            durable_[op.path] = Node{true, {}};
            break;
        case OpKind::unlink:
        case OpKind::rmdir:
            live_.erase(op.path);
            durable_.erase(op.path);
            break;
        case OpKind::rename:
            move(live_, op.path, op.path2);
            move(durable_, op.path, op.path2);
            break;
        case OpKind::write:
        case OpKind::append: {
            auto& n = live_.at(op.path);
            std::uint64_t off = op.kind == OpKind::append ? n.data.size() : op.offset;
            auto bytes = pattern(op.data_seed, op.size);
            if (n.data.size() < off + bytes.size()) n.data.resize(off + bytes.size());
            std::copy(bytes.begin(), bytes.end(), n.data.begin() + static_cast<std::ptrdiff_t>(off));
            if (op.sync != SyncKind::none || op.direct) durable_[op.path] = n;
            break;
        }
        case OpKind::fsync:
        case OpKind::fdatasync:
            durable_[op.path] = live_.at(op.path);
            break;
        case OpKind::read:
        case OpKind::stat:
            break;
        }
    }

private:
    static void move(Tree& t, const std::string& from, const std::string& to) {
        if (from == to) return;
        auto it = t.find(from);
        if (it == t.end()) return;
        // Replacing a directory target removes its (empty) entry.
        t.erase(to);
        Node n = std::move(it->second);
        t.erase(it);
        std::vector<std::pair<std::string, Node>> kids;
        const std::string prefix = from + "/";
        for (auto k = t.lower_bound(prefix); k != t.end() && k->first.compare(0, prefix.size(), prefix) == 0;) {
            kids.emplace_back(to + k->first.substr(from.size()), std::move(k->second));
            k = t.erase(k);
        }
        t[to] = std::move(n);
        for (auto& [p, c] : kids) t[p] = std::move(c);
    }

    Tree live_;
    Tree durable_;
};

// Each 4 KiB page comes from one of the two states; sizes must match one.
bool page_mix(const SigTree& got, const SigTree& a, const SigTree& b) {
    std::set<std::string> names;
    for (const auto& [p, _] : a) names.insert(p);
    for (const auto& [p, _] : b) names.insert(p);
    for (const auto& [p, s] : got) {
        auto ia = a.find(p), ib = b.find(p);
        if (ia == a.end() && ib == b.end()) return false;
        if (s.dir) {
            if (!((ia != a.end() && ia->second.dir) || (ib != b.end() && ib->second.dir))) return false;
            continue;
        }
        const Sig* cand[2] = {ia != a.end() ? &ia->second : nullptr, ib != b.end() ? &ib->second : nullptr};
        bool size_ok = false;
        for (auto* c : cand) size_ok |= c && !c->dir && c->size == s.size;
        if (!size_ok) return false;
        for (std::size_t i = 0; i < s.pages.size(); ++i) {
            bool ok = false;
            for (auto* c : cand) ok |= c && !c->dir && i < c->pages.size() && c->pages[i] == s.pages[i];
            if (!ok) return false;
        }
    }
    // Every name present in both states must have survived.
    for (const auto& p : names)
        if (a.count(p) && b.count(p) && !got.count(p)) return false;
    return true;
}

// A sync crash lands some files and not others: each file is whole from
// one state (or page-mixed when `pages`), names are unchanged.
bool file_mix(const SigTree& got, const SigTree& a, const SigTree& b, bool pages) {
    if (got.size() != a.size()) return false;
    for (const auto& [p, s] : got) {
        auto ia = a.find(p), ib = b.find(p);
        if (ia == a.end() || ib == b.end()) return false;
        if (s == ia->second || s == ib->second) continue;
        if (!pages || !page_mix(SigTree{{p, s}}, SigTree{{p, ia->second}}, SigTree{{p, ib->second}})) return false;
    }
    return true;
}

std::string first_difference(const SigTree& got, const SigTree& want) {
    for (const auto& [p, s] : want) {
        auto it = got.find(p);
        if (it == got.end()) return p + " missing";
        if (it->second.dir != s.dir) return p + " has the wrong type";
        if (it->second.size != s.size)
            return p + " size " + std::to_string(it->second.size) + ", expected " + std::to_string(s.size);
        if (it->second.pages != s.pages) return p + " content differs";
    }
    for (const auto& [p, _] : got)
        if (!want.count(p)) return p + " should not exist";
    return "trees equal";
}

std::unique_ptr<FileSystem> power_cycle(Device& dev, std::unique_ptr<FileSystem> fs, const MountOptions& o,
                                        RecoveryReport* dev_out, FsRecoveryReport* fs_out) {
    fs.reset();
    dev.simulate_power_loss();
    RecoveryReport r;
    if (dev.log_enabled()) r = dev.recover();
    auto out = std::make_unique<FileSystem>(dev, o);
    FsRecoveryReport fr = out->mount_recover(dev.log_enabled() ? &r : nullptr);
    if (dev_out) *dev_out = r;
    if (fs_out) *fs_out = fr;
    return out;
}

bool is_data_op(OpKind k) {
    return k == OpKind::write || k == OpKind::append || k == OpKind::fsync || k == OpKind::fdatasync;
}

} // namespace

std::uint64_t execute(FileSystem& fs, const Op& op) {
    switch (op.kind) {
    case OpKind::create: fs.create(op.path); return 0;
    case OpKind::mkdir: fs.mkdir(op.path); return 0;
    case OpKind::unlink: fs.unlink(op.path); return 0;
    case OpKind::rmdir: fs.rmdir(op.path); return 0;
    case OpKind::rename: fs.rename(op.path, op.path2); return 0;
    case OpKind::stat: fs.stat(op.path); return 0;
    default: break;
    }
    Fd fd = fs.open(op.path, OpenFlags{false, op.direct});
    std::uint64_t moved = 0;
    try {
        switch (op.kind) {
        case OpKind::read: {
            std::uint64_t size = fs.stat(op.path).size;
            std::uint64_t len = op.offset < size ? std::min(op.size, size - op.offset) : 0;
            moved = fs.read(fd, op.offset, len).size();
            break;
        }
        case OpKind::write:
        case OpKind::append: {
            std::uint64_t off = op.kind == OpKind::append ? fs.stat(op.path).size : op.offset;
            auto data = pattern(op.data_seed, op.size);
            fs.write(fd, off, data);
            moved = data.size();
            if (op.sync == SyncKind::fsync) fs.fsync(fd);
            if (op.sync == SyncKind::fdatasync) fs.fdatasync(fd);
            break;
        }
        case OpKind::fsync: fs.fsync(fd); break;
        case OpKind::fdatasync: fs.fdatasync(fd); break;
        default: break;
        }
    } catch (const CrashInjected&) {
        throw;
    } catch (...) {
        fs.close(fd);
        throw;
    }
    fs.close(fd);
    return moved;
}

RunReport run(const BenchConfig& cfg) {
    return run_workload(cfg, generate(cfg.workload), profile_name(cfg.workload.profile));
}

std::vector<Op> parse_trace(std::string_view text) {
    std::vector<Op> out;
    std::size_t lineno = 0;
    auto num = [&](const std::string& s) {
        std::uint64_t v = 0;
        auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
        if (ec != std::errc{} || p != s.data() + s.size())
            fail(Errc::parse_error, "trace line " + std::to_string(lineno) + ": bad number '" + s + "'");
        return v;
    };
    while (!text.empty()) {
        std::size_t nl = text.find('\n');
        std::string line(text.substr(0, nl));
        text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
        ++lineno;
        if (auto h = line.find('#'); h != std::string::npos) line.resize(h);
        std::vector<std::string> tok;
        for (std::size_t i = 0; i < line.size();) {
            while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
            std::size_t j = i;
            while (j < line.size() && !std::isspace(static_cast<unsigned char>(line[j]))) ++j;
            if (j > i) tok.push_back(line.substr(i, j - i));
            i = j;
        }
        if (tok.empty()) continue;
        auto bad = [&](const std::string& why) {
            fail(Errc::parse_error, "trace line " + std::to_string(lineno) + ": " + why);
        };
        Op o;
        o.data_seed = lineno;
        const std::string& verb = tok[0];
        auto need = [&](std::size_t lo, std::size_t hi) {
            if (tok.size() < lo || tok.size() > hi) bad("wrong number of arguments for " + verb);
        };
        auto sync_word = [&](const std::string& w, bool append) {
            if (w == "fsync" || (append && w == "sync")) return SyncKind::fsync;
            if (w == "fdatasync") return SyncKind::fdatasync;
            bad("unknown sync flag '" + w + "'");
            return SyncKind::none;
        };
        if (verb == "create" || verb == "mkdir" || verb == "unlink" || verb == "rmdir" || verb == "stat" ||
            verb == "fsync" || verb == "fdatasync") {
            need(2, 2);
            o.kind = verb == "create"  ? OpKind::create
                     : verb == "mkdir" ? OpKind::mkdir
                     : verb == "unlink" ? OpKind::unlink
                     : verb == "rmdir" ? OpKind::rmdir
                     : verb == "stat"  ? OpKind::stat
                     : verb == "fsync" ? OpKind::fsync
                                       : OpKind::fdatasync;
        } else if (verb == "rename") {
            need(3, 3);
            o.kind = OpKind::rename;
            o.path2 = tok[2];
        } else if (verb == "write") {
            need(4, 5);
            o.kind = OpKind::write;
            o.offset = num(tok[2]);
            o.size = num(tok[3]);
            if (tok.size() == 5) o.sync = sync_word(tok[4], false);
        } else if (verb == "append") {
            need(3, 4);
            o.kind = OpKind::append;
            o.size = num(tok[2]);
            if (tok.size() == 4) o.sync = sync_word(tok[3], true);
        } else if (verb == "read") {
            need(4, 4);
            o.kind = OpKind::read;
            o.offset = num(tok[2]);
            o.size = num(tok[3]);
        } else {
            bad("unknown operation '" + verb + "'");
        }
        o.path = tok[1];
        if (o.path.empty() || o.path[0] != '/' || (o.kind == OpKind::rename && o.path2[0] != '/'))
            bad("paths must be absolute");
        out.push_back(std::move(o));
    }
    return out;
}

RunReport replay(std::string_view trace, const BenchConfig& cfg) {
    return run_workload(cfg, with_precreate(parse_trace(trace)), "trace");
}

CrashVerdict crash_run(const BenchConfig& cfg, std::optional<std::uint64_t> crash_at) {
    const Workload w = generate(cfg.workload);
    const MountOptions o = mount_options(cfg);
    const std::size_t ps = cfg.device.page_size;
    Model model;
    std::vector<std::byte> image;
    {
        Stack s = fresh_stack(cfg);
        for (const auto& op : w.prepare) {
            execute(*s.fs, op);
            model.apply(op);
        }
        s.fs->sync();
        drain(*s.dev);
        model.settle();
        s.fs->unmount();
        image = s.dev->serialize();
    }

    auto measured = [&](FileSystem& fs, Device& dev, const std::function<void(std::size_t)>& done) {
        for (std::size_t i = 0; i < w.measured.size(); ++i) {
            execute(fs, w.measured[i]);
            if (done) done(i);
        }
        fs.sync();
        if (cfg.drain_log) drain(dev);
    };

    CrashVerdict v;
    {
        auto dev = Device::deserialize(image);
        FileSystem fs(*dev, o);
        fs.mount();
        const std::uint64_t c0 = dev->command_count();
        measured(fs, *dev, nullptr);
        v.total_commands = dev->command_count() - c0;
    }
    if (crash_at) {
        v.crash_command = *crash_at;
    } else {
        std::uint64_t s = cfg.workload.seed ^ 0x5bd1e995ull;
        v.crash_command = v.total_commands ? splitmix(s) % v.total_commands : 0;
    }

    auto dev = Device::deserialize(image);
    auto fs = std::make_unique<FileSystem>(*dev, o);
    fs->mount();
    dev->arm_crash(dev->command_count() + v.crash_command);
    std::size_t completed = 0;
    try {
        measured(*fs, *dev, [&](std::size_t i) {
            model.apply(w.measured[i]);
            completed = i + 1;
        });
    } catch (const CrashInjected&) {
        v.crashed = true;
    }
    v.op_index = completed;
    if (!cfg.image_path.empty()) dev->save_image(cfg.image_path);

    SigTree before = sign(model.durable(), ps);
    SigTree after = before;
    bool mix_ok = false;
    bool in_sync = false;
    if (v.crashed && completed < w.measured.size()) {
        const Op& op = w.measured[completed];
        model.apply(op);
        after = sign(model.durable(), ps);
        mix_ok = cfg.journal == JournalMode::ordered && is_data_op(op.kind);
    } else if (v.crashed) {
        // Power failed in the final sync; unsynced data may land page by page.
        model.settle();
        after = sign(model.durable(), ps);
        mix_ok = cfg.journal == JournalMode::ordered;
        in_sync = true;
    }

    FsRecoveryReport fr;
    try {
        fs = power_cycle(*dev, std::move(fs), o, &v.device_recovery, &fr);
    } catch (const std::exception& e) {
        v.diagnostics.push_back(std::string("recovery failed: ") + e.what());
        return v;
    }
    v.journal_replayed = fr.journal_replayed;

    SigTree got = observe(*fs, ps);
    bool match = got == before || got == after || (mix_ok && page_mix(got, before, after)) ||
                 (in_sync && file_mix(got, before, after, mix_ok));
    if (!match) {
        v.diagnostics.push_back("recovered tree matches neither boundary around op " + std::to_string(completed) +
                                ": versus before, " + first_difference(got, before) + "; versus after, " +
                                first_difference(got, after));
    }
    fs.reset();
    for (const auto& f : bytefs::fsck(*dev)) v.diagnostics.push_back("fsck " + f.kind + ": " + f.detail);
    try {
        fs = power_cycle(*dev, nullptr, o, nullptr, nullptr);
        if (observe(*fs, ps) != got) v.diagnostics.push_back("second recovery changed the tree");
    } catch (const std::exception& e) {
        v.diagnostics.push_back(std::string("second recovery failed: ") + e.what());
    }
    v.pass = v.diagnostics.empty();
    return v;
}

std::vector<SweepRow> sweep(const BenchConfig& cfg, SweepParam param, const std::vector<std::uint64_t>& values) {
    std::vector<SweepRow> rows;
    for (std::uint64_t value : values) {
        BenchConfig c = cfg;
        switch (param) {
        case SweepParam::flash_latency: c.device.flash_write_latency_ns = value; break;
        case SweepParam::log_region_bytes: c.device.log_region_bytes = value; break;
        case SweepParam::cacheline_latency: c.device.cacheline_write_latency_ns = value; break;
        }
        rows.push_back({value, run(c)});
    }
    return rows;
}

} // namespace bytefs::bench
