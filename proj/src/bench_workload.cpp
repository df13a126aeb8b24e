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
// Profile generators. Each logical thread owns a disjoint subtree and its
// own RNG stream; threads are interleaved one op at a time.

#include <algorithm>
#include <deque>
#include <random>

#include "bytefs/bench.hpp"
#include "bytefs/error.hpp"

namespace bytefs::bench {

namespace {

constexpr std::uint64_t kDirWidth = 100;

struct ProfileInfo {
    Profile p;
    const char* name;
};

constexpr ProfileInfo kProfiles[] = {
    {Profile::create, "create"},         {Profile::remove, "delete"},     {Profile::mkdir, "mkdir"},
    {Profile::rmdir, "rmdir"},           {Profile::varmail, "varmail"},   {Profile::fileserver, "fileserver"},
    {Profile::webproxy, "webproxy"},     {Profile::webserver, "webserver"}, {Profile::oltp, "oltp"},
    {Profile::kvstore, "kvstore"},
};

std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
    std::uint64_t x = a * 0x9e3779b97f4a7c15ull ^ (b + 0x632be59bd9b4e019ull);
    x ^= x >> 31;
    x *= 0xbf58476d1ce4e5b9ull;
    x ^= x >> 29;
    return x;
}

class Thread {
public:
    Thread(const WorkloadSpec& spec, std::uint32_t id)
        : spec_(spec), id_(id), rng_(mix(spec.seed, id + 1)) {
        quota_ = spec.file_count / spec.thread_count + (id < spec.file_count % spec.thread_count ? 1 : 0);
        dirs_ = std::max<std::uint64_t>(1, (quota_ + kDirWidth - 1) / kDirWidth);
    }

    /// Files any thread may overwrite (oltp shares its data files).
    void share(const std::vector<std::string>* all) { shared_ = all; }
    const std::vector<std::string>& live() const { return live_; }

    void prepare(std::vector<Op>& out) {
        out.push_back(op(OpKind::mkdir, root()));
        for (std::uint64_t d = 0; d < dirs_; ++d) out.push_back(op(OpKind::mkdir, dir(d)));
        if (spec_.profile == Profile::create || spec_.profile == Profile::mkdir) return;
        for (std::uint64_t i = 0; i < quota_; ++i) {
            std::string p = fresh_name();
            if (spec_.profile == Profile::rmdir) {
                out.push_back(op(OpKind::mkdir, p));
                live_.push_back(p);
                continue;
            }
            out.push_back(op(OpKind::create, p));
            if (spec_.file_size) out.push_back(op(OpKind::write, p, 0, spec_.file_size));
            live_.push_back(p);
        }
        switch (spec_.profile) {
        case Profile::webserver:
        case Profile::webproxy:
        case Profile::oltp:
        case Profile::kvstore:
            out.push_back(op(OpKind::create, log_path()));
            break;
        default:
            break;
        }
    }

    /// Next measured op, or nullopt when the profile has run dry.
    std::optional<Op> next() {
        if (pending_.empty()) refill();
        if (pending_.empty()) return std::nullopt;
        Op o = std::move(pending_.front());
        pending_.pop_front();
        return o;
    }

private:
    std::string root() const { return "/t" + std::to_string(id_); }
    std::string dir(std::uint64_t d) const { return root() + "/d" + std::to_string(d); }
    std::string log_path() const { return root() + "/log"; }
    std::string fresh_name() {
        std::uint64_t i = next_id_++;
        return dir(i % dirs_) + "/f" + std::to_string(i);
    }

    Op op(OpKind k, std::string path, std::uint64_t off = 0, std::uint64_t size = 0, SyncKind sync = SyncKind::none) {
        Op o;
        o.kind = k;
        o.path = std::move(path);
        o.offset = off;
        o.size = size;
        o.sync = sync;
        o.thread = id_;
        o.data_seed = mix(spec_.seed, (std::uint64_t{id_} << 40) ^ ++op_seq_);
        return o;
    }

    std::uint64_t uniform(std::uint64_t lo, std::uint64_t hi) {
        return std::uniform_int_distribution<std::uint64_t>(lo, hi)(rng_);
    }

    std::optional<std::string> pick() {
        if (live_.empty()) return std::nullopt;
        return live_[uniform(0, live_.size() - 1)];
    }

    std::optional<std::string> take() {
        if (live_.empty()) return std::nullopt;
        std::size_t i = uniform(0, live_.size() - 1);
        std::string p = std::move(live_[i]);
        live_[i] = std::move(live_.back());
        live_.pop_back();
        return p;
    }

    void push(Op o) { pending_.push_back(std::move(o)); }

    void refill() {
        const std::uint64_t io = 16 * KiB;
        switch (spec_.profile) {
        case Profile::create: {
            if (made_ >= quota_) return;
            ++made_;
            std::string p = fresh_name();
            push(op(OpKind::create, p));
            if (spec_.file_size) push(op(OpKind::write, p, 0, spec_.file_size));
            break;
        }
        case Profile::mkdir:
            if (made_ >= quota_) return;
            ++made_;
            push(op(OpKind::mkdir, fresh_name()));
            break;
        case Profile::remove:
            if (auto p = take()) push(op(OpKind::unlink, *p));
            break;
        case Profile::rmdir:
            if (auto p = take()) push(op(OpKind::rmdir, *p));
            break;
        case Profile::varmail: {
            if (auto p = take()) push(op(OpKind::unlink, *p));
            std::string n = fresh_name();
            push(op(OpKind::create, n));
            push(op(OpKind::append, n, 0, uniform(1, io), SyncKind::fsync));
            live_.push_back(n);
            if (auto p = pick()) {
                push(op(OpKind::read, *p, 0, UINT64_MAX));
                push(op(OpKind::append, *p, 0, uniform(1, io), SyncKind::fsync));
            }
            if (auto p = pick()) push(op(OpKind::read, *p, 0, UINT64_MAX));
            break;
        }
        case Profile::fileserver: {
            std::string n = fresh_name();
            push(op(OpKind::create, n));
            push(op(OpKind::write, n, 0, spec_.file_size));
            live_.push_back(n);
            if (auto p = pick()) push(op(OpKind::append, *p, 0, uniform(1, io)));
            if (auto p = pick()) push(op(OpKind::read, *p, 0, UINT64_MAX));
            if (auto p = take()) push(op(OpKind::unlink, *p));
            if (auto p = pick()) push(op(OpKind::stat, *p));
            break;
        }
        case Profile::webproxy: {
            if (auto p = take()) push(op(OpKind::unlink, *p));
            std::string n = fresh_name();
            push(op(OpKind::create, n));
            push(op(OpKind::append, n, 0, uniform(1, io)));
            live_.push_back(n);
            for (int i = 0; i < 5; ++i)
                if (auto p = pick()) push(op(OpKind::read, *p, 0, UINT64_MAX));
            push(op(OpKind::append, log_path(), 0, uniform(1, io)));
            break;
        }
        case Profile::webserver:
            for (int i = 0; i < 10; ++i)
                if (auto p = pick()) push(op(OpKind::read, *p, 0, UINT64_MAX));
            push(op(OpKind::append, log_path(), 0, io));
            break;
        case Profile::oltp: {
            // Small in-place record updates and redo-log appends, each made
            // durable with fdatasync.
            std::uint64_t sz = uniform(64, 256);
            if (uniform(0, 1) == 0 || !shared_ || shared_->empty()) {
                push(op(OpKind::append, log_path(), 0, sz, SyncKind::fdatasync));
            } else {
                const std::string& p = (*shared_)[uniform(0, shared_->size() - 1)];
                std::uint64_t off = uniform(0, spec_.file_size > sz ? spec_.file_size - sz : 0);
                push(op(OpKind::write, p, off, sz, SyncKind::fdatasync));
            }
            break;
        }
        case Profile::kvstore: {
            // Write-ahead log appends; every 64th a memtable flush writes a
            // new table, every 4th flush compacts two tables into one.
            push(op(OpKind::append, log_path(), 0, 1000, SyncKind::fdatasync));
            if (++wal_ % 64 != 0) break;
            std::string t = fresh_name();
            push(op(OpKind::create, t));
            push(op(OpKind::write, t, 0, spec_.file_size, SyncKind::fsync));
            live_.push_back(t);
            if (++flushes_ % 4 == 0 && live_.size() >= 3) {
                auto a = take();
                auto b = take();
                push(op(OpKind::read, *a, 0, UINT64_MAX));
                push(op(OpKind::read, *b, 0, UINT64_MAX));
                std::string m = fresh_name();
                push(op(OpKind::create, m));
                push(op(OpKind::write, m, 0, 2 * spec_.file_size, SyncKind::fsync));
                push(op(OpKind::unlink, *a));
                push(op(OpKind::unlink, *b));
                live_.push_back(m);
            }
            break;
        }
        }
    }

    const WorkloadSpec& spec_;
    std::uint32_t id_;
    std::mt19937_64 rng_;
    std::uint64_t dirs_ = 1;
    std::uint64_t quota_ = 0;
    const std::vector<std::string>* shared_ = nullptr;
    std::uint64_t next_id_ = 0;
    std::uint64_t made_ = 0;
    std::uint64_t op_seq_ = 0;
    std::uint64_t wal_ = 0;
    std::uint64_t flushes_ = 0;
    std::vector<std::string> live_;
    std::deque<Op> pending_;
};

} // namespace

const char* profile_name(Profile p) noexcept {
    for (const auto& i : kProfiles)
        if (i.p == p) return i.name;
    return "?";
}

std::optional<Profile> parse_profile(std::string_view s) noexcept {
    for (const auto& i : kProfiles)
        if (s == i.name) return i.p;
    return std::nullopt;
}

const char* op_name(OpKind k) noexcept {
    switch (k) {
    case OpKind::create: return "create";
    case OpKind::mkdir: return "mkdir";
    case OpKind::unlink: return "unlink";
    case OpKind::rmdir: return "rmdir";
    case OpKind::rename: return "rename";
    case OpKind::write: return "write";
    case OpKind::append: return "append";
    case OpKind::read: return "read";
    case OpKind::stat: return "stat";
    case OpKind::fsync: return "fsync";
    case OpKind::fdatasync: return "fdatasync";
    }
    return "?";
}

WorkloadSpec default_spec(Profile p) {
    WorkloadSpec s;
    s.profile = p;
    s.thread_count = 12;
    switch (p) {
    case Profile::create:
        s.file_count = 10000;
        s.file_size = 4 * KiB;
        s.op_count = 20000;
        break;
    case Profile::remove:
        s.file_count = 10000;
        s.file_size = 4 * KiB;
        s.op_count = 10000;
        break;
    case Profile::mkdir:
    case Profile::rmdir:
        s.file_count = 10000;
        s.op_count = 10000;
        break;
    case Profile::varmail:
    case Profile::webproxy:
    case Profile::webserver:
        s.file_count = 10000;
        s.file_size = 16 * KiB;
        s.op_count = 20000;
        break;
    case Profile::fileserver:
        s.file_count = 1000;
        s.file_size = 128 * KiB;
        s.op_count = 10000;
        break;
    case Profile::oltp:
        s.file_count = 16;
        s.file_size = 1 * MiB;
        s.thread_count = 200;
        s.op_count = 20000;
        break;
    case Profile::kvstore:
        s.file_count = 100;
        s.file_size = 256 * KiB;
        s.thread_count = 4;
        s.op_count = 20000;
        break;
    }
    return s;
}

Workload generate(const WorkloadSpec& spec) {
    if (spec.thread_count == 0) fail(Errc::invalid_argument, "thread_count must be positive");
    std::vector<Thread> threads;
    threads.reserve(spec.thread_count);
    for (std::uint32_t t = 0; t < spec.thread_count; ++t) threads.emplace_back(spec, t);
    Workload w;
    for (auto& t : threads) t.prepare(w.prepare);
    std::vector<std::string> all;
    if (spec.profile == Profile::oltp) {
        for (const auto& t : threads) all.insert(all.end(), t.live().begin(), t.live().end());
        for (auto& t : threads) t.share(&all);
    }
    std::vector<bool> dry(spec.thread_count, false);
    std::size_t active = spec.thread_count;
    while (w.measured.size() < spec.op_count && active > 0) {
        for (std::uint32_t t = 0; t < spec.thread_count && w.measured.size() < spec.op_count; ++t) {
            if (dry[t]) continue;
            auto o = threads[t].next();
            if (!o) {
                dry[t] = true;
                --active;
                continue;
            }
            w.measured.push_back(std::move(*o));
        }
    }
    return w;
}

} // namespace bytefs::bench
