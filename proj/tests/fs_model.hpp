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

// In-memory reference file system and a randomized differential driver.

#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "bytefs/error.hpp"
#include "fs_util.hpp"

namespace bytefs::testing {

class ModelFs {
public:
    ModelFs() { nodes_["/"] = Node{true, {}}; }

    std::optional<Errc> create(const std::string& p, bool dir) {
        if (p == "/") return Errc::already_exists;
        if (auto e = check_parent(p)) return e;
        if (nodes_.count(p)) return Errc::already_exists;
        nodes_[p] = Node{dir, {}};
        return std::nullopt;
    }

    std::optional<Errc> remove(const std::string& p, bool dir) {
        if (p == "/") return Errc::invalid_argument;
        if (auto e = check_parent(p)) return e;
        auto it = nodes_.find(p);
        if (it == nodes_.end()) return Errc::not_found;
        if (!dir && it->second.dir) return Errc::is_a_directory;
        if (dir && !it->second.dir) return Errc::not_a_directory;
        if (dir && has_children(p)) return Errc::not_empty;
        nodes_.erase(it);
        return std::nullopt;
    }

    std::optional<Errc> rename(const std::string& from, const std::string& to) {
        if (from == "/" || to == "/") return Errc::invalid_argument;
        if (auto e = check_parent(from)) return e;
        auto src = nodes_.find(from);
        if (src == nodes_.end()) return Errc::not_found;
        if (auto e = check_parent(to)) return e;
        const bool dir = src->second.dir;
        if (dir && (to.rfind(from + "/", 0) == 0)) return Errc::invalid_argument;
        auto dst = nodes_.find(to);
        if (dst != nodes_.end()) {
            if (from == to) return std::nullopt;
            if (dir && !dst->second.dir) return Errc::not_a_directory;
            if (!dir && dst->second.dir) return Errc::is_a_directory;
            if (dst->second.dir && has_children(to)) return Errc::not_empty;
            nodes_.erase(dst);
        }
        std::map<std::string, Node> moved;
        for (auto it = nodes_.begin(); it != nodes_.end();) {
            if (it->first == from || it->first.rfind(from + "/", 0) == 0) {
                moved[to + it->first.substr(from.size())] = std::move(it->second);
                it = nodes_.erase(it);
            } else {
                ++it;
            }
        }
        nodes_.merge(moved);
        return std::nullopt;
    }

    std::optional<Errc> open_file(const std::string& p) {
        if (p == "/") return Errc::is_a_directory;
        if (auto e = check_parent(p)) return e;
        auto it = nodes_.find(p);
        if (it == nodes_.end()) return Errc::not_found;
        if (it->second.dir) return Errc::is_a_directory;
        return std::nullopt;
    }

    void write(const std::string& p, std::uint64_t off, const std::string& data) {
        auto& c = nodes_.at(p).content;
        if (c.size() < off + data.size()) c.resize(off + data.size(), '\0');
        c.replace(off, data.size(), data);
    }

    std::string read(const std::string& p, std::uint64_t off, std::uint64_t len) const {
        const auto& c = nodes_.at(p).content;
        if (off >= c.size()) return {};
        return c.substr(off, len);
    }

    std::map<std::string, std::string> tree() const {
        std::map<std::string, std::string> out;
        for (const auto& [p, n] : nodes_)
            if (p != "/") out[p] = n.dir ? "<dir>" : n.content;
        return out;
    }

    std::vector<std::string> paths(bool dirs, bool files) const {
        std::vector<std::string> out;
        for (const auto& [p, n] : nodes_)
            if ((n.dir && dirs) || (!n.dir && files)) out.push_back(p);
        return out;
    }

private:
    struct Node {
        bool dir = false;
        std::string content;
    };

    static std::string parent_of(const std::string& p) {
        auto pos = p.rfind('/');
        return pos == 0 ? "/" : p.substr(0, pos);
    }

    // Errors a walk to the parent would raise.
    std::optional<Errc> check_parent(const std::string& p) const {
        std::string par = parent_of(p);
        if (par == "/") return std::nullopt;
        // The first missing or non-directory component decides.
        std::size_t pos = 0;
        while (true) {
            pos = par.find('/', pos + 1);
            std::string prefix = par.substr(0, pos);
            auto it = nodes_.find(prefix);
            if (it == nodes_.end()) return Errc::not_found;
            if (!it->second.dir) return Errc::not_a_directory;
            if (pos == std::string::npos) return std::nullopt;
        }
    }

    bool has_children(const std::string& p) const {
        auto it = nodes_.upper_bound(p + "/");
        return it != nodes_.end() && it->first.rfind(p + "/", 0) == 0;
    }

    std::map<std::string, Node> nodes_;
};

struct ModelRunResult {
    std::uint64_t ops = 0;
    std::uint64_t mismatches = 0;
    std::uint64_t remounts = 0;
    std::string first_mismatch;
    std::size_t final_nodes = 0;
    std::uint64_t final_bytes = 0;
};

/// Runs `ops` random operations against both `fs` and the model.
inline ModelRunResult run_model_equivalence(FsMode mode, std::uint64_t ops, std::uint64_t seed,
                                            std::uint64_t cache_pages = 64) {
    DeviceConfig cfg = small_config();
    cfg.capacity_bytes = 128 * MiB;
    Device dev(config_for(mode, cfg));
    MountOptions o;
    o.mode = mode;
    o.cache_bytes = cache_pages * 4096;
    auto fs = std::make_unique<FileSystem>(dev, o);
    fs->mkfs();
    fs->mount();
    ModelFs model;
    std::mt19937_64 rng(seed);
    ModelRunResult res;
    auto note = [&](const std::string& what) {
        if (res.mismatches++ == 0) res.first_mismatch = "op " + std::to_string(res.ops) + ": " + what;
    };
    const std::vector<std::string> names = {"a", "b", "c", "dir", "a_much_longer_file_name_for_dentry_sizing_tests_xxxxxxxx"};
    auto random_path = [&] {
        std::uniform_int_distribution<int> depth(1, 3);
        std::string p;
        int d = depth(rng);
        for (int i = 0; i < d; ++i) p += "/" + names[rng() % names.size()];
        return p;
    };
    auto existing_or_random = [&](bool dirs, bool files) {
        auto v = model.paths(dirs, files);
        if (!v.empty() && rng() % 4 != 0) return v[rng() % v.size()];
        return random_path();
    };
    auto errc_of = [](auto&& fn) -> std::optional<Errc> {
        try {
            fn();
        } catch (const Error& e) {
            return e.code();
        }
        return std::nullopt;
    };
    auto errstr = [](std::optional<Errc> e) { return e ? std::string(errc_name(*e)) : std::string("ok"); };
    auto expect_same = [&](const std::string& what, std::optional<Errc> want, std::optional<Errc> got) {
        if (want != got) note(what + " model=" + errstr(want) + " fs=" + errstr(got));
    };

    for (; res.ops < ops; ++res.ops) {
        int kind = static_cast<int>(rng() % 100);
        if (kind < 15) {
            auto p = existing_or_random(true, false) + "/" + names[rng() % names.size()];
            if (p.rfind("//", 0) == 0) p = p.substr(1);
            expect_same("create " + p, model.create(p, false), errc_of([&] { fs->create(p); }));
        } else if (kind < 23) {
            auto p = random_path();
            expect_same("mkdir " + p, model.create(p, true), errc_of([&] { fs->mkdir(p); }));
        } else if (kind < 30) {
            auto p = existing_or_random(false, true);
            expect_same("unlink " + p, model.remove(p, false), errc_of([&] { fs->unlink(p); }));
        } else if (kind < 35) {
            auto p = existing_or_random(true, false);
            if (p == "/") continue;
            expect_same("rmdir " + p, model.remove(p, true), errc_of([&] { fs->rmdir(p); }));
        } else if (kind < 43) {
            auto a = existing_or_random(true, true);
            auto b = rng() % 2 ? existing_or_random(true, true) : random_path();
            if (a == "/" || b == "/") continue;
            expect_same("rename " + a + " " + b, model.rename(a, b), errc_of([&] { fs->rename(a, b); }));
        } else if (kind < 75) {
            auto p = existing_or_random(false, true);
            bool direct = rng() % 5 == 0;
            auto want = model.open_file(p);
            Fd fd = -1;
            auto got = errc_of([&] { fd = fs->open(p, {.direct = direct}); });
            expect_same("open " + p, want, got);
            if (want || got) continue;
            std::uint64_t off = rng() % 3 == 0 ? rng() % 20000 : (rng() % 64) * 64 + rng() % 64;
            std::uint64_t len = rng() % 3 == 0 ? 1 + rng() % 9000 : 1 + rng() % 600;
            auto data = pattern(len, rng());
            std::string s(reinterpret_cast<const char*>(data.data()), data.size());
            model.write(p, off, s);
            auto e = errc_of([&] {
                fs->write(fd, off, data);
                if (rng() % 3 == 0) {
                    if (rng() % 2)
                        fs->fsync(fd);
                    else
                        fs->fdatasync(fd);
                }
                fs->close(fd);
            });
            expect_same("write " + p, std::nullopt, e);
        } else if (kind < 95) {
            auto p = existing_or_random(false, true);
            bool direct = rng() % 5 == 0;
            auto want = model.open_file(p);
            Fd fd = -1;
            auto got = errc_of([&] { fd = fs->open(p, {.direct = direct}); });
            expect_same("open " + p, want, got);
            if (want || got) continue;
            std::uint64_t off = rng() % 16000, len = rng() % 10000;
            std::string expect = model.read(p, off, len);
            std::string actual;
            auto e = errc_of([&] {
                actual = bytes_to_string(fs->read(fd, off, len));
                fs->close(fd);
            });
            expect_same("read " + p, std::nullopt, e);
            if (actual != expect) note("read " + p + " content differs");
        } else if (kind < 99) {
            fs->sync();
        } else {
            ++res.remounts;
            if (rng() % 2) {
                fs->unmount();
                fs->mount();
            } else {
                // Sync, then drop power: everything synced must survive.
                fs->sync();
                fs.reset();
                dev.simulate_power_loss();
                RecoveryReport rr;
                if (dev.log_enabled()) rr = dev.recover();
                fs = std::make_unique<FileSystem>(dev, o);
                fs->mount_recover(dev.log_enabled() ? &rr : nullptr);
            }
        }
        if (res.ops % 997 == 0 && snapshot(*fs) != model.tree()) note("tree differs");
    }
    if (snapshot(*fs) != model.tree()) note("final tree differs");
    res.final_nodes = model.tree().size();
    for (const auto& [p, c] : model.tree()) res.final_bytes += c.size();
    fs->unmount();
    fs->mount();
    if (snapshot(*fs) != model.tree()) note("tree differs after remount");
    if (!fsck(dev).empty()) note("fsck: " + fsck(dev).front().kind + " " + fsck(dev).front().detail);
    return res;
}

} // namespace bytefs::testing
