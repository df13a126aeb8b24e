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
#include "bytefs/device.hpp"

#include <zlib.h>

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "bytefs/error.hpp"

namespace bytefs {

namespace {

class Writer {
public:
    void u8(std::uint8_t v) { buf_.push_back(std::byte{v}); }
    void u32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void u64(std::uint64_t v) {
        for (int i = 0; i < 8; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void bytes(std::span<const std::byte> b) { buf_.insert(buf_.end(), b.begin(), b.end()); }
    std::vector<std::byte>& buf() { return buf_; }

private:
    std::vector<std::byte> buf_;
};

class Reader {
public:
    Reader(std::span<const std::byte> b, std::uint32_t section) : b_(b), section_(section) {}
    std::uint8_t u8() {
        need(1);
        return std::to_integer<std::uint8_t>(b_[pos_++]);
    }
    std::uint32_t u32() {
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= std::uint32_t{u8()} << (8 * i);
        return v;
    }
    std::uint64_t u64() {
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= std::uint64_t{u8()} << (8 * i);
        return v;
    }
    std::span<const std::byte> bytes(std::size_t n) {
        need(n);
        auto s = b_.subspan(pos_, n);
        pos_ += n;
        return s;
    }
    bool done() const { return pos_ == b_.size(); }
    std::size_t pos() const { return pos_; }

private:
    void need(std::size_t n) const {
        if (pos_ + n > b_.size())
            fail(Errc::recovery_failed, "section " + std::to_string(section_) + " truncated");
    }
    std::span<const std::byte> b_;
    std::size_t pos_ = 0;
    std::uint32_t section_;
};

std::uint32_t crc(std::span<const std::byte> b) {
    return static_cast<std::uint32_t>(
        ::crc32(0L, reinterpret_cast<const Bytef*>(b.data()), static_cast<uInt>(b.size())));
}

void put_section(Writer& out, ImageSection id, Writer& body) {
    out.u32(static_cast<std::uint32_t>(id));
    out.u64(body.buf().size());
    out.u32(crc(body.buf()));
    out.bytes(body.buf());
}

void put_counters(Writer& w, const CategoryBytes& c) {
    for (auto v : c.by_category) w.u64(v);
}

void get_counters(Reader& r, CategoryBytes& c) {
    for (auto& v : c.by_category) v = r.u64();
}

} // namespace

Device::Device(const DeviceConfig& cfg) : sub_(cfg), txlog_(cfg.txlog_bytes), log_(sub_, txlog_) {}

std::uint64_t Device::allowance(std::uint64_t n) {
    if (crashed_) throw CrashInjected();
    std::uint64_t ok = n;
    if (crash_at_ && commands_ + n > *crash_at_) ok = *crash_at_ > commands_ ? *crash_at_ - commands_ : 0;
    commands_ += ok;
    return ok;
}

void Device::tick() {
    if (allowance(1) == 0) {
        crashed_ = true;
        throw CrashInjected();
    }
}

void Device::passthrough_write(std::uint64_t addr, std::span<const std::byte> data, Category cat) {
    const auto& cfg = sub_.config();
    if (data.empty()) fail(Errc::invalid_argument, "empty byte write");
    if (addr / cfg.page_size >= cfg.page_count()) fail(Errc::address_fault, "byte write beyond capacity");
    auto lpa = static_cast<Lpa>(addr / cfg.page_size);
    auto off = static_cast<std::uint32_t>(addr % cfg.page_size);
    if (off + data.size() > cfg.page_size) fail(Errc::invalid_argument, "byte write crosses a page boundary");
    std::uint64_t lines = (off + data.size() - 1) / kCachelineSize - off / kCachelineSize + 1;
    // No DRAM log: the controller applies the update to its flash page.
    FlashRequest req{lpa, cat};
    std::vector<PageBuf> pages;
    std::uint64_t t = lines * cfg.cacheline_write_latency_ns;
    if (data.size() == cfg.page_size)
        pages.emplace_back(cfg.page_size, std::byte{0});
    else
        t += sub_.read_batch({&req, 1}, pages);
    std::memcpy(pages[0].data() + off, data.data(), data.size());
    t += sub_.write_batch({&req, 1}, pages);
    sub_.clock().advance(t);
    auto& ctr = sub_.counters();
    ctr.host_to_ssd[cat] += lines * kCachelineSize;
    ctr.byte_write_bytes += lines * kCachelineSize;
    ++ctr.byte_write_ops;
}

void Device::byte_write(std::uint64_t addr, std::span<const std::byte> data, TxId txid, Category cat) {
    std::lock_guard lk(mu_);
    tick();
    if (txid != kNoTx && (txlog_.contains(txid) || txlog_.aborted(txid)))
        fail(Errc::state_error, "write to finished transaction " + std::to_string(txid));
    if (log_enabled())
        log_.byte_write(addr, data, txid, cat);
    else
        passthrough_write(addr, data, cat);
}

std::vector<std::byte> Device::byte_read(std::uint64_t addr, std::uint32_t len, Category cat) {
    std::lock_guard lk(mu_);
    if (crashed_) throw CrashInjected();
    return log_.byte_read(addr, len, cat);
}

PageBuf Device::block_read(Lpa lpa, Category cat) {
    std::lock_guard lk(mu_);
    if (crashed_) throw CrashInjected();
    return log_.block_read(lpa, cat);
}

std::vector<PageBuf> Device::block_read_batch(std::span<const Lpa> lpas, Category cat) {
    std::lock_guard lk(mu_);
    if (crashed_) throw CrashInjected();
    if (lpas.empty()) return {};
    return log_.block_read_batch(lpas, cat);
}

void Device::block_write(Lpa lpa, std::span<const std::byte> data, Category cat) {
    std::lock_guard lk(mu_);
    tick();
    log_.block_write(lpa, data, cat);
}

void Device::block_write_batch(std::span<const Lpa> lpas, std::span<const PageBuf> pages, Category cat) {
    std::lock_guard lk(mu_);
    if (lpas.size() != pages.size()) fail(Errc::invalid_argument, "block batch size mismatch");
    if (lpas.empty()) return;
    // Each page is one command; a crash inside the batch lands a prefix.
    std::uint64_t ok = allowance(lpas.size());
    if (ok > 0) log_.block_write_batch(lpas.first(ok), pages.first(ok), cat);
    if (ok < lpas.size()) {
        crashed_ = true;
        throw CrashInjected();
    }
}

void Device::discard(Lpa lpa) {
    std::lock_guard lk(mu_);
    tick();
    log_.invalidate(lpa);
    sub_.discard(lpa);
}

void Device::commit(TxId txid) {
    std::lock_guard lk(mu_);
    tick();
    if (txid == kNoTx) fail(Errc::state_error, "txid 0 cannot be committed");
    if (txlog_.aborted(txid)) fail(Errc::state_error, "commit of aborted transaction " + std::to_string(txid));
    if (!txlog_.append(txid)) {
        log_.clean();
        if (!txlog_.append(txid)) fail(Errc::back_pressure, "TxLog full after cleaning");
    }
    sub_.clock().advance(sub_.config().cacheline_write_latency_ns);
    ++sub_.counters().commits;
}

void Device::abort(TxId txid) {
    std::lock_guard lk(mu_);
    tick();
    if (txid == kNoTx || txlog_.contains(txid)) fail(Errc::state_error, "abort of committed transaction");
    txlog_.abort(txid);
}

CleanReport Device::clean() {
    std::lock_guard lk(mu_);
    if (crashed_) throw CrashInjected();
    return log_.clean();
}

RecoveryReport Device::recover() {
    std::lock_guard lk(mu_);
    crashed_ = false;
    crash_at_.reset();
    return log_.recover();
}

void Device::simulate_power_loss() {
    std::lock_guard lk(mu_);
    log_.drop_index();
    txlog_.clear_aborted();
    // An in-flight clean either finished or never started; the model runs
    // it to completion atomically, so only the timeline is reset.
    log_.set_background_busy_until(0);
    crashed_ = false;
    crash_at_.reset();
}

TrafficCounters Device::traffic_snapshot() const {
    std::lock_guard lk(mu_);
    return sub_.counters();
}

std::uint64_t Device::now_ns() const {
    std::lock_guard lk(mu_);
    return sub_.clock().now();
}

LogStats Device::log_stats() const {
    std::lock_guard lk(mu_);
    return log_.stats();
}

double Device::log_utilization() const {
    std::lock_guard lk(mu_);
    return log_.utilization();
}

std::uint64_t Device::log_free_bytes() const {
    std::lock_guard lk(mu_);
    return log_.free_bytes();
}

std::uint64_t Device::txlog_bytes() const {
    std::lock_guard lk(mu_);
    return txlog_.size_bytes();
}

TxId Device::highest_txid() const {
    std::lock_guard lk(mu_);
    TxId hi = kNoTx;
    for (TxId t : txlog_.entries()) hi = std::max(hi, t);
    const std::uint64_t cap = log_.capacity_bytes();
    for (std::uint64_t v = log_.head(); v < log_.tail(); v += kCachelineSize) {
        const auto& sc = log_.sidecar(static_cast<std::uint32_t>((v % cap) / kCachelineSize));
        if (!(sc.flags & SlotSidecar::kEpoch)) hi = std::max(hi, TxId{sc.txid});
    }
    return hi;
}

std::uint64_t Device::index_memory_bytes() const {
    std::lock_guard lk(mu_);
    return log_.index_memory_bytes();
}

std::uint64_t Device::ftl_table_bytes() const {
    std::lock_guard lk(mu_);
    return sub_.ftl().table_bytes();
}

std::vector<ChunkEntry> Device::index_lookup(Lpa lpa, std::optional<std::pair<std::uint8_t, std::uint8_t>> lines) {
    std::lock_guard lk(mu_);
    return log_.index_lookup(lpa, lines);
}

void Device::arm_crash(std::optional<std::uint64_t> at_command) {
    std::lock_guard lk(mu_);
    crash_at_ = at_command;
    crashed_ = false;
}

std::uint64_t Device::command_count() const {
    std::lock_guard lk(mu_);
    return commands_;
}

bool Device::crashed() const {
    std::lock_guard lk(mu_);
    return crashed_;
}

std::vector<std::byte> Device::serialize() const {
    std::lock_guard lk(mu_);
    const auto& cfg = sub_.config();
    Writer out;
    out.bytes(std::as_bytes(std::span("BFSM", 4)));
    out.u32(kImageVersion);
    out.u64(cfg.capacity_bytes);
    out.u64(cfg.page_size);
    out.u64(cfg.channel_count);
    out.u64(cfg.flash_read_latency_ns);
    out.u64(cfg.flash_write_latency_ns);
    out.u64(cfg.cacheline_read_latency_ns);
    out.u64(cfg.cacheline_write_latency_ns);
    out.u64(cfg.log_region_bytes);
    out.u64(cfg.txlog_bytes);
    out.u64(cfg.write_buffer_bytes);
    out.u64(std::bit_cast<std::uint64_t>(cfg.clean_threshold));
    out.u64(cfg.log_enabled ? 1 : 0);

    {
        Writer w;
        std::vector<Ppa> ppas;
        for (const auto& [ppa, page] : sub_.flash().stored()) ppas.push_back(ppa);
        std::sort(ppas.begin(), ppas.end());
        w.u64(ppas.size());
        for (Ppa p : ppas) {
            w.u32(p);
            w.bytes(sub_.flash().stored().at(p));
        }
        put_section(out, ImageSection::flash_pages, w);
    }
    {
        Writer w;
        auto maps = sub_.ftl().mappings();
        w.u64(maps.size());
        for (auto [l, p] : maps) {
            w.u32(l);
            w.u32(p);
        }
        const auto& fl = sub_.ftl().free_list();
        w.u64(fl.size());
        for (Ppa p : fl) w.u32(p);
        w.u32(sub_.ftl().next_fresh());
        put_section(out, ImageSection::ftl_map, w);
    }
    {
        Writer w;
        w.u64(log_.head());
        w.u64(log_.tail());
        w.u32(log_.generation());
        w.u64(log_.next_seq());
        const std::uint64_t cap = log_.capacity_bytes();
        w.u64((log_.tail() - log_.head()) / kCachelineSize);
        for (std::uint64_t v = log_.head(); v < log_.tail(); v += kCachelineSize) {
            auto slot = static_cast<std::uint32_t>((v % cap) / kCachelineSize);
            const auto& sc = log_.sidecar(slot);
            w.u32(slot);
            w.u32(sc.lpa);
            w.u8(sc.block_offset);
            w.u8(sc.length);
            w.u8(sc.flags);
            w.u8(sc.line_offset);
            w.u32(sc.txid);
            w.u32(sc.generation);
            w.bytes(log_.slot_payload(slot));
        }
        put_section(out, ImageSection::log_region, w);
    }
    {
        Writer w;
        auto idx = log_.export_index();
        w.u64(idx.size());
        for (const auto& r : idx) {
            w.u32(r.lpa);
            w.u8(r.block_offset);
            w.u32(r.v.slot);
            w.u8(r.v.line_offset);
            w.u8(r.v.length);
            w.u32(r.v.txid);
            w.u64(r.v.seq);
            w.u64(r.v.epoch);
            w.u8(static_cast<std::uint8_t>(r.v.category));
        }
        put_section(out, ImageSection::log_index, w);
    }
    {
        Writer w;
        const auto& e = txlog_.entries();
        w.u64(e.size());
        for (TxId t : e) w.u32(t);
        w.u64(txlog_.commit_counter());
        put_section(out, ImageSection::txlog, w);
    }
    {
        Writer w;
        w.u64(sub_.clock().now());
        w.u64(log_.background_busy_until());
        w.u64(commands_);
        const auto& c = sub_.counters();
        put_counters(w, c.host_to_ssd);
        put_counters(w, c.ssd_to_host);
        put_counters(w, c.flash_read);
        put_counters(w, c.flash_write);
        w.u64(c.byte_write_ops);
        w.u64(c.byte_read_ops);
        w.u64(c.block_write_ops);
        w.u64(c.block_read_ops);
        w.u64(c.commits);
        w.u64(c.byte_write_bytes);
        put_section(out, ImageSection::clock, w);
    }
    return std::move(out.buf());
}

std::unique_ptr<Device> Device::deserialize(std::span<const std::byte> image) {
    Reader hdr(image, 0);
    auto magic = hdr.bytes(4);
    if (std::memcmp(magic.data(), "BFSM", 4) != 0) fail(Errc::recovery_failed, "bad image magic");
    if (hdr.u32() != kImageVersion) fail(Errc::recovery_failed, "unsupported image version");
    DeviceConfig cfg;
    cfg.capacity_bytes = hdr.u64();
    cfg.page_size = static_cast<std::uint32_t>(hdr.u64());
    cfg.channel_count = static_cast<std::uint32_t>(hdr.u64());
    cfg.flash_read_latency_ns = hdr.u64();
    cfg.flash_write_latency_ns = hdr.u64();
    cfg.cacheline_read_latency_ns = hdr.u64();
    cfg.cacheline_write_latency_ns = hdr.u64();
    cfg.log_region_bytes = hdr.u64();
    cfg.txlog_bytes = hdr.u64();
    cfg.write_buffer_bytes = hdr.u64();
    cfg.clean_threshold = std::bit_cast<double>(hdr.u64());
    cfg.log_enabled = (hdr.u64() & 1) != 0;
    auto dev = std::make_unique<Device>(cfg);

    std::size_t pos = hdr.pos();
    bool seen[7] = {};
    while (pos < image.size()) {
        Reader sh(image.subspan(pos), 0);
        std::uint32_t id = sh.u32();
        std::uint64_t len = sh.u64();
        std::uint32_t want = sh.u32();
        pos += 16;
        if (id < 1 || id > 6) fail(Errc::recovery_failed, "unknown section " + std::to_string(id));
        if (len > image.size() - pos) fail(Errc::recovery_failed, "section " + std::to_string(id) + " truncated");
        auto body = image.subspan(pos, len);
        pos += len;
        if (crc(body) != want) fail(Errc::recovery_failed, "section " + std::to_string(id) + " crc mismatch");
        seen[id] = true;
        Reader r(body, id);
        switch (static_cast<ImageSection>(id)) {
        case ImageSection::flash_pages: {
            std::uint64_t n = r.u64();
            for (std::uint64_t i = 0; i < n; ++i) {
                Ppa p = r.u32();
                dev->sub_.flash().write(p, r.bytes(cfg.page_size));
            }
            break;
        }
        case ImageSection::ftl_map: {
            std::vector<std::pair<Lpa, Ppa>> maps(r.u64());
            for (auto& m : maps) {
                m.first = r.u32();
                m.second = r.u32();
            }
            std::vector<Ppa> fl(r.u64());
            for (auto& p : fl) p = r.u32();
            Ppa next = r.u32();
            dev->sub_.ftl().restore(maps, std::move(fl), next);
            break;
        }
        case ImageSection::log_region: {
            std::uint64_t head = r.u64();
            std::uint64_t tail = r.u64();
            std::uint32_t gen = r.u32();
            std::uint64_t next_seq = r.u64();
            std::uint64_t n = r.u64();
            std::vector<std::pair<std::uint32_t, std::pair<SlotSidecar, std::vector<std::byte>>>> slots;
            slots.reserve(n);
            for (std::uint64_t i = 0; i < n; ++i) {
                std::uint32_t slot = r.u32();
                SlotSidecar sc;
                sc.lpa = r.u32();
                sc.block_offset = r.u8();
                sc.length = r.u8();
                sc.flags = r.u8();
                sc.line_offset = r.u8();
                sc.txid = r.u32();
                sc.generation = r.u32();
                auto payload = r.bytes(kCachelineSize);
                slots.push_back({slot, {sc, std::vector<std::byte>(payload.begin(), payload.end())}});
            }
            auto idx = dev->log_.export_index();
            dev->log_.restore(head, tail, gen, next_seq, slots, idx);
            break;
        }
        case ImageSection::log_index: {
            std::vector<WriteLog::IndexRecord> idx(r.u64());
            for (auto& rec : idx) {
                rec.lpa = r.u32();
                rec.block_offset = r.u8();
                rec.v.slot = r.u32();
                rec.v.line_offset = r.u8();
                rec.v.length = r.u8();
                rec.v.txid = r.u32();
                rec.v.seq = r.u64();
                rec.v.epoch = r.u64();
                rec.v.category = static_cast<Category>(r.u8());
            }
            const auto& L = dev->log_;
            std::vector<std::pair<std::uint32_t, std::pair<SlotSidecar, std::vector<std::byte>>>> slots;
            const std::uint64_t cap = L.capacity_bytes();
            for (std::uint64_t v = L.head(); v < L.tail(); v += kCachelineSize) {
                auto slot = static_cast<std::uint32_t>((v % cap) / kCachelineSize);
                auto p = L.slot_payload(slot);
                slots.push_back({slot, {L.sidecar(slot), std::vector<std::byte>(p.begin(), p.end())}});
            }
            dev->log_.restore(L.head(), L.tail(), L.generation(), L.next_seq(), slots, idx);
            break;
        }
        case ImageSection::txlog: {
            std::vector<TxId> e(r.u64());
            for (auto& t : e) t = r.u32();
            std::uint64_t counter = r.u64();
            dev->txlog_.restore(std::move(e), counter);
            break;
        }
        case ImageSection::clock: {
            dev->sub_.clock().advance_to(r.u64());
            dev->log_.set_background_busy_until(r.u64());
            dev->commands_ = r.u64();
            auto& c = dev->sub_.counters();
            get_counters(r, c.host_to_ssd);
            get_counters(r, c.ssd_to_host);
            get_counters(r, c.flash_read);
            get_counters(r, c.flash_write);
            c.byte_write_ops = r.u64();
            c.byte_read_ops = r.u64();
            c.block_write_ops = r.u64();
            c.block_read_ops = r.u64();
            c.commits = r.u64();
            c.byte_write_bytes = r.u64();
            break;
        }
        }
        if (!r.done()) fail(Errc::recovery_failed, "section " + std::to_string(id) + " has trailing bytes");
    }
    for (std::uint32_t id = 1; id <= 6; ++id)
        if (!seen[id]) fail(Errc::recovery_failed, "section " + std::to_string(id) + " missing");
    return dev;
}

void Device::save_image(const std::string& path) const {
    auto img = serialize();
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) fail(Errc::invalid_argument, "cannot write image " + path);
    f.write(reinterpret_cast<const char*>(img.data()), static_cast<std::streamsize>(img.size()));
    if (!f) fail(Errc::invalid_argument, "short write to image " + path);
}

std::unique_ptr<Device> Device::load_image(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) fail(Errc::not_found, "cannot open image " + path);
    std::vector<char> raw((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    return deserialize(std::as_bytes(std::span(raw)));
}

} // namespace bytefs
