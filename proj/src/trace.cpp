#include "tpd/trace.hpp"

#include <zlib.h>

#include <cstring>
#include <fstream>
#include <stdexcept>

#include "tpd/errors.hpp"

namespace tpd {

static const char kMagic[4] = {'T', 'P', 'D', 'T'};
static const uint32_t kVersion = 1;

const TraceEntry* ActivationTrace::find(const std::string& id) const {
    for (const auto& e : entries)
        if (e.id == id) return &e;
    return nullptr;
}

std::vector<std::string> traced_layer_ids(const Model& m) {
    std::vector<std::string> ids;
    for (int i : topo_indices(m)) {
        const LayerSpec& l = m.layers[i];
        if (l.kind == LayerKind::ReLU) {
            ids.push_back(l.id);
        } else if (l.kind == LayerKind::Conv2d) {
            for (const auto& c : m.consumers(l.id)) {
                const LayerSpec* p = m.find(c);
                if (p && p->kind == LayerKind::Add) {
                    ids.push_back(l.id);
                    break;
                }
            }
        }
    }
    return ids;
}

TraceAccumulator::TraceAccumulator(const Model& m) {
    auto shapes = m.shapes.empty() ? infer_shapes(m) : m.shapes;
    for (const auto& id : traced_layer_ids(m)) {
        TraceEntry e;
        e.id = id;
        e.channels = static_cast<uint32_t>(shapes.at(id).channels);
        e.positive_counts.assign(e.channels, 0);
        entries_.push_back(std::move(e));
    }
}

bool TraceAccumulator::captures(const std::string& id) const {
    for (const auto& e : entries_)
        if (e.id == id) return true;
    return false;
}

void TraceAccumulator::count(const std::string& id, const Tensor& t) {
    for (auto& e : entries_) {
        if (e.id != id) continue;
        const size_t hw = static_cast<size_t>(t.h) * t.w;
        for (int c = 0; c < t.c; ++c) {
            uint64_t acc = 0;
            const float* p = t.v.data() + static_cast<size_t>(c) * hw;
            for (size_t i = 0; i < hw; ++i)
                if (p[i] > 0.0f) ++acc;
            e.positive_counts[static_cast<size_t>(c)] += acc;
        }
        return;
    }
}

ActivationTrace TraceAccumulator::finish() const {
    ActivationTrace t;
    t.entries = entries_;
    for (auto& e : t.entries) e.samples_seen = samples_;
    return t;
}

void save_trace(const ActivationTrace& t, const std::string& path) {
    std::vector<unsigned char> buf;
    auto raw = [&](const void* p, size_t n) {
        const auto* b = static_cast<const unsigned char*>(p);
        buf.insert(buf.end(), b, b + n);
    };
    auto u32 = [&](uint32_t v) { raw(&v, 4); };
    auto u64 = [&](uint64_t v) { raw(&v, 8); };

    raw(kMagic, 4);
    u32(kVersion);
    u32(static_cast<uint32_t>(t.entries.size()));
    for (const auto& e : t.entries) {
        u32(static_cast<uint32_t>(e.id.size()));
        raw(e.id.data(), e.id.size());
        u32(e.channels);
        u64(e.samples_seen);
        for (uint64_t c : e.positive_counts) u64(c);
    }
    uint32_t crc = static_cast<uint32_t>(::crc32(0L, buf.data(), static_cast<uInt>(buf.size())));
    u32(crc);

    std::ofstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot open for writing: " + path);
    f.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
}

ActivationTrace load_trace(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot open trace file: " + path);
    std::vector<unsigned char> buf((std::istreambuf_iterator<char>(f)),
                                   std::istreambuf_iterator<char>());
    if (buf.size() < 16) throw DataError("truncated trace file: " + path);

    uint32_t stored;
    std::memcpy(&stored, buf.data() + buf.size() - 4, 4);
    uint32_t crc = static_cast<uint32_t>(
        ::crc32(0L, buf.data(), static_cast<uInt>(buf.size() - 4)));
    if (crc != stored) throw DataError("checksum failure in " + path);

    size_t pos = 0;
    auto need = [&](size_t n) {
        if (pos + n > buf.size() - 4) throw DataError("truncated trace file: " + path);
    };
    auto u32r = [&]() {
        need(4);
        uint32_t v;
        std::memcpy(&v, buf.data() + pos, 4);
        pos += 4;
        return v;
    };
    auto u64r = [&]() {
        need(8);
        uint64_t v;
        std::memcpy(&v, buf.data() + pos, 8);
        pos += 8;
        return v;
    };

    need(4);
    if (std::memcmp(buf.data(), kMagic, 4) != 0) throw DataError("bad magic in " + path);
    pos += 4;
    uint32_t version = u32r();
    if (version != kVersion)
        throw DataError("unsupported trace version " + std::to_string(version));
    uint32_t count = u32r();

    ActivationTrace t;
    for (uint32_t i = 0; i < count; ++i) {
        TraceEntry e;
        uint32_t len = u32r();
        need(len);
        e.id.assign(reinterpret_cast<const char*>(buf.data() + pos), len);
        pos += len;
        e.channels = u32r();
        e.samples_seen = u64r();
        e.positive_counts.resize(e.channels);
        for (uint32_t c = 0; c < e.channels; ++c) e.positive_counts[c] = u64r();
        t.entries.push_back(std::move(e));
    }
    return t;
}

}  // namespace tpd
