#include "tpd/weights.hpp"

#include <zlib.h>

#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "tpd/errors.hpp"
#include "tpd/rng.hpp"

namespace tpd {

static const char kMagic[4] = {'T', 'P', 'D', 'W'};
static const uint32_t kVersion = 1;

WeightSet init_weights(const Model& m, uint64_t seed) {
    auto shapes = m.shapes.empty() ? infer_shapes(m) : m.shapes;
    Rng rng(seed);
    WeightSet ws;
    for (const auto& l : m.layers) {
        if (l.kind == LayerKind::Conv2d) {
            int c_in = shapes.at(l.inputs[0]).channels;
            int fan_in = l.kernel * l.kernel * c_in;
            double bound = std::sqrt(1.0 / fan_in);
            WeightTensor k;
            k.dims = {l.out_channels, c_in, l.kernel, l.kernel};
            k.values.resize(static_cast<size_t>(l.out_channels) * c_in * l.kernel * l.kernel);
            for (auto& v : k.values) v = static_cast<float>(rng.uniform(-bound, bound));
            WeightTensor b;
            b.dims = {l.out_channels};
            b.values.assign(l.out_channels, 0.0f);
            ws.entries[l.id + ".weight"] = std::move(k);
            ws.entries[l.id + ".bias"] = std::move(b);
        } else if (l.kind == LayerKind::FullyConnected) {
            int in_dim = static_cast<int>(shapes.at(l.inputs[0]).elements());
            double bound = std::sqrt(1.0 / in_dim);
            WeightTensor k;
            k.dims = {l.out_channels, in_dim};
            k.values.resize(static_cast<size_t>(l.out_channels) * in_dim);
            for (auto& v : k.values) v = static_cast<float>(rng.uniform(-bound, bound));
            WeightTensor b;
            b.dims = {l.out_channels};
            b.values.assign(l.out_channels, 0.0f);
            ws.entries[l.id + ".weight"] = std::move(k);
            ws.entries[l.id + ".bias"] = std::move(b);
        }
    }
    return ws;
}

void validate_weights(const Model& m, const WeightSet& ws) {
    auto shapes = m.shapes.empty() ? infer_shapes(m) : m.shapes;
    std::map<std::string, bool> claimed;
    for (const auto& [name, t] : ws.entries) claimed[name] = false;

    auto expect = [&](const std::string& name, const std::vector<int>& dims,
                      const std::string& layer) {
        auto it = ws.entries.find(name);
        if (it == ws.entries.end())
            throw DataError("orphan layer " + layer + ": missing tensor " + name);
        if (it->second.dims != dims)
            throw DataError("tensor " + name + " has wrong dims for layer " + layer);
        size_t n = 1;
        for (int d : dims) n *= static_cast<size_t>(d);
        if (it->second.values.size() != n)
            throw DataError("tensor " + name + " payload size mismatch");
        claimed[name] = true;
    };

    for (const auto& l : m.layers) {
        if (l.kind == LayerKind::Conv2d) {
            int c_in = shapes.at(l.inputs[0]).channels;
            expect(l.id + ".weight", {l.out_channels, c_in, l.kernel, l.kernel}, l.id);
            expect(l.id + ".bias", {l.out_channels}, l.id);
        } else if (l.kind == LayerKind::FullyConnected) {
            int in_dim = static_cast<int>(shapes.at(l.inputs[0]).elements());
            expect(l.id + ".weight", {l.out_channels, in_dim}, l.id);
            expect(l.id + ".bias", {l.out_channels}, l.id);
        }
    }
    for (const auto& [name, used] : claimed)
        if (!used) throw DataError("orphan tensor not bound to any layer: " + name);
}

namespace {

struct ByteWriter {
    std::vector<unsigned char> buf;
    void raw(const void* p, size_t n) {
        const auto* b = static_cast<const unsigned char*>(p);
        buf.insert(buf.end(), b, b + n);
    }
    void u8(uint8_t v) { raw(&v, 1); }
    void u32(uint32_t v) { raw(&v, 4); }  // little-endian host assumed
    void str(const std::string& s) {
        u32(static_cast<uint32_t>(s.size()));
        raw(s.data(), s.size());
    }
};

struct ByteReader {
    const unsigned char* p;
    size_t n, pos = 0;
    ByteReader(const unsigned char* data, size_t size) : p(data), n(size) {}
    void raw(void* out, size_t k) {
        if (pos + k > n) throw DataError("truncated file");
        std::memcpy(out, p + pos, k);
        pos += k;
    }
    uint8_t u8() {
        uint8_t v;
        raw(&v, 1);
        return v;
    }
    uint32_t u32() {
        uint32_t v;
        raw(&v, 4);
        return v;
    }
    uint64_t u64() {
        uint64_t v;
        raw(&v, 8);
        return v;
    }
    std::string str() {
        uint32_t k = u32();
        if (pos + k > n) throw DataError("truncated file");
        std::string s(reinterpret_cast<const char*>(p + pos), k);
        pos += k;
        return s;
    }
};

uint32_t crc_of(const std::vector<unsigned char>& buf) {
    return static_cast<uint32_t>(::crc32(0L, buf.data(), static_cast<uInt>(buf.size())));
}

void write_file(const std::string& path, const std::vector<unsigned char>& buf) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot open for writing: " + path);
    f.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (!f) throw DataError("write failed: " + path);
}

std::vector<unsigned char> read_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot open file: " + path);
    std::vector<unsigned char> buf((std::istreambuf_iterator<char>(f)),
                                   std::istreambuf_iterator<char>());
    return buf;
}

}  // namespace

void save_weights(const WeightSet& ws, const std::string& path) {
    ByteWriter w;
    w.raw(kMagic, 4);
    w.u32(kVersion);
    w.u32(static_cast<uint32_t>(ws.entries.size()));
    for (const auto& [name, t] : ws.entries) {
        w.str(name);
        w.u8(0);  // dtype 0 = float32
        w.u8(static_cast<uint8_t>(t.dims.size()));
        for (int d : t.dims) w.u32(static_cast<uint32_t>(d));
        w.raw(t.values.data(), t.values.size() * sizeof(float));
    }
    uint32_t crc = crc_of(w.buf);
    w.u32(crc);
    write_file(path, w.buf);
}

WeightSet load_weights(const std::string& path) {
    auto buf = read_file(path);
    if (buf.size() < 16) throw DataError("truncated weight file: " + path);
    std::vector<unsigned char> body(buf.begin(), buf.end() - 4);
    uint32_t stored;
    std::memcpy(&stored, buf.data() + buf.size() - 4, 4);
    if (crc_of(body) != stored) throw DataError("checksum failure in " + path);

    ByteReader r(body.data(), body.size());
    char magic[4];
    r.raw(magic, 4);
    if (std::memcmp(magic, kMagic, 4) != 0) throw DataError("bad magic in " + path);
    uint32_t version = r.u32();
    if (version != kVersion)
        throw DataError("unsupported weight file version " + std::to_string(version));
    uint32_t count = r.u32();

    WeightSet ws;
    for (uint32_t i = 0; i < count; ++i) {
        std::string name = r.str();
        uint8_t dtype = r.u8();
        if (dtype != 0) throw DataError("unsupported dtype in tensor " + name);
        uint8_t rank = r.u8();
        WeightTensor t;
        size_t n = 1;
        for (uint8_t d = 0; d < rank; ++d) {
            t.dims.push_back(static_cast<int>(r.u32()));
            n *= static_cast<size_t>(t.dims.back());
        }
        t.values.resize(n);
        r.raw(t.values.data(), n * sizeof(float));
        ws.entries[name] = std::move(t);
    }
    if (r.pos != r.n) throw DataError("trailing bytes in " + path);
    ws.checksum = stored;
    return ws;
}

QuantizedWeightSet quantize_weights(const WeightSet& ws) {
    QuantizedWeightSet q;
    for (const auto& [name, t] : ws.entries) {
        float maxabs = 0.0f;
        for (float v : t.values) {
            if (!std::isfinite(v)) throw std::invalid_argument("non-finite weight in " + name);
            maxabs = std::max(maxabs, std::fabs(v));
        }
        QuantizedTensor qt;
        qt.dims = t.dims;
        qt.scale = maxabs > 0.0f ? maxabs / 127.0f : 1.0f;
        qt.values.reserve(t.values.size());
        for (float v : t.values) {
            // round half to even, clamp to [-127, 127]
            double r = std::nearbyint(static_cast<double>(v) / qt.scale);
            r = std::min(127.0, std::max(-127.0, r));
            qt.values.push_back(static_cast<int8_t>(r));
        }
        q.payload_bytes += static_cast<long long>(qt.values.size());
        q.entries[name] = std::move(qt);
    }
    return q;
}

std::vector<float> dequantize(const QuantizedTensor& t) {
    std::vector<float> out;
    out.reserve(t.values.size());
    for (int8_t v : t.values) out.push_back(static_cast<float>(v) * t.scale);
    return out;
}

}  // namespace tpd
