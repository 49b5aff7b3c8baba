#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "tpd/model.hpp"

namespace tpd {

struct WeightTensor {
    std::vector<int> dims;
    std::vector<float> values;

    bool operator==(const WeightTensor&) const = default;
};

// Named tensors bound to model layers: "<layer>.weight" and "<layer>.bias"
// for every Conv2d / FullyConnected layer.
struct WeightSet {
    std::map<std::string, WeightTensor> entries;
    uint32_t checksum = 0;  // CRC-32 of the serialized payload, set on save/load

    bool operator==(const WeightSet& o) const { return entries == o.entries; }
};

// Uniform init in [-sqrt(1/fan_in), +sqrt(1/fan_in)], seeded.
WeightSet init_weights(const Model& m, uint64_t seed);

// Every Conv2d/FC layer must own exactly one kernel and one bias tensor of
// matching dims, and no orphan tensors may remain. Throws naming the layer.
void validate_weights(const Model& m, const WeightSet& ws);

// Binary container: magic "TPDW", u32 version, u32 entry count, then per
// entry name/dtype/rank/dims/payload (little-endian), trailing CRC-32.
void save_weights(const WeightSet& ws, const std::string& path);
WeightSet load_weights(const std::string& path);

struct QuantizedTensor {
    std::vector<int> dims;
    std::vector<int8_t> values;
    float scale = 1.0f;  // dequant = value * scale
};

struct QuantizedWeightSet {
    std::map<std::string, QuantizedTensor> entries;
    long long payload_bytes = 0;  // one byte per parameter
};

// Symmetric per-tensor int8: scale = max|w| / 127 (1 for all-zero tensors).
QuantizedWeightSet quantize_weights(const WeightSet& ws);
std::vector<float> dequantize(const QuantizedTensor& t);

}  // namespace tpd
