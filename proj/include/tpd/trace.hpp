#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tpd/model.hpp"
#include "tpd/tensor.hpp"

namespace tpd {

struct TraceEntry {
    std::string id;
    uint32_t channels = 0;
    uint64_t samples_seen = 0;
    std::vector<uint64_t> positive_counts;  // strictly-positive occurrences per channel
};

// Per-layer, per-channel counts of strictly-positive activations over a
// dataset. Entry order follows the execution schedule.
struct ActivationTrace {
    std::vector<TraceEntry> entries;

    const TraceEntry* find(const std::string& id) const;
};

// Layers whose activations are profiled: every ReLU output, plus the raw
// output of any convolution feeding an Add directly (bypass branches have no
// nonlinearity before the join).
std::vector<std::string> traced_layer_ids(const Model& m);

class TraceAccumulator {
public:
    explicit TraceAccumulator(const Model& m);

    void begin_sample() { ++samples_; }
    void count(const std::string& id, const Tensor& t);
    bool captures(const std::string& id) const;

    ActivationTrace finish() const;

private:
    std::vector<TraceEntry> entries_;
    uint64_t samples_ = 0;
};

// "TPDT" container: magic, u32 version, u32 layer count, per layer id /
// channel count / samples_seen / u64 counts, trailing CRC-32.
void save_trace(const ActivationTrace& t, const std::string& path);
ActivationTrace load_trace(const std::string& path);

}  // namespace tpd
