#pragma once

#include <map>
#include <string>
#include <vector>

#include "tpd/model.hpp"

namespace tpd {

using Schedule = std::vector<std::string>;

// Deterministic topological order, ties broken by declaration order. Within a
// residual block the main branch is declared before the bypass, so it is also
// scheduled first.
Schedule topo_schedule(const Model& m);

enum class WeightsMode { Resident, Streamed };
const char* to_string(WeightsMode m);

struct LivenessInterval {
    std::string buffer;  // owning layer id, or "<layer>:weights"
    int first_step = 0;
    int last_step = 0;
    long long bytes = 0;
    bool is_weight = false;
};

// Buffer model: Input/Conv2d/MaxPool/FullyConnected outputs own storage;
// ReLU, Sigmoid, Flatten and Add run in place on their (first) input buffer.
// An activation buffer lives from its producing step to the last step that
// consumes it or any of its aliases. Streamed weights live only during their
// layer's step; resident weights live across the whole schedule.
std::vector<LivenessInterval> compute_liveness(const Model& m, const Schedule& sched,
                                               WeightsMode weights_mode,
                                               int element_bytes = 1,
                                               int weight_bytes_per_param = 1);

struct MemoryPlan {
    std::string allocator;  // "incremental" | "dynamic"
    WeightsMode weights_mode = WeightsMode::Streamed;
    int element_bytes = 1;
    long long peak_bytes = 0;  // dynamic: live-set maximum; incremental: full sum
    int peak_step = 0;
    std::vector<long long> per_step_live_bytes;
    std::map<std::string, long long> offsets;
    long long first_fit_bytes = 0;  // footprint achieved by the offset assignment
    Schedule schedule;
    std::vector<LivenessInterval> intervals;
};

// Sums every activation buffer plus all weights, no reuse.
MemoryPlan plan_incremental(const Model& m, int element_bytes = 1,
                            int weight_bytes_per_param = 1);

// Liveness-based reuse. peak_bytes is the live-set maximum; offsets come from
// greedy first-fit over the liveness intervals and first_fit_bytes reports the
// footprint that assignment achieves.
MemoryPlan plan_dynamic(const Model& m, WeightsMode weights_mode = WeightsMode::Streamed,
                        int element_bytes = 1, int weight_bytes_per_param = 1);

// Bytes held live solely because a parallel bypass branch still has to read
// them, per residual block. All zeros when there are no bypasses.
std::map<std::string, long long> bypass_overlap_report(const Model& m);

}  // namespace tpd
