#include "tpd/memplan.hpp"

#include <algorithm>
#include <stdexcept>

namespace tpd {

const char* to_string(WeightsMode m) {
    return m == WeightsMode::Resident ? "resident" : "streamed";
}

Schedule topo_schedule(const Model& m) {
    Schedule s;
    for (int i : topo_indices(m)) s.push_back(m.layers[i].id);
    return s;
}

static bool owns_buffer(LayerKind k) {
    switch (k) {
        case LayerKind::Input:
        case LayerKind::Conv2d:
        case LayerKind::MaxPool:
        case LayerKind::FullyConnected:
            return true;
        default:
            return false;
    }
}

// Follow the in-place alias chain back to the layer that owns the storage.
static std::string buffer_of(const Model& m, const std::string& id) {
    const LayerSpec* l = m.find(id);
    while (l && !owns_buffer(l->kind)) l = m.find(l->inputs[0]);
    if (!l) throw std::invalid_argument("dangling layer reference: " + id);
    return l->id;
}

std::vector<LivenessInterval> compute_liveness(const Model& m, const Schedule& sched,
                                               WeightsMode weights_mode, int element_bytes,
                                               int weight_bytes_per_param) {
    auto shapes = m.shapes.empty() ? infer_shapes(m) : m.shapes;
    std::map<std::string, int> step_of;
    for (size_t i = 0; i < sched.size(); ++i) step_of[sched[i]] = static_cast<int>(i);

    std::map<std::string, LivenessInterval> act;
    for (const auto& l : m.layers) {
        if (!owns_buffer(l.kind)) continue;
        LivenessInterval iv;
        iv.buffer = l.id;
        iv.first_step = step_of.at(l.id);
        iv.last_step = iv.first_step;
        iv.bytes = shapes.at(l.id).bytes(element_bytes);
        act[l.id] = iv;
    }
    // every read of a buffer (possibly through an alias) extends its lifetime
    for (const auto& l : m.layers) {
        for (const auto& in : l.inputs) {
            auto& iv = act.at(buffer_of(m, in));
            iv.last_step = std::max(iv.last_step, step_of.at(l.id));
        }
    }

    std::vector<LivenessInterval> out;
    const int last = static_cast<int>(sched.size()) - 1;
    for (const auto& id : sched) {
        const LayerSpec* l = m.find(id);
        auto it = act.find(id);
        if (it != act.end()) out.push_back(it->second);
        long long params = layer_param_count(*l, shapes, m);
        if (params > 0) {
            LivenessInterval iv;
            iv.buffer = id + ":weights";
            iv.is_weight = true;
            iv.bytes = params * weight_bytes_per_param;
            if (weights_mode == WeightsMode::Streamed) {
                iv.first_step = iv.last_step = step_of.at(id);
            } else {
                iv.first_step = 0;
                iv.last_step = last;
            }
            out.push_back(iv);
        }
    }
    std::stable_sort(out.begin(), out.end(),
                     [](const LivenessInterval& a, const LivenessInterval& b) {
                         return a.first_step < b.first_step;
                     });
    return out;
}

namespace {

std::vector<long long> live_by_step(const std::vector<LivenessInterval>& ivs, size_t steps) {
    std::vector<long long> live(steps, 0);
    for (const auto& iv : ivs)
        for (int s = iv.first_step; s <= iv.last_step; ++s) live[static_cast<size_t>(s)] += iv.bytes;
    return live;
}

// Greedy first-fit: lowest offset whose range is disjoint from every placed
// interval overlapping in time.
std::map<std::string, long long> first_fit(const std::vector<LivenessInterval>& ivs,
                                           long long* footprint) {
    std::map<std::string, long long> offsets;
    std::vector<std::pair<const LivenessInterval*, long long>> placed;
    long long max_end = 0;
    for (const auto& iv : ivs) {
        std::vector<std::pair<long long, long long>> busy;  // [off, off+bytes)
        for (const auto& [p, off] : placed)
            if (!(p->last_step < iv.first_step || iv.last_step < p->first_step))
                busy.emplace_back(off, off + p->bytes);
        std::sort(busy.begin(), busy.end());
        long long off = 0;
        for (const auto& [b0, b1] : busy) {
            if (off + iv.bytes <= b0) break;
            off = std::max(off, b1);
        }
        offsets[iv.buffer] = off;
        placed.emplace_back(&iv, off);
        max_end = std::max(max_end, off + iv.bytes);
    }
    if (footprint) *footprint = max_end;
    return offsets;
}

}  // namespace

MemoryPlan plan_incremental(const Model& m, int element_bytes, int weight_bytes_per_param) {
    MemoryPlan plan;
    plan.allocator = "incremental";
    plan.weights_mode = WeightsMode::Resident;
    plan.element_bytes = element_bytes;
    plan.schedule = topo_schedule(m);
    plan.intervals =
        compute_liveness(m, plan.schedule, WeightsMode::Resident, element_bytes, weight_bytes_per_param);

    // no reuse: every buffer stays allocated from its first step on
    long long weights_total = 0;
    for (const auto& iv : plan.intervals)
        if (iv.is_weight) weights_total += iv.bytes;
    plan.per_step_live_bytes.assign(plan.schedule.size(), weights_total);
    for (const auto& iv : plan.intervals) {
        if (iv.is_weight) continue;
        for (size_t s = static_cast<size_t>(iv.first_step); s < plan.schedule.size(); ++s)
            plan.per_step_live_bytes[s] += iv.bytes;
    }
    for (size_t s = 0; s < plan.per_step_live_bytes.size(); ++s) {
        if (plan.per_step_live_bytes[s] > plan.peak_bytes) {
            plan.peak_bytes = plan.per_step_live_bytes[s];
            plan.peak_step = static_cast<int>(s);
        }
    }
    // bump allocation, nothing is ever freed
    long long off = 0;
    for (const auto& iv : plan.intervals) {
        plan.offsets[iv.buffer] = off;
        off += iv.bytes;
    }
    plan.first_fit_bytes = off;
    return plan;
}

MemoryPlan plan_dynamic(const Model& m, WeightsMode weights_mode, int element_bytes,
                        int weight_bytes_per_param) {
    MemoryPlan plan;
    plan.allocator = "dynamic";
    plan.weights_mode = weights_mode;
    plan.element_bytes = element_bytes;
    plan.schedule = topo_schedule(m);
    plan.intervals =
        compute_liveness(m, plan.schedule, weights_mode, element_bytes, weight_bytes_per_param);
    plan.per_step_live_bytes = live_by_step(plan.intervals, plan.schedule.size());
    for (size_t s = 0; s < plan.per_step_live_bytes.size(); ++s) {
        if (plan.per_step_live_bytes[s] > plan.peak_bytes) {
            plan.peak_bytes = plan.per_step_live_bytes[s];
            plan.peak_step = static_cast<int>(s);
        }
    }
    plan.offsets = first_fit(plan.intervals, &plan.first_fit_bytes);
    return plan;
}

std::map<std::string, long long> bypass_overlap_report(const Model& m) {
    auto shapes = m.shapes.empty() ? infer_shapes(m) : m.shapes;
    Schedule sched = topo_schedule(m);
    std::map<std::string, int> step_of;
    for (size_t i = 0; i < sched.size(); ++i) step_of[sched[i]] = static_cast<int>(i);

    std::map<std::string, long long> held;
    if (m.family) held = {{"ResBlock1", 0}, {"ResBlock2", 0}, {"ResBlock3", 0}};

    for (const auto& l : m.layers) {
        if (l.kind != LayerKind::Add) continue;
        for (const auto& in : l.inputs) {
            const LayerSpec* p = m.find(in);
            if (!p || p->kind != LayerKind::Conv2d || p->kernel != 1) continue;
            if (m.consumers(p->id).size() != 1) continue;
            // p is the bypass conv; the buffer it reads is the block input,
            // held across the whole main branch until this read. Reads reach
            // the buffer through in-place aliases, so resolve each consumer's
            // inputs back to their owning buffer.
            std::string fork = buffer_of(m, p->inputs[0]);
            int first_read = step_of.at(l.id), last_read = 0;
            for (const auto& consumer : m.layers) {
                for (const auto& cin : consumer.inputs) {
                    if (buffer_of(m, cin) != fork) continue;
                    first_read = std::min(first_read, step_of.at(consumer.id));
                    last_read = std::max(last_read, step_of.at(consumer.id));
                }
            }
            long long bytes = last_read > first_read ? shapes.at(fork).bytes(1) : 0;
            std::string key = p->id;
            if (key.rfind("Byp", 0) == 0)
                key = "ResBlock" + key.substr(3);
            held[key] = bytes;
        }
    }
    return held;
}

}  // namespace tpd
