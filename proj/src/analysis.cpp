#include "tpd/analysis.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "tpd/errors.hpp"

namespace tpd {

MacReport count_macs(const Model& m) {
    auto shapes = m.shapes.empty() ? infer_shapes(m) : m.shapes;
    MacReport r;
    for (const auto& l : m.layers) {
        long long macs = 0;
        if (l.kind == LayerKind::Conv2d) {
            const TensorShape& out = shapes.at(l.id);
            long long c_in = shapes.at(l.inputs[0]).channels;
            macs = static_cast<long long>(out.height) * out.width * out.channels *
                   l.kernel * l.kernel * c_in;
        } else if (l.kind == LayerKind::FullyConnected) {
            macs = shapes.at(l.inputs[0]).elements() * l.out_channels;
        } else {
            continue;
        }
        r.per_layer[l.id] = macs;
        r.total += macs;
    }
    for (const auto& [id, macs] : r.per_layer)
        r.shares[id] = r.total > 0 ? static_cast<double>(macs) / static_cast<double>(r.total) : 0.0;
    return r;
}

SizeReport count_params(const Model& m, int bytes_per_param) {
    if (bytes_per_param < 1) throw std::invalid_argument("bytes_per_param must be >= 1");
    auto shapes = m.shapes.empty() ? infer_shapes(m) : m.shapes;
    SizeReport r;
    r.bytes_per_param = bytes_per_param;
    for (const auto& l : m.layers) {
        long long p = layer_param_count(l, shapes, m);
        if (p == 0) continue;
        r.per_layer_params[l.id] = p;
        r.total_params += p;
    }
    r.total_bytes = r.total_params * bytes_per_param;
    return r;
}

ModelComparison compare_models(const Model& a, const Model& b, int bytes_per_param) {
    SizeReport sa = count_params(a, bytes_per_param), sb = count_params(b, bytes_per_param);
    MacReport ma = count_macs(a), mb = count_macs(b);
    ModelComparison c;
    c.size_ratio = static_cast<double>(sa.total_params) / static_cast<double>(sb.total_params);
    c.mac_ratio = static_cast<double>(ma.total) / static_cast<double>(mb.total);
    c.size_delta_bytes = sa.total_bytes - sb.total_bytes;
    c.mac_delta = ma.total - mb.total;
    return c;
}

std::map<std::string, double> structural_sparsity(const ActivationTrace& trace) {
    if (trace.entries.empty()) throw DataError("empty trace");
    std::map<std::string, double> out;
    for (const auto& e : trace.entries) {
        if (e.samples_seen == 0) throw DataError("empty trace");
        if (e.channels == 0) throw DataError("trace entry with zero channels: " + e.id);
        uint32_t dead = 0;
        for (uint64_t c : e.positive_counts)
            if (c == 0) ++dead;
        out[e.id] = 100.0 * static_cast<double>(dead) / static_cast<double>(e.channels);
    }
    return out;
}

SeriesStats gradient_stats(const std::vector<double>& series, int window) {
    if (window < 1) throw std::invalid_argument("window must be >= 1");
    if (window > static_cast<int>(series.size()))
        throw std::invalid_argument("window exceeds series length");
    const size_t start = series.size() - static_cast<size_t>(window);
    double sum = 0;
    for (size_t i = start; i < series.size(); ++i) sum += series[i];
    double mean = sum / window;
    double sq = 0;
    for (size_t i = start; i < series.size(); ++i) sq += (series[i] - mean) * (series[i] - mean);
    return {mean, std::sqrt(sq / window)};
}

RuntimeEstimate estimate_runtime(double macs, const RuntimeCalibration& calib) {
    if (!(calib.cycles_per_mac > 0) || !(calib.clock_hz > 0) || !(calib.avg_power_w > 0))
        throw std::invalid_argument("calibration fields must be strictly positive");
    if (macs < 0) throw std::invalid_argument("negative MAC count");
    RuntimeEstimate e;
    e.cycles = macs * calib.cycles_per_mac;
    e.latency_s = e.cycles / calib.clock_hz;
    e.fps = e.latency_s > 0 ? 1.0 / e.latency_s : std::numeric_limits<double>::infinity();
    e.energy_j = calib.avg_power_w * e.latency_s;
    return e;
}

}  // namespace tpd
