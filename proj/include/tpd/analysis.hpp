#pragma once

#include <map>
#include <string>
#include <vector>

#include "tpd/model.hpp"
#include "tpd/trace.hpp"

namespace tpd {

// One multiply-accumulate per kernel element per output element. Biases,
// pooling and activations contribute zero.
struct MacReport {
    std::map<std::string, long long> per_layer;
    long long total = 0;
    std::map<std::string, double> shares;
};

MacReport count_macs(const Model& m);

struct SizeReport {
    std::map<std::string, long long> per_layer_params;  // kernels + biases
    long long total_params = 0;
    int bytes_per_param = 1;
    long long total_bytes = 0;
};

// Default 1 byte/param matches the deployed 8-bit accounting.
SizeReport count_params(const Model& m, int bytes_per_param = 1);

struct ModelComparison {
    double size_ratio = 0;            // params(a) / params(b)
    double mac_ratio = 0;             // macs(a) / macs(b)
    long long size_delta_bytes = 0;   // bytes(a) - bytes(b)
    long long mac_delta = 0;          // macs(a) - macs(b)
};

ModelComparison compare_models(const Model& a, const Model& b, int bytes_per_param = 1);

// Percentage of output channels that were never strictly positive, per layer.
// Throws DataError on an empty trace.
std::map<std::string, double> structural_sparsity(const ActivationTrace& trace);

struct SeriesStats {
    double mean = 0;
    double stddev = 0;  // population
};

// Mean and population standard deviation over the trailing `window` entries.
SeriesStats gradient_stats(const std::vector<double>& series, int window = 10);

struct RuntimeCalibration {
    double cycles_per_mac = 1.1e6 / 1.5e6;  // measured single-model pair
    double clock_hz = 100e6;
    double avg_power_w = 0.034;
};

struct RuntimeEstimate {
    double cycles = 0;
    double latency_s = 0;
    double fps = 0;  // +inf when latency is zero
    double energy_j = 0;
};

// Linear cycle model: cycles = macs * cycles_per_mac. The calibration comes
// from one measured model and must not be silently extrapolated; callers
// should surface its provenance.
RuntimeEstimate estimate_runtime(double macs, const RuntimeCalibration& calib);

}  // namespace tpd
