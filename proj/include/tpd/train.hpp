#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "tpd/dataset.hpp"
#include "tpd/engine.hpp"
#include "tpd/trace.hpp"
#include "tpd/weights.hpp"

namespace tpd {

struct EpochStats {
    double train_mse = 0, val_mse = 0;
    double train_bce = 0, val_bce = 0;
    double beta = 0;
    int k = 0;
    std::map<std::string, double> mean_abs_grad;  // per parametric layer
};

struct TrainCurves {
    std::vector<EpochStats> epochs;
};

struct TrainOptions {
    int epochs = 30;
    double lr = 1e-2;
    int batch_size = 32;
    uint64_t seed = 1;
    LossConfig loss;  // total_epochs is forced to `epochs`
};

struct TrainResult {
    TrainCurves curves;
    WeightSet weights;
    ActivationTrace val_trace;  // captured with the final weights
};

// Plain SGD, fixed learning rate, deterministic per seed (serial batch order
// and single-owner parallel kernels keep it bit-stable across thread counts).
// Split is 90/10 by seeded shuffle. Epoch metrics are unmined full-set MSE
// and BCE so train and validation columns are directly comparable; mining
// only shapes the gradient step. Throws NumericError naming the epoch if the
// loss stops being finite.
TrainResult train_toy(const Model& model, const WeightSet& init,
                      const std::vector<Sample>& data, const TrainOptions& opt);

// epoch,train_mse,val_mse,train_bce,val_bce,beta,k
void write_curves_csv(const TrainCurves& curves, std::ostream& os);

}  // namespace tpd
