#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "tpd/model.hpp"
#include "tpd/tensor.hpp"
#include "tpd/trace.hpp"
#include "tpd/weights.hpp"

namespace tpd {

struct HardMiningConfig {
    double start_fraction = 1.0;
    double end_fraction = 0.25;
    int min_k = 8;
};

struct LossConfig {
    double beta_max = 1.0;
    int beta_start_epoch = 10;  // beta == 0 for epochs <= this
    int total_epochs = 100;
    HardMiningConfig hard_mining;
};

void validate_loss_config(const LossConfig& cfg);

// 0 until beta_start_epoch, then beta_max * log(e - start + 1) / log(T - start + 1),
// reaching beta_max exactly at the final epoch. Epochs are 1-based.
double beta_schedule(int epoch, const LossConfig& cfg);

// Mining budget: k = max(min_k, round(n * (start + (end - start) * epoch / T))),
// clamped to [1, n].
int mining_k(int n, int epoch, const LossConfig& cfg);

// Indices of the k largest losses, ties to the lowest index, sorted ascending.
std::vector<int> hard_mine_topk(const std::vector<double>& losses, int k);

struct Prediction {
    float steering = 0;
    float collision_prob = 0;
    float collision_logit = 0;
};

struct TargetLabel {
    float steering = 0;
    int collision = 0;
};

inline constexpr double kBceClamp = 1e-7;

struct LossBreakdown {
    double total = 0;
    double mse = 0;
    double bce = 0;
    double beta = 0;
    int k = 0;
    std::vector<int> selected_mse;
    std::vector<int> selected_bce;
};

// Composite loss MSE + beta(epoch) * BCE, each term averaged over its own
// hard-mined top-k subset. BCE inputs are clamped to [1e-7, 1 - 1e-7].
LossBreakdown loss(const std::vector<Prediction>& preds, const std::vector<TargetLabel>& targets,
                   int epoch, const LossConfig& cfg);

// d(total)/d(steering) and d(total)/d(collision logit) per sample; zero for
// samples outside the mined subsets (the selection is a stop-gradient).
struct LossGradients {
    std::vector<double> d_steering;
    std::vector<double> d_logit;
};
LossGradients loss_gradients(const std::vector<Prediction>& preds,
                             const std::vector<TargetLabel>& targets, int epoch,
                             const LossConfig& cfg, const LossBreakdown& breakdown);

// Per-tensor gradient accumulator (64-bit, keyed like WeightSet entries).
struct Gradients {
    std::map<std::string, std::vector<double>> acc;

    void add_scaled(const std::string& name, const std::vector<double>& g, double scale);
    std::map<std::string, double> mean_abs_per_layer() const;  // over kernel+bias
};

// Reference float32 executor for one model + weight set. Immutable after
// construction; safe to share across threads.
class Executor {
public:
    Executor(const Model& model, const WeightSet& weights);

    struct Cache {
        std::vector<Tensor> outs;                      // per layer index
        std::map<int, std::vector<int32_t>> argmax;    // per pool layer index
    };

    // capture != null accumulates strictly-positive counts at traced layers.
    Prediction forward(const Tensor& image, Cache* cache = nullptr,
                       TraceAccumulator* capture = nullptr) const;

    // Reverse-mode pass from output seeds; accumulates unscaled per-sample
    // gradients into `grads` (scaled by `scale`).
    void backward(const Cache& cache, double d_steering, double d_logit, Gradients& grads,
                  double scale = 1.0) const;

    const Model& model() const { return model_; }
    const std::vector<std::string>& schedule() const { return sched_; }

private:
    Model model_;  // owned copy with shapes
    const WeightSet& weights_;
    std::vector<std::string> sched_;
    std::vector<int> sched_idx_;                // layer index per step
    std::vector<std::vector<int>> input_idx_;   // resolved input layer indices
    int steer_idx_ = -1, coll_fc_idx_ = -1, sigmoid_idx_ = -1;
};

}  // namespace tpd
