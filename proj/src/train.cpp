#include "tpd/train.hpp"

#include <cmath>
#include <cstdio>
#include <numeric>
#include <ostream>

#include "tpd/errors.hpp"
#include "tpd/rng.hpp"

namespace tpd {

namespace {

struct EvalResult {
    double mse = 0, bce = 0;
};

EvalResult evaluate(const Executor& exec, const std::vector<Sample>& data,
                    const std::vector<int>& idx, TraceAccumulator* capture = nullptr) {
    EvalResult r;
    for (int i : idx) {
        const Sample& s = data[static_cast<size_t>(i)];
        Prediction p = exec.forward(s.image, nullptr, capture);
        const double d = static_cast<double>(p.steering) - s.steering;
        r.mse += d * d;
        const double pc = std::min(1.0 - kBceClamp,
                                   std::max(kBceClamp, static_cast<double>(p.collision_prob)));
        r.bce += s.collision ? -std::log(pc) : -std::log(1.0 - pc);
    }
    r.mse /= static_cast<double>(idx.size());
    r.bce /= static_cast<double>(idx.size());
    return r;
}

}  // namespace

TrainResult train_toy(const Model& model, const WeightSet& init,
                      const std::vector<Sample>& data, const TrainOptions& opt) {
    if (data.size() < 2) throw std::invalid_argument("need at least 2 samples");
    if (opt.epochs < 1 || opt.batch_size < 1 || !(opt.lr > 0))
        throw std::invalid_argument("bad training options");

    LossConfig cfg = opt.loss;
    cfg.total_epochs = opt.epochs;
    validate_loss_config(cfg);

    // deterministic 90/10 split
    std::vector<int> order(data.size());
    std::iota(order.begin(), order.end(), 0);
    Rng rng(opt.seed);
    rng.shuffle(order);
    const size_t n_val = std::max<size_t>(1, data.size() / 10);
    std::vector<int> val_idx(order.end() - static_cast<long>(n_val), order.end());
    std::vector<int> train_idx(order.begin(), order.end() - static_cast<long>(n_val));

    WeightSet weights = init;
    TrainResult result;

    for (int epoch = 1; epoch <= opt.epochs; ++epoch) {
        Executor exec(model, weights);
        rng.shuffle(train_idx);

        std::map<std::string, double> grad_abs_sum;
        int batches = 0;

        for (size_t start = 0; start < train_idx.size(); start += static_cast<size_t>(opt.batch_size)) {
            const size_t end = std::min(train_idx.size(), start + static_cast<size_t>(opt.batch_size));
            const int bn = static_cast<int>(end - start);

            std::vector<Executor::Cache> caches(static_cast<size_t>(bn));
            std::vector<Prediction> preds(static_cast<size_t>(bn));
            std::vector<TargetLabel> targets(static_cast<size_t>(bn));
            for (int i = 0; i < bn; ++i) {
                const Sample& s = data[static_cast<size_t>(train_idx[start + static_cast<size_t>(i)])];
                preds[static_cast<size_t>(i)] = exec.forward(s.image, &caches[static_cast<size_t>(i)]);
                targets[static_cast<size_t>(i)] = {s.steering, s.collision};
            }

            LossBreakdown lb = loss(preds, targets, epoch, cfg);
            LossGradients lg = loss_gradients(preds, targets, epoch, cfg, lb);

            Gradients grads;
            for (int i = 0; i < bn; ++i) {
                if (lg.d_steering[static_cast<size_t>(i)] == 0.0 && lg.d_logit[static_cast<size_t>(i)] == 0.0)
                    continue;
                exec.backward(caches[static_cast<size_t>(i)], lg.d_steering[static_cast<size_t>(i)],
                              lg.d_logit[static_cast<size_t>(i)], grads);
            }

            for (auto& [name, g] : grads.acc) {
                auto& t = weights.entries.at(name);
                for (size_t j = 0; j < g.size(); ++j)
                    t.values[j] = static_cast<float>(static_cast<double>(t.values[j]) - opt.lr * g[j]);
            }
            for (const auto& [layer, v] : grads.mean_abs_per_layer()) grad_abs_sum[layer] += v;
            ++batches;
        }

        // weights changed: rebuild the executor before evaluating
        Executor eval_exec(model, weights);
        const bool last_epoch = epoch == opt.epochs;
        TraceAccumulator capture(model);
        EvalResult tr = evaluate(eval_exec, data, train_idx);
        EvalResult va = evaluate(eval_exec, data, val_idx, last_epoch ? &capture : nullptr);
        if (!std::isfinite(tr.mse) || !std::isfinite(tr.bce) || !std::isfinite(va.mse) ||
            !std::isfinite(va.bce))
            throw NumericError("training diverged at epoch " + std::to_string(epoch));

        EpochStats st;
        st.train_mse = tr.mse;
        st.val_mse = va.mse;
        st.train_bce = tr.bce;
        st.val_bce = va.bce;
        st.beta = beta_schedule(epoch, cfg);
        st.k = mining_k(opt.batch_size, epoch, cfg);
        for (const auto& [layer, v] : grad_abs_sum)
            st.mean_abs_grad[layer] = batches > 0 ? v / batches : 0.0;
        result.curves.epochs.push_back(std::move(st));
        if (last_epoch) result.val_trace = capture.finish();
    }

    result.weights = std::move(weights);
    return result;
}

void write_curves_csv(const TrainCurves& curves, std::ostream& os) {
    os << "epoch,train_mse,val_mse,train_bce,val_bce,beta,k\n";
    char row[256];
    for (size_t e = 0; e < curves.epochs.size(); ++e) {
        const EpochStats& s = curves.epochs[e];
        std::snprintf(row, sizeof(row), "%zu,%.9g,%.9g,%.9g,%.9g,%.9g,%d\n", e + 1, s.train_mse,
                      s.val_mse, s.train_bce, s.val_bce, s.beta, s.k);
        os << row;
    }
}

}  // namespace tpd
