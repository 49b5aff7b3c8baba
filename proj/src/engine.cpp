#include "tpd/engine.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "tpd/kernels.hpp"
#include "tpd/memplan.hpp"

namespace tpd {

void validate_loss_config(const LossConfig& cfg) {
    if (cfg.beta_start_epoch >= cfg.total_epochs)
        throw std::invalid_argument("beta_start_epoch must be < total_epochs");
    auto frac_ok = [](double f) { return f > 0.0 && f <= 1.0; };
    if (!frac_ok(cfg.hard_mining.start_fraction) || !frac_ok(cfg.hard_mining.end_fraction))
        throw std::invalid_argument("hard mining fractions must be in (0, 1]");
    if (cfg.hard_mining.min_k < 1) throw std::invalid_argument("min_k must be >= 1");
}

double beta_schedule(int epoch, const LossConfig& cfg) {
    if (epoch < 1 || epoch > cfg.total_epochs)
        throw std::invalid_argument("epoch out of range");
    if (epoch <= cfg.beta_start_epoch) return 0.0;
    const double num = std::log(static_cast<double>(epoch - cfg.beta_start_epoch + 1));
    const double den = std::log(static_cast<double>(cfg.total_epochs - cfg.beta_start_epoch + 1));
    return cfg.beta_max * num / den;
}

int mining_k(int n, int epoch, const LossConfig& cfg) {
    const auto& hm = cfg.hard_mining;
    const double frac =
        hm.start_fraction +
        (hm.end_fraction - hm.start_fraction) * static_cast<double>(epoch) / cfg.total_epochs;
    int k = static_cast<int>(std::llround(n * frac));
    k = std::max(k, hm.min_k);
    return std::clamp(k, 1, n);
}

std::vector<int> hard_mine_topk(const std::vector<double>& losses, int k) {
    const int n = static_cast<int>(losses.size());
    if (k < 1 || k > n) throw std::invalid_argument("k out of range");
    std::vector<int> idx(losses.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(),
                     [&](int a, int b) { return losses[static_cast<size_t>(a)] > losses[static_cast<size_t>(b)]; });
    idx.resize(static_cast<size_t>(k));
    std::sort(idx.begin(), idx.end());
    return idx;
}

static double clamp_prob(double p) {
    return std::min(1.0 - kBceClamp, std::max(kBceClamp, p));
}

static double bce_sample(double p, int y) {
    const double pc = clamp_prob(p);
    return y ? -std::log(pc) : -std::log(1.0 - pc);
}

LossBreakdown loss(const std::vector<Prediction>& preds, const std::vector<TargetLabel>& targets,
                   int epoch, const LossConfig& cfg) {
    if (preds.empty()) throw std::invalid_argument("empty batch");
    if (preds.size() != targets.size())
        throw std::invalid_argument("prediction/target count mismatch");
    validate_loss_config(cfg);

    const int n = static_cast<int>(preds.size());
    std::vector<double> se(preds.size()), bce(preds.size());
    for (size_t i = 0; i < preds.size(); ++i) {
        const double d = static_cast<double>(preds[i].steering) - targets[i].steering;
        se[i] = d * d;
        bce[i] = bce_sample(preds[i].collision_prob, targets[i].collision);
    }

    LossBreakdown out;
    out.k = mining_k(n, epoch, cfg);
    out.beta = beta_schedule(epoch, cfg);
    out.selected_mse = hard_mine_topk(se, out.k);
    out.selected_bce = hard_mine_topk(bce, out.k);
    for (int i : out.selected_mse) out.mse += se[static_cast<size_t>(i)];
    for (int i : out.selected_bce) out.bce += bce[static_cast<size_t>(i)];
    out.mse /= out.k;
    out.bce /= out.k;
    out.total = out.mse + out.beta * out.bce;
    return out;
}

LossGradients loss_gradients(const std::vector<Prediction>& preds,
                             const std::vector<TargetLabel>& targets, int epoch,
                             const LossConfig& cfg, const LossBreakdown& breakdown) {
    (void)epoch;
    LossGradients g;
    g.d_steering.assign(preds.size(), 0.0);
    g.d_logit.assign(preds.size(), 0.0);
    for (int i : breakdown.selected_mse)
        g.d_steering[static_cast<size_t>(i)] =
            2.0 * (static_cast<double>(preds[static_cast<size_t>(i)].steering) -
                   targets[static_cast<size_t>(i)].steering) /
            breakdown.k;
    for (int i : breakdown.selected_bce) {
        const double p = preds[static_cast<size_t>(i)].collision_prob;
        if (p <= kBceClamp || p >= 1.0 - kBceClamp) continue;  // clamped: zero slope
        // d(BCE(sigmoid(z)))/dz = p - y
        g.d_logit[static_cast<size_t>(i)] =
            breakdown.beta * (p - targets[static_cast<size_t>(i)].collision) / breakdown.k;
    }
    return g;
}

void Gradients::add_scaled(const std::string& name, const std::vector<double>& g, double scale) {
    auto& dst = acc[name];
    if (dst.empty()) dst.assign(g.size(), 0.0);
    for (size_t i = 0; i < g.size(); ++i) dst[i] += g[i] * scale;
}

std::map<std::string, double> Gradients::mean_abs_per_layer() const {
    std::map<std::string, std::pair<double, long long>> sums;  // layer -> (sum|g|, count)
    for (const auto& [name, g] : acc) {
        const auto dot = name.rfind('.');
        const std::string layer = name.substr(0, dot);
        auto& [s, c] = sums[layer];
        for (double v : g) s += std::fabs(v);
        c += static_cast<long long>(g.size());
    }
    std::map<std::string, double> out;
    for (const auto& [layer, sc] : sums)
        out[layer] = sc.second > 0 ? sc.first / static_cast<double>(sc.second) : 0.0;
    return out;
}

Executor::Executor(const Model& model, const WeightSet& weights)
    : model_(model), weights_(weights) {
    if (model_.shapes.empty()) model_.shapes = infer_shapes(model_);
    validate_weights(model_, weights_);
    sched_ = topo_schedule(model_);
    for (const auto& id : sched_) sched_idx_.push_back(model_.index_of(id));

    input_idx_.resize(model_.layers.size());
    for (size_t i = 0; i < model_.layers.size(); ++i)
        for (const auto& in : model_.layers[i].inputs)
            input_idx_[i].push_back(model_.index_of(in));

    auto outputs = model_.output_ids();
    if (outputs.size() != 2)
        throw std::invalid_argument("executable model needs exactly 2 outputs, got " +
                                    std::to_string(outputs.size()));
    for (const auto& id : outputs) {
        const LayerSpec* l = model_.find(id);
        if (l->kind == LayerKind::Sigmoid) {
            sigmoid_idx_ = model_.index_of(id);
            coll_fc_idx_ = model_.index_of(l->inputs[0]);
        } else {
            steer_idx_ = model_.index_of(id);
        }
    }
    if (sigmoid_idx_ < 0 || steer_idx_ < 0)
        throw std::invalid_argument("model outputs must be one plain head and one Sigmoid head");
    if (model_.shapes.at(model_.layers[static_cast<size_t>(steer_idx_)].id).elements() != 1 ||
        model_.shapes.at(model_.layers[static_cast<size_t>(sigmoid_idx_)].id).elements() != 1)
        throw std::invalid_argument("output heads must be scalar");
}

Prediction Executor::forward(const Tensor& image, Cache* cache,
                             TraceAccumulator* capture) const {
    if (image.c != model_.input_shape.channels || image.h != model_.input_shape.height ||
        image.w != model_.input_shape.width)
        throw std::invalid_argument("input image shape mismatch");

    std::vector<Tensor> outs(model_.layers.size());
    std::map<int, std::vector<int32_t>> argmax;
    if (capture) capture->begin_sample();

    for (int li : sched_idx_) {
        const LayerSpec& l = model_.layers[static_cast<size_t>(li)];
        const auto& ins = input_idx_[static_cast<size_t>(li)];
        switch (l.kind) {
            case LayerKind::Input:
                outs[static_cast<size_t>(li)] = image;
                break;
            case LayerKind::Conv2d: {
                const auto& w = weights_.entries.at(l.id + ".weight").values;
                const auto& b = weights_.entries.at(l.id + ".bias").values;
                conv2d_forward(outs[static_cast<size_t>(ins[0])], w, b, l.out_channels, l.kernel,
                               l.stride, l.padding, outs[static_cast<size_t>(li)]);
                break;
            }
            case LayerKind::MaxPool: {
                std::vector<int32_t> am;
                maxpool_forward(outs[static_cast<size_t>(ins[0])], l.kernel, l.stride,
                                outs[static_cast<size_t>(li)], cache ? &am : nullptr);
                if (cache) argmax[li] = std::move(am);
                break;
            }
            case LayerKind::ReLU:
                relu_forward(outs[static_cast<size_t>(ins[0])], outs[static_cast<size_t>(li)]);
                break;
            case LayerKind::Add:
                add_forward(outs[static_cast<size_t>(ins[0])], outs[static_cast<size_t>(ins[1])],
                            outs[static_cast<size_t>(li)]);
                break;
            case LayerKind::Flatten: {
                const Tensor& src = outs[static_cast<size_t>(ins[0])];
                Tensor t(static_cast<int>(src.size()), 1, 1);
                t.v = src.v;
                outs[static_cast<size_t>(li)] = std::move(t);
                break;
            }
            case LayerKind::FullyConnected: {
                const auto& w = weights_.entries.at(l.id + ".weight").values;
                const auto& b = weights_.entries.at(l.id + ".bias").values;
                std::vector<float> o;
                fc_forward(outs[static_cast<size_t>(ins[0])], w, b, l.out_channels, o);
                Tensor t(l.out_channels, 1, 1);
                t.v = std::move(o);
                outs[static_cast<size_t>(li)] = std::move(t);
                break;
            }
            case LayerKind::Sigmoid: {
                const Tensor& src = outs[static_cast<size_t>(ins[0])];
                Tensor t(src.c, src.h, src.w);
                for (size_t i = 0; i < src.size(); ++i) t.v[i] = sigmoid_scalar(src.v[i]);
                outs[static_cast<size_t>(li)] = std::move(t);
                break;
            }
        }
        if (capture && capture->captures(l.id)) capture->count(l.id, outs[static_cast<size_t>(li)]);
    }

    Prediction p;
    p.steering = outs[static_cast<size_t>(steer_idx_)].v[0];
    p.collision_logit = outs[static_cast<size_t>(coll_fc_idx_)].v[0];
    p.collision_prob = outs[static_cast<size_t>(sigmoid_idx_)].v[0];
    if (cache) {
        cache->outs = std::move(outs);
        cache->argmax = std::move(argmax);
    }
    return p;
}

void Executor::backward(const Cache& cache, double d_steering, double d_logit, Gradients& grads,
                        double scale) const {
    std::vector<Tensor> d(model_.layers.size());
    auto ensure = [&](int li) -> Tensor& {
        Tensor& t = d[static_cast<size_t>(li)];
        if (t.size() == 0) {
            const Tensor& o = cache.outs[static_cast<size_t>(li)];
            t = Tensor(o.c, o.h, o.w);
        }
        return t;
    };
    if (d_steering != 0.0) ensure(steer_idx_).v[0] = static_cast<float>(d_steering);
    if (d_logit != 0.0) ensure(coll_fc_idx_).v[0] = static_cast<float>(d_logit);

    for (auto it = sched_idx_.rbegin(); it != sched_idx_.rend(); ++it) {
        const int li = *it;
        const LayerSpec& l = model_.layers[static_cast<size_t>(li)];
        const auto& ins = input_idx_[static_cast<size_t>(li)];
        if (d[static_cast<size_t>(li)].size() == 0) continue;  // no gradient reached this layer
        const Tensor& dout = d[static_cast<size_t>(li)];
        switch (l.kind) {
            case LayerKind::Input:
                break;
            case LayerKind::Conv2d: {
                const auto& w = weights_.entries.at(l.id + ".weight").values;
                const Tensor& x = cache.outs[static_cast<size_t>(ins[0])];
                Tensor din;
                std::vector<double> dw, db;
                conv2d_backward(x, w, l.out_channels, l.kernel, l.stride, l.padding, dout, &din,
                                &dw, &db);
                grads.add_scaled(l.id + ".weight", dw, scale);
                grads.add_scaled(l.id + ".bias", db, scale);
                Tensor& acc = ensure(ins[0]);
                for (size_t i = 0; i < acc.size(); ++i) acc.v[i] += din.v[i];
                break;
            }
            case LayerKind::MaxPool: {
                const Tensor& x = cache.outs[static_cast<size_t>(ins[0])];
                Tensor din(x.c, x.h, x.w);
                maxpool_backward(dout, cache.argmax.at(li), din);
                Tensor& acc = ensure(ins[0]);
                for (size_t i = 0; i < acc.size(); ++i) acc.v[i] += din.v[i];
                break;
            }
            case LayerKind::ReLU: {
                const Tensor& y = cache.outs[static_cast<size_t>(li)];
                Tensor din;
                relu_backward(y, dout, din);
                Tensor& acc = ensure(ins[0]);
                for (size_t i = 0; i < acc.size(); ++i) acc.v[i] += din.v[i];
                break;
            }
            case LayerKind::Add: {
                for (int j = 0; j < 2; ++j) {
                    Tensor& acc = ensure(ins[static_cast<size_t>(j)]);
                    for (size_t i = 0; i < acc.size(); ++i) acc.v[i] += dout.v[i];
                }
                break;
            }
            case LayerKind::Flatten: {
                Tensor& acc = ensure(ins[0]);
                for (size_t i = 0; i < acc.size(); ++i) acc.v[i] += dout.v[i];
                break;
            }
            case LayerKind::FullyConnected: {
                const auto& w = weights_.entries.at(l.id + ".weight").values;
                const Tensor& x = cache.outs[static_cast<size_t>(ins[0])];
                std::vector<float> doutv(dout.v.begin(), dout.v.end());
                Tensor din;
                std::vector<double> dw, db;
                fc_backward(x, w, l.out_channels, doutv, &din, &dw, &db);
                grads.add_scaled(l.id + ".weight", dw, scale);
                grads.add_scaled(l.id + ".bias", db, scale);
                Tensor& acc = ensure(ins[0]);
                for (size_t i = 0; i < acc.size(); ++i) acc.v[i] += din.v[i];
                break;
            }
            case LayerKind::Sigmoid: {
                const Tensor& y = cache.outs[static_cast<size_t>(li)];
                Tensor& acc = ensure(ins[0]);
                for (size_t i = 0; i < acc.size(); ++i)
                    acc.v[i] += dout.v[i] * y.v[i] * (1.0f - y.v[i]);
                break;
            }
        }
    }
}

}  // namespace tpd
