// Test-side oracles, independent of the engine's execution path: a
// double-precision graph evaluator built on the serial reference kernels, a
// matching double-precision composite loss, and central finite differences.
#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <string>
#include <vector>

#include "tpd/engine.hpp"
#include "tpd/model.hpp"
#include "tpd/ref_kernels.hpp"
#include "tpd/rng.hpp"
#include "tpd/tensor.hpp"
#include "tpd/weights.hpp"

namespace oracle {

using DoubleTensors = std::map<std::string, std::vector<double>>;

inline DoubleTensors to_double(const tpd::WeightSet& ws) {
    DoubleTensors out;
    for (const auto& [name, t] : ws.entries)
        out[name] = std::vector<double>(t.values.begin(), t.values.end());
    return out;
}

struct Outputs {
    double steering = 0;
    double logit = 0;
    double prob = 0;
};

// Memoized recursive evaluation in declaration-independent order.
class DoubleForward {
public:
    DoubleForward(const tpd::Model& m, const DoubleTensors& w) : m_(m), w_(w) {
        shapes_ = m.shapes.empty() ? tpd::infer_shapes(m) : m.shapes;
    }

    Outputs run(const std::vector<double>& image) {
        outs_.clear();
        image_ = &image;
        Outputs o;
        for (const auto& id : m_.output_ids()) {
            const tpd::LayerSpec* l = m_.find(id);
            if (l->kind == tpd::LayerKind::Sigmoid) {
                o.logit = eval(l->inputs[0])[0];
                o.prob = eval(id)[0];
            } else {
                o.steering = eval(id)[0];
            }
        }
        return o;
    }

private:
    const std::vector<double>& eval(const std::string& id) {
        auto it = outs_.find(id);
        if (it != outs_.end()) return it->second;
        const tpd::LayerSpec& l = *m_.find(id);
        const tpd::TensorShape s = shapes_.at(id);
        std::vector<double> out(static_cast<size_t>(s.elements()));
        switch (l.kind) {
            case tpd::LayerKind::Input:
                out = *image_;
                break;
            case tpd::LayerKind::Conv2d: {
                const auto& x = eval(l.inputs[0]);
                const tpd::TensorShape xs = shapes_.at(l.inputs[0]);
                tpd::ref::conv2d(x.data(), xs.channels, xs.height, xs.width,
                                 w_.at(id + ".weight").data(), w_.at(id + ".bias").data(),
                                 l.out_channels, l.kernel, l.stride, l.padding, out.data(),
                                 s.height, s.width);
                break;
            }
            case tpd::LayerKind::MaxPool: {
                const auto& x = eval(l.inputs[0]);
                const tpd::TensorShape xs = shapes_.at(l.inputs[0]);
                tpd::ref::maxpool(x.data(), xs.channels, xs.height, xs.width, l.kernel, l.stride,
                                  out.data(), s.height, s.width);
                break;
            }
            case tpd::LayerKind::ReLU: {
                const auto& x = eval(l.inputs[0]);
                tpd::ref::relu(x.data(), x.size(), out.data());
                break;
            }
            case tpd::LayerKind::Add: {
                const auto& a = eval(l.inputs[0]);
                const auto& b = eval(l.inputs[1]);
                tpd::ref::add(a.data(), b.data(), a.size(), out.data());
                break;
            }
            case tpd::LayerKind::Flatten:
                out = eval(l.inputs[0]);
                break;
            case tpd::LayerKind::FullyConnected: {
                const auto& x = eval(l.inputs[0]);
                tpd::ref::fully_connected(x.data(), x.size(), w_.at(id + ".weight").data(),
                                          w_.at(id + ".bias").data(), l.out_channels, out.data());
                break;
            }
            case tpd::LayerKind::Sigmoid: {
                const auto& x = eval(l.inputs[0]);
                for (size_t i = 0; i < x.size(); ++i) out[i] = tpd::ref::sigmoid(x[i]);
                break;
            }
        }
        return outs_.emplace(id, std::move(out)).first->second;
    }

    const tpd::Model& m_;
    const DoubleTensors& w_;
    std::map<std::string, tpd::TensorShape> shapes_;
    std::map<std::string, std::vector<double>> outs_;
    const std::vector<double>* image_ = nullptr;
};

inline std::vector<double> to_double_image(const tpd::Tensor& t) {
    return std::vector<double>(t.v.begin(), t.v.end());
}

// Composite loss with frozen mining selections (the selection is a
// stop-gradient, so finite differences must not re-select).
inline double frozen_loss(const tpd::Model& m, const DoubleTensors& w,
                          const std::vector<tpd::Tensor>& images,
                          const std::vector<tpd::TargetLabel>& targets, double beta,
                          const std::vector<int>& sel_mse, const std::vector<int>& sel_bce) {
    DoubleForward fwd(m, w);
    std::vector<Outputs> outs;
    for (const auto& img : images) outs.push_back(fwd.run(to_double_image(img)));
    double mse = 0;
    for (int i : sel_mse) {
        const double d = outs[static_cast<size_t>(i)].steering - targets[static_cast<size_t>(i)].steering;
        mse += d * d;
    }
    mse /= static_cast<double>(sel_mse.size());
    double bce = 0;
    for (int i : sel_bce) {
        double p = std::min(1.0 - 1e-7, std::max(1e-7, outs[static_cast<size_t>(i)].prob));
        bce += targets[static_cast<size_t>(i)].collision ? -std::log(p) : -std::log(1.0 - p);
    }
    bce /= static_cast<double>(sel_bce.size());
    return mse + beta * bce;
}

struct FiniteDiff {
    double value = 0;
    bool smooth = true;  // false when the probe straddles a ReLU/maxpool kink
};

// Central difference at step h, Richardson-extrapolated with h/2. The network
// is only piecewise smooth; when the two step sizes disagree badly the probe
// crossed a kink and no derivative estimate is meaningful there.
inline FiniteDiff central_diff(const tpd::Model& m, DoubleTensors w, const std::string& tensor,
                               size_t coord, double h, const std::vector<tpd::Tensor>& images,
                               const std::vector<tpd::TargetLabel>& targets, double beta,
                               const std::vector<int>& sel_mse, const std::vector<int>& sel_bce) {
    auto at = [&](double delta) {
        DoubleTensors wp = w;
        wp.at(tensor)[coord] += delta;
        return frozen_loss(m, wp, images, targets, beta, sel_mse, sel_bce);
    };
    const double fd_h = (at(h) - at(-h)) / (2 * h);
    const double fd_h2 = (at(h / 2) - at(-h / 2)) / h;
    FiniteDiff out;
    out.value = (4 * fd_h2 - fd_h) / 3;
    const double denom = std::max({std::fabs(fd_h), std::fabs(fd_h2), 1e-9});
    out.smooth = std::fabs(fd_h - fd_h2) / denom < 0.05;
    return out;
}

// Small randomized executable graphs for the oracle comparisons: either a
// scaled-down family instance or a custom chain with an optional residual
// join.
inline tpd::Model random_small_model(tpd::Rng& rng) {
    if (rng.bernoulli(0.5)) {
        tpd::FamilyConfig cfg;
        const double gammas[] = {0.125, 0.25, 0.5};
        cfg.gamma = gammas[rng.below(3)];
        cfg.with_bypass = rng.bernoulli(0.5);
        cfg.base_channels = 8 + 8 * rng.below(2);
        const int side = 12 + 2 * rng.below(3);
        cfg.input_shape = {1, side, side};
        return tpd::build_dronet(cfg);
    }
    tpd::Model m;
    const int side = 8 + 2 * rng.below(4);
    m.input_shape = {1 + rng.below(3), side, side};
    m.layers.push_back({"input", tpd::LayerKind::Input, 0, 1, 0, 0, {}});
    const int kernels[] = {1, 3, 5};
    const int k = kernels[rng.below(3)];
    const int c1 = 2 + rng.below(6);
    m.layers.push_back({"c1", tpd::LayerKind::Conv2d, k, 1 + rng.below(2), k / 2, c1, {"input"}});
    m.layers.push_back({"r1", tpd::LayerKind::ReLU, 0, 1, 0, 0, {"c1"}});
    std::string tail = "r1";
    if (rng.bernoulli(0.5)) {
        const int c2 = 2 + rng.below(6);
        m.layers.push_back({"c2", tpd::LayerKind::Conv2d, 3, 2, 1, c2, {tail}});
        m.layers.push_back({"r2", tpd::LayerKind::ReLU, 0, 1, 0, 0, {"c2"}});
        m.layers.push_back({"byp", tpd::LayerKind::Conv2d, 1, 2, 0, c2, {tail}});
        m.layers.push_back({"join", tpd::LayerKind::Add, 0, 1, 0, 0, {"r2", "byp"}});
        tail = "join";
    } else if (rng.bernoulli(0.5)) {
        m.layers.push_back({"pool", tpd::LayerKind::MaxPool, 2, 2, 0, 0, {tail}});
        tail = "pool";
    }
    m.layers.push_back({"flatten", tpd::LayerKind::Flatten, 0, 1, 0, 0, {tail}});
    m.layers.push_back({"fc_steer", tpd::LayerKind::FullyConnected, 0, 1, 0, 1, {"flatten"}});
    m.layers.push_back({"fc_coll", tpd::LayerKind::FullyConnected, 0, 1, 0, 1, {"flatten"}});
    m.layers.push_back({"sigmoid", tpd::LayerKind::Sigmoid, 0, 1, 0, 0, {"fc_coll"}});
    m.shapes = tpd::infer_shapes(m);
    return m;
}

inline tpd::Tensor random_image(const tpd::TensorShape& s, tpd::Rng& rng) {
    tpd::Tensor t(s.channels, s.height, s.width);
    for (auto& v : t.v) v = static_cast<float>(rng.uniform());
    return t;
}

// Fan-in init shrinks activations layer by layer; after eight convolutions
// the pre-activations sit within ~1e-6 of the ReLU kinks and no finite
// difference step can probe a one-sided neighborhood. Oracle comparisons use
// weights rescaled to keep activations O(0.1..1) so the test point is well
// inside a smooth region.
inline tpd::WeightSet healthy_weights(const tpd::Model& m, uint64_t seed) {
    tpd::WeightSet ws = tpd::init_weights(m, seed);
    tpd::Rng rng(seed ^ 0x9e3779b97f4a7c15ULL);
    for (auto& [name, t] : ws.entries) {
        if (name.size() > 7 && name.compare(name.size() - 7, 7, ".weight") == 0) {
            for (auto& v : t.values) v *= 2.5f;
        } else {
            for (auto& v : t.values) v = static_cast<float>(rng.uniform(-0.05, 0.05));
        }
    }
    return ws;
}

}  // namespace oracle
