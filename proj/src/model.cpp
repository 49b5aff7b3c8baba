#include "tpd/model.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

namespace tpd {

const char* to_string(LayerKind k) {
    switch (k) {
        case LayerKind::Input: return "Input";
        case LayerKind::Conv2d: return "Conv2d";
        case LayerKind::MaxPool: return "MaxPool";
        case LayerKind::ReLU: return "ReLU";
        case LayerKind::Add: return "Add";
        case LayerKind::Flatten: return "Flatten";
        case LayerKind::FullyConnected: return "FullyConnected";
        case LayerKind::Sigmoid: return "Sigmoid";
    }
    return "?";
}

LayerKind layer_kind_from_string(const std::string& s) {
    if (s == "Input") return LayerKind::Input;
    if (s == "Conv2d") return LayerKind::Conv2d;
    if (s == "MaxPool") return LayerKind::MaxPool;
    if (s == "ReLU") return LayerKind::ReLU;
    if (s == "Add") return LayerKind::Add;
    if (s == "Flatten") return LayerKind::Flatten;
    if (s == "FullyConnected") return LayerKind::FullyConnected;
    if (s == "Sigmoid") return LayerKind::Sigmoid;
    throw std::invalid_argument("unknown layer kind: " + s);
}

bool gamma_in_family(double gamma) {
    for (double g : kFamilyGammas)
        if (g == gamma) return true;
    return false;
}

int Model::index_of(const std::string& id) const {
    for (size_t i = 0; i < layers.size(); ++i)
        if (layers[i].id == id) return static_cast<int>(i);
    return -1;
}

const LayerSpec* Model::find(const std::string& id) const {
    int i = index_of(id);
    return i < 0 ? nullptr : &layers[i];
}

std::vector<std::string> Model::consumers(const std::string& id) const {
    std::vector<std::string> out;
    for (const auto& l : layers)
        for (const auto& in : l.inputs)
            if (in == id) out.push_back(l.id);
    return out;
}

std::vector<std::string> Model::output_ids() const {
    std::vector<std::string> out;
    for (const auto& l : layers)
        if (consumers(l.id).empty()) out.push_back(l.id);
    return out;
}

void validate_structure(const Model& m) {
    std::set<std::string> ids;
    int n_inputs = 0;
    for (const auto& l : m.layers) {
        if (l.id.empty()) throw std::invalid_argument("layer with empty id");
        if (!ids.insert(l.id).second)
            throw std::invalid_argument("duplicate layer id: " + l.id);
    }
    for (const auto& l : m.layers) {
        size_t want = l.kind == LayerKind::Input ? 0 : l.kind == LayerKind::Add ? 2 : 1;
        if (l.inputs.size() != want)
            throw std::invalid_argument("layer " + l.id + " expects " + std::to_string(want) +
                                        " inputs, has " + std::to_string(l.inputs.size()));
        for (const auto& in : l.inputs)
            if (!ids.count(in))
                throw std::invalid_argument("layer " + l.id + " references unknown input: " + in);
        switch (l.kind) {
            case LayerKind::Input:
                ++n_inputs;
                break;
            case LayerKind::Conv2d:
                if (l.kernel != 1 && l.kernel != 3 && l.kernel != 5)
                    throw std::invalid_argument("conv kernel must be 1, 3 or 5: " + l.id);
                if (l.stride != 1 && l.stride != 2)
                    throw std::invalid_argument("conv stride must be 1 or 2: " + l.id);
                if (l.out_channels < 1)
                    throw std::invalid_argument("conv needs out_channels >= 1: " + l.id);
                break;
            case LayerKind::MaxPool:
                if (l.kernel < 2) throw std::invalid_argument("pool kernel must be >= 2: " + l.id);
                if (l.stride != 1 && l.stride != 2)
                    throw std::invalid_argument("pool stride must be 1 or 2: " + l.id);
                break;
            case LayerKind::FullyConnected:
                if (l.out_channels < 1)
                    throw std::invalid_argument("fc needs out_channels >= 1: " + l.id);
                break;
            default:
                break;
        }
    }
    if (n_inputs != 1) throw std::invalid_argument("model must have exactly one Input layer");
    topo_indices(m);  // throws on cycles
}

std::vector<int> topo_indices(const Model& m) {
    const int n = static_cast<int>(m.layers.size());
    std::vector<int> indegree(n, 0);
    std::map<std::string, int> index;
    for (int i = 0; i < n; ++i) index[m.layers[i].id] = i;

    std::vector<std::vector<int>> succ(n);
    for (int i = 0; i < n; ++i) {
        for (const auto& in : m.layers[i].inputs) {
            auto it = index.find(in);
            if (it == index.end())
                throw std::invalid_argument("layer " + m.layers[i].id + " references unknown input: " + in);
            succ[it->second].push_back(i);
            ++indegree[i];
        }
    }
    // Kahn's algorithm; the ready set is kept sorted so ties resolve to
    // declaration order.
    std::set<int> ready;
    for (int i = 0; i < n; ++i)
        if (indegree[i] == 0) ready.insert(i);
    std::vector<int> order;
    order.reserve(n);
    while (!ready.empty()) {
        int i = *ready.begin();
        ready.erase(ready.begin());
        order.push_back(i);
        for (int s : succ[i])
            if (--indegree[s] == 0) ready.insert(s);
    }
    if (static_cast<int>(order.size()) != n) throw std::invalid_argument("cycle detected in model graph");
    return order;
}

static int conv_out_dim(int in, int k, int stride, int pad) {
    return (in + 2 * pad - k) / stride + 1;
}

std::map<std::string, TensorShape> infer_shapes(const Model& m) {
    validate_structure(m);
    std::map<std::string, TensorShape> shapes;
    for (int i : topo_indices(m)) {
        const LayerSpec& l = m.layers[i];
        auto in_shape = [&](int j) { return shapes.at(l.inputs[j]); };
        TensorShape out;
        switch (l.kind) {
            case LayerKind::Input:
                out = m.input_shape;
                break;
            case LayerKind::Conv2d: {
                TensorShape s = in_shape(0);
                out = {l.out_channels, conv_out_dim(s.height, l.kernel, l.stride, l.padding),
                       conv_out_dim(s.width, l.kernel, l.stride, l.padding)};
                break;
            }
            case LayerKind::MaxPool: {
                TensorShape s = in_shape(0);
                out = {s.channels, conv_out_dim(s.height, l.kernel, l.stride, l.padding),
                       conv_out_dim(s.width, l.kernel, l.stride, l.padding)};
                break;
            }
            case LayerKind::ReLU:
            case LayerKind::Sigmoid:
                out = in_shape(0);
                break;
            case LayerKind::Add: {
                TensorShape a = in_shape(0), b = in_shape(1);
                if (!(a == b))
                    throw std::invalid_argument("shape mismatch at Add layer " + l.id);
                out = a;
                break;
            }
            case LayerKind::Flatten: {
                TensorShape s = in_shape(0);
                out = {static_cast<int>(s.elements()), 1, 1};
                break;
            }
            case LayerKind::FullyConnected:
                out = {l.out_channels, 1, 1};
                break;
        }
        if (out.channels < 1 || out.height < 1 || out.width < 1)
            throw std::invalid_argument("non-positive output dimension at layer " + l.id);
        shapes[l.id] = out;
    }
    return shapes;
}

long long layer_param_count(const LayerSpec& l, const std::map<std::string, TensorShape>& shapes,
                            const Model& m) {
    (void)m;
    if (l.kind == LayerKind::Conv2d) {
        long long c_in = shapes.at(l.inputs[0]).channels;
        return static_cast<long long>(l.kernel) * l.kernel * c_in * l.out_channels + l.out_channels;
    }
    if (l.kind == LayerKind::FullyConnected) {
        long long in_dim = shapes.at(l.inputs[0]).elements();
        return in_dim * l.out_channels + l.out_channels;
    }
    return 0;
}

static int scaled_channels(double gamma, int base, int mult) {
    double c = gamma * base * mult;
    long long r = std::llround(c);
    if (std::fabs(c - static_cast<double>(r)) > 1e-9 || r < 1)
        throw std::invalid_argument("gamma * base_channels is not a positive integer");
    return static_cast<int>(r);
}

Model build_dronet(const FamilyConfig& cfg) {
    if (!gamma_in_family(cfg.gamma)) throw std::invalid_argument("gamma not in family");
    scaled_channels(cfg.gamma, cfg.base_channels, 1);
    scaled_channels(cfg.gamma, cfg.base_channels, 4);

    Model m;
    m.family = cfg;
    m.input_shape = cfg.input_shape;

    auto add = [&](LayerSpec l) { m.layers.push_back(std::move(l)); };
    auto conv = [&](std::string id, std::string in, int out_c, int k, int s, int p) {
        add({std::move(id), LayerKind::Conv2d, k, s, p, out_c, {std::move(in)}});
    };

    int c0 = scaled_channels(cfg.gamma, cfg.base_channels, 1);
    add({"input", LayerKind::Input, 0, 1, 0, 0, {}});
    conv("conv1", "input", c0, 5, 2, 2);
    add({"Act0", LayerKind::ReLU, 0, 1, 0, 0, {"conv1"}});
    add({"pool", LayerKind::MaxPool, 2, 2, 0, 0, {"Act0"}});

    std::string block_in = "pool";
    int c_in = c0;
    for (int b = 1; b <= 3; ++b) {
        int c_out = scaled_channels(cfg.gamma, cfg.base_channels, 1 << (b - 1));
        std::string rb = "RB" + std::to_string(b);
        std::string act_a = "Act" + std::to_string(2 * b - 1);
        std::string act_b = "Act" + std::to_string(2 * b);
        conv(rb + "_conv1", block_in, c_out, 3, 2, 1);
        add({act_a, LayerKind::ReLU, 0, 1, 0, 0, {rb + "_conv1"}});
        conv(rb + "_conv2", act_a, c_out, 3, 1, 1);
        add({act_b, LayerKind::ReLU, 0, 1, 0, 0, {rb + "_conv2"}});
        if (cfg.with_bypass) {
            conv("Byp" + std::to_string(b), block_in, c_out, 1, 2, 0);
            add({rb + "_add", LayerKind::Add, 0, 1, 0, 0, {act_b, "Byp" + std::to_string(b)}});
            block_in = rb + "_add";
        } else {
            block_in = act_b;
        }
        c_in = c_out;
    }
    (void)c_in;

    add({"flatten", LayerKind::Flatten, 0, 1, 0, 0, {block_in}});
    add({"fc_steer", LayerKind::FullyConnected, 0, 1, 0, 1, {"flatten"}});
    add({"fc_coll", LayerKind::FullyConnected, 0, 1, 0, 1, {"flatten"}});
    add({"sigmoid", LayerKind::Sigmoid, 0, 1, 0, 0, {"fc_coll"}});

    m.shapes = infer_shapes(m);
    return m;
}

Model scale_channels(const Model& m, double gamma) {
    double reference = m.family ? m.family->gamma : 1.0;
    Model out = m;
    out.shapes.clear();
    for (auto& l : out.layers) {
        if (l.kind != LayerKind::Conv2d) continue;
        double c = static_cast<double>(l.out_channels) * gamma / reference;
        long long r = std::llround(c);
        if (std::fabs(c - static_cast<double>(r)) > 1e-9 || r < 1)
            throw std::invalid_argument("non-integral channel count for layer " + l.id +
                                        " at gamma " + std::to_string(gamma));
        l.out_channels = static_cast<int>(r);
    }
    if (out.family) {
        if (gamma_in_family(gamma))
            out.family->gamma = gamma;
        else
            out.family.reset();  // no longer a family member
    }
    out.shapes = infer_shapes(out);
    return out;
}

Model remove_bypass(const Model& m) {
    // A bypass is a 1x1 Conv2d whose only consumer is an Add; the Add is
    // removed with it and its other input takes over.
    std::set<std::string> drop;
    std::map<std::string, std::string> rewire;  // add id -> surviving input id
    for (const auto& l : m.layers) {
        if (l.kind != LayerKind::Add) continue;
        std::string byp;
        std::string main;
        for (const auto& in : l.inputs) {
            const LayerSpec* p = m.find(in);
            if (p && p->kind == LayerKind::Conv2d && p->kernel == 1 &&
                m.consumers(p->id).size() == 1 && byp.empty()) {
                byp = in;
            } else {
                main = in;
            }
        }
        if (!byp.empty() && !main.empty()) {
            drop.insert(byp);
            drop.insert(l.id);
            rewire[l.id] = main;
        }
    }
    for (auto& [add_id, target] : rewire) {
        (void)add_id;
        while (rewire.count(target)) target = rewire.at(target);
    }
    Model out;
    out.family = m.family;
    if (out.family) out.family->with_bypass = false;
    out.input_shape = m.input_shape;
    for (const auto& l : m.layers) {
        if (drop.count(l.id)) continue;
        LayerSpec c = l;
        for (auto& in : c.inputs) {
            auto it = rewire.find(in);
            if (it != rewire.end()) in = it->second;
        }
        out.layers.push_back(std::move(c));
    }
    out.shapes = infer_shapes(out);
    return out;
}

}  // namespace tpd
