#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace tpd {

struct TensorShape {
    int channels = 0;
    int height = 0;
    int width = 0;

    long long elements() const {
        return static_cast<long long>(channels) * height * width;
    }
    long long bytes(int bytes_per_element) const {
        return elements() * bytes_per_element;
    }
    bool operator==(const TensorShape&) const = default;
};

enum class LayerKind { Input, Conv2d, MaxPool, ReLU, Add, Flatten, FullyConnected, Sigmoid };

const char* to_string(LayerKind k);
LayerKind layer_kind_from_string(const std::string& s);

struct LayerSpec {
    std::string id;
    LayerKind kind = LayerKind::Input;
    int kernel = 0;        // Conv2d / MaxPool
    int stride = 1;
    int padding = 0;
    int out_channels = 0;  // Conv2d / FullyConnected
    std::vector<std::string> inputs;

    bool operator==(const LayerSpec&) const = default;
};

// Width multipliers accepted by the model family.
inline constexpr double kFamilyGammas[] = {0.125, 0.25, 0.5, 1.0};

bool gamma_in_family(double gamma);

struct FamilyConfig {
    double gamma = 1.0;
    bool with_bypass = true;
    TensorShape input_shape{1, 200, 200};
    int base_channels = 32;

    bool operator==(const FamilyConfig&) const = default;
};

// Dataflow graph of typed layers. Layers are stored in declaration order and
// must form a DAG with a single Input. `shapes` is filled by infer_shapes and
// is not part of the model identity.
struct Model {
    std::vector<LayerSpec> layers;
    std::optional<FamilyConfig> family;
    TensorShape input_shape{1, 200, 200};
    std::map<std::string, TensorShape> shapes;

    int index_of(const std::string& id) const;    // -1 if absent
    const LayerSpec* find(const std::string& id) const;
    std::vector<std::string> consumers(const std::string& id) const;
    std::vector<std::string> output_ids() const;  // layers nobody consumes

    bool operator==(const Model& o) const {
        return layers == o.layers && family == o.family && input_shape == o.input_shape;
    }
};

// Checks ids, arity, kernel/stride sets and acyclicity. Throws std::invalid_argument.
void validate_structure(const Model& m);

// Topological order over layer indices, ties broken by declaration order.
std::vector<int> topo_indices(const Model& m);

// Standard conv arithmetic: out = floor((in + 2*pad - k) / stride) + 1.
std::map<std::string, TensorShape> infer_shapes(const Model& m);

// Kernel/bias parameter count of one layer (zero for non-parametric kinds).
long long layer_param_count(const LayerSpec& l, const std::map<std::string, TensorShape>& shapes,
                            const Model& m);

Model build_dronet(const FamilyConfig& cfg);

// Rescales every Conv2d width relative to the gamma=1 reference of the model.
// Structural transform only; any bound weight set becomes invalid.
Model scale_channels(const Model& m, double gamma);

// Deletes 1x1 bypass convolutions and their Add joins, rewiring the main
// branch straight through. Idempotent.
Model remove_bypass(const Model& m);

}  // namespace tpd
