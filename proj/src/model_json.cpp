#include "tpd/model_json.hpp"

#include <fstream>

#include "json.hpp"
#include "tpd/errors.hpp"

namespace tpd {

using nlohmann::json;

std::string model_to_json(const Model& m) {
    json doc;
    if (m.family) {
        doc["family"] = "pulp-dronet";
        doc["gamma"] = m.family->gamma;
        doc["bypass"] = m.family->with_bypass;
        doc["base_channels"] = m.family->base_channels;
    } else {
        doc["family"] = "custom";
    }
    doc["input"] = {m.input_shape.channels, m.input_shape.height, m.input_shape.width};
    json layers = json::array();
    for (const auto& l : m.layers) {
        json jl;
        jl["id"] = l.id;
        jl["kind"] = to_string(l.kind);
        jl["inputs"] = l.inputs;
        if (l.kind == LayerKind::Conv2d || l.kind == LayerKind::MaxPool) {
            jl["kernel"] = l.kernel;
            jl["stride"] = l.stride;
            jl["padding"] = l.padding;
        }
        if (l.kind == LayerKind::Conv2d || l.kind == LayerKind::FullyConnected)
            jl["out_channels"] = l.out_channels;
        layers.push_back(jl);
    }
    doc["layers"] = layers;
    return doc.dump(2);
}

Model model_from_json(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::exception& e) {
        throw DataError(std::string("model JSON parse error: ") + e.what());
    }
    try {
        Model m;
        auto in = doc.at("input");
        m.input_shape = {in.at(0).get<int>(), in.at(1).get<int>(), in.at(2).get<int>()};
        if (doc.value("family", "custom") == std::string("pulp-dronet")) {
            FamilyConfig cfg;
            cfg.gamma = doc.at("gamma").get<double>();
            cfg.with_bypass = doc.at("bypass").get<bool>();
            cfg.base_channels = doc.value("base_channels", 32);
            cfg.input_shape = m.input_shape;
            m.family = cfg;
        }
        for (const auto& jl : doc.at("layers")) {
            LayerSpec l;
            l.id = jl.at("id").get<std::string>();
            l.kind = layer_kind_from_string(jl.at("kind").get<std::string>());
            l.inputs = jl.value("inputs", std::vector<std::string>{});
            l.kernel = jl.value("kernel", 0);
            l.stride = jl.value("stride", 1);
            l.padding = jl.value("padding", 0);
            l.out_channels = jl.value("out_channels", 0);
            m.layers.push_back(std::move(l));
        }
        m.shapes = infer_shapes(m);
        return m;
    } catch (const json::exception& e) {
        throw DataError(std::string("malformed model document: ") + e.what());
    } catch (const std::invalid_argument& e) {
        throw DataError(std::string("invalid model: ") + e.what());
    }
}

void save_model(const Model& m, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot open for writing: " + path);
    f << model_to_json(m) << "\n";
}

Model load_model(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot open model file: " + path);
    std::string text((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    return model_from_json(text);
}

}  // namespace tpd
