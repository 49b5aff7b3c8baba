#pragma once

#include <string>

#include "tpd/model.hpp"

namespace tpd {

// Model document:
//   {"family":"pulp-dronet","gamma":0.125,"bypass":false,"base_channels":32,
//    "input":[1,200,200],"layers":[...]}
// The layer list is always explicit, so non-family graphs load the same way
// (family metadata is then "custom" and gamma/bypass are omitted).
std::string model_to_json(const Model& m);
Model model_from_json(const std::string& text);

void save_model(const Model& m, const std::string& path);
Model load_model(const std::string& path);

}  // namespace tpd
