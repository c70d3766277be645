#pragma once

#include "cosim/model.hpp"

#include <filesystem>
#include <string>

namespace cosim {

/// JSON document with "blocks" (id, kind, params), "wires" (src/dst as
/// [id, port] pairs), "inputs" and "outputs" arrays. Doubles round-trip
/// exactly. The result of from_json/load is validated.
std::string model_to_json(const Model& model);
Model model_from_json(const std::string& text);

void save_model(const Model& model, const std::filesystem::path& path);
Model load_model(const std::filesystem::path& path);

} // namespace cosim
