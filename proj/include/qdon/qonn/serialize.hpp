#pragma once

#include <json.hpp>

#include "qdon/qonn/qonn.hpp"

namespace qdon {

// Checkpoints store doubles with round-trip precision, so a reload gives a
// bit-identical network. Pyramid layouts are rebuilt from their dimensions.
nlohmann::json qonn_to_json(const QOrthoNN& net);
QOrthoNN qonn_from_json(const nlohmann::json& j);

}  // namespace qdon
