#pragma once

#include <string>

#include <json.hpp>

#include "qdren/model.hpp"

namespace qdren {

/// Every field, with phi_out resolved.
nlohmann::json config_to_json(const ModelConfig& config);

/// Sets one ModelConfig field from its JSON key. Returns false when `key` is
/// not a model field; throws ConfigError on a bad value.
bool apply_config_key(ModelConfig& config, const std::string& key, const nlohmann::json& value);

/// Strict: unknown keys are rejected.
ModelConfig config_from_json(const nlohmann::json& j);

}  // namespace qdren
