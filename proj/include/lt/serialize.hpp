#ifndef LT_SERIALIZE_HPP
#define LT_SERIALIZE_HPP

#include <string>

#include <json.hpp>

#include "lt/model.hpp"
#include "lt/optimizer.hpp"

namespace lt {

nlohmann::json model_config_to_json(const ModelConfig& config);
// Starts from defaults; unknown keys are rejected so config typos fail
// loudly instead of silently training the wrong model.
ModelConfig model_config_from_json(const nlohmann::json& j);

// Checkpoint layout: <dir>/checkpoint.json carrying the config, step
// count and parameter names, plus one tensor file per parameter and per
// Adam moment next to it.
void save_checkpoint(const Model& model, const Adam& opt, const std::string& dir);
Model load_checkpoint(const std::string& dir, Adam* opt = nullptr);

}  // namespace lt

#endif  // LT_SERIALIZE_HPP
