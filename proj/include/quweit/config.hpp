#pragma once

#include <json.hpp>

#include <string>

#include "quweit/model.hpp"
#include "quweit/optim.hpp"

namespace quweit {

using json = nlohmann::json;

/// Combined run configuration: model topology plus training settings.
struct RunConfig {
    ModelConfig model;
    TrainConfig train;
};

json model_config_to_json(const ModelConfig& cfg);
ModelConfig model_config_from_json(const json& j);  // rejects unknown keys

json train_config_to_json(const TrainConfig& cfg);
TrainConfig train_config_from_json(const json& j);

json run_config_to_json(const RunConfig& cfg);
RunConfig run_config_from_json(const json& j);

/// Built-in configurations: "gpt3" (workload analysis dims), "ivit-t"
/// (D=192, N=196, 3 heads, weightless 768/192 with 8-bit thermometer) and
/// "nano-shakespeare" (2 layers, D=64, N=128 desk-scale decoder).
RunConfig preset(const std::string& name);
std::vector<std::string> preset_names();

/// Applies a dotted-key override like "train.lr=0.002" or
/// "model.n_layers=3" onto a config JSON document.
void apply_override(json& doc, const std::string& key_value);

}  // namespace quweit
