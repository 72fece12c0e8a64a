#pragma once

#include <string>
#include <vector>

#include "json.hpp"
#include "skelact/model.hpp"
#include "skelact/topology.hpp"
#include "skelact/training.hpp"

namespace skelact {

nlohmann::json topology_to_json(const SkeletonTopology& topology);
/// Parses and validates a topology object ({names, parent, center, chest,
/// lshoulder, rshoulder}).
TopologyPtr topology_from_json(const nlohmann::json& j);

nlohmann::json model_config_to_json(const ModelConfig& config);
nlohmann::json train_config_to_json(const TrainConfig& config);

/// Strict parsers: start from defaults, apply present keys, and append any
/// unrecognized key (prefixed for nesting) to `unknown`.
ModelConfig model_config_from_json(const nlohmann::json& j, std::vector<std::string>& unknown);
TrainConfig train_config_from_json(const nlohmann::json& j, std::vector<std::string>& unknown);

}  // namespace skelact
