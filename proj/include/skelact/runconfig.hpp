#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"
#include "skelact/model.hpp"
#include "skelact/training.hpp"

namespace skelact {

/// One experiment's complete configuration: model, training schedule,
/// dataset location, and output directory.
struct RunConfig {
  ModelConfig model;
  TrainConfig train;
  std::string data_dir = "data";
  std::string output_dir = "out";
  std::uint64_t seed = 0;  // model initialization; also train.seed unless set explicitly

  void validate() const;
};

nlohmann::json run_config_to_json(const RunConfig& config);

/// Strict parser; unrecognized keys at any level are appended to `unknown`.
RunConfig run_config_from_json(const nlohmann::json& j, std::vector<std::string>& unknown);

/// Reads and parses a config file. Throws std::runtime_error naming the file
/// and, for unknown keys, listing every offending key.
RunConfig load_run_config(const std::string& path);

/// Writes the fully expanded config (all defaults applied) so a run can be
/// reproduced from its output directory.
void save_run_config(const std::string& path, const RunConfig& config);

}  // namespace skelact
