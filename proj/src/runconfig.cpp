#include "skelact/runconfig.hpp"

#include <fstream>
#include <stdexcept>

#include "skelact/serialize.hpp"

namespace skelact {

using nlohmann::json;

void RunConfig::validate() const {
  model.validate();
  train.validate();
  if (data_dir.empty()) throw std::invalid_argument("run config: data_dir must not be empty");
  if (output_dir.empty()) throw std::invalid_argument("run config: output_dir must not be empty");
}

json run_config_to_json(const RunConfig& config) {
  json j;
  j["model"] = model_config_to_json(config.model);
  j["train"] = train_config_to_json(config.train);
  j["data_dir"] = config.data_dir;
  j["output_dir"] = config.output_dir;
  j["seed"] = config.seed;
  return j;
}

RunConfig run_config_from_json(const json& j, std::vector<std::string>& unknown) {
  if (!j.is_object()) throw std::invalid_argument("run config must be a JSON object");
  RunConfig config;
  static const char* kKnown[] = {"model", "train", "data_dir", "output_dir", "seed"};

  if (j.contains("seed")) config.seed = j.at("seed").get<std::uint64_t>();
  if (j.contains("data_dir")) config.data_dir = j.at("data_dir").get<std::string>();
  if (j.contains("output_dir")) config.output_dir = j.at("output_dir").get<std::string>();
  if (j.contains("model")) {
    std::vector<std::string> nested;
    config.model = model_config_from_json(j.at("model"), nested);
    for (const std::string& key : nested) unknown.push_back("model." + key);
  }
  if (j.contains("train")) {
    std::vector<std::string> nested;
    config.train = train_config_from_json(j.at("train"), nested);
    for (const std::string& key : nested) unknown.push_back("train." + key);
    // The top-level seed doubles as the shuffle seed unless one was pinned.
    if (!j.at("train").contains("seed")) config.train.seed = config.seed;
  } else {
    config.train.seed = config.seed;
  }
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool found = false;
    for (const char* k : kKnown) found |= (it.key() == k);
    if (!found) unknown.push_back(it.key());
  }
  return config;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error(path + ": cannot open config file");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw std::runtime_error(path + ": bad JSON: " + e.what());
  }
  std::vector<std::string> unknown;
  RunConfig config;
  try {
    config = run_config_from_json(j, unknown);
  } catch (const json::exception& e) {
    throw std::runtime_error(path + ": bad config value: " + e.what());
  } catch (const std::invalid_argument& e) {
    throw std::runtime_error(path + ": " + e.what());
  }
  if (!unknown.empty()) {
    std::string message = path + ": unknown config key";
    if (unknown.size() > 1) message += "s";
    for (std::size_t i = 0; i < unknown.size(); ++i) {
      message += (i == 0 ? ": " : ", ") + unknown[i];
    }
    throw std::runtime_error(message);
  }
  try {
    config.validate();
  } catch (const std::invalid_argument& e) {
    throw std::runtime_error(path + ": " + e.what());
  }
  return config;
}

void save_run_config(const std::string& path, const RunConfig& config) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error(path + ": cannot open for writing");
  out << run_config_to_json(config).dump(2) << '\n';
  if (!out) throw std::runtime_error(path + ": write failed");
}

}  // namespace skelact
