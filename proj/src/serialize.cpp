#include "skelact/serialize.hpp"

#include <stdexcept>

namespace skelact {

using nlohmann::json;

json topology_to_json(const SkeletonTopology& topology) {
  json j;
  j["names"] = topology.names;
  j["parent"] = topology.parent;
  j["center"] = topology.center_joint;
  j["chest"] = topology.chest_joint;
  j["lshoulder"] = topology.left_shoulder_joint;
  j["rshoulder"] = topology.right_shoulder_joint;
  return j;
}

TopologyPtr topology_from_json(const json& j) {
  auto topo = std::make_shared<SkeletonTopology>();
  topo->names = j.at("names").get<std::vector<std::string>>();
  topo->parent = j.at("parent").get<std::vector<int>>();
  topo->joint_count = static_cast<int>(topo->names.size());
  topo->center_joint = j.at("center").get<int>();
  topo->chest_joint = j.at("chest").get<int>();
  topo->left_shoulder_joint = j.at("lshoulder").get<int>();
  topo->right_shoulder_joint = j.at("rshoulder").get<int>();
  topo->validate();
  return topo;
}

json model_config_to_json(const ModelConfig& config) {
  json j;
  j["channels"] = config.channels;
  j["strides"] = config.strides;
  j["temporal_kernel"] = config.temporal_kernel;
  j["residual"] = config.residual;
  j["batch_norm"] = config.batch_norm;
  j["input_channels"] = config.input_channels;
  j["class_count"] = config.class_count;
  j["segment_count"] = config.segment_count;
  j["selected_count"] = config.selected_count;
  j["saliency"] = saliency_mode_name(config.saliency);
  j["esa_enabled"] = config.esa_enabled;
  j["esa_kernel"] = config.esa_kernel;
  j["loss_weights"] = {{"global", config.loss_weights.global},
                       {"segment", config.loss_weights.segment},
                       {"slot", config.loss_weights.slot},
                       {"aggregate", config.loss_weights.aggregate}};
  return j;
}

json train_config_to_json(const TrainConfig& config) {
  json j;
  j["epochs"] = config.epochs;
  j["batch_size"] = config.batch_size;
  j["lr0"] = config.lr0;
  j["lr_drop_epochs"] = config.lr_drop_epochs;
  j["lr_drop_factor"] = config.lr_drop_factor;
  j["momentum"] = config.momentum;
  j["weight_decay"] = config.weight_decay;
  j["seed"] = config.seed;
  j["dif_enabled"] = config.dif_enabled;
  j["branch_mode"] = branch_mode_name(config.branch_mode);
  j["resample_frames"] = config.resample_frames;
  return j;
}

namespace {

template <typename T>
void take(const json& j, const char* key, T& out, std::vector<const char*>& known) {
  known.push_back(key);
  if (j.contains(key)) out = j.at(key).get<T>();
}

void collect_unknown(const json& j, const std::vector<const char*>& known,
                     const std::string& prefix, std::vector<std::string>& unknown) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool found = false;
    for (const char* k : known) found |= (it.key() == k);
    if (!found) unknown.push_back(prefix + it.key());
  }
}

}  // namespace

ModelConfig model_config_from_json(const json& j, std::vector<std::string>& unknown) {
  if (!j.is_object()) throw std::invalid_argument("model config must be a JSON object");
  ModelConfig config;
  std::vector<const char*> known;
  take(j, "channels", config.channels, known);
  take(j, "strides", config.strides, known);
  take(j, "temporal_kernel", config.temporal_kernel, known);
  take(j, "residual", config.residual, known);
  take(j, "batch_norm", config.batch_norm, known);
  take(j, "input_channels", config.input_channels, known);
  take(j, "class_count", config.class_count, known);
  take(j, "segment_count", config.segment_count, known);
  take(j, "selected_count", config.selected_count, known);
  take(j, "esa_enabled", config.esa_enabled, known);
  take(j, "esa_kernel", config.esa_kernel, known);
  known.push_back("saliency");
  if (j.contains("saliency")) {
    config.saliency = saliency_mode_from_name(j.at("saliency").get<std::string>());
  }
  known.push_back("loss_weights");
  if (j.contains("loss_weights")) {
    const json& w = j.at("loss_weights");
    std::vector<const char*> wknown;
    take(w, "global", config.loss_weights.global, wknown);
    take(w, "segment", config.loss_weights.segment, wknown);
    take(w, "slot", config.loss_weights.slot, wknown);
    take(w, "aggregate", config.loss_weights.aggregate, wknown);
    collect_unknown(w, wknown, "loss_weights.", unknown);
  }
  collect_unknown(j, known, "", unknown);
  return config;
}

TrainConfig train_config_from_json(const json& j, std::vector<std::string>& unknown) {
  if (!j.is_object()) throw std::invalid_argument("train config must be a JSON object");
  TrainConfig config;
  std::vector<const char*> known;
  take(j, "epochs", config.epochs, known);
  take(j, "batch_size", config.batch_size, known);
  take(j, "lr0", config.lr0, known);
  take(j, "lr_drop_epochs", config.lr_drop_epochs, known);
  take(j, "lr_drop_factor", config.lr_drop_factor, known);
  take(j, "momentum", config.momentum, known);
  take(j, "weight_decay", config.weight_decay, known);
  take(j, "seed", config.seed, known);
  take(j, "dif_enabled", config.dif_enabled, known);
  take(j, "resample_frames", config.resample_frames, known);
  known.push_back("branch_mode");
  if (j.contains("branch_mode")) {
    config.branch_mode = branch_mode_from_name(j.at("branch_mode").get<std::string>());
  }
  collect_unknown(j, known, "", unknown);
  return config;
}

}  // namespace skelact
