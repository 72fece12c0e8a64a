#include "skelact/model.hpp"

#include <cstring>
#include <fstream>
#include <stdexcept>

#include "skelact/serialize.hpp"

namespace skelact {

using nlohmann::json;

namespace {

constexpr char kMagic[8] = {'S', 'K', 'E', 'L', 'A', 'C', 'T', '1'};

Tensor scaled(const Tensor& t, double factor) {
  Tensor out = t;
  out.scale_(factor);
  return out;
}

}  // namespace

std::string branch_mode_name(BranchMode mode) {
  switch (mode) {
    case BranchMode::kGlobal: return "global";
    case BranchMode::kDfl: return "dfl";
    case BranchMode::kBoth: return "both";
  }
  throw std::logic_error("unreachable branch mode");
}

BranchMode branch_mode_from_name(const std::string& name) {
  if (name == "global") return BranchMode::kGlobal;
  if (name == "dfl") return BranchMode::kDfl;
  if (name == "both") return BranchMode::kBoth;
  throw std::invalid_argument("unknown branch mode '" + name + "' (global|dfl|both)");
}

void ModelConfig::validate() const {
  if (channels.empty()) throw std::invalid_argument("model config: needs at least one block");
  if (channels.size() != strides.size()) {
    throw std::invalid_argument("model config: channels and strides must have equal length");
  }
  for (int c : channels) {
    if (c <= 0) throw std::invalid_argument("model config: channels must be positive");
  }
  for (int s : strides) {
    if (s < 1) throw std::invalid_argument("model config: strides must be >= 1");
  }
  if (temporal_kernel < 1 || temporal_kernel % 2 == 0) {
    throw std::invalid_argument("model config: temporal kernel must be odd and positive");
  }
  if (esa_kernel < 1 || esa_kernel % 2 == 0) {
    throw std::invalid_argument("model config: esa kernel must be odd and positive");
  }
  if (input_channels <= 0) throw std::invalid_argument("model config: input channels must be positive");
  if (class_count < 2) throw std::invalid_argument("model config: need at least two classes");
  if (segment_count < 1) throw std::invalid_argument("model config: need at least one segment");
  if (selected_count < 1 || selected_count > segment_count) {
    throw std::invalid_argument("model config: need 1 <= selected count <= segment count");
  }
  if (loss_weights.global < 0.0 || loss_weights.segment < 0.0 || loss_weights.slot < 0.0 ||
      loss_weights.aggregate < 0.0) {
    throw std::invalid_argument("model config: loss weights must be nonnegative");
  }
}

BackboneConfig ModelConfig::backbone_config() const {
  BackboneConfig cfg;
  int in = input_channels;
  for (std::size_t i = 0; i < channels.size(); ++i) {
    StgcnBlockConfig block;
    block.in_channels = in;
    block.out_channels = channels[i];
    block.temporal_kernel = temporal_kernel;
    block.temporal_stride = strides[i];
    block.residual = residual;
    block.batch_norm = batch_norm;
    cfg.blocks.push_back(block);
    in = channels[i];
  }
  cfg.esa_enabled = esa_enabled;
  cfg.esa_kernel = esa_kernel;
  return cfg;
}

Model::Model(TopologyPtr topology, const ModelConfig& config, std::uint64_t seed)
    : topology_(std::move(topology)), config_(config) {
  if (!topology_) throw std::invalid_argument("model: null topology");
  config_.validate();
  topology_->validate();
  graph_ = std::make_shared<const SkeletonGraph>(build_graph(topology_));
  RandomStream rng(seed);
  backbone_ = std::make_unique<Backbone>(graph_, config_.backbone_config(), rng);
  global_ = std::make_unique<GlobalBranch>(config_.channels.back(), config_.class_count, rng);
  dfl_ = std::make_unique<DflBranch>(config_.channels.back(), config_.class_count,
                                     config_.segment_count, config_.selected_count,
                                     config_.saliency, rng);
}

ModelForward Model::forward(const Tensor& input, const std::vector<int>* labels,
                            BranchMode branch,
                            const std::vector<std::vector<int>>* forced_selection) {
  ModelForward record;
  record.branch = branch;
  record.features = backbone_->forward(input);
  if (branch != BranchMode::kDfl) record.global_logits = global_->forward(record.features);
  if (branch != BranchMode::kGlobal) record.dfl = dfl_->forward(record.features, forced_selection);

  if (labels) {
    if (static_cast<int>(labels->size()) != input.dim(0)) {
      throw std::invalid_argument("model: need one label per sample");
    }
    for (int label : *labels) {
      if (label < 0 || label >= config_.class_count) {
        throw std::invalid_argument("model: label " + std::to_string(label) +
                                    " outside the configured " +
                                    std::to_string(config_.class_count) + " classes");
      }
    }
    const LossWeights& w = config_.loss_weights;
    if (branch != BranchMode::kDfl) {
      CrossEntropyResult ce = cross_entropy(record.global_logits, *labels);
      record.loss_global = ce.loss;
      record.global_logit_grad = ce.dlogits;
      record.loss_total += w.global * ce.loss;
    }
    if (branch != BranchMode::kGlobal) {
      record.dfl_grads = dfl_losses(record.dfl, *labels);
      record.loss_segment = record.dfl_grads.segment_loss;
      record.loss_slot = record.dfl_grads.slot_loss;
      record.loss_aggregate = record.dfl_grads.aggregate_loss;
      record.loss_total += w.segment * record.loss_segment + w.slot * record.loss_slot +
                           w.aggregate * record.loss_aggregate;
    }
    record.has_losses = true;
  }
  return record;
}

Tensor Model::backward(const ModelForward& record) {
  if (!record.has_losses) {
    throw std::logic_error("model: backward needs a forward pass with labels");
  }
  const LossWeights& w = config_.loss_weights;
  Tensor feature_grad = Tensor::zeros(record.features.shape());
  if (record.branch != BranchMode::kDfl) {
    feature_grad.add_(global_->backward(scaled(record.global_logit_grad, w.global)));
  }
  if (record.branch != BranchMode::kGlobal) {
    feature_grad.add_(dfl_->backward(scaled(record.dfl_grads.segment_logit_grad, w.segment),
                                     scaled(record.dfl_grads.slot_logit_grad, w.slot),
                                     scaled(record.dfl_grads.aggregate_grad, w.aggregate)));
  }
  return backbone_->backward(feature_grad);
}

Tensor Model::segment_feature_input_gradient(int segment_index) {
  if (segment_index < 0 || segment_index >= config_.segment_count) {
    throw std::invalid_argument("model: segment index out of range");
  }
  const std::vector<Tensor>& outputs = backbone_->block_outputs();
  if (outputs.empty()) throw std::logic_error("model: no forward pass recorded");
  const Tensor& features = outputs.back();
  Tensor map_grad =
      Tensor::zeros({features.dim(0), config_.segment_count, config_.channels.back()});
  for (int b = 0; b < features.dim(0); ++b) {
    for (int c = 0; c < config_.channels.back(); ++c) map_grad(b, segment_index, c) = 1.0;
  }
  return backbone_->backward(dfl_->segment_pool_backward(map_grad));
}

std::vector<ParamRef> Model::params(BranchMode branch) {
  std::vector<ParamRef> out;
  backbone_->collect_params("backbone.", out);
  if (branch != BranchMode::kDfl) global_->collect_params("global.", out);
  if (branch != BranchMode::kGlobal) dfl_->collect_params("dfl.", out);
  return out;
}

std::vector<StatRef> Model::stats() {
  std::vector<StatRef> out;
  backbone_->collect_stats("backbone.", out);
  return out;
}

void Model::zero_grad() {
  for (const ParamRef& p : params(BranchMode::kBoth)) p.grad->fill(0.0);
}

void Model::set_mode(Mode mode) {
  backbone_->set_mode(mode);
  global_->set_mode(mode);
}

void Model::set_stat_tracking(bool on) { backbone_->set_stat_tracking(on); }

void Model::save(const std::string& path) {
  json meta;
  meta["format"] = 1;
  meta["topology"] = topology_to_json(*topology_);
  meta["config"] = model_config_to_json(config_);
  json dir = json::array();
  for (const ParamRef& p : params(BranchMode::kBoth)) {
    dir.push_back({{"kind", "param"}, {"name", p.name}, {"shape", p.value->shape()}});
  }
  for (const StatRef& s : stats()) {
    dir.push_back({{"kind", "stat"}, {"name", s.name}, {"shape", s.value->shape()}});
  }
  meta["tensors"] = std::move(dir);
  const std::string header = meta.dump();

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error(path + ": cannot open for writing");
  out.write(kMagic, sizeof(kMagic));
  const std::uint64_t length = header.size();
  char lenbuf[8];
  for (int i = 0; i < 8; ++i) lenbuf[i] = static_cast<char>((length >> (8 * i)) & 0xff);
  out.write(lenbuf, 8);
  out.write(header.data(), static_cast<std::streamsize>(header.size()));
  auto write_tensor = [&out, &path](const Tensor& t) {
    out.write(reinterpret_cast<const char*>(t.data().data()),
              static_cast<std::streamsize>(sizeof(double) * t.data().size()));
    if (!out) throw std::runtime_error(path + ": write failed");
  };
  for (const ParamRef& p : params(BranchMode::kBoth)) write_tensor(*p.value);
  for (const StatRef& s : stats()) write_tensor(*s.value);
  if (!out) throw std::runtime_error(path + ": write failed");
}

Model Model::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error(path + ": cannot open checkpoint");
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, kMagic, 8) != 0) {
    throw std::runtime_error(path + ": not a model checkpoint (bad magic)");
  }
  char lenbuf[8];
  in.read(lenbuf, 8);
  if (!in) throw std::runtime_error(path + ": truncated checkpoint header");
  std::uint64_t length = 0;
  for (int i = 0; i < 8; ++i) {
    length |= static_cast<std::uint64_t>(static_cast<unsigned char>(lenbuf[i])) << (8 * i);
  }
  std::string header(length, '\0');
  in.read(header.data(), static_cast<std::streamsize>(length));
  if (!in) throw std::runtime_error(path + ": truncated checkpoint metadata");

  json meta;
  try {
    meta = json::parse(header);
  } catch (const json::exception& e) {
    throw std::runtime_error(path + ": bad checkpoint metadata: " + e.what());
  }
  if (meta.at("format").get<int>() != 1) {
    throw std::runtime_error(path + ": unsupported checkpoint format version");
  }
  TopologyPtr topo = topology_from_json(meta.at("topology"));
  std::vector<std::string> unknown;
  ModelConfig config = model_config_from_json(meta.at("config"), unknown);
  if (!unknown.empty()) {
    throw std::runtime_error(path + ": unknown model config key '" + unknown.front() + "'");
  }

  Model model(std::move(topo), config, 0);
  std::vector<ParamRef> params = model.params(BranchMode::kBoth);
  std::vector<StatRef> stats = model.stats();
  const json& dir = meta.at("tensors");
  if (dir.size() != params.size() + stats.size()) {
    throw std::runtime_error(path + ": checkpoint tensor directory size mismatch");
  }
  std::size_t cursor = 0;
  auto read_into = [&](const std::string& kind, const std::string& name, Tensor& value) {
    const json& entry = dir.at(cursor++);
    if (entry.at("kind").get<std::string>() != kind ||
        entry.at("name").get<std::string>() != name ||
        entry.at("shape").get<std::vector<int>>() != value.shape()) {
      throw std::runtime_error(path + ": checkpoint tensor mismatch at '" + name + "'");
    }
    in.read(reinterpret_cast<char*>(value.data().data()),
            static_cast<std::streamsize>(sizeof(double) * value.data().size()));
    if (!in) throw std::runtime_error(path + ": truncated checkpoint payload at '" + name + "'");
  };
  for (const ParamRef& p : params) read_into("param", p.name, *p.value);
  for (const StatRef& s : stats) read_into("stat", s.name, *s.value);
  char extra;
  if (in.read(&extra, 1)) {
    throw std::runtime_error(path + ": trailing bytes after checkpoint payload");
  }
  return model;
}

}  // namespace skelact
